import { describe, expect, it } from "vitest";

import {
  checkRealTranslation,
  checkSynTranslation,
  clampAngle,
  clampScale,
  legalKinds,
  scaleInterval,
} from "../src/bounds.js";
import type { InstanceAnnotation } from "../src/types.js";

const annotation: InstanceAnnotation = {
  instance_id: "obj0",
  bbox_px: [10, 10, 30, 30],
  bbox_px_full: [10, 10, 30, 30],
  centroid_px: [20, 20],
  visible_fraction: 1,
  depth_rank: 0,
  scale_factor: 1,
  depth: 100,
};

describe("legal kinds", () => {
  it("realistic sessions expose translate and scale only", () => {
    expect(legalKinds("real")).toEqual(["T", "S"]);
  });
  it("synthetic sessions expose all five kinds", () => {
    expect(legalKinds("syn")).toEqual(["T", "S", "X", "Y", "Z"]);
  });
});

describe("scale clamping", () => {
  it("keeps the cumulative factor inside [0.2, 4]", () => {
    expect(scaleInterval(1, "real")).toEqual([0.2, 4]);
    expect(scaleInterval(4, "real")[1]).toBeCloseTo(1, 12);
    expect(scaleInterval(0.2, "real")[0]).toBeCloseTo(1, 12);
  });
  it("synthetic steps are additionally bounded in [0.2, 4]", () => {
    expect(scaleInterval(0.2, "syn")).toEqual([1, 4]);
    expect(scaleInterval(4, "syn")).toEqual([0.2, 1]);
  });
  it("clamp lands on the interval edges", () => {
    expect(clampScale(100, 1, "real")).toBe(4);
    expect(clampScale(0.001, 1, "real")).toBe(0.2);
    expect(clampScale(1.5, 1, "real")).toBe(1.5);
  });
});

describe("angle clamping", () => {
  it("uses the per-axis bounds", () => {
    expect(clampAngle(90, "X")).toBe(50);
    expect(clampAngle(-90, "Y")).toBe(-45);
    expect(clampAngle(59, "Z")).toBe(59);
  });
});

describe("realistic translation checks", () => {
  const canvas: [number, number] = [100, 100];

  it("accepts an in-bound move", () => {
    expect(checkRealTranslation(10, -5, 3, annotation, canvas).ok).toBe(true);
  });
  it("rejects per-step offsets beyond 0.6 * shortest side", () => {
    expect(checkRealTranslation(61, 0, 0, annotation, canvas).ok).toBe(false);
  });
  it("rejects depth steps beyond 30", () => {
    expect(checkRealTranslation(0, 0, 31, annotation, canvas).ok).toBe(false);
  });
  it("rejects depth leaving its range", () => {
    const deep = { ...annotation, depth: 190 };
    expect(checkRealTranslation(0, 0, 20, deep, canvas).ok).toBe(false);
  });
  it("rejects moves pushing the center off canvas", () => {
    expect(checkRealTranslation(-21, 0, 0, annotation, canvas).ok).toBe(false);
  });
});

describe("synthetic translation checks", () => {
  it("accepts moves inside the ground disk", () => {
    expect(checkSynTranslation(2, -3).ok).toBe(true);
  });
  it("rejects moves beyond the 0.6 * extent radius", () => {
    expect(checkSynTranslation(5, 4).ok).toBe(false);
  });
});
