/** Client-side operation bounds, mirroring the engine's sampling rules.
 * The server remains the authority: these checks only keep the UI from
 * sending requests it already knows will be rejected. */

import type { Domain, InstanceAnnotation, OpKind } from "./types.js";

export const SCALE_MIN = 0.2;
export const SCALE_MAX = 4.0;
export const DEPTH_MIN = 10;
export const DEPTH_MAX = 200;
export const DEPTH_STEP_MAX = 30;
export const CENTER_STEP_FRAC = 0.6;
export const GROUND_EXTENT = 10;
export const ANGLE_BOUNDS: Record<"X" | "Y" | "Z", number> = { X: 50, Y: 45, Z: 60 };

export function legalKinds(domain: Domain): OpKind[] {
  return domain === "real" ? ["T", "S"] : ["T", "S", "X", "Y", "Z"];
}

/** Feasible per-step scale multiplier interval for an object at factor f:
 * keeps the cumulative factor in [0.2, 4]; synthetic steps are additionally
 * bounded in [0.2, 4] themselves. */
export function scaleInterval(current: number, domain: Domain): [number, number] {
  let lo = SCALE_MIN / current;
  let hi = SCALE_MAX / current;
  if (domain === "syn") {
    lo = Math.max(lo, SCALE_MIN);
    hi = Math.min(hi, SCALE_MAX);
  }
  return [lo, hi];
}

export function clampScale(value: number, current: number, domain: Domain): number {
  const [lo, hi] = scaleInterval(current, domain);
  return Math.min(Math.max(value, lo), hi);
}

export function clampAngle(value: number, axis: "X" | "Y" | "Z"): number {
  const bound = ANGLE_BOUNDS[axis];
  return Math.min(Math.max(value, -bound), bound);
}

export interface TranslationCheck {
  ok: boolean;
  reason?: string;
}

/** Realistic-domain translation: per-axis step bound, depth step and depth
 * range, and the object's center must stay on the canvas. */
export function checkRealTranslation(
  dx: number,
  dy: number,
  dd: number,
  annotation: InstanceAnnotation,
  canvas: [number, number],
): TranslationCheck {
  const l = Math.min(canvas[0], canvas[1]);
  const step = CENTER_STEP_FRAC * l;
  if (Math.abs(dx) > step || Math.abs(dy) > step) {
    return { ok: false, reason: `per-step offset exceeds ${step.toFixed(1)}px` };
  }
  if (Math.abs(dd) > DEPTH_STEP_MAX) {
    return { ok: false, reason: `depth step exceeds ${DEPTH_STEP_MAX}` };
  }
  const depth = annotation.depth ?? NaN;
  if (!Number.isNaN(depth) && (depth + dd < DEPTH_MIN || depth + dd > DEPTH_MAX)) {
    return { ok: false, reason: `depth leaves [${DEPTH_MIN}, ${DEPTH_MAX}]` };
  }
  const [cx, cy] = annotation.centroid_px;
  const nx = cx + dx;
  const ny = cy + dy;
  if (nx < 0 || nx > canvas[0] || ny < 0 || ny > canvas[1]) {
    return { ok: false, reason: "object center would leave the canvas" };
  }
  return { ok: true };
}

export function checkSynTranslation(dx: number, dz: number): TranslationCheck {
  const radius = CENTER_STEP_FRAC * GROUND_EXTENT;
  if (Math.hypot(dx, dz) > radius) {
    return { ok: false, reason: `ground step exceeds radius ${radius.toFixed(1)}` };
  }
  return { ok: true };
}
