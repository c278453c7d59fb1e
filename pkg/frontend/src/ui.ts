/** DOM wiring: renders the view after every event and maps user gestures to
 * API calls.  No client-side compositing: the canvas is always the frame the
 * server returned for the focused round. */

import { ApiError, SessionApi } from "./api.js";
import {
  ANGLE_BOUNDS,
  checkRealTranslation,
  checkSynTranslation,
  clampScale,
  legalKinds,
  scaleInterval,
} from "./bounds.js";
import {
  focusedAnnotations,
  focusedFrameUrl,
  focusedRecord,
  initialView,
  reduce,
  UiSessionView,
  ViewEvent,
} from "./state.js";
import type { InstanceAnnotation, ObjectSpec, OpKind } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export class App {
  private view: UiSessionView = initialView();
  private drag: { x: number; y: number } | null = null;

  constructor(private api: SessionApi) {}

  dispatch(event: ViewEvent): void {
    this.view = reduce(this.view, event);
    this.render();
  }

  async start(): Promise<void> {
    const index = await this.api.getAssets();
    this.dispatch({ type: "assets_loaded", assets: index.assets });
    this.bind();
  }

  private bind(): void {
    el<HTMLButtonElement>("create-session").addEventListener("click", () => {
      void this.createSession();
    });
    el<HTMLButtonElement>("apply-op").addEventListener("click", () => {
      void this.applyFormOp();
    });
    el<HTMLButtonElement>("export-session").addEventListener("click", () => {
      void this.exportSession();
    });
    const frame = el<HTMLDivElement>("frame-wrap");
    frame.addEventListener("mousedown", (ev) => this.onPointerDown(ev));
    window.addEventListener("mouseup", (ev) => {
      void this.onPointerUp(ev);
    });
    el<HTMLSelectElement>("op-kind").addEventListener("change", () => this.render());
  }

  // -- scene builder ---------------------------------------------------------

  private async createSession(): Promise<void> {
    const background = el<HTMLSelectElement>("background-select").value;
    const picks = Array.from(
      document.querySelectorAll<HTMLInputElement>("#object-list input:checked"),
    ).map((n) => n.value);
    if (picks.length === 0) {
      this.dispatch({ type: "op_rejected", code: "ClientCheck",
                      message: "pick at least one object" });
      return;
    }
    const objects: ObjectSpec[] = picks.map((asset_id) => ({ asset_id }));
    const canvasSide = Number(el<HTMLInputElement>("canvas-side").value) || 512;
    try {
      const created = await this.api.createSession({
        background_id: background || undefined,
        objects,
        canvas: [canvasSide, canvasSide],
      });
      this.dispatch({ type: "session_created", response: created });
    } catch (err) {
      this.reportError(err);
    }
  }

  // -- op composer -----------------------------------------------------------

  private onPointerDown(ev: MouseEvent): void {
    if (!this.view.sessionId || this.view.inFlight) return;
    const pos = this.framePosition(ev);
    if (!pos) return;
    const hit = this.hitTest(pos.x, pos.y);
    if (hit) {
      this.dispatch({ type: "instance_selected", instanceId: hit.instance_id });
      if (this.view.domain === "real") this.drag = pos;
    }
  }

  private async onPointerUp(ev: MouseEvent): Promise<void> {
    if (!this.drag || this.view.domain !== "real") {
      this.drag = null;
      return;
    }
    const start = this.drag;
    this.drag = null;
    const pos = this.framePosition(ev);
    const selected = this.view.selectedInstance;
    if (!pos || !selected) return;
    const dx = Math.round(pos.x - start.x);
    const dy = Math.round(pos.y - start.y);
    const dd = Number(el<HTMLInputElement>("depth-step").value) || 0;
    if (dx === 0 && dy === 0 && dd === 0) return; // zero drag sends nothing
    await this.submit(selected, "T", [dx, dy, dd]);
  }

  private async applyFormOp(): Promise<void> {
    const selected = this.view.selectedInstance;
    if (!selected || !this.view.domain) return;
    const kind = el<HTMLSelectElement>("op-kind").value as OpKind;
    if (kind === "T" && this.view.domain === "syn") {
      const dx = Number(el<HTMLInputElement>("ground-dx").value) || 0;
      const dz = Number(el<HTMLInputElement>("ground-dz").value) || 0;
      if (dx === 0 && dz === 0) return;
      await this.submit(selected, "T", [dx, dz]);
    } else if (kind === "T") {
      const dd = Number(el<HTMLInputElement>("depth-step").value) || 0;
      await this.submit(selected, "T", [0, 0, dd]);
    } else if (kind === "S") {
      const raw = Number(el<HTMLInputElement>("scale-mult").value) || 1;
      const current = this.selectedAnnotation()?.scale_factor ?? 1;
      await this.submit(selected, "S", clampScale(raw, current, this.view.domain));
    } else {
      const raw = Number(el<HTMLInputElement>("angle-value").value) || 0;
      const bound = ANGLE_BOUNDS[kind];
      await this.submit(selected, kind,
                        Math.min(Math.max(raw, -bound), bound));
    }
  }

  private async submit(instanceId: string, kind: OpKind,
                       value: number | number[]): Promise<void> {
    const view = this.view;
    if (view.inFlight || !view.sessionId || !view.canvas) return;
    const annotation = this.selectedAnnotation();
    if (kind === "T" && view.domain === "real" && annotation) {
      const [dx, dy, dd] = value as number[];
      const check = checkRealTranslation(dx, dy, dd, annotation, view.canvas);
      if (!check.ok) {
        this.dispatch({ type: "op_rejected", code: "ClientCheck",
                        message: check.reason ?? "rejected" });
        return;
      }
    }
    if (kind === "T" && view.domain === "syn") {
      const [dx, dz] = value as number[];
      const check = checkSynTranslation(dx, dz);
      if (!check.ok) {
        this.dispatch({ type: "op_rejected", code: "ClientCheck",
                        message: check.reason ?? "rejected" });
        return;
      }
    }
    this.dispatch({ type: "op_submitted" });
    try {
      const applied = await this.api.submitOp(view.sessionId, {
        instance_id: instanceId, kind, value,
      });
      this.dispatch({ type: "op_applied", response: applied, kind,
                      instanceId, value });
      const history = await this.api.getHistory(view.sessionId);
      this.dispatch({ type: "history_loaded", response: history });
    } catch (err) {
      this.reportError(err);
    }
  }

  // -- timeline & export -------------------------------------------------------

  private async exportSession(): Promise<void> {
    if (!this.view.sessionId) return;
    const name = el<HTMLInputElement>("export-name").value || "ui-session";
    try {
      const done = await this.api.exportSession(this.view.sessionId, name);
      this.dispatch({ type: "export_done", response: done });
    } catch (err) {
      if (err instanceof ApiError) {
        this.dispatch({ type: "export_failed", code: err.code, message: err.message });
      } else {
        throw err;
      }
    }
  }

  // -- helpers ----------------------------------------------------------------

  private reportError(err: unknown): void {
    if (err instanceof ApiError) {
      this.dispatch({ type: "op_rejected", code: err.code, message: err.message });
    } else {
      this.dispatch({ type: "op_rejected", code: "NetworkError", message: String(err) });
    }
  }

  private framePosition(ev: MouseEvent): { x: number; y: number } | null {
    const img = el<HTMLImageElement>("frame-img");
    const rect = img.getBoundingClientRect();
    if (rect.width === 0) return null;
    const x = ev.clientX - rect.left;
    const y = ev.clientY - rect.top;
    if (x < 0 || y < 0 || x > rect.width || y > rect.height) return null;
    return { x, y };
  }

  private hitTest(x: number, y: number): InstanceAnnotation | null {
    const annotations = Object.values(focusedAnnotations(this.view));
    const hits = annotations.filter((a) => {
      const [x0, y0, x1, y1] = a.bbox_px;
      return x >= x0 && x <= x1 && y >= y0 && y <= y1;
    });
    if (hits.length === 0) return null;
    hits.sort((a, b) => b.depth_rank - a.depth_rank); // nearest wins the click
    return hits[0];
  }

  private selectedAnnotation(): InstanceAnnotation | null {
    const id = this.view.selectedInstance;
    if (!id) return null;
    return focusedAnnotations(this.view)[id] ?? null;
  }

  // -- rendering ---------------------------------------------------------------

  render(): void {
    const view = this.view;
    this.renderBuilder(view);
    this.renderFrame(view);
    this.renderComposer(view);
    this.renderTimeline(view);
    el<HTMLDivElement>("error-box").textContent = view.lastError
      ? `${view.lastError.code}: ${view.lastError.message}`
      : "";
    const exportBox = el<HTMLDivElement>("export-result");
    exportBox.textContent = view.exportPath ? `exported: ${view.exportPath}` : "";
  }

  private renderBuilder(view: UiSessionView): void {
    const backgrounds = view.assets.filter(
      (a) => a.kind === "layer2d" && a.tags.includes("background"),
    );
    const objects = view.assets.filter(
      (a) => !(a.kind === "layer2d" && a.tags.includes("background")),
    );
    const bgSelect = el<HTMLSelectElement>("background-select");
    if (bgSelect.options.length !== backgrounds.length) {
      bgSelect.innerHTML = backgrounds
        .map((a) => `<option value="${a.id}">${a.id}</option>`)
        .join("");
    }
    const list = el<HTMLDivElement>("object-list");
    if (list.childElementCount !== objects.length) {
      list.innerHTML = objects
        .map(
          (a) =>
            `<label><input type="checkbox" value="${a.id}"> ${a.id} ` +
            `<small>(${a.kind})</small></label>`,
        )
        .join("");
    }
  }

  private renderFrame(view: UiSessionView): void {
    const img = el<HTMLImageElement>("frame-img");
    const url = focusedFrameUrl(view);
    const src = url ? this.api.frameUrl(url) : "";
    if (img.getAttribute("src") !== src) img.setAttribute("src", src);
    const overlay = el<HTMLDivElement>("overlay");
    overlay.innerHTML = "";
    for (const ann of Object.values(focusedAnnotations(view))) {
      const [x0, y0, x1, y1] = ann.bbox_px;
      const box = document.createElement("div");
      box.className =
        "bbox" + (ann.instance_id === view.selectedInstance ? " selected" : "");
      box.style.left = `${x0}px`;
      box.style.top = `${y0}px`;
      box.style.width = `${x1 - x0}px`;
      box.style.height = `${y1 - y0}px`;
      box.title = ann.instance_id;
      overlay.appendChild(box);
    }
  }

  private renderComposer(view: UiSessionView): void {
    const composer = el<HTMLDivElement>("composer");
    composer.style.display = view.sessionId ? "block" : "none";
    if (!view.sessionId || !view.domain) return;
    const kinds = legalKinds(view.domain);
    const kindSelect = el<HTMLSelectElement>("op-kind");
    const options = Array.from(kindSelect.options).map((o) => o.value);
    if (options.join() !== kinds.join()) {
      // rotation controls disappear entirely for realistic sessions
      kindSelect.innerHTML = kinds
        .map((k) => `<option value="${k}">${k}</option>`)
        .join("");
    }
    const kind = kindSelect.value as OpKind;
    el<HTMLDivElement>("t-real-controls").style.display =
      view.domain === "real" && kind === "T" ? "block" : "none";
    el<HTMLDivElement>("t-syn-controls").style.display =
      view.domain === "syn" && kind === "T" ? "block" : "none";
    el<HTMLDivElement>("s-controls").style.display = kind === "S" ? "block" : "none";
    el<HTMLDivElement>("angle-controls").style.display =
      kind === "X" || kind === "Y" || kind === "Z" ? "block" : "none";

    const annotation = this.selectedAnnotation();
    el<HTMLSpanElement>("selected-readout").textContent = annotation
      ? `${annotation.instance_id} (scale ${annotation.scale_factor.toFixed(2)}` +
        (annotation.depth != null ? `, depth ${annotation.depth.toFixed(0)})` : ")")
      : "none (click an object)";
    if (annotation && kind === "S") {
      const [lo, hi] = scaleInterval(annotation.scale_factor, view.domain);
      const slider = el<HTMLInputElement>("scale-mult");
      slider.min = lo.toFixed(3);
      slider.max = hi.toFixed(3);
      el<HTMLSpanElement>("scale-range").textContent =
        `[${lo.toFixed(2)}, ${hi.toFixed(2)}]`;
    }
    if (kind === "X" || kind === "Y" || kind === "Z") {
      const bound = ANGLE_BOUNDS[kind];
      const slider = el<HTMLInputElement>("angle-value");
      slider.min = String(-bound);
      slider.max = String(bound);
      el<HTMLSpanElement>("angle-range").textContent = `[-${bound}, ${bound}]`;
    }
    el<HTMLButtonElement>("apply-op").disabled = view.inFlight || !annotation;
    el<HTMLButtonElement>("export-session").disabled =
      view.inFlight || view.round === 0;
  }

  private renderTimeline(view: UiSessionView): void {
    const strip = el<HTMLDivElement>("timeline");
    strip.innerHTML = "";
    for (const entry of view.timeline) {
      const cell = document.createElement("div");
      cell.className =
        "timeline-entry" + (entry.round === view.focusedRound ? " focused" : "");
      const thumb = document.createElement("img");
      thumb.src = this.api.frameUrl(entry.frameUrl);
      thumb.width = 72;
      const label = document.createElement("div");
      label.textContent = `r${entry.round}: ${entry.opSummary}`;
      cell.append(thumb, label);
      cell.addEventListener("click", () => {
        this.dispatch({ type: "round_focused", round: entry.round });
      });
      strip.appendChild(cell);
    }
    const record = focusedRecord(view);
    el<HTMLPreElement>("record-detail").textContent = record
      ? JSON.stringify(record, null, 2)
      : view.focusedRound === 0 && view.sessionId
        ? "round 0: source image (no operation)"
        : "";
  }
}
