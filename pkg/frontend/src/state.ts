/** Pure view state.  The view is a fold over events (API responses plus UI
 * intents): replaying the same events always rebuilds the same view, which
 * is what the store tests assert. */

import type {
  AnnotationMap,
  AssetEntry,
  Domain,
  ExportResponse,
  HistoryResponse,
  OpApplied,
  OperationRecordJson,
  OpKind,
  SessionCreated,
} from "./types.js";

export interface TimelineEntry {
  round: number;
  opSummary: string;
  frameUrl: string;
}

export interface UiSessionView {
  assets: AssetEntry[];
  sessionId: string | null;
  domain: Domain | null;
  canvas: [number, number] | null;
  round: number;
  focusedRound: number;
  timeline: TimelineEntry[];
  annotationsByRound: AnnotationMap[];
  selectedInstance: string | null;
  inFlight: boolean;
  lastError: { code: string; message: string } | null;
  history: OperationRecordJson[];
  exportPath: string | null;
}

export type ViewEvent =
  | { type: "assets_loaded"; assets: AssetEntry[] }
  | { type: "session_created"; response: SessionCreated }
  | { type: "op_submitted" }
  | {
      type: "op_applied";
      response: OpApplied;
      kind: OpKind;
      instanceId: string;
      value: number | number[];
    }
  | { type: "op_rejected"; code: string; message: string }
  | { type: "instance_selected"; instanceId: string | null }
  | { type: "round_focused"; round: number }
  | { type: "history_loaded"; response: HistoryResponse }
  | { type: "export_done"; response: ExportResponse }
  | { type: "export_failed"; code: string; message: string }
  | { type: "session_closed" };

export function initialView(): UiSessionView {
  return {
    assets: [],
    sessionId: null,
    domain: null,
    canvas: null,
    round: 0,
    focusedRound: 0,
    timeline: [],
    annotationsByRound: [],
    selectedInstance: null,
    inFlight: false,
    lastError: null,
    history: [],
    exportPath: null,
  };
}

export function opSummary(kind: OpKind, instanceId: string,
                          value: number | number[]): string {
  const fmt = (v: number) => (Number.isInteger(v) ? String(v) : v.toFixed(2));
  const rendered = Array.isArray(value) ? `(${value.map(fmt).join(", ")})` : fmt(value);
  return `${kind} ${instanceId} ${rendered}`;
}

export function reduce(view: UiSessionView, event: ViewEvent): UiSessionView {
  switch (event.type) {
    case "assets_loaded":
      return { ...view, assets: event.assets };
    case "session_created": {
      const r = event.response;
      return {
        ...initialView(),
        assets: view.assets,
        sessionId: r.session_id,
        domain: r.domain,
        canvas: r.canvas,
        round: r.round,
        focusedRound: r.round,
        timeline: [{ round: 0, opSummary: "source", frameUrl: r.frame_url }],
        annotationsByRound: [r.annotations],
      };
    }
    case "op_submitted":
      return { ...view, inFlight: true, lastError: null };
    case "op_applied": {
      const r = event.response;
      return {
        ...view,
        inFlight: false,
        lastError: null,
        round: r.round,
        focusedRound: r.round,
        timeline: [
          ...view.timeline,
          {
            round: r.round,
            opSummary: opSummary(event.kind, event.instanceId, event.value),
            frameUrl: r.frame_url,
          },
        ],
        annotationsByRound: [...view.annotationsByRound, r.annotations],
      };
    }
    case "op_rejected":
      return {
        ...view,
        inFlight: false,
        lastError: { code: event.code, message: event.message },
      };
    case "instance_selected":
      return { ...view, selectedInstance: event.instanceId };
    case "round_focused": {
      const round = Math.max(0, Math.min(event.round, view.round));
      return { ...view, focusedRound: round };
    }
    case "history_loaded":
      return { ...view, history: event.response.rounds };
    case "export_done":
      return { ...view, exportPath: event.response.manifest_path };
    case "export_failed":
      return {
        ...view,
        lastError: { code: event.code, message: event.message },
      };
    case "session_closed":
      return { ...initialView(), assets: view.assets };
  }
}

export function replay(events: ViewEvent[]): UiSessionView {
  return events.reduce(reduce, initialView());
}

/** Annotations backing the focused round's frame. */
export function focusedAnnotations(view: UiSessionView): AnnotationMap {
  return view.annotationsByRound[view.focusedRound] ?? {};
}

export function focusedFrameUrl(view: UiSessionView): string | null {
  return view.timeline[view.focusedRound]?.frameUrl ?? null;
}

/** The record that produced the focused round (undefined for round 0). */
export function focusedRecord(view: UiSessionView): OperationRecordJson | undefined {
  if (view.focusedRound === 0) return undefined;
  return view.history.find((r) => r.round === view.focusedRound - 1);
}
