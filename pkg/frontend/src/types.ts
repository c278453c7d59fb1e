/** Wire types for the scenedit session API (prefix /api/v1). */

export type Domain = "real" | "syn";
export type OpKind = "T" | "S" | "X" | "Y" | "Z";

export interface AssetEntry {
  id: string;
  kind: "layer2d" | "box3d";
  tags: string[];
  extent?: [number, number, number];
}

export interface AssetIndex {
  schema_version: number;
  assets: AssetEntry[];
}

export interface InstanceAnnotation {
  instance_id: string;
  bbox_px: [number, number, number, number];
  bbox_px_full: [number, number, number, number];
  centroid_px: [number, number];
  visible_fraction: number;
  depth_rank: number;
  scale_factor: number;
  depth?: number;
}

export type AnnotationMap = Record<string, InstanceAnnotation>;

export interface SessionCreated {
  session_id: string;
  frame_url: string;
  domain: Domain;
  round: number;
  canvas: [number, number];
  annotations: AnnotationMap;
}

export interface OpApplied {
  round: number;
  frame_url: string;
  annotations: AnnotationMap;
}

export interface OperationRecordJson {
  round: number;
  op: { instance_id: string; kind: OpKind; value: number | number[] };
  source_centroid: [number, number];
  source_bbox: [number, number, number, number];
  target_bbox: [number, number, number, number];
}

export interface HistoryResponse {
  rounds: OperationRecordJson[];
}

export interface ExportResponse {
  manifest_path: string;
}

export interface ApiErrorBody {
  code: string;
  message: string;
}

export interface ObjectSpec {
  asset_id: string;
  init?: {
    center_px?: [number, number];
    depth?: number;
    position?: [number, number, number];
    rotation_deg?: [number, number, number];
    scale_factor?: number;
  };
}

export interface CreateSessionRequest {
  background_id?: string;
  objects: ObjectSpec[];
  canvas?: [number, number];
  N?: number;
}

export interface OpRequest {
  instance_id: string;
  kind: OpKind;
  value: number | number[];
  target_bbox?: [number, number, number, number];
}
