/** Typed REST client for the session service.  Every call resolves to the
 * parsed payload or throws an ApiError carrying the server's {code, message}
 * body, so the UI can render rejections instead of dropping them. */

import type {
  ApiErrorBody,
  AssetIndex,
  CreateSessionRequest,
  ExportResponse,
  HistoryResponse,
  OpApplied,
  OpRequest,
  SessionCreated,
} from "./types.js";

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.code = body.code;
    this.status = status;
  }
}

async function parseError(resp: Response): Promise<never> {
  let body: ApiErrorBody = { code: `Http${resp.status}`, message: resp.statusText };
  try {
    const parsed = (await resp.json()) as Partial<ApiErrorBody>;
    if (parsed && typeof parsed.code === "string") {
      body = { code: parsed.code, message: parsed.message ?? "" };
    }
  } catch {
    /* non-JSON error body; keep the HTTP fallback */
  }
  throw new ApiError(resp.status, body);
}

export class SessionApi {
  constructor(readonly baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}/api/v1${path}`;
  }

  private async getJson<T>(path: string): Promise<T> {
    const resp = await fetch(this.url(path));
    if (!resp.ok) await parseError(resp);
    return (await resp.json()) as T;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const resp = await fetch(this.url(path), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) await parseError(resp);
    return (await resp.json()) as T;
  }

  getAssets(): Promise<AssetIndex> {
    return this.getJson("/assets");
  }

  createSession(req: CreateSessionRequest): Promise<SessionCreated> {
    return this.postJson("/session", req);
  }

  submitOp(sessionId: string, op: OpRequest): Promise<OpApplied> {
    return this.postJson(`/session/${sessionId}/op`, op);
  }

  getHistory(sessionId: string): Promise<HistoryResponse> {
    return this.getJson(`/session/${sessionId}/history`);
  }

  exportSession(sessionId: string, outName: string): Promise<ExportResponse> {
    return this.postJson(`/session/${sessionId}/export`, { out_name: outName });
  }

  async deleteSession(sessionId: string): Promise<void> {
    const resp = await fetch(this.url(`/session/${sessionId}`), { method: "DELETE" });
    if (!resp.ok && resp.status !== 204) await parseError(resp);
  }

  /** Absolute URL of a frame resource; the canvas always renders from here
   * so the server stays the single source of truth. */
  frameUrl(relative: string): string {
    return `${this.baseUrl}${relative}`;
  }

  async fetchFrameBytes(relative: string): Promise<Uint8Array> {
    const resp = await fetch(this.frameUrl(relative));
    if (!resp.ok) await parseError(resp);
    return new Uint8Array(await resp.arrayBuffer());
  }
}
