// Typed client for the editing service. Every image travels as base64 PNG;
// the client never re-encodes pixels, so what the UI shows is exactly what
// the server rendered.

export interface SessionResponse {
  session_id: string;
  seed: number;
  image: string;
}

export interface EditResponse {
  image: string;
  stack_depth: number;
}

export interface DirectionInfo {
  name: string;
  part: string;
  layer_range: [number, number];
  final_score: number;
}

export interface CalibrationResponse {
  alpha_neg: number;
  alpha_pos: number;
}

export interface SessionExport {
  format_version: number;
  session_id: string;
  backend_fingerprint: string;
  base_code: string;
  edits: { direction: string; alpha: number }[];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(`${base}${path}`, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  const body = await res.json();
  if (!res.ok) {
    throw new ApiError(res.status, body.code ?? "Unknown", body.message ?? res.statusText);
  }
  return body as T;
}

export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  createSession(seed?: number): Promise<SessionResponse> {
    return request(this.baseUrl, "/sessions", {
      method: "POST",
      body: JSON.stringify(seed === undefined ? {} : { seed }),
    });
  }

  listDirections(): Promise<{ directions: DirectionInfo[] }> {
    return request(this.baseUrl, "/directions");
  }

  pushEdit(sessionId: string, direction: string, alpha: number): Promise<EditResponse> {
    return request(this.baseUrl, `/sessions/${sessionId}/edits`, {
      method: "POST",
      body: JSON.stringify({ direction, alpha }),
    });
  }

  popEdit(sessionId: string): Promise<EditResponse> {
    return request(this.baseUrl, `/sessions/${sessionId}/edits`, { method: "DELETE" });
  }

  calibrate(sessionId: string, direction: string, distance: number): Promise<CalibrationResponse> {
    return request(this.baseUrl, `/sessions/${sessionId}/calibrate`, {
      method: "POST",
      body: JSON.stringify({ direction, distance }),
    });
  }

  exportSession(sessionId: string): Promise<SessionExport> {
    return request(this.baseUrl, `/sessions/${sessionId}`);
  }
}
