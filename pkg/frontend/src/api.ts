/** Typed client for the engine's HTTP API; the only data source of the UI. */

import type {
  ChatResponse,
  HistoryResponse,
  Intervention,
  LatencyEntry,
  RoutinePayload,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  try {
    const body = await resp.json();
    return new ApiError(resp.status, body.error.code, body.error.message);
  } catch {
    return new ApiError(resp.status, "http_error", `HTTP ${resp.status}`);
  }
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private async get<T>(path: string): Promise<T> {
    const resp = await fetch(this.baseUrl + path);
    if (!resp.ok) throw await parseError(resp);
    return resp.json() as Promise<T>;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) throw await parseError(resp);
    return resp.json() as Promise<T>;
  }

  postChat(message: string, conversationId: string | null): Promise<ChatResponse> {
    const body: Record<string, string> = { message };
    if (conversationId) body.conversation_id = conversationId;
    return this.post<ChatResponse>("/chat", body);
  }

  getHistory(conversationId: string): Promise<HistoryResponse> {
    return this.get<HistoryResponse>(`/chat/${conversationId}/history`);
  }

  getInterventions(): Promise<Intervention[]> {
    return this.get<Intervention[]>("/interventions");
  }

  postDecision(id: string, decision: "accepted" | "rejected"): Promise<Intervention> {
    return this.post<Intervention>(`/interventions/${id}/decision`, { decision });
  }

  getRoutine(): Promise<RoutinePayload> {
    return this.get<RoutinePayload>("/routine");
  }

  getLatency(): Promise<LatencyEntry[]> {
    return this.get<LatencyEntry[]>("/stats/latency");
  }
}
