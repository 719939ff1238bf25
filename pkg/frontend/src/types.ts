/** Payload shapes mirroring the service API; the UI adds nothing to them. */

export interface ChatResponse {
  conversation_id: string;
  reply: string;
  tone: string;
  turn: number;
}

export interface ChatMessage {
  role: string;
  text: string;
  ts_ms: number;
}

export interface HistoryResponse {
  conversation_id: string;
  messages: ChatMessage[];
  turn: number;
  tone: string;
}

export interface Intervention {
  id: string;
  created_at_ms: number;
  analysis: string;
  immediate_action: string;
  follow_up: string;
  task_improvement: string | null;
  status: string;
  blocked_reason: string | null;
  delivered_at_ms: number | null;
  decided_at_ms: number | null;
}

export interface RoutineRow {
  start_ms: number;
  end_ms: number;
  label: string;
  minutes: Record<string, number>;
  pnn50: number | null;
  mean_hr: number | null;
  steps: number;
  stress: string | null;
}

export interface RoutinePayload {
  session_start: string;
  row_minutes: number;
  rows: RoutineRow[];
}

export interface LatencyEntry {
  kind: string;
  model_id: string;
  count: number;
  mean_s: number;
  max_s: number;
}

export interface ApiErrorBody {
  error: { code: string; message: string };
}
