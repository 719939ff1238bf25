/** Client-side mirror of server state.
 *
 * The store only copies API payloads; every field the UI shows comes from the
 * server verbatim (no client-side stress classification, gating or
 * re-binning). Reload therefore reconstructs the exact same state from GETs.
 */

import type {
  ChatMessage,
  ChatResponse,
  HistoryResponse,
  Intervention,
  LatencyEntry,
  RoutinePayload,
} from "./types.js";

export interface AppState {
  conversationId: string | null;
  messages: ChatMessage[];
  tone: string | null;
  turn: number;
  composeDraft: string;
  banner: string | null;
  pendingDecisions: Set<string>;
  interventionOrder: string[];
  interventions: Map<string, Intervention>;
  routine: RoutinePayload | null;
  latency: LatencyEntry[];
}

export function initialState(): AppState {
  return {
    conversationId: null,
    messages: [],
    tone: null,
    turn: 0,
    composeDraft: "",
    banner: null,
    pendingDecisions: new Set(),
    interventionOrder: [],
    interventions: new Map(),
    routine: null,
    latency: [],
  };
}

export function applyChatResponse(state: AppState, sent: string, resp: ChatResponse): void {
  state.conversationId = resp.conversation_id;
  state.messages.push({ role: "user", text: sent, ts_ms: 0 });
  state.messages.push({ role: "assistant", text: resp.reply, ts_ms: 0 });
  state.tone = resp.tone;
  state.turn = resp.turn;
  state.composeDraft = "";
  state.banner = null;
}

export function applyHistory(state: AppState, history: HistoryResponse): void {
  state.conversationId = history.conversation_id;
  state.messages = [...history.messages];
  state.tone = history.tone;
  state.turn = history.turn;
}

/** Server object wins wholesale; local state never edits an intervention. */
export function upsertIntervention(state: AppState, iv: Intervention): void {
  if (!state.interventions.has(iv.id)) {
    state.interventionOrder.push(iv.id);
  }
  state.interventions.set(iv.id, iv);
}

export function setInterventions(state: AppState, items: Intervention[]): void {
  state.interventionOrder = items.map((iv) => iv.id);
  state.interventions = new Map(items.map((iv) => [iv.id, iv]));
}

export function listInterventions(state: AppState): Intervention[] {
  return state.interventionOrder
    .map((id) => state.interventions.get(id))
    .filter((iv): iv is Intervention => iv !== undefined);
}

export function isDecidable(state: AppState, iv: Intervention): boolean {
  return iv.status === "delivered" && !state.pendingDecisions.has(iv.id);
}
