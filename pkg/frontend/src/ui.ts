/** DOM rendering. Pure functions of the store state plus an actions object;
 * no domain decisions are made here, only display of server fields. */

import {
  AppState,
  isDecidable,
  listInterventions,
} from "./store.js";
import type { Intervention, RoutineRow } from "./types.js";

export interface Actions {
  sendChat: (message: string) => void;
  decide: (id: string, decision: "accepted" | "rejected") => void;
  setDraft: (text: string) => void;
}

const ACTIVITY_ORDER = ["desk_work", "commuting", "eating", "in_meeting", "other"];

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function toneBadge(tone: string | null): HTMLElement {
  const badge = el("span", `tone-badge tone-${tone ?? "unknown"}`,
                   tone ? tone.replace(/_/g, " ") : "no tone yet");
  badge.setAttribute("data-testid", "tone-badge");
  return badge;
}

function renderChat(state: AppState, actions: Actions): HTMLElement {
  const pane = el("section", "chat-pane");
  pane.id = "chat";
  const header = el("header");
  header.append(el("h2", undefined, "Chat"), toneBadge(state.tone));
  pane.append(header);

  if (state.banner) {
    const banner = el("div", "banner", state.banner);
    banner.setAttribute("data-testid", "banner");
    const retry = el("button", "retry", "Retry");
    retry.addEventListener("click", () => {
      if (state.composeDraft.trim()) actions.sendChat(state.composeDraft);
    });
    banner.append(retry);
    pane.append(banner);
  }

  const log = el("div", "messages");
  log.setAttribute("data-testid", "messages");
  for (const msg of state.messages) {
    log.append(el("div", `message ${msg.role}`, msg.text));
  }
  pane.append(log);

  const compose = el("form", "compose") as HTMLFormElement;
  const input = el("textarea") as HTMLTextAreaElement;
  input.value = state.composeDraft;
  input.placeholder = "Ask anything";
  input.setAttribute("data-testid", "compose");
  input.addEventListener("input", () => {
    actions.setDraft(input.value);
    send.disabled = input.value.trim() === "";
  });
  const send = el("button", "send", "Send") as HTMLButtonElement;
  send.type = "submit";
  send.setAttribute("data-testid", "send");
  send.disabled = state.composeDraft.trim() === "";
  compose.addEventListener("submit", (ev) => {
    ev.preventDefault();
    if (input.value.trim()) actions.sendChat(input.value);
  });
  compose.append(input, send);
  pane.append(compose);
  return pane;
}

function renderIntervention(state: AppState, iv: Intervention,
                            actions: Actions): HTMLElement {
  const card = el("article", `intervention status-${iv.status}`);
  card.setAttribute("data-testid", "intervention-card");
  card.setAttribute("data-id", iv.id);
  card.append(el("h3", undefined, iv.immediate_action));
  card.append(el("p", "analysis", iv.analysis));
  card.append(el("p", "follow-up", `Follow-up: ${iv.follow_up}`));
  if (iv.task_improvement) {
    card.append(el("p", "task-improvement", `Task improvement: ${iv.task_improvement}`));
  }
  card.append(el("span", "status", iv.status));

  const decidable = isDecidable(state, iv);
  const controls = el("div", "decisions");
  for (const decision of ["accepted", "rejected"] as const) {
    const btn = el("button", decision,
                   decision === "accepted" ? "Accept" : "Reject") as HTMLButtonElement;
    btn.setAttribute("data-testid", `${decision}-${iv.id}`);
    btn.disabled = !decidable;
    btn.addEventListener("click", () => {
      if (isDecidable(state, iv)) actions.decide(iv.id, decision);
    });
    controls.append(btn);
  }
  card.append(controls);
  return card;
}

function renderFeed(state: AppState, actions: Actions): HTMLElement {
  const pane = el("section", "intervention-feed");
  pane.id = "interventions";
  pane.append(el("h2", undefined, "Interventions"));
  const items = listInterventions(state);
  if (items.length === 0) {
    pane.append(el("p", "empty", "No interventions yet."));
  }
  for (const iv of [...items].reverse()) {
    pane.append(renderIntervention(state, iv, actions));
  }
  return pane;
}

function renderRoutineRow(row: RoutineRow, rowMinutes: number): HTMLElement {
  const wrap = el("div", "routine-row");
  wrap.setAttribute("data-testid", "routine-row");
  const bar = el("div", "bar");
  for (const key of ACTIVITY_ORDER) {
    const minutes = row.minutes[key] ?? 0;
    if (minutes <= 0) continue;
    const seg = el("div", `segment ${key}`);
    seg.style.height = `${(minutes / rowMinutes) * 100}%`;
    seg.title = `${key}: ${Math.round(minutes)} min`;
    bar.append(seg);
  }
  wrap.append(bar);
  const meta = el("div", "meta");
  meta.append(el("span", "label", row.label));
  meta.append(el("span", `stress stress-${row.stress ?? "unknown"}`,
                 row.stress ?? "no data"));
  meta.append(el("span", "steps", `${row.steps} steps`));
  if (row.pnn50 !== null) {
    meta.append(el("span", "pnn50", `pNN50 ${row.pnn50.toFixed(1)}`));
  }
  wrap.append(meta);
  return wrap;
}

function renderRoutine(state: AppState): HTMLElement {
  const pane = el("section", "routine-pane");
  pane.id = "routine";
  pane.append(el("h2", undefined, "Routine"));
  if (!state.routine || state.routine.rows.length === 0) {
    pane.append(el("p", "empty", "No sealed intervals yet."));
    return pane;
  }
  const chart = el("div", "routine-chart");
  for (const row of state.routine.rows) {
    chart.append(renderRoutineRow(row, state.routine.row_minutes));
  }
  pane.append(chart);
  return pane;
}

function renderLatency(state: AppState): HTMLElement {
  const pane = el("section", "latency-pane");
  pane.id = "latency";
  pane.append(el("h2", undefined, "Model latency"));
  const table = el("table") as HTMLTableElement;
  const head = el("tr");
  for (const col of ["kind", "model", "calls", "mean (s)", "max (s)"]) {
    head.append(el("th", undefined, col));
  }
  table.append(head);
  for (const entry of state.latency) {
    const tr = el("tr");
    tr.setAttribute("data-testid", "latency-row");
    tr.append(el("td", undefined, entry.kind));
    tr.append(el("td", undefined, entry.model_id));
    tr.append(el("td", undefined, String(entry.count)));
    tr.append(el("td", undefined, entry.mean_s.toFixed(2)));
    tr.append(el("td", undefined, entry.max_s.toFixed(2)));
    table.append(tr);
  }
  if (state.latency.length === 0) {
    pane.append(el("p", "empty", "No samples."));
  }
  pane.append(table);
  return pane;
}

export function render(root: HTMLElement, state: AppState, actions: Actions): void {
  const active = document.activeElement;
  const hadFocus = active instanceof HTMLTextAreaElement;
  root.textContent = "";
  root.append(renderChat(state, actions), renderFeed(state, actions),
              renderRoutine(state), renderLatency(state));
  if (hadFocus) {
    root.querySelector("textarea")?.focus();
  }
}
