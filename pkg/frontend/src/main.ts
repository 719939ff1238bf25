/** Bootstrap: fetch server state, connect the event stream, wire actions. */

import { ApiClient, ApiError } from "./api.js";
import { EventStream } from "./sse.js";
import {
  AppState,
  applyChatResponse,
  applyHistory,
  initialState,
  setInterventions,
  upsertIntervention,
} from "./store.js";
import { Actions, render } from "./ui.js";

const CONVERSATION_KEY = "workpulse.conversation";

export class App {
  state: AppState = initialState();
  private stream: EventStream | null = null;

  constructor(
    private root: HTMLElement,
    private api: ApiClient = new ApiClient(""),
    private storage: Pick<Storage, "getItem" | "setItem"> = localStorage,
    private makeStream: (handlers: ConstructorParameters<typeof EventStream>[1]) => EventStream
      = (handlers) => new EventStream("/events", handlers),
  ) {}

  actions: Actions = {
    sendChat: (message) => void this.sendChat(message),
    decide: (id, decision) => void this.decide(id, decision),
    setDraft: (text) => {
      // keep the draft without re-rendering on every keystroke
      this.state.composeDraft = text;
    },
  };

  /** Pull everything the server knows; the UI is a pure mirror of it. */
  async refresh(): Promise<void> {
    const [interventions, routine, latency] = await Promise.all([
      this.api.getInterventions(),
      this.api.getRoutine(),
      this.api.getLatency(),
    ]);
    setInterventions(this.state, interventions);
    this.state.routine = routine;
    this.state.latency = latency;

    const saved = this.storage.getItem(CONVERSATION_KEY);
    if (saved) {
      try {
        applyHistory(this.state, await this.api.getHistory(saved));
      } catch {
        // conversation unknown to this server instance; start fresh
      }
    }
    this.render();
  }

  async start(): Promise<void> {
    await this.refresh();
    this.stream = this.makeStream({
      onIntervention: (iv) => {
        upsertIntervention(this.state, iv);
        this.render();
      },
      onRoutineRow: () => void this.refreshRoutine(),
      onBackfill: () => void this.refresh(),
    });
    this.stream.connect();
  }

  private async refreshRoutine(): Promise<void> {
    this.state.routine = await this.api.getRoutine();
    this.render();
  }

  async sendChat(message: string): Promise<void> {
    try {
      const resp = await this.api.postChat(message, this.state.conversationId);
      applyChatResponse(this.state, message, resp);
      this.storage.setItem(CONVERSATION_KEY, resp.conversation_id);
    } catch (err) {
      // keep the draft in the compose box; no phantom message in history
      this.state.banner = err instanceof ApiError
        ? `Send failed (${err.code}); your message is kept below.`
        : "Send failed (network); your message is kept below.";
    }
    this.render();
  }

  async decide(id: string, decision: "accepted" | "rejected"): Promise<void> {
    // no optimistic flip: the card locks only on the server's acknowledgement
    this.state.pendingDecisions.add(id);
    this.render();
    try {
      const updated = await this.api.postDecision(id, decision);
      upsertIntervention(this.state, updated);
    } catch (err) {
      if (err instanceof ApiError && (err.status === 404 || err.status === 409)) {
        // stale card: re-sync from the server
        setInterventions(this.state, await this.api.getInterventions());
      } else {
        this.state.banner = "Decision failed; please retry.";
      }
    } finally {
      this.state.pendingDecisions.delete(id);
    }
    this.render();
  }

  render(): void {
    render(this.root, this.state, this.actions);
  }
}

declare global {
  interface Window { workpulseApp?: App }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const app = new App(document.getElementById("app") as HTMLElement);
  window.workpulseApp = app;
  void app.start();
}
