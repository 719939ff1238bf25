import { describe, expect, it } from "vitest";

import {
  applyChatResponse,
  applyHistory,
  initialState,
  isDecidable,
  listInterventions,
  setInterventions,
  upsertIntervention,
} from "../src/store.js";
import { makeIntervention } from "./helpers.js";

describe("store", () => {
  it("mirrors a chat response and clears the draft", () => {
    const state = initialState();
    state.composeDraft = "hi";
    applyChatResponse(state, "hi", {
      conversation_id: "c-1", reply: "hello", tone: "neutral_subtle", turn: 1,
    });
    expect(state.messages.map((m) => m.role)).toEqual(["user", "assistant"]);
    expect(state.tone).toBe("neutral_subtle");
    expect(state.composeDraft).toBe("");
  });

  it("history replaces local messages wholesale", () => {
    const state = initialState();
    state.messages.push({ role: "user", text: "stale", ts_ms: 0 });
    applyHistory(state, {
      conversation_id: "c-2",
      messages: [{ role: "user", text: "fresh", ts_ms: 1 }],
      turn: 1, tone: "neutral_subtle",
    });
    expect(state.messages.map((m) => m.text)).toEqual(["fresh"]);
    expect(state.conversationId).toBe("c-2");
  });

  it("upsert keeps insertion order and the server object wins", () => {
    const state = initialState();
    upsertIntervention(state, makeIntervention("iv-1"));
    upsertIntervention(state, makeIntervention("iv-2"));
    upsertIntervention(state, { ...makeIntervention("iv-1"), status: "accepted" });
    expect(listInterventions(state).map((iv) => iv.id)).toEqual(["iv-1", "iv-2"]);
    expect(state.interventions.get("iv-1")!.status).toBe("accepted");
  });

  it("setInterventions resets to exactly the server list", () => {
    const state = initialState();
    upsertIntervention(state, makeIntervention("iv-9"));
    setInterventions(state, [makeIntervention("iv-1", "rejected")]);
    expect(listInterventions(state).map((iv) => iv.id)).toEqual(["iv-1"]);
  });

  it("only delivered cards without an in-flight decision are decidable", () => {
    const state = initialState();
    const delivered = makeIntervention("iv-1");
    expect(isDecidable(state, delivered)).toBe(true);
    state.pendingDecisions.add("iv-1");
    expect(isDecidable(state, delivered)).toBe(false);
    expect(isDecidable(state, makeIntervention("iv-2", "blocked"))).toBe(false);
    expect(isDecidable(state, makeIntervention("iv-3", "accepted"))).toBe(false);
  });
});
