/** Test doubles: routed fetch mock, fake EventSource, in-memory storage. */

import { vi } from "vitest";

import { EventStream } from "../src/sse.js";
import type { StreamHandlers } from "../src/sse.js";

export type Route = {
  method: string;
  path: string;
  status?: number;
  body: unknown;
};

export function installFetch(routes: Route[]): ReturnType<typeof vi.fn> {
  const mock = vi.fn(async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    const method = init?.method ?? "GET";
    const route = routes.find((r) => r.method === method && url.endsWith(r.path));
    if (!route) {
      return new Response(JSON.stringify({ error: { code: "not_found", message: url } }),
                          { status: 404, headers: { "content-type": "application/json" } });
    }
    return new Response(JSON.stringify(route.body), {
      status: route.status ?? 200,
      headers: { "content-type": "application/json" },
    });
  });
  vi.stubGlobal("fetch", mock);
  return mock;
}

export class FakeEventSource {
  static instances: FakeEventSource[] = [];
  listeners = new Map<string, ((ev: MessageEvent) => void)[]>();
  onerror: ((ev?: unknown) => void) | null = null;
  closed = false;

  constructor(public url: string) {
    FakeEventSource.instances.push(this);
  }

  addEventListener(type: string, fn: (ev: MessageEvent) => void): void {
    const list = this.listeners.get(type) ?? [];
    list.push(fn);
    this.listeners.set(type, list);
  }

  close(): void {
    this.closed = true;
  }

  emit(type: string, data: unknown): void {
    for (const fn of this.listeners.get(type) ?? []) {
      fn({ data: JSON.stringify(data) } as MessageEvent);
    }
  }

  fail(): void {
    this.onerror?.();
  }
}

export function fakeStreamFactory() {
  return (handlers: StreamHandlers) =>
    new EventStream("/events", handlers, 5,
                    (url) => new FakeEventSource(url) as unknown as EventSource);
}

export class MemoryStorage {
  private map = new Map<string, string>();
  getItem(key: string): string | null {
    return this.map.get(key) ?? null;
  }
  setItem(key: string, value: string): void {
    this.map.set(key, value);
  }
}

export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

export function makeIntervention(id: string, status = "delivered") {
  return {
    id,
    created_at_ms: 900000,
    analysis: "Long stretches of focused desk work with little movement.",
    immediate_action: "Stand up and stretch for two minutes.",
    follow_up: "Walk to refill your water bottle.",
    task_improvement: null,
    status,
    blocked_reason: null,
    delivered_at_ms: status === "delivered" ? 900001 : null,
    decided_at_ms: null,
  };
}

export const EMPTY_ROUTINE = { session_start: "2024-06-03T10:00:00", row_minutes: 15, rows: [] };
