/** Server-sent-events subscription with automatic reconnect and backfill.
 *
 * On any drop the stream reconnects after a delay and invokes `onBackfill`
 * so the owner can re-sync missed state through plain GETs: the server is
 * authoritative, the stream is only a nudge.
 */

import type { Intervention, RoutineRow } from "./types.js";

export interface StreamHandlers {
  onIntervention?: (iv: Intervention) => void;
  onRoutineRow?: (row: RoutineRow) => void;
  onAction?: (action: unknown) => void;
  onBackfill?: () => void;
}

type EventSourceFactory = (url: string) => EventSource;

export class EventStream {
  private source: EventSource | null = null;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private closed = false;

  constructor(
    private url: string,
    private handlers: StreamHandlers,
    private reconnectDelayMs = 1000,
    private makeSource: EventSourceFactory = (u) => new EventSource(u),
  ) {}

  connect(): void {
    this.closed = false;
    this.source = this.makeSource(this.url);
    this.source.addEventListener("intervention", (ev) => {
      this.handlers.onIntervention?.(JSON.parse((ev as MessageEvent).data));
    });
    this.source.addEventListener("routine_row", (ev) => {
      this.handlers.onRoutineRow?.(JSON.parse((ev as MessageEvent).data));
    });
    this.source.addEventListener("action", (ev) => {
      this.handlers.onAction?.(JSON.parse((ev as MessageEvent).data));
    });
    this.source.onerror = () => this.scheduleReconnect();
  }

  private scheduleReconnect(): void {
    if (this.closed || this.reconnectTimer !== null) return;
    this.source?.close();
    this.source = null;
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      if (this.closed) return;
      this.connect();
      this.handlers.onBackfill?.();
    }, this.reconnectDelayMs);
  }

  close(): void {
    this.closed = true;
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    this.source?.close();
    this.source = null;
  }
}
