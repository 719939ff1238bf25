"""Tiny fan-out event bus feeding the SSE stream."""

from __future__ import annotations

import queue
import threading


class EventBus:
    """Publish/subscribe with one queue per subscriber; drops nothing."""

    def __init__(self):
        self._subscribers: list[queue.Queue] = []
        self._lock = threading.Lock()

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue()
        with self._lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._lock:
            try:
                self._subscribers.remove(q)
            except ValueError:
                pass

    def publish(self, event_type: str, data: dict) -> None:
        with self._lock:
            targets = list(self._subscribers)
        for q in targets:
            q.put((event_type, data))
