#!/usr/bin/env python3
"""Build a short synthetic day, replay it, and serve the API+UI on it.

Usage: python scripts/run_demo.py [--hours H] [--port P] [--pace]

With --pace the replay is throttled to the speed factor (default 60x) so
interventions and routine rows arrive on the SSE stream while you watch;
without it the trace is replayed instantly and the UI shows the final state.
"""

import argparse
import tempfile
import threading
from pathlib import Path

import uvicorn

from workpulse.orchestrator import Engine, EngineConfig
from workpulse.service import create_app
from workpulse.tracegen import build_day_trace


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--hours", type=float, default=1.0)
    parser.add_argument("--port", type=int, default=8787)
    parser.add_argument("--speed", type=float, default=60.0)
    parser.add_argument("--pace", action="store_true")
    args = parser.parse_args()

    workdir = Path(tempfile.mkdtemp(prefix="workpulse-demo-"))
    trace = workdir / "trace"
    build_day_trace(trace, hours=args.hours, seed=7)
    config = EngineConfig(
        mock_rules=str(trace / "mock_rules.json"),
        store_dir=str(workdir / "store"),
        outbox_dir=str(workdir / "outbox"),
        summary_path=str(workdir / "summary.json"),
        speed_factor=args.speed,
    )
    engine = Engine(config)

    if args.pace:
        threading.Thread(target=engine.replay, args=(trace,),
                         kwargs={"pace": True}, daemon=True).start()
        print(f"replaying {args.hours}h at {args.speed}x in the background")
    else:
        engine.replay(trace)
        print(f"replay finished: {len(engine.routine.rows)} rows sealed")

    ui_dir = Path(__file__).resolve().parents[1] / "frontend"
    print(f"API on http://127.0.0.1:{args.port}  "
          f"(UI at /ui/, outbox: {workdir / 'outbox'})")
    uvicorn.run(create_app(engine, ui_dir=str(ui_dir)), host="127.0.0.1",
                port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
