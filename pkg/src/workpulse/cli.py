"""Command line entry points: run (replay), serve (HTTP API), validate-trace."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import threading

from .errors import ConfigError, MalformedTrace
from .ingest import open_trace
from .orchestrator import Engine, EngineConfig


class JsonLineFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        payload = {
            "level": record.levelname.lower(),
            "logger": record.name,
            "message": record.getMessage(),
        }
        if record.exc_info:
            payload["exc"] = self.formatException(record.exc_info)
        return json.dumps(payload, sort_keys=True)


def setup_logging(verbose: bool = False) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(JsonLineFormatter())
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        handlers=[handler])


def _load_config(args) -> EngineConfig:
    config = EngineConfig.from_file(args.config) if args.config else EngineConfig()
    if getattr(args, "speed", None) is not None:
        config.speed_factor = args.speed
    if getattr(args, "mock_llm", None) is not None:
        config.mock_rules = args.mock_llm
    return config


def cmd_run(args) -> int:
    try:
        config = _load_config(args)
        engine = Engine(config)
        summary = engine.replay(args.replay, pace=args.pace)
    except (ConfigError, MalformedTrace) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(summary, sort_keys=True, indent=2))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    try:
        config = _load_config(args)
        engine = Engine(config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.replay:
        thread = threading.Thread(target=engine.replay,
                                  args=(args.replay,), kwargs={"pace": True},
                                  daemon=True)
        thread.start()
    host, _, port = config.listen.rpartition(":")
    uvicorn.run(create_app(engine, ui_dir=args.ui),
                host=host or "127.0.0.1", port=int(port))
    return 0


def cmd_validate_trace(args) -> int:
    try:
        session = open_trace(args.trace_dir)
    except MalformedTrace as exc:
        print(f"invalid trace: {exc}", file=sys.stderr)
        return 2
    events = session.next_events(session.span_ms)
    counts: dict[str, int] = {}
    for _, kind, _ in events:
        counts[kind] = counts.get(kind, 0) + 1
    report = {
        "span_ms": session.span_ms,
        "session_start": session.session_start.isoformat(),
        "events": counts,
        "ecg_gaps_flagged": len(session.ecg_gaps),
    }
    print(json.dumps(report, sort_keys=True, indent=2))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="workpulse",
        description="Context-aware productivity and well-being engine")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="replay a recorded trace through the engine")
    run_p.add_argument("--config", help="JSON config file")
    run_p.add_argument("--replay", required=True, help="trace directory")
    run_p.add_argument("--speed", type=float, help="virtual seconds per wall second")
    run_p.add_argument("--mock-llm", help="mock rules JSON file")
    run_p.add_argument("--pace", action="store_true",
                       help="throttle replay to the configured speed factor")
    run_p.set_defaults(func=cmd_run)

    serve_p = sub.add_parser("serve", help="serve the HTTP API (optionally replaying)")
    serve_p.add_argument("--config", help="JSON config file")
    serve_p.add_argument("--replay", help="trace directory to replay in the background")
    serve_p.add_argument("--speed", type=float)
    serve_p.add_argument("--mock-llm", help="mock rules JSON file")
    serve_p.add_argument("--ui", help="static UI directory to mount at /ui")
    serve_p.set_defaults(func=cmd_serve)

    val_p = sub.add_parser("validate-trace", help="check a trace directory's schema")
    val_p.add_argument("trace_dir")
    val_p.set_defaults(func=cmd_validate_trace)

    args = parser.parse_args(argv)
    setup_logging(args.verbose)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
