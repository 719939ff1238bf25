#!/usr/bin/env python3
"""Generate the bundled synthetic day trace plus its mock rule set.

Usage: python scripts/make_trace.py [out_dir] [--hours H] [--seed N]
"""

import argparse
import json
from pathlib import Path

from workpulse.tracegen import build_day_trace


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", nargs="?", default="data/day_trace")
    parser.add_argument("--hours", type=float, default=2.0)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    truth = build_day_trace(args.out_dir, hours=args.hours, seed=args.seed)
    print(f"trace written to {args.out_dir}")
    print(json.dumps({
        "span_ms": truth["span_ms"],
        "blocks": truth["n_blocks"],
        "frames": truth["n_frames"],
        "beats": len(truth["beat_times_ms"]),
        "actionable_segments": truth["actionable_segments"],
        "mock_rules": truth["mock_rules_path"],
    }, indent=2))
    size = sum(p.stat().st_size for p in Path(args.out_dir).glob("*"))
    print(f"total size: {size / 1e6:.1f} MB")


if __name__ == "__main__":
    main()
