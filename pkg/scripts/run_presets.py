#!/usr/bin/env python3
"""Run every bundled preset (or a chosen subset) and write one report
directory per preset.

Usage:
    python scripts/run_presets.py --out results/ [--presets leganes-add,timers-25]
                                  [--jobs 2] [--seeds 0,1,2]
"""

from __future__ import annotations

import argparse
import os
import sys

from vanetsim.cli import main as vanetsim_main
from vanetsim.config import list_presets


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results", help="output root directory")
    parser.add_argument("--presets", help="comma-separated subset (default: all)")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--seeds", help="comma-separated seed override")
    args = parser.parse_args()

    names = args.presets.split(",") if args.presets else list_presets()
    for name in names:
        out_dir = os.path.join(args.out, name)
        cmd = ["run", name, "--out", out_dir, "--jobs", str(args.jobs)]
        if args.seeds:
            cmd += ["--seeds", args.seeds]
        print(f"== {name} -> {out_dir}")
        code = vanetsim_main(cmd)
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
