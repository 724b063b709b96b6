#!/usr/bin/env python3
"""Sweep vehicle density for one scenario and print frame delivery ratio per
ring, with confidence half-widths.

Usage:
    python scripts/density_sweep.py leganes-add --densities 20,40,60,100
                                    [--protocols add-vod,flooding-distance]
                                    [--seeds 0,1,2,3,4] [--csv out.csv]
"""

from __future__ import annotations

import argparse
import csv
import sys

from vanetsim.config import resolve_scenario
from vanetsim.engine import execute_run
from vanetsim.metrics import ci, fdr


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("config", help="scenario YAML path or preset name")
    parser.add_argument("--densities", required=True,
                        help="comma-separated densities (nodes/km^2)")
    parser.add_argument("--protocols", help="comma-separated protocol subset")
    parser.add_argument("--seeds", help="comma-separated seed override")
    parser.add_argument("--csv", help="also write rows to this CSV file")
    args = parser.parse_args()

    cfg = resolve_scenario(args.config)
    densities = [float(d) for d in args.densities.split(",")]
    protocols = args.protocols.split(",") if args.protocols else cfg.protocols
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else cfg.seeds

    rows = []
    for protocol in protocols:
        for density in densities:
            ledgers = [execute_run(cfg, density, protocol, seed)
                       for seed in seeds]
            for ring in cfg.rings:
                values = [fdr(ledger, ring) for ledger in ledgers]
                values = [v for v in values if v is not None]
                if len(values) < 2:
                    continue
                summary = ci(values)
                rows.append({"protocol": protocol, "density": density,
                             "ring": ring, "fdr": round(summary.mean, 4),
                             "ci_half_width": round(summary.half_width, 4),
                             "n_runs": summary.n_runs})
                print(f"{protocol:20s} density={density:6.1f} ring={ring:6.0f} "
                      f"fdr={summary.mean:.3f} +-{summary.half_width:.3f}")

    if args.csv and rows:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {args.csv}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
