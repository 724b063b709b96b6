#!/usr/bin/env python3
"""Map how often the forwarding-game iteration converges as the candidate
count and benefit/cost ratio grow.

Usage:
    python scripts/game_convergence.py [--players 2,3,5,10,20,40]
                                       [--ratios 1.1,1.5,2,5,10]
                                       [--trials 50] [--csv out.csv]
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from vanetsim.dissemination import GameConfig, forwarding_game_equilibrium


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--players", default="2,3,5,10,20,40")
    parser.add_argument("--ratios", default="1.1,1.5,2,5,10")
    parser.add_argument("--trials", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--csv", help="also write rows to this CSV file")
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    rows = []
    for n in (int(x) for x in args.players.split(",")):
        for ratio in (float(x) for x in args.ratios.split(",")):
            cfg = GameConfig(mechanism="forwarding-game", cost_k=1.0,
                             fg_benefit=ratio, fg_cost=1.0,
                             fg_tol=1e-6, fg_max_iters=100)
            converged = 0
            volunteers = 0.0
            for _ in range(args.trials):
                avails = rng.uniform(0.0, 1.0, size=n).tolist()
                probs, ok = forwarding_game_equilibrium(avails, cfg)
                converged += ok
                volunteers += sum(probs)
            rows.append({"players": n, "benefit_cost_ratio": ratio,
                         "converged_fraction": converged / args.trials,
                         "mean_total_probability":
                             round(volunteers / args.trials, 4)})
            print(f"n={n:3d} b/c={ratio:5.1f} converged="
                  f"{converged / args.trials:5.2f} "
                  f"sum(p)={volunteers / args.trials:6.3f}")

    if args.csv and rows:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {args.csv}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
