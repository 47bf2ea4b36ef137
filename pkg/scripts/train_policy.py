"""Train the Q-learning policy on the two-regime scene environment."""

import argparse
import csv

import numpy as np

from adaptive_sci.fixtures import train_policy
from adaptive_sci.rl_agent import TrainConfig
from adaptive_sci.runner import RunConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--episodes", type=int, default=500)
    ap.add_argument("--sigma", type=float, default=0.0)
    ap.add_argument("--qtable", default="qtable.txt")
    ap.add_argument("--curve", default="returns.csv")
    args = ap.parse_args()

    tcfg = TrainConfig(episodes=args.episodes, seed=args.seed)
    q, returns = train_policy(args.seed, tcfg, RunConfig(sigma=args.sigma))
    q.save(args.qtable)
    with open(args.curve, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["episode", "return"])
        w.writerows([i, f"{r:.6g}"] for i, r in enumerate(returns))
    k = min(50, len(returns))
    if k:
        print(f"mean return: first {k} episodes {np.mean(returns[:k]):.2f}, "
              f"last {k} {np.mean(returns[-k:]):.2f}")
    print(f"{len(q)} observations -> {args.qtable}")


if __name__ == "__main__":
    main()
