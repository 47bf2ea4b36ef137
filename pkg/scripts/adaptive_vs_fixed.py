"""Adaptive B against every fixed B on the normal/frozen/fast scene.

Trains a policy (or loads one with --qtable), then for each seed prints the
adaptive summary, the nearest fixed baseline and the B trace. With --out a
comparison CSV is written per seed.
"""

import argparse
from pathlib import Path

import numpy as np

from adaptive_sci.fixtures import COMPARISON_SIGMA, canonical_masks, three_segment_scene, train_policy
from adaptive_sci.rl_agent import QTable, greedy_policy
from adaptive_sci.runner import RunConfig, compare, emit_csv, run_adaptive, run_fixed


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, nargs="+", default=[100, 101, 102, 103, 104])
    ap.add_argument("--sigma", type=float, default=COMPARISON_SIGMA)
    ap.add_argument("--qtable", help="use a saved table instead of training")
    ap.add_argument("--out", help="directory for per-seed report CSVs")
    args = ap.parse_args()

    if args.qtable:
        q = QTable.load(args.qtable)
    else:
        q, _ = train_policy(0, cfg=RunConfig(sigma=args.sigma))
    policy = greedy_policy(q)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)

    deltas = []
    for seed in args.seeds:
        seq, track = three_segment_scene(seed)
        c = canonical_masks(seed)
        cfg = RunConfig(seed=seed, with_reconstruction=True, sigma=args.sigma)
        adaptive = run_adaptive(seq, track, c, policy, cfg)
        fixed = [run_fixed(seq, track, c, B, cfg) for B in cfg.states.values]
        rep = compare(adaptive, fixed)
        a, f = rep.adaptive, rep.fixed[rep.nearest_B]
        deltas.append(rep.nearest_delta)
        print(f"seed {seed}: mean B {a['mean_B']:.2f} | PSNR {a['mean_psnr']:.2f} vs {f['mean_psnr']:.2f} "
              f"(B={rep.nearest_B}) | rate {a['mean_detection_rate']:.3f} vs {f['mean_detection_rate']:.3f}")
        print(f"  B trace {adaptive.b_trace()}")
        if args.out:
            emit_csv(rep, Path(args.out) / f"report_{seed}.csv")
    dp, dr = np.mean(deltas, axis=0)
    print(f"mean delta vs nearest fixed B: PSNR {dp:+.3f} dB, detection rate {dr:+.4f}")


if __name__ == "__main__":
    main()
