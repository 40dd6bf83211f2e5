"""Full CartPole comparison: every strategy, 5 seeds, 500 episodes each.

    python scripts/run_comparison.py --out results/cartpole --workers 4

Writes records.csv, summary.csv, uncertainty.csv, report.md and config.json.
"""

import argparse
import time

from explorebench.harness import ExperimentConfig, execute, ordering_claim


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/cartpole")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--episodes", type=int, default=500)
    ap.add_argument("--master-seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    config = ExperimentConfig(seeds=list(range(args.seeds)), episodes=args.episodes,
                              master_seed=args.master_seed, out_dir=args.out, workers=args.workers)
    t0 = time.perf_counter()
    summary = execute(config)
    print(f"{'strategy':14s} {'final-100':>10s} {'std':>8s} {'best MA':>8s}  threshold")
    for s in summary.strategies:
        reached = "not reached" if s.episodes_to_threshold is None else s.episodes_to_threshold
        print(f"{s.strategy:14s} {s.mean_final100:10.1f} {s.std_final100:8.1f} "
              f"{s.best_ma100:8.1f}  {reached}")
    print("ranking:", " > ".join(summary.ranking()))
    print("boltzmann and bayes-dropout on top:", ordering_claim(summary))
    print(f"{time.perf_counter() - t0:.0f}s, outputs in {args.out}")


if __name__ == "__main__":
    main()
