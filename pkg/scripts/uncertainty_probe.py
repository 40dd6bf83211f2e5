"""Train one bayes-dropout agent and print how its MC-dropout variance at the
upright state shrinks as training proceeds (from uncertainty.csv)."""

import argparse
import csv
from collections import defaultdict
from pathlib import Path

from explorebench.harness import ExperimentConfig, execute


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--episodes", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/uncertainty")
    args = ap.parse_args()

    execute(ExperimentConfig(strategies=["bayes-dropout"], seeds=[args.seed],
                             episodes=args.episodes, out_dir=args.out))
    var = defaultdict(float)
    with open(Path(args.out) / "uncertainty.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            var[int(row["episode"])] += float(row["q_var"])
    step = max(1, args.episodes // 10)
    for ep in range(0, args.episodes, step):
        print(f"episode {ep:4d}  summed q variance {var[ep]:.4g}")


if __name__ == "__main__":
    main()
