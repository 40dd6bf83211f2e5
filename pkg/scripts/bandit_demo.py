"""Two-armed bandit: how each strategy fares against the closed-form means.

Greedy with zero-initialised estimates pulls arm 0 first, sees reward 1 > 0
and never tries arm 1 again.  Boltzmann at a low temperature nearly does the
same until it stumbles onto arm 1; its closed form assumes converged estimates.
"""

import argparse

import numpy as np

from explorebench.envs import BanditSpec
from explorebench.harness import bandit_run
from explorebench.policies import STRATEGIES, PolicySpec, Schedule, boltzmann_distribution
from explorebench.seeding import derive_run_seed, make_rng

ARMS = np.array([1.0, 2.0])


def expected(kind, eps, temp):
    if kind == "greedy":
        return ARMS[0]
    if kind == "random":
        return ARMS.mean()
    if kind == "eps-greedy":
        return (1 - eps) * ARMS.max() + eps * ARMS.mean()
    if kind == "boltzmann":
        return float(boltzmann_distribution(ARMS, temp) @ ARMS)
    return None


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pulls", type=int, default=100_000)
    ap.add_argument("--epsilon", type=float, default=0.1)
    ap.add_argument("--temperature", type=float, default=0.1)
    args = ap.parse_args()

    spec = BanditSpec(list(ARMS))
    for kind in STRATEGIES:
        policy = PolicySpec(kind, Schedule(args.epsilon, args.epsilon, 1),
                            Schedule(args.temperature, args.temperature, 1))
        pulls = args.pulls if kind != "bayes-dropout" else min(args.pulls, 20_000)
        trace = bandit_run(spec, policy, pulls, make_rng(derive_run_seed(0, kind, 0)))
        ref = expected(kind, args.epsilon, args.temperature)
        ref_txt = f"{ref:.4f}" if ref is not None else "n/a"
        print(f"{kind:14s} pulls={pulls:7d} mean={trace.rewards.mean():.4f} "
              f"closed-form={ref_txt} arm1 share={np.mean(trace.arms == 1):.3f}")


if __name__ == "__main__":
    main()
