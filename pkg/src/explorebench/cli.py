"""Command line: ``run``, ``compare``, ``bandit``, ``grad-check``.

Precedence for every setting: built-in default < ``--config`` JSON < flag.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

from . import gradcheck
from .harness import ExperimentConfig, execute, load_config, ordering_claim
from .policies import STRATEGIES


def _strategy_list(text: str) -> list[str]:
    names = [s.strip() for s in text.split(",") if s.strip()]
    for n in names:
        if n not in STRATEGIES:
            raise argparse.ArgumentTypeError(f"unknown strategy {n!r}; choose from {', '.join(STRATEGIES)}")
    return names


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its keys")
    p.add_argument("--out", dest="out_dir", help="output directory")
    p.add_argument("--master-seed", type=int, dest="master_seed")
    p.add_argument("--no-timing", action="store_true", help="write wall_ms as 0 for byte-stable output")
    p.add_argument("--workers", type=int, help="parallel runs (processes)")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="explorebench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="one strategy, one seed")
    _common(run)
    run.add_argument("--env", dest="environment", choices=["cartpole", "bandit"])
    run.add_argument("--strategy", type=_strategy_list)
    run.add_argument("--seed", type=int)
    run.add_argument("--episodes", type=int)
    run.add_argument("--pulls", type=int)

    cmp_ = sub.add_parser("compare", help="strategy x seed grid")
    _common(cmp_)
    cmp_.add_argument("--env", dest="environment", choices=["cartpole", "bandit"])
    cmp_.add_argument("--strategies", type=_strategy_list)
    cmp_.add_argument("--seeds", type=int, help="number of seeds (indices 0..N-1)")
    cmp_.add_argument("--episodes", type=int)
    cmp_.add_argument("--pulls", type=int)

    bandit = sub.add_parser("bandit", help="two-armed bandit suite")
    _common(bandit)
    bandit.add_argument("--pulls", type=int)
    bandit.add_argument("--strategies", type=_strategy_list)
    bandit.add_argument("--seeds", type=int, help="number of seeds (indices 0..N-1)")

    gc = sub.add_parser("grad-check", help="analytic vs finite-difference gradients")
    gc.add_argument("--nets", type=int, default=20)
    gc.add_argument("--seed", type=int, default=0)
    gc.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    data = load_config(args.config) if args.config else {}
    cmd = args.command
    if cmd == "bandit":
        data["environment"] = "bandit"
    flags = vars(args)
    for key in ("environment", "episodes", "pulls", "out_dir", "master_seed", "workers"):
        if flags.get(key) is not None:
            data[key] = flags[key]
    if cmd == "run":
        if args.strategy is not None:
            if len(args.strategy) != 1:
                raise SystemExit("run takes exactly one --strategy")
            data["strategies"] = args.strategy
        if args.seed is not None:
            data["seeds"] = [args.seed]
    else:
        if args.strategies is not None:
            data["strategies"] = args.strategies
        if args.seeds is not None:
            if args.seeds < 1:
                raise SystemExit("--seeds must be >= 1")
            data["seeds"] = list(range(args.seeds))
    if args.no_timing:
        data["timing"] = False
    return ExperimentConfig.from_dict(data)


def _grad_check(args) -> int:
    failed = 0
    for r in gradcheck.run_suite(args.nets, args.seed):
        status = "ok" if r.passed else "FAIL"
        failed += not r.passed
        print(f"{status:4s} dims={r.layer_dims} dropout={'on' if r.dropout else 'off'} "
              f"max_rel_err={r.max_rel_error:.3e}")
    print(f"{args.nets - failed}/{args.nets} networks within {gradcheck.TOLERANCE:g}")
    return 1 if failed else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(message)s")
    if args.command == "grad-check":
        return _grad_check(args)
    try:
        config = config_from_args(args)
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    summary = execute(config)
    elapsed = time.perf_counter() - t0
    for s in summary.strategies:
        print(f"{s.strategy:14s} mean_final={s.mean_final100:9.3f} std={s.std_final100:8.3f} "
              f"best_ma={s.best_ma100:9.3f}")
    print(f"ordering claim (boltzmann & bayes-dropout on top): {ordering_claim(summary)}")
    print(f"outputs in {config.out_dir} ({elapsed:.1f}s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
