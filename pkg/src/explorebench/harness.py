"""Experiment grids over (strategy x seed), summaries, CSV and report output."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import policies
from .agent import AgentConfig, DQNAgent, run_episode
from .envs import BanditSpec, CartPole, CartPoleParams, bandit_pull
from .policies import STRATEGIES, PolicySpec, Schedule
from .qnet import apply_update, backward, forward, init_adam, init_network
from .seeding import derive_run_seed, make_rng

log = logging.getLogger(__name__)

RECORD_COLUMNS = ["strategy", "seed", "episode", "return", "schedule_value", "env_steps", "wall_ms"]
SUMMARY_COLUMNS = [
    "strategy", "runs", "episodes", "mean_return", "mean_final100", "std_final100",
    "best_ma100", "median_best_ma100", "episodes_to_threshold",
]
UNCERTAINTY_COLUMNS = ["strategy", "seed", "episode", "action", "q_mean", "q_var"]
NOT_REACHED = "not reached"
CLAIM_PAIR = ("boltzmann", "bayes-dropout")
# cart at rest, pole tilted; the all-zero state would only exercise the biases
PROBE_STATE = (0.0, 0.0, 0.05, 0.0)


@dataclass
class ExperimentConfig:
    environment: str = "cartpole"
    strategies: list[str] = field(default_factory=lambda: list(STRATEGIES))
    seeds: list[int] = field(default_factory=lambda: [0])
    episodes: int = 500
    master_seed: int = 0
    agent: AgentConfig = field(default_factory=AgentConfig)
    epsilon_start: float = 1.0
    epsilon_end: float = 0.1
    epsilon_anneal_steps: int = 10_000
    temperature_start: float = 1.0
    temperature_end: float = 0.05
    temperature_anneal_steps: int = 10_000
    dropout_samples: int = 10
    max_episode_steps: int = 500
    threshold: float = 195.0
    window: int = 100
    # bandit suite; schedules there are constant
    pulls: int = 100_000
    arm_rewards: list[float] = field(default_factory=lambda: [1.0, 2.0])
    bandit_noise: float = 0.0
    bandit_epsilon: float = 0.1
    bandit_temperature: float = 0.1
    bandit_dropout_rate: float = 0.5
    bandit_hidden: int = 16
    bandit_learning_rate: float = 0.01
    out_dir: str = "results"
    workers: int = 1
    timing: bool = True

    def __post_init__(self):
        if isinstance(self.agent, dict):
            self.agent = AgentConfig(**self.agent)
        self.strategies = list(self.strategies)
        self.seeds = [int(s) for s in self.seeds]
        if self.environment not in ("cartpole", "bandit"):
            raise ValueError(f"environment must be cartpole or bandit, got {self.environment!r}")
        if not self.strategies:
            raise ValueError("at least one strategy is required")
        for name in self.strategies:
            if name not in STRATEGIES:
                raise ValueError(f"unknown strategy {name!r}; expected one of {STRATEGIES}")
        if len(set(self.strategies)) != len(self.strategies):
            raise ValueError("duplicate strategies")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("duplicate seeds")
        if self.episodes < 1 or self.pulls < 1 or self.window < 1 or self.workers < 1:
            raise ValueError("episodes, pulls, window and workers must be >= 1")
        # run the schedules through PolicySpec validation once, up front
        for name in self.strategies:
            self.policy(name)

    def policy(self, name: str) -> PolicySpec:
        if self.environment == "bandit":
            eps = Schedule(self.bandit_epsilon, self.bandit_epsilon, 1)
            temp = Schedule(self.bandit_temperature, self.bandit_temperature, 1)
        else:
            eps = Schedule(self.epsilon_start, self.epsilon_end, self.epsilon_anneal_steps)
            temp = Schedule(self.temperature_start, self.temperature_end, self.temperature_anneal_steps)
        return PolicySpec(name, eps, temp, self.dropout_samples)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["agent"]["hidden_dims"] = list(d["agent"]["hidden_dims"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def load_config(path) -> dict:
    """Read a JSON config document (returned raw so CLI flags can override keys)."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return data


class RunRecord(NamedTuple):
    strategy: str
    seed: int
    episode: int
    episode_return: float
    schedule_value: float
    env_steps: int
    wall_ms: float


@dataclass
class StrategySummary:
    strategy: str
    runs: int
    episodes: int
    mean_return: float
    mean_final100: float
    std_final100: float
    best_ma100: float
    median_best_ma100: float
    episodes_to_threshold: int | None

    def row(self) -> list:
        ett = NOT_REACHED if self.episodes_to_threshold is None else self.episodes_to_threshold
        return [self.strategy, self.runs, self.episodes, self.mean_return, self.mean_final100,
                self.std_final100, self.best_ma100, self.median_best_ma100, ett]


@dataclass
class Summary:
    strategies: list[StrategySummary]
    threshold: float
    window: int

    def ranking(self) -> list[str]:
        """Strategies by mean final-window return, best first (ties: input order)."""
        order = sorted(enumerate(self.strategies), key=lambda p: (-p[1].mean_final100, p[0]))
        return [s.strategy for _, s in order]

    def get(self, name: str) -> StrategySummary:
        for s in self.strategies:
            if s.strategy == name:
                return s
        raise KeyError(name)


def moving_average(series, window: int) -> np.ndarray:
    """Trailing mean; the first ``window-1`` entries average the available prefix."""
    if window < 1:
        raise ValueError("window must be >= 1")
    x = np.asarray(series, dtype=np.float64)
    csum = np.concatenate(([0.0], np.cumsum(x)))
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(idx - window, 0)
    return (csum[idx] - csum[lo]) / (idx - lo)


def _full_windows(ma: np.ndarray, window: int) -> np.ndarray:
    return ma[window - 1:] if ma.size >= window else ma


def _group_runs(records) -> dict[str, dict[int, list[RunRecord]]]:
    runs: dict[str, dict[int, list[RunRecord]]] = {}
    for r in records:
        runs.setdefault(r.strategy, {}).setdefault(r.seed, []).append(r)
    return runs


def summarize(records, threshold: float = 195.0, window: int = 100) -> Summary:
    """Per-strategy statistics, recomputable from the records alone.

    ``episodes_to_threshold`` is the first episode index at which the
    trailing ``window``-mean of the seed-averaged curve reaches ``threshold``
    (full windows only), or ``None``.
    """
    records = list(records)
    if not records:
        raise ValueError("cannot summarize an empty record set")
    out = []
    for strategy, by_seed in _group_runs(records).items():
        finals, bests, curves = [], [], []
        all_returns = []
        for seed in sorted(by_seed):
            rs = sorted(by_seed[seed], key=lambda r: r.episode)
            ret = np.array([r.episode_return for r in rs])
            all_returns.append(ret)
            finals.append(float(ret[-window:].mean()))
            bests.append(float(_full_windows(moving_average(ret, window), window).max()))
            curves.append(ret)
        n = min(c.size for c in curves)
        mean_curve = np.mean([c[:n] for c in curves], axis=0)
        ma = moving_average(mean_curve, window)
        hits = np.flatnonzero(ma[window - 1:] >= threshold) if n >= window else []
        reached = int(hits[0]) + window - 1 if len(hits) else None
        out.append(StrategySummary(
            strategy=strategy,
            runs=len(by_seed),
            episodes=n,
            mean_return=float(np.concatenate(all_returns).mean()),
            mean_final100=float(np.mean(finals)),
            std_final100=float(np.std(finals)),
            best_ma100=float(np.mean(bests)),
            median_best_ma100=float(statistics.median(bests)),
            episodes_to_threshold=reached,
        ))
    return Summary(out, threshold, window)


def ordering_claim(summary: Summary) -> str:
    """Whether Boltzmann and bayes-dropout both out-rank every other strategy present."""
    names = [s.strategy for s in summary.strategies]
    others = [n for n in names if n not in CLAIM_PAIR]
    if not all(n in names for n in CLAIM_PAIR) or not others:
        return "not evaluable"
    worst_pair = min(summary.get(n).mean_final100 for n in CLAIM_PAIR)
    best_other = max(summary.get(n).mean_final100 for n in others)
    return "observed" if worst_pair > best_other else "not observed"


# ---------------------------------------------------------------- cartpole runs

def run_single(config: ExperimentConfig, strategy: str, seed_index: int):
    """One (strategy, seed) CartPole run -> (records, uncertainty rows)."""
    policy = config.policy(strategy)
    rng = make_rng(derive_run_seed(config.master_seed, strategy, seed_index))
    # diagnostics draw from their own stream so they never perturb training
    diag_rng = make_rng(derive_run_seed(config.master_seed, strategy + "/diagnostics", seed_index))
    env = CartPole(CartPoleParams(max_episode_steps=config.max_episode_steps))
    agent = DQNAgent.create(env.state_dim, env.n_actions, config.agent, rng)
    records, uncertainty = [], []
    for ep in range(config.episodes):
        t0 = time.perf_counter()
        res = run_episode(env, agent, policy, rng)
        wall = (time.perf_counter() - t0) * 1e3 if config.timing else 0.0
        value = policies.schedule_value(policy, agent.global_step, agent.online.dropout_rate)
        records.append(RunRecord(strategy, seed_index, ep, res.episode_return, value,
                                 agent.global_step, wall))
        if strategy == "bayes-dropout" and policy.dropout_samples >= 2:
            mean, var = policies.action_uncertainty(agent.online, np.array(PROBE_STATE),
                                                    policy.dropout_samples, diag_rng)
            for a in range(env.n_actions):
                uncertainty.append((strategy, seed_index, ep, a, float(mean[a]), float(var[a])))
            log.debug("%s seed %d ep %d: q var at probe %s", strategy, seed_index, ep, var)
    log.info("%s seed %d: final-%d mean %.1f", strategy, seed_index, config.window,
             np.mean([r.episode_return for r in records[-config.window:]]))
    return records, uncertainty


def _run_task(args):
    config, strategy, seed = args
    if config.environment == "bandit":
        return bandit_single(config, strategy, seed), []
    return run_single(config, strategy, seed)


def _map_runs(config: ExperimentConfig):
    tasks = [(config, s, seed) for s in config.strategies for seed in config.seeds]
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]
    # pool.map preserves task order, so output is canonical either way
    records, uncertainty = [], []
    for recs, unc in results:
        records.extend(recs)
        uncertainty.extend(unc)
    return records, uncertainty


def run_experiment(config: ExperimentConfig, diagnostics: list | None = None) -> list[RunRecord]:
    """All (strategy, seed) runs, records in strategy, seed, episode order.

    Pass a list as ``diagnostics`` to collect bayes-dropout uncertainty rows.
    """
    records, uncertainty = _map_runs(config)
    if diagnostics is not None:
        diagnostics.extend(uncertainty)
    return records


# ------------------------------------------------------------------ bandit suite

class BanditTrace(NamedTuple):
    arms: np.ndarray
    rewards: np.ndarray
    schedule: np.ndarray


def bandit_run(spec: BanditSpec, policy: PolicySpec, pulls: int, rng: np.random.Generator,
               *, dropout_rate: float = 0.5, hidden: int = 16, learning_rate: float = 0.01) -> BanditTrace:
    """Play ``pulls`` rounds of one strategy.

    Tabular strategies keep zero-initialised incremental-mean estimates.
    bayes-dropout has no table to perturb, so it uses a one-hidden-layer
    network fed a constant input, selects by one dropout-sampled pass and
    regresses the pulled arm's output onto the reward through that same mask.
    """
    k = spec.n_arms
    arms = np.empty(pulls, dtype=np.int64)
    rewards = np.empty(pulls)
    sched = np.empty(pulls)
    if policy.kind == "bayes-dropout":
        net = init_network([1, hidden, k], rng, dropout_rate=dropout_rate)
        opt = init_adam(net, lr=learning_rate)
        x = np.ones(1)
        for t in range(pulls):
            q, cache = forward(net, x, rng=rng)
            a = policies.greedy_select(q)
            r = bandit_pull(spec, a, rng)
            apply_update(net, backward(net, cache, a, r), opt)
            arms[t], rewards[t], sched[t] = a, r, dropout_rate
        return BanditTrace(arms, rewards, sched)

    estimates = np.zeros(k)
    counts = np.zeros(k, dtype=np.int64)
    for t in range(pulls):
        a = policies.select_action(policy, t, rng, q=estimates)
        r = bandit_pull(spec, a, rng)
        counts[a] += 1
        estimates[a] += (r - estimates[a]) / counts[a]
        arms[t], rewards[t] = a, r
        sched[t] = policies.schedule_value(policy, t)
    return BanditTrace(arms, rewards, sched)


def bandit_single(config: ExperimentConfig, strategy: str, seed_index: int) -> list[RunRecord]:
    rng = make_rng(derive_run_seed(config.master_seed, strategy, seed_index))
    spec = BanditSpec(list(config.arm_rewards), config.bandit_noise)
    t0 = time.perf_counter()
    trace = bandit_run(spec, config.policy(strategy), config.pulls, rng,
                       dropout_rate=config.bandit_dropout_rate, hidden=config.bandit_hidden,
                       learning_rate=config.bandit_learning_rate)
    per_pull = (time.perf_counter() - t0) * 1e3 / config.pulls if config.timing else 0.0
    return [
        RunRecord(strategy, seed_index, t, float(r), float(v), t + 1, per_pull)
        for t, (r, v) in enumerate(zip(trace.rewards.tolist(), trace.schedule.tolist()))
    ]


def run_bandit_suite(config: ExperimentConfig):
    """All strategies on the bandit: ``(records, summary)``; one record per pull."""
    if config.environment != "bandit":
        raise ValueError("run_bandit_suite needs environment='bandit'")
    records, _ = _map_runs(config)
    return records, summarize(records, config.threshold, config.window)


# ------------------------------------------------------------------------ output

def _fmt(v):
    return repr(v) if isinstance(v, float) else str(v)


def _open_for_write(path):
    path = Path(path)
    try:
        return open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def emit_csv(records, path) -> None:
    """Records CSV, floats at round-trip precision, rows in the given order."""
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow([_fmt(v) for v in r])


def read_records_csv(path) -> list[RunRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != RECORD_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        return [
            RunRecord(s, int(seed), int(ep), float(ret), float(v), int(steps), float(ms))
            for s, seed, ep, ret, v, steps, ms in reader
        ]


def emit_summary_csv(summary: Summary, path) -> None:
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for s in summary.strategies:
            w.writerow([_fmt(v) for v in s.row()])


def emit_uncertainty_csv(rows, path) -> None:
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(UNCERTAINTY_COLUMNS)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def learning_curves(records, window: int, max_points: int = 500):
    """Seed-averaged, window-smoothed return per strategy at up to ``max_points`` x-values."""
    curves = {}
    for strategy, by_seed in _group_runs(records).items():
        series = [np.array([r.episode_return for r in sorted(rs, key=lambda r: r.episode)])
                  for rs in by_seed.values()]
        n = min(s.size for s in series)
        curves[strategy] = moving_average(np.mean([s[:n] for s in series], axis=0), window)
    n = min(c.size for c in curves.values())
    xs = np.unique(np.linspace(0, n - 1, min(n, max_points)).round().astype(int))
    return xs, {k: v[xs] for k, v in curves.items()}


def render_report(config: ExperimentConfig, summary: Summary, records) -> str:
    unit = "pull" if config.environment == "bandit" else "episode"
    lines = [
        f"# Exploration comparison: {config.environment}",
        "",
        f"Strategies: {', '.join(config.strategies)}  ",
        f"Seeds: {', '.join(str(s) for s in config.seeds)} (master seed {config.master_seed})  ",
        (f"Pulls per run: {config.pulls}" if config.environment == "bandit"
         else f"Episodes per run: {config.episodes}"),
        "",
        "## Summary",
        "",
        f"Final-window statistics use the last {summary.window} {unit}s of each run; "
        f"std is the population standard deviation across seeds.",
        "",
        "| strategy | runs | mean return | mean final | std final | best MA | median best MA "
        "| first " + unit + " MA >= " + f"{summary.threshold:g} |",
        "|---|---|---|---|---|---|---|---|",
    ]
    for s in summary.strategies:
        ett = NOT_REACHED if s.episodes_to_threshold is None else str(s.episodes_to_threshold)
        lines.append(
            f"| {s.strategy} | {s.runs} | {s.mean_return:.4f} | {s.mean_final100:.2f} | "
            f"{s.std_final100:.2f} | {s.best_ma100:.2f} | {s.median_best_ma100:.2f} | {ett} |"
        )
    claim = ordering_claim(summary)
    lines += [
        "",
        "## Ranking (observed in this run, not asserted)",
        "",
        "By mean final-window return: " + " > ".join(summary.ranking()) + ".",
        "",
        f"Boltzmann and bayes-dropout both ahead of every other strategy: **{claim}**. "
        "Rankings come from a handful of stochastic runs and can change with the "
        "master seed or hyperparameters.",
        "",
        "## Learning curves",
        "",
        f"Seed-averaged return, trailing {summary.window}-{unit} mean. CSV, ready for plotting.",
        "",
        "```csv",
    ]
    xs, curves = learning_curves(records, summary.window)
    lines.append(",".join([unit] + list(curves)))
    for i, x in enumerate(xs):
        lines.append(",".join([str(int(x))] + [f"{c[i]:.6g}" for c in curves.values()]))
    lines += ["```", ""]
    return "\n".join(lines)


def write_outputs(config: ExperimentConfig, records, summary: Summary, uncertainty=()) -> Path:
    out = Path(config.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    emit_csv(records, out / "records.csv")
    emit_summary_csv(summary, out / "summary.csv")
    if uncertainty:
        emit_uncertainty_csv(uncertainty, out / "uncertainty.csv")
    (out / "report.md").write_text(render_report(config, summary, records))
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    return out


def execute(config: ExperimentConfig):
    """Run the configured grid and write every output file.  Returns the summary."""
    if config.environment == "bandit":
        records, summary = run_bandit_suite(config)
        uncertainty = []
    else:
        uncertainty = []
        records = run_experiment(config, uncertainty)
        summary = summarize(records, config.threshold, config.window)
    write_outputs(config, records, summary, uncertainty)
    return summary
