"""Experiment runner: configuration, seeded multi-run execution, CSV output.

A config describes one instance (network, partition sizes, alpha, budget,
schedule) and one scheme.  run_experiment executes n_runs with seeds seed,
seed+1, ..., writes one CSV per run plus a quartile summary of the relative
payoff gap, all measured against a reference optimum computed once per
instance.  Identical config and seed produce byte-identical CSVs.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import general as general_mod
from . import partial_obs, sas, sgd
from .curves import SaturatingCurve
from .errors import ConfigError
from .network import ActivationModel, AgentPartition, InteractionGraph, bundled_network_path, load_edge_list, random_partition
from .optim import StepSchedule, Trajectory, exact_optimum, run_exact_gd

SCHEMES = ("gd", "sas", "sgd1", "sgd2", "partial", "general-rl", "general-knownp")


@dataclass(frozen=True)
class ExperimentConfig:
    network: str = "karate"
    directed: bool = False
    weighted: bool | None = None
    s_size: int = 3
    s1_size: int = 28
    s0_size: int = 3
    alpha: float = 0.6
    budget: float = 5.0
    scheme: str = "sas"
    n_iters: int = 10_000
    n_runs: int = 10
    seed: int = 0
    step_a: float = 0.6
    step_b: float = 0.6
    denom: int = 100
    sgd_block: int | None = None
    anneal_c: float = 10.0
    anneal_denom: int | None = None
    observed_fraction: float = 0.5
    gd_step_scale: float = 100.0
    out_dir: str = "results"
    jobs: int = 1

    def validate(self) -> None:
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.n_iters < 0:
            raise ConfigError("n_iters must be nonnegative")
        if self.n_runs < 1:
            raise ConfigError("n_runs must be at least 1")
        if self.budget <= 0:
            raise ConfigError("budget must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must lie in [0, 1]")
        if not 0.0 <= self.observed_fraction <= 1.0:
            raise ConfigError("observed_fraction must lie in [0, 1]")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        if min(self.s_size, self.s1_size, self.s0_size) < 0:
            raise ConfigError("partition sizes must be nonnegative")


_BOOL_KEYS = {"directed", "weighted"}
_INT_KEYS = {"s_size", "s1_size", "s0_size", "n_iters", "n_runs", "seed", "denom", "sgd_block", "anneal_denom", "jobs"}
_FLOAT_KEYS = {"alpha", "budget", "step_a", "step_b", "anneal_c", "observed_fraction", "gd_step_scale"}
_STR_KEYS = {"network", "scheme", "out_dir"}


def parse_config(path: str | Path, overrides: dict | None = None) -> ExperimentConfig:
    """Read a flat ``key = value`` file; ``overrides`` (CLI flags) win."""
    values: dict = {}
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value', got {text!r}")
        key, _, raw = text.partition("=")
        key, raw = key.strip(), raw.strip()
        values[key] = _coerce(key, raw, f"{path}:{line_no}")
    if overrides:
        for key, val in overrides.items():
            if val is not None:
                values[key] = val
    try:
        config = ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    config.validate()
    return config


def _coerce(key: str, raw: str, where: str):
    try:
        if key in _BOOL_KEYS:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(f"bad boolean {raw!r}")
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _STR_KEYS:
            return raw
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(f"{where}: unknown config key {key!r}")


@dataclass
class Instance:
    """A fully built experiment instance shared by all runs."""

    graph: InteractionGraph
    partition: AgentPartition
    schedule: StepSchedule
    payoff_star: float
    u_star: np.ndarray
    model: general_mod.GeneralModel | None = None


def build_instance(config: ExperimentConfig) -> Instance:
    net = config.network
    if net.endswith(".edges") or "/" in net or "\\" in net:
        path = Path(net)
    else:
        try:
            path = bundled_network_path(net)
        except FileNotFoundError as exc:
            raise ConfigError(str(exc)) from exc
    if not path.exists():
        raise ConfigError(f"network file not found: {path}")
    graph = load_edge_list(path, weighted=config.weighted, directed=config.directed)
    sizes = (config.s_size, config.s1_size, config.s0_size)
    if sum(sizes) != graph.node_count:
        raise ConfigError(
            f"partition sizes {sizes} do not sum to node count {graph.node_count}"
        )
    partition = random_partition(graph, sizes, config.alpha, seed=config.seed)
    schedule = StepSchedule(A=config.step_a, B=config.step_b, denom=config.denom)

    model = None
    if config.scheme.startswith("general"):
        model = general_mod.study_model(partition, config.seed, SaturatingCurve())
        u_star, payoff_star = general_mod.general_reference_optimum(
            graph, partition, model, config.budget
        )
    else:
        u_star, payoff_star = exact_optimum(graph, partition, config.budget)
    return Instance(
        graph=graph,
        partition=partition,
        schedule=schedule,
        payoff_star=payoff_star,
        u_star=u_star,
        model=model,
    )


def run_scheme(
    config: ExperimentConfig,
    instance: Instance,
    run_seed: int,
    collect_timings: bool = False,
) -> Trajectory:
    """Execute one seeded run of the configured scheme."""
    g, p = instance.graph, instance.partition
    schedule = instance.schedule
    star = instance.payoff_star
    if config.scheme == "gd":
        return run_exact_gd(
            g, p, config.budget,
            n_iters=config.n_iters,
            step_scale=config.gd_step_scale,
            payoff_star=star,
        )
    if config.scheme == "sas":
        return sas.run_sas(
            g, p, config.budget, schedule, ActivationModel("synchronous"),
            config.n_iters, run_seed, payoff_star=star, collect_timings=collect_timings,
        )
    if config.scheme in ("sgd1", "sgd2"):
        return sgd.run_sgd(
            g, p, config.budget, int(config.scheme[-1]), config.n_iters, run_seed,
            step_A=config.step_a,
            block=config.sgd_block if config.sgd_block is not None else config.denom,
            payoff_star=star, collect_timings=collect_timings,
        )
    if config.scheme == "partial":
        # the hidden set is an instance property, fixed across run seeds
        hidden = partial_obs.sample_hidden(p, 1.0 - config.observed_fraction, config.seed)
        return partial_obs.run_partial(
            g, p, config.budget, schedule, config.n_iters, run_seed,
            observed_fraction=config.observed_fraction, hidden=hidden,
            payoff_star=star, collect_timings=collect_timings,
        )
    if config.scheme == "general-rl":
        return general_mod.run_general_rl(
            g, p, instance.model, config.budget, schedule, config.n_iters, run_seed,
            C=config.anneal_c, anneal_denom=config.anneal_denom,
            payoff_star=star, collect_timings=collect_timings,
        )
    if config.scheme == "general-knownp":
        return general_mod.run_general_knownp(
            g, p, instance.model, config.budget, schedule, config.n_iters, run_seed,
            C=config.anneal_c, anneal_denom=config.anneal_denom,
            payoff_star=star, collect_timings=collect_timings,
        )
    raise ConfigError(f"unknown scheme {config.scheme!r}")


def _format(x: float) -> str:
    return f"{float(x):.17g}"


def write_run_csv(path: Path, traj: Trajectory) -> None:
    n_ctrl = traj.u.shape[1] if traj.u.ndim == 2 else 0
    header = ["k"] + [f"u_{j + 1}" for j in range(n_ctrl)] + ["payoff", "rel_gap"]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row, k in enumerate(traj.ks):
            gap = traj.rel_gap[row] if traj.rel_gap is not None else float("nan")
            writer.writerow(
                [str(int(k))]
                + [_format(v) for v in np.atleast_1d(traj.u[row])]
                + [_format(traj.payoff[row]), _format(gap)]
            )


def read_run_csv(path: Path) -> dict[str, np.ndarray]:
    with path.open() as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [list(map(float, row)) for row in reader]
    data = np.array(rows)
    return {name: data[:, i] for i, name in enumerate(header)}


def write_summary_csv(path: Path, ks: np.ndarray, gaps: np.ndarray) -> None:
    """Per-iteration quartiles of the relative gap across runs (rows = runs)."""
    q1, med, q3 = np.percentile(gaps, [25, 50, 75], axis=0)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "gap_median", "gap_q1", "gap_q3"])
        for i, k in enumerate(ks):
            writer.writerow([str(int(k)), _format(med[i]), _format(q1[i]), _format(q3[i])])


def _worker(args) -> tuple[int, Trajectory]:
    config, run_seed = args
    instance = build_instance(config)
    return run_seed, run_scheme(config, instance, run_seed)


def run_experiment(config: ExperimentConfig) -> dict:
    """Run the configured scheme for every seed and emit CSVs plus a summary."""
    config.validate()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    instance = build_instance(config)

    n_runs = 1 if config.scheme == "gd" else config.n_runs
    seeds = [config.seed + r for r in range(n_runs)]
    trajectories: list[Trajectory] = []
    if config.jobs > 1 and n_runs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            for _, traj in pool.map(_worker, [(config, s) for s in seeds]):
                trajectories.append(traj)
    else:
        for s in seeds:
            trajectories.append(run_scheme(config, instance, s))

    run_paths = []
    for s, traj in zip(seeds, trajectories):
        path = out_dir / f"{config.scheme}_seed{s}.csv"
        write_run_csv(path, traj)
        run_paths.append(path)

    summary_path = out_dir / f"{config.scheme}_summary.csv"
    gaps = np.array([t.rel_gap for t in trajectories])
    write_summary_csv(summary_path, trajectories[0].ks, gaps)
    return {
        "runs": run_paths,
        "summary": summary_path,
        "payoff_star": instance.payoff_star,
        "u_star": instance.u_star,
        "trajectories": trajectories,
    }


def timing_report(config: ExperimentConfig, schemes: list[str], n_iters: int = 100) -> dict:
    """Per-iteration wall-clock stats (min/median/max seconds) per scheme.

    A note is attached when the two-time-scale scheme is not the cheapest
    per iteration among the sampling-based schemes; timing is machine
    dependent, so this stays a diagnostic.
    """
    if not schemes:
        raise ConfigError("timing report needs at least one scheme")
    for scheme in schemes:
        if scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {scheme!r}")
    report: dict = {}
    medians: dict[str, float] = {}
    for scheme in schemes:
        cfg = replace(config, scheme=scheme, n_iters=n_iters)
        instance = build_instance(cfg)
        traj = run_scheme(cfg, instance, cfg.seed, collect_timings=True)
        times = traj.iter_seconds
        if times is None or len(times) == 0:
            stats = {"min": 0.0, "median": 0.0, "max": 0.0}
        else:
            stats = {
                "min": float(np.min(times)),
                "median": float(np.median(times)),
                "max": float(np.max(times)),
            }
        report[scheme] = stats
        medians[scheme] = stats["median"]
    notes = []
    sgd_meds = [medians[s] for s in ("sgd1", "sgd2") if s in medians]
    if "sas" in medians and sgd_meds and medians["sas"] > min(sgd_meds):
        notes.append("sas median per-iteration time above sgd (machine dependent)")
    report["notes"] = notes
    return report
