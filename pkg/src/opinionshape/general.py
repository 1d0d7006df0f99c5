"""Control-dependent influence probabilities with an annealed slow scale.

Here the probability that a controlled agent accepts the planner's target
is itself a curve of the control level, which makes the payoff non-convex
in the controls.  The learner therefore runs three coupled pieces: a value
table tracking the stationary opinion of every node, a sensitivity table
whose driver picks up the extra curve-derivative terms, and a slow control
ascent perturbed by decaying Gaussian noise so it can leave bad local
maxima.  A deterministic known-matrix variant replaces the sampled probe
values by full expectations and serves as the comparison baseline; given
the same seed both variants share the same noise realization so their
trajectories can be compared pathwise.

With constant influence curves the sensitivity updates reduce exactly to
the two-time-scale scheme, bit for bit on a shared event stream.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .curves import ConstantCurve, Curve
from .dynamics import sample_poll_targets
from .errors import InfeasibleError
from .network import AgentPartition, InteractionGraph
from .optim import LocalClocks, StepSchedule, Trajectory, project_budget_simplex, relative_gap
from .sas import _tick_fast_updates

NOISE_SEED_TAG = 0x5EED


@dataclass(frozen=True)
class GeneralModel:
    """Per-controlled-agent influence and reward curves."""

    alpha_curves: dict[int, Curve]
    w_curves: dict[int, Curve]

    def alpha_values(self, partition: AgentPartition, u: np.ndarray) -> np.ndarray:
        out = np.zeros(partition.node_count)
        for pos, node in enumerate(partition.controlled):
            out[node] = self.alpha_curves[node].value(float(u[pos]))
        return out

    def tables(self, partition: AgentPartition, u: np.ndarray):
        """alpha, alpha', w, w' per control position."""
        a = np.zeros(len(partition.controlled))
        ad = np.zeros_like(a)
        w = np.zeros_like(a)
        wd = np.zeros_like(a)
        for pos, node in enumerate(partition.controlled):
            x = float(u[pos])
            a[pos] = self.alpha_curves[node].value(x)
            ad[pos] = self.alpha_curves[node].deriv(x)
            w[pos] = self.w_curves[node].value(x)
            wd[pos] = self.w_curves[node].deriv(x)
        return a, ad, w, wd


def model_from_partition(partition: AgentPartition) -> GeneralModel:
    """Constant influence curves: the degenerate case matching the base model."""
    return GeneralModel(
        alpha_curves={i: ConstantCurve(float(partition.alpha[i])) for i in partition.controlled},
        w_curves=dict(partition.w),
    )


def study_model(partition: AgentPartition, seed, alpha_curve: Curve) -> GeneralModel:
    """Constant rewards drawn uniform per controlled agent, shared influence curve."""
    rng = np.random.default_rng(seed)
    levels = rng.uniform(0.0, 1.0, size=len(partition.controlled))
    return GeneralModel(
        alpha_curves={i: alpha_curve for i in partition.controlled},
        w_curves={i: ConstantCurve(float(l)) for i, l in zip(partition.controlled, levels)},
    )


def value_oracle(
    graph: InteractionGraph,
    partition: AgentPartition,
    model: GeneralModel,
    u: np.ndarray,
) -> np.ndarray:
    """Stationary values under control-dependent influence (linear solve)."""
    n = graph.node_count
    alpha_node = model.alpha_values(partition, u)
    keep = np.ones(n)
    keep[list(partition.stubborn)] = 0.0
    A = (keep * (1.0 - alpha_node))[:, None] * graph.P
    rhs = np.zeros(n)
    a, _, w, _ = model.tables(partition, u)
    for pos, node in enumerate(partition.controlled):
        rhs[node] = a[pos] * w[pos]
    for node in partition.stubborn:
        rhs[node] = partition.h[node]
    try:
        return np.linalg.solve(np.eye(n) - A, rhs)
    except np.linalg.LinAlgError as exc:
        raise InfeasibleError(f"general stationary system is singular: {exc}") from exc


def general_payoff(
    graph: InteractionGraph,
    partition: AgentPartition,
    model: GeneralModel,
    u: np.ndarray,
) -> float:
    return float(value_oracle(graph, partition, model, u).sum())


def general_payoff_and_grad(
    graph: InteractionGraph,
    partition: AgentPartition,
    model: GeneralModel,
    u: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Payoff plus its exact control gradient (adjoint solve)."""
    n = graph.node_count
    alpha_node = model.alpha_values(partition, u)
    keep = np.ones(n)
    keep[list(partition.stubborn)] = 0.0
    A = (keep * (1.0 - alpha_node))[:, None] * graph.P
    system = np.eye(n) - A
    rhs = np.zeros(n)
    a, ad, w, wd = model.tables(partition, u)
    idx = list(partition.controlled)
    rhs[idx] = a * w
    for node in partition.stubborn:
        rhs[node] = partition.h[node]
    x = np.linalg.solve(system, rhs)
    adj = np.linalg.solve(system.T, np.ones(n))
    mean_next = graph.P @ x
    grad = adj[idx] * (ad * (w - mean_next[idx]) + a * wd)
    return float(x.sum()), grad


def general_reference_optimum(
    graph: InteractionGraph,
    partition: AgentPartition,
    model: GeneralModel,
    budget: float,
    n_iters: int = 4000,
    step_scale: float = 25.0,
) -> tuple[np.ndarray, float]:
    """Best control found by deterministic multistart projected ascent.

    The payoff is non-convex here, so this is a reference, not a
    certificate of global optimality.
    """
    n_ctrl = len(partition.controlled)
    starts = [np.zeros(n_ctrl), np.full(n_ctrl, budget / max(1, n_ctrl))]
    for p in range(n_ctrl):
        e = np.zeros(n_ctrl)
        e[p] = budget
        starts.append(e)
        starts.append(0.5 * e)
    best_u, best_val = np.zeros(n_ctrl), -np.inf
    for u0 in starts:
        u = u0.copy()
        for k in range(n_iters):
            _, grad = general_payoff_and_grad(graph, partition, model, u)
            u = project_budget_simplex(u + (step_scale / (k + 1)) * grad, budget)
        val = general_payoff(graph, partition, model, u)
        if val > best_val:
            best_u, best_val = u, val
    return best_u, best_val


def sigma_noise(b_k: float, c_k: int, C: float) -> float:
    """Annealing amplitude C / sqrt((1/b) * log log c); zero until c >= 3."""
    if C == 0.0 or c_k < 3:
        return 0.0
    return C / math.sqrt((1.0 / b_k) * math.log(math.log(c_k)))


def value_update(
    values: np.ndarray,
    node: int,
    probed: int,
    partition: AgentPartition,
    model: GeneralModel,
    u: np.ndarray,
    clocks: LocalClocks,
    schedule: StepSchedule,
) -> np.ndarray:
    """Relax one node's value toward its sampled one-step target."""
    if node in partition.stubborn:
        return values
    new = values.copy()
    pos = partition.control_index().get(node)
    if pos is not None:
        a = model.alpha_curves[node].value(float(u[pos]))
        w = model.w_curves[node].value(float(u[pos]))
    else:
        a, w = 0.0, 0.0
    step = schedule.a(clocks.value(node))
    new[node] = values[node] + step * (a * w + (1.0 - a) * values[probed] - values[node])
    clocks.bump([node])
    return new


def general_grad_update(
    grad_table: np.ndarray,
    values: np.ndarray,
    node: int,
    probed: int,
    partition: AgentPartition,
    model: GeneralModel,
    u: np.ndarray,
    clocks: LocalClocks,
    schedule: StepSchedule,
) -> np.ndarray:
    """Sensitivity update carrying the influence-curve derivative terms.

    With a flat influence curve (zero derivative) this is exactly the
    two-time-scale fast update.
    """
    if node in partition.stubborn:
        return grad_table
    new = grad_table.copy()
    pos = partition.control_index().get(node)
    if pos is not None:
        x = float(u[pos])
        a = model.alpha_curves[node].value(x)
        ad = model.alpha_curves[node].deriv(x)
        w = model.w_curves[node].value(x)
        wd = model.w_curves[node].deriv(x)
    else:
        a, ad, w, wd = 0.0, 0.0, 0.0, 0.0
    step = schedule.a(clocks.value(node))
    target = (1.0 - a) * grad_table[probed]
    if pos is not None:
        target = target.copy()
        target[pos] += a * wd + ad * w - ad * values[probed]
    new[node] = grad_table[node] + step * (target - grad_table[node])
    clocks.bump([node])
    return new


def annealed_slow_update(
    u: np.ndarray,
    grad_est: np.ndarray,
    k: int,
    schedule: StepSchedule,
    C: float,
    denom: int,
    budget: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Projected ascent plus decaying Gaussian exploration noise."""
    c_k = int(np.ceil(k / denom))
    sigma = sigma_noise(schedule.b(k), c_k, C)
    base = u + schedule.b(k) * grad_est
    if sigma > 0.0:
        base = base + sigma * rng.standard_normal(len(u))
    return project_budget_simplex(base, budget)


def known_p_updates(
    values: np.ndarray,
    grad_table: np.ndarray,
    partition: AgentPartition,
    model: GeneralModel,
    u: np.ndarray,
    k: int,
    schedule: StepSchedule,
    graph: InteractionGraph,
) -> tuple[np.ndarray, np.ndarray]:
    """Full-expectation versions of the value and sensitivity updates."""
    n = graph.node_count
    step = schedule.a(k)
    a_node = np.zeros(n)
    ad_node = np.zeros(n)
    w_node = np.zeros(n)
    wd_node = np.zeros(n)
    a, ad, w, wd = model.tables(partition, u)
    idx = list(partition.controlled)
    a_node[idx], ad_node[idx], w_node[idx], wd_node[idx] = a, ad, w, wd

    free = np.ones(n, dtype=bool)
    free[list(partition.stubborn)] = False

    mean_v = graph.P @ values
    new_values = values.copy()
    new_values[free] = values[free] + step * (
        a_node[free] * w_node[free] + (1.0 - a_node[free]) * mean_v[free] - values[free]
    )

    mean_g = graph.P @ grad_table
    target = (1.0 - a_node)[:, None] * mean_g
    for pos, node in enumerate(partition.controlled):
        target[node, pos] += a[pos] * wd[pos] + ad[pos] * w[pos] - ad[pos] * mean_v[node]
    new_table = grad_table.copy()
    new_table[free] = grad_table[free] + step * (target[free] - grad_table[free])
    return new_values, new_table


def _initial_values(partition: AgentPartition) -> np.ndarray:
    v = np.zeros(partition.node_count)
    for node in partition.stubborn:
        v[node] = partition.h[node]
    return v


def _noise_rng(seed) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([NOISE_SEED_TAG, int(seed)]))


def run_general_rl(
    graph: InteractionGraph,
    partition: AgentPartition,
    model: GeneralModel,
    budget: float,
    schedule: StepSchedule,
    n_iters: int,
    seed,
    C: float = 10.0,
    anneal_denom: int | None = None,
    u0: np.ndarray | None = None,
    payoff_star: float | None = None,
    collect_timings: bool = False,
) -> Trajectory:
    """Sampled-event learner: value and sensitivity tables plus annealed ascent.

    The poll-event stream consumes the run RNG exactly as the two-time-scale
    runner does; annealing noise comes from a separate stream derived from
    the seed, so the known-matrix twin sees the same noise.
    """
    rng = np.random.default_rng(seed)
    noise_rng = _noise_rng(seed)
    anneal_denom = schedule.denom if anneal_denom is None else anneal_denom
    n = graph.node_count
    n_ctrl = len(partition.controlled)
    u = np.zeros(n_ctrl) if u0 is None else np.asarray(u0, dtype=float).copy()
    values = _initial_values(partition)
    grad_table = np.zeros((n, n_ctrl))
    clocks = LocalClocks.zeros(n)
    cdf = graph.poll_cdf()

    stubborn = np.zeros(n, dtype=bool)
    stubborn[list(partition.stubborn)] = True
    non_stubborn = np.flatnonzero(~stubborn)
    pos_of = np.full(n, -1, dtype=int)
    for node, pos in partition.control_index().items():
        pos_of[node] = pos

    ks = [0]
    us = [u.copy()]
    pays = [general_payoff(graph, partition, model, u)]
    times = [] if collect_timings else None
    for k in range(n_iters):
        t0 = time.perf_counter() if collect_timings else 0.0
        pollers = non_stubborn
        polled = sample_poll_targets(cdf, pollers, rng)

        a, ad, w, wd = model.tables(partition, u)
        alpha_node = np.zeros(n)
        alpha_node[list(partition.controlled)] = a

        steps = schedule.a(clocks.counts[pollers])
        cp = pos_of[pollers]
        owns = cp >= 0
        diag = np.zeros(len(pollers))
        if owns.any() and n_ctrl:
            sel = cp[owns]
            diag[owns] = a[sel] * wd[sel] + ad[sel] * w[sel] - ad[sel] * values[polled[owns]]
        _tick_fast_updates(grad_table, pollers, polled, alpha_node, diag, cp, steps)

        # value relaxation on the same events, reading pre-tick values
        v_target = np.zeros(len(pollers))
        v_target[owns] = a[cp[owns]] * w[cp[owns]]
        v_target += (1.0 - alpha_node[pollers]) * values[polled]
        values[pollers] += steps * (v_target - values[pollers])

        clocks.bump(pollers)
        if n_ctrl:
            u = annealed_slow_update(
                u, grad_table.sum(axis=0), k, schedule, C, anneal_denom, budget, noise_rng
            )
        if collect_timings:
            times.append(time.perf_counter() - t0)
        ks.append(k + 1)
        us.append(u.copy())
        pays.append(general_payoff(graph, partition, model, u))

    traj = Trajectory(
        scheme="general-rl",
        ks=np.array(ks),
        u=np.array(us),
        payoff=np.array(pays),
        iter_seconds=np.array(times) if collect_timings else None,
        extras={"values": values.copy(), "grad_table": grad_table.copy()},
    )
    if payoff_star is not None:
        traj.rel_gap = relative_gap(traj.payoff, payoff_star)
    return traj


def run_general_knownp(
    graph: InteractionGraph,
    partition: AgentPartition,
    model: GeneralModel,
    budget: float,
    schedule: StepSchedule,
    n_iters: int,
    seed,
    C: float = 10.0,
    anneal_denom: int | None = None,
    u0: np.ndarray | None = None,
    payoff_star: float | None = None,
    collect_timings: bool = False,
) -> Trajectory:
    """Deterministic-expectation twin of the sampled learner (same noise)."""
    noise_rng = _noise_rng(seed)
    anneal_denom = schedule.denom if anneal_denom is None else anneal_denom
    n = graph.node_count
    n_ctrl = len(partition.controlled)
    u = np.zeros(n_ctrl) if u0 is None else np.asarray(u0, dtype=float).copy()
    values = _initial_values(partition)
    grad_table = np.zeros((n, n_ctrl))

    ks = [0]
    us = [u.copy()]
    pays = [general_payoff(graph, partition, model, u)]
    times = [] if collect_timings else None
    for k in range(n_iters):
        t0 = time.perf_counter() if collect_timings else 0.0
        values, grad_table = known_p_updates(
            values, grad_table, partition, model, u, k, schedule, graph
        )
        if n_ctrl:
            u = annealed_slow_update(
                u, grad_table.sum(axis=0), k, schedule, C, anneal_denom, budget, noise_rng
            )
        if collect_timings:
            times.append(time.perf_counter() - t0)
        ks.append(k + 1)
        us.append(u.copy())
        pays.append(general_payoff(graph, partition, model, u))

    traj = Trajectory(
        scheme="general-knownp",
        ks=np.array(ks),
        u=np.array(us),
        payoff=np.array(pays),
        iter_seconds=np.array(times) if collect_timings else None,
        extras={"values": values.copy(), "grad_table": grad_table.copy()},
    )
    if payoff_star is not None:
        traj.rel_gap = relative_gap(traj.payoff, payoff_star)
    return traj
