"""Two-time-scale stochastic approximation driven by observed poll events.

The fast iterate is a table grad_table[i, j] estimating the sensitivity of
node i's stationary opinion to control j; each observed poll (i, polled)
relaxes row i toward its one-step fixed-point target using the poller's
local-clock step a(nu_i).  The slow iterate ascends the controls along the
column sums of the table with step b(k), projected back onto the budget
simplex.  Stubborn rows stay pinned at zero.
"""

from __future__ import annotations

import time

import numpy as np

from .dynamics import payoff_fn, sample_poll_targets
from .network import ActivationModel, AgentPartition, InteractionGraph, substochastic_matrix
from .optim import LocalClocks, StepSchedule, Trajectory, project_budget_simplex, relative_gap

# sanity ceiling on table entries: alpha_max * max w' / alpha_min, slack 10x
BOUND_SLACK = 10.0


def exact_grad_table(graph: InteractionGraph, partition: AgentPartition, u: np.ndarray) -> np.ndarray:
    """Fixed point of the sensitivity recursion, solved exactly (test oracle).

    Table column j solves (Id - A) col = alpha_j w_j'(u_j) e_j, so the full
    table is (Id - A)^-1 D with D the diagonal driver on controlled rows.
    Stubborn rows come out exactly zero because their A-rows are zero.
    """
    n = graph.node_count
    idx = list(partition.controlled)
    driver = np.zeros((n, len(idx)))
    if idx:
        driver[idx, np.arange(len(idx))] = partition.alpha[idx] * partition.w_derivs(u)
    A = substochastic_matrix(graph, partition)
    return np.linalg.solve(np.eye(n) - A, driver)


def sas_fast_update(
    grad_table: np.ndarray,
    event: tuple[int, int],
    graph: InteractionGraph,
    partition: AgentPartition,
    u: np.ndarray,
    clocks: LocalClocks,
    schedule: StepSchedule,
) -> np.ndarray:
    """Apply one observed poll event to the sensitivity table.

    Returns a new table; events naming a stubborn poller are ignored
    (stubborn agents do not poll).  The poller's clock advances.
    """
    poller, polled = event
    if poller in partition.stubborn:
        return grad_table
    new = grad_table.copy()
    step = schedule.a(clocks.value(poller))
    target = (1.0 - partition.alpha[poller]) * grad_table[polled]
    pos = partition.control_index().get(poller)
    if pos is not None:
        target = target.copy()
        target[pos] += partition.alpha[poller] * partition.w[poller].deriv(float(u[pos]))
    new[poller] = grad_table[poller] + step * (target - grad_table[poller])
    clocks.bump([poller])
    return new


def sas_slow_update(
    u: np.ndarray,
    grad_table: np.ndarray,
    k: int,
    schedule: StepSchedule,
    budget: float,
) -> np.ndarray:
    """Projected ascent along the table's column sums with step b(k)."""
    return project_budget_simplex(u + schedule.b(k) * grad_table.sum(axis=0), budget)


def _tick_fast_updates(
    grad_table: np.ndarray,
    pollers: np.ndarray,
    polled: np.ndarray,
    alpha: np.ndarray,
    diag_driver: np.ndarray,
    ctrl_pos: np.ndarray,
    steps: np.ndarray,
) -> None:
    """Vectorized fast updates for one tick, reading pre-tick table values.

    diag_driver[p] = alpha_i * w_i'(u_i) for the poller owning control p;
    ctrl_pos maps poller order to the control column (or -1).
    """
    target = (1.0 - alpha[pollers])[:, None] * grad_table[polled]
    owns = ctrl_pos >= 0
    target[owns, ctrl_pos[owns]] += diag_driver[owns]
    grad_table[pollers] += steps[:, None] * (target - grad_table[pollers])


def run_sas(
    graph: InteractionGraph,
    partition: AgentPartition,
    budget: float,
    schedule: StepSchedule,
    activation: ActivationModel,
    n_iters: int,
    seed,
    u0: np.ndarray | None = None,
    payoff_star: float | None = None,
    freeze_u: bool = False,
    collect_timings: bool = False,
) -> Trajectory:
    """Run the coupled fast/slow recursion for n_iters ticks.

    Each tick draws the active set, samples one poll per active non-stubborn
    agent, applies all fast updates against the pre-tick table, then takes
    one slow control step.  With freeze_u the controls stay at u0, which
    isolates the fast recursion.
    """
    rng = np.random.default_rng(seed)
    n = graph.node_count
    n_ctrl = len(partition.controlled)
    u = np.zeros(n_ctrl) if u0 is None else np.asarray(u0, dtype=float).copy()
    grad_table = np.zeros((n, n_ctrl))
    clocks = LocalClocks.zeros(n)
    payoff = payoff_fn(graph, partition)
    cdf = graph.poll_cdf()

    stubborn = np.zeros(n, dtype=bool)
    stubborn[list(partition.stubborn)] = True
    non_stubborn = np.flatnonzero(~stubborn)
    ctrl_index = partition.control_index()
    pos_of = np.full(n, -1, dtype=int)
    for node, pos in ctrl_index.items():
        pos_of[node] = pos
    ctrl_idx = np.array(partition.controlled, dtype=int)
    alpha = partition.alpha

    bound = _table_bound(partition)

    ks = [0]
    us = [u.copy()]
    pays = [payoff(u)]
    times = [] if collect_timings else None
    for k in range(n_iters):
        t0 = time.perf_counter() if collect_timings else 0.0
        if activation.mode == "synchronous":
            pollers = non_stubborn
        else:
            active = rng.random(n) < activation.q
            pollers = np.flatnonzero(active & ~stubborn)
        polled = sample_poll_targets(cdf, pollers, rng)
        if len(pollers):
            diag = np.zeros(len(pollers))
            cp = pos_of[pollers]
            owns = cp >= 0
            if owns.any() and n_ctrl:
                w_der = partition.w_derivs(u)
                diag[owns] = alpha[pollers[owns]] * w_der[cp[owns]]
            steps = schedule.a(clocks.counts[pollers])
            _tick_fast_updates(grad_table, pollers, polled, alpha, diag, cp, steps)
            clocks.bump(pollers)
        if not freeze_u and n_ctrl:
            u = project_budget_simplex(u + schedule.b(k) * grad_table.sum(axis=0), budget)
        if collect_timings:
            times.append(time.perf_counter() - t0)
        ks.append(k + 1)
        us.append(u.copy())
        pays.append(payoff(u))
        assert np.max(np.abs(grad_table), initial=0.0) <= bound, "sensitivity table left its sanity bound"

    traj = Trajectory(
        scheme="sas",
        ks=np.array(ks),
        u=np.array(us),
        payoff=np.array(pays),
        iter_seconds=np.array(times) if collect_timings else None,
        extras={"grad_table": grad_table, "clocks": clocks.counts.copy()},
    )
    if payoff_star is not None:
        traj.rel_gap = relative_gap(traj.payoff, payoff_star)
    return traj


def _table_bound(partition: AgentPartition) -> float:
    """Sanity ceiling for table entries; generous, violation means a bug."""
    if not partition.controlled:
        return 1.0
    idx = list(partition.controlled)
    alphas = partition.alpha[idx]
    max_wp = max(partition.w[i].deriv(0.0) for i in idx)
    a_min = float(np.min(alphas[alphas > 0.0], initial=1.0))
    return BOUND_SLACK * float(np.max(alphas)) * max_wp / a_min
