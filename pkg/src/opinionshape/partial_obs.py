"""Learning from a restricted observed set via token relays.

Only an observed subset of agents (always including the controlled and
stubborn ones) is visible to the planner.  A poll that lands on a hidden
agent hands over a tagged token; hidden agents forward it along their own
polls until it reaches an observed agent, so the planner effectively
samples the first-hit law q* of the chain watched only on the observed
set.  Stubborn agents never poll, hence they terminate tokens whether or
not they are nominally hidden.

The learner keeps one scalar per observed agent: the sensitivity of that
agent's restricted value to its own control, relaxed toward the one-step
target on probe events and pinned at zero on stubborn agents.  Controls
ascend their own scalar on the slow scale.  This optimizes a surrogate of
the full payoff, so the logged gap need not reach zero.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .dynamics import payoff_fn
from .errors import NonAbsorbingError
from .network import AgentPartition, InteractionGraph
from .optim import LocalClocks, StepSchedule, Trajectory, project_budget_simplex, relative_gap

HOP_CAP = 10_000_000


@dataclass(frozen=True)
class Token:
    """Relay record: origin agent, terminal observed agent, hop count, stamp."""

    origin: int
    terminal: int
    hops: int
    stamp: int = 0


def observed_set(partition: AgentPartition, hidden: set[int]) -> tuple[int, ...]:
    """Observed agents: everything outside ``hidden``, plus S and S0 always."""
    nodes = set(range(partition.node_count))
    keep = (nodes - set(hidden)) | set(partition.controlled) | set(partition.stubborn)
    return tuple(sorted(keep))


def sample_hidden(partition: AgentPartition, fraction: float, seed) -> set[int]:
    """Hide a fraction of the non-controlled agents, uniformly at random.

    Hidden stubborn agents still terminate tokens (they never poll), so
    hiding them only affects bookkeeping, not the probe law.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("hidden fraction must lie in [0, 1]")
    pool = sorted(set(partition.uncontrolled) | set(partition.stubborn))
    rng = np.random.default_rng(seed)
    n_hidden = int(round(fraction * len(pool)))
    chosen = rng.choice(len(pool), size=n_hidden, replace=False) if n_hidden else []
    return {pool[i] for i in chosen}


def relay_token(
    graph: InteractionGraph,
    partition: AgentPartition,
    observed: tuple[int, ...] | set[int],
    node: int,
    rng: np.random.Generator,
    stamp: int = 0,
) -> Token:
    """Poll once from ``node`` and relay through hidden agents until observed.

    Terminal states are the observed set united with the stubborn set.
    """
    terminal = set(observed) | set(partition.stubborn)
    cdf = graph.poll_cdf()
    cur = int(node)
    hops = 0
    while True:
        r = rng.random()
        cur = int(np.searchsorted(cdf[cur], r, side="right"))
        hops += 1
        if cur in terminal:
            return Token(origin=int(node), terminal=cur, hops=hops, stamp=stamp)
        if hops > HOP_CAP:
            raise NonAbsorbingError(f"token from node {node} exceeded {HOP_CAP} hops")


def probe(
    graph: InteractionGraph,
    partition: AgentPartition,
    observed: tuple[int, ...] | set[int],
    node: int,
    rng: np.random.Generator,
) -> int:
    """Sample the next observed agent seen from ``node`` (the law q*)."""
    return relay_token(graph, partition, observed, node, rng).terminal


def hit_law_oracle(
    graph: InteractionGraph,
    partition: AgentPartition,
    observed: tuple[int, ...] | set[int],
) -> tuple[np.ndarray, list[int]]:
    """Exact probe law per observed non-stubborn agent (test oracle).

    Row i gives q*(. | i) over the terminal states, computed by eliminating
    the hidden relays with an absorption solve on the hidden subgraph.
    """
    terminal = sorted(set(observed) | set(partition.stubborn))
    hidden = sorted(set(range(graph.node_count)) - set(terminal))
    P = graph.P
    n = graph.node_count

    if hidden:
        P_hh = P[np.ix_(hidden, hidden)]
        P_ht = P[np.ix_(hidden, terminal)]
        reach = np.linalg.solve(np.eye(len(hidden)) - P_hh, P_ht)
    else:
        reach = np.zeros((0, len(terminal)))

    law = np.zeros((n, len(terminal)))
    for node in terminal:
        row = P[node, terminal].copy()
        if hidden:
            row = row + P[node, hidden] @ reach
        law[node] = row
    return law, terminal


def restricted_grad_oracle(
    graph: InteractionGraph,
    partition: AgentPartition,
    observed: tuple[int, ...] | set[int],
    u: np.ndarray,
) -> dict[int, float]:
    """Fixed point of the restricted scalar recursion (test oracle)."""
    law, terminal = hit_law_oracle(graph, partition, observed)
    stubborn = set(partition.stubborn)
    free = [node for node in terminal if node not in stubborn]
    t_index = {node: i for i, node in enumerate(terminal)}
    ctrl_pos = partition.control_index()

    m = len(free)
    mat = np.eye(m)
    rhs = np.zeros(m)
    for r, node in enumerate(free):
        a = partition.alpha[node]
        pos = ctrl_pos.get(node)
        if pos is not None:
            rhs[r] = a * partition.w[node].deriv(float(u[pos]))
        for c, other in enumerate(free):
            mat[r, c] -= (1.0 - a) * law[node, t_index[other]]
    sol = np.linalg.solve(mat, rhs)
    out = {node: float(v) for node, v in zip(free, sol)}
    for node in terminal:
        if node in stubborn:
            out[node] = 0.0
    return out


def partial_fast_update(
    grad_vec: dict[int, float],
    node: int,
    probed: int,
    partition: AgentPartition,
    u: np.ndarray,
    clocks: LocalClocks,
    schedule: StepSchedule,
) -> dict[int, float]:
    """Relax one scalar toward its probe-event target; stubborn entries stay 0."""
    if node in partition.stubborn:
        return grad_vec
    new = dict(grad_vec)
    a = partition.alpha[node]
    pos = partition.control_index().get(node)
    own = a * partition.w[node].deriv(float(u[pos])) if pos is not None else 0.0
    step = schedule.a(clocks.value(node))
    target = own + (1.0 - a) * grad_vec[probed]
    new[node] = grad_vec[node] + step * (target - grad_vec[node])
    clocks.bump([node])
    return new


def partial_slow_update(
    u: np.ndarray,
    grad_vec: dict[int, float],
    partition: AgentPartition,
    k: int,
    schedule: StepSchedule,
    budget: float,
) -> np.ndarray:
    """Projected ascent of each control along its own scalar estimate."""
    direction = np.array([grad_vec[node] for node in partition.controlled])
    return project_budget_simplex(u + schedule.b(k) * direction, budget)


def run_partial(
    graph: InteractionGraph,
    partition: AgentPartition,
    budget: float,
    schedule: StepSchedule,
    n_iters: int,
    seed,
    observed_fraction: float = 0.5,
    hidden: set[int] | None = None,
    u0: np.ndarray | None = None,
    payoff_star: float | None = None,
    collect_timings: bool = False,
) -> Trajectory:
    """Full restricted-observation loop: probe, fast updates, slow step.

    ``hidden`` overrides the random hidden draw; otherwise a fraction
    (1 - observed_fraction) of the non-controlled agents is hidden using the
    run seed.  The logged payoff and gap are for the full objective.
    """
    rng = np.random.default_rng(seed)
    if hidden is None:
        hidden = sample_hidden(partition, 1.0 - observed_fraction, seed)
    observed = observed_set(partition, hidden)
    stubborn = set(partition.stubborn)
    learners = [node for node in observed if node not in stubborn]
    n_ctrl = len(partition.controlled)
    u = np.zeros(n_ctrl) if u0 is None else np.asarray(u0, dtype=float).copy()
    grad_vec = {node: 0.0 for node in observed}
    clocks = LocalClocks.zeros(graph.node_count)
    payoff = payoff_fn(graph, partition)

    ks = [0]
    us = [u.copy()]
    pays = [payoff(u)]
    hop_totals = 0
    times = [] if collect_timings else None
    for k in range(n_iters):
        t0 = time.perf_counter() if collect_timings else 0.0
        snapshot = dict(grad_vec)
        steps = schedule.a(clocks.counts)
        for node in learners:
            token = relay_token(graph, partition, observed, node, rng, stamp=k)
            hop_totals += token.hops
            a = partition.alpha[node]
            pos = partition.control_index().get(node)
            own = a * partition.w[node].deriv(float(u[pos])) if pos is not None else 0.0
            target = own + (1.0 - a) * snapshot[token.terminal]
            grad_vec[node] = snapshot[node] + steps[node] * (target - snapshot[node])
        clocks.bump(learners)
        if n_ctrl:
            u = partial_slow_update(u, grad_vec, partition, k, schedule, budget)
        if collect_timings:
            times.append(time.perf_counter() - t0)
        ks.append(k + 1)
        us.append(u.copy())
        pays.append(payoff(u))

    traj = Trajectory(
        scheme="partial",
        ks=np.array(ks),
        u=np.array(us),
        payoff=np.array(pays),
        iter_seconds=np.array(times) if collect_timings else None,
        extras={
            "grad_vec": dict(grad_vec),
            "observed": observed,
            "hidden": set(hidden),
            "mean_hops": hop_totals / max(1, n_iters * max(1, len(learners))),
        },
    )
    if payoff_star is not None:
        traj.rel_gap = relative_gap(traj.payoff, payoff_star)
    return traj
