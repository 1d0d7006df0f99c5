"""Unbiased payoff-gradient estimates from absorbed random-walk samples.

Two samplers produce, per walk from a start node, a row of nonnegative
contributions over the controlled columns whose expectation equals the
start node's row of the sensitivity fixed point divided by w'.  Scheme 1
kills the walk at a controlled node with probability alpha and scores an
indicator; scheme 2 moves by the raw poll matrix, carries the running
survival weight explicitly, and scores weight * alpha at every visited
node, which averages out the kill coin (same mean, lower variance).
Column-summing over one walk per start node gives the gradient estimate
(up to the known w' factor) consumed by a projected stochastic ascent.
"""

from __future__ import annotations

import time

import numpy as np

from .dynamics import payoff_fn
from .errors import NonAbsorbingError
from .network import AgentPartition, InteractionGraph
from .optim import Trajectory, project_budget_simplex, relative_gap

WALK_STEP_CAP = 10_000_000


def _walk_batch(
    graph: InteractionGraph,
    partition: AgentPartition,
    starts: np.ndarray,
    scheme: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Simulate one walk per start; returns contributions (len(starts), |S|)."""
    if scheme not in (1, 2):
        raise ValueError(f"unknown sampling scheme {scheme}")
    n_walks = len(starts)
    n_ctrl = len(partition.controlled)
    contrib = np.zeros((n_walks, n_ctrl))
    if n_walks == 0:
        return contrib

    cdf = graph.poll_cdf()
    alpha = partition.alpha
    stubborn = np.zeros(graph.node_count, dtype=bool)
    stubborn[list(partition.stubborn)] = True
    pos_of = np.full(graph.node_count, -1, dtype=int)
    for node, pos in partition.control_index().items():
        pos_of[node] = pos
    if np.any(stubborn[starts]):
        raise ValueError("walks must start outside the stubborn set")

    pos = starts.astype(int).copy()
    rows = np.arange(n_walks)
    alive = np.ones(n_walks, dtype=bool)
    weight = np.ones(n_walks)

    if scheme == 2:
        # arrival contribution at the start node itself
        owns = pos_of[pos] >= 0
        contrib[rows[owns], pos_of[pos[owns]]] += weight[owns] * alpha[pos[owns]]

    steps = 0
    while alive.any():
        steps += 1
        if steps > WALK_STEP_CAP:
            stuck = int(starts[np.flatnonzero(alive)[0]])
            raise NonAbsorbingError(
                f"walk from node {stuck} exceeded {WALK_STEP_CAP} steps"
            )
        idx = np.flatnonzero(alive)
        cur = pos[idx]

        if scheme == 1:
            absorbed = stubborn[cur]
            alive[idx[absorbed]] = False
            live = idx[~absorbed]
            cur = pos[live]
            coin = rng.random(len(live))
            killed = coin < alpha[cur]
            hit = live[killed]
            cp = pos_of[pos[hit]]
            contrib[hit, cp] += 1.0
            alive[hit] = False
            movers = live[~killed]
        else:
            movers = idx

        if len(movers) == 0:
            continue
        r = rng.random(len(movers))
        nxt = (r[:, None] < cdf[pos[movers]]).argmax(axis=1)

        if scheme == 2:
            prev = pos[movers]
            arrived_s0 = stubborn[nxt]
            alive[movers[arrived_s0]] = False
            go = ~arrived_s0
            mv = movers[go]
            weight[mv] *= 1.0 - alpha[prev[go]]
            dead_weight = weight[mv] == 0.0
            tgt = nxt[go]
            owns = pos_of[tgt] >= 0
            contrib[mv[owns], pos_of[tgt[owns]]] += weight[mv[owns]] * alpha[tgt[owns]]
            pos[mv] = tgt
            # zero-weight walks can contribute nothing further
            alive[mv[dead_weight]] = False
        else:
            pos[movers] = nxt

    return contrib


def sample_killed_walk(
    graph: InteractionGraph,
    partition: AgentPartition,
    start: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Scheme 1: absorb at stubborn nodes, stop at node y w.p. alpha_y scoring 1."""
    return _walk_batch(graph, partition, np.array([start]), 1, rng)[0]


def sample_weighted_walk(
    graph: InteractionGraph,
    partition: AgentPartition,
    start: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Scheme 2: move by the poll matrix, score weight * alpha at each visit."""
    return _walk_batch(graph, partition, np.array([start]), 2, rng)[0]


def sgd_step(
    u: np.ndarray,
    xi_colsums: np.ndarray,
    k: int,
    partition: AgentPartition,
    budget: float,
    step_A: float = 0.6,
    block: int = 100,
) -> np.ndarray:
    """One projected ascent step u <- proj(u + a(k) * w'(u) * colsums).

    The step sequence is a(k) = step_A / ceil(k / block), with a(0) = step_A.
    """
    step = step_A / max(1.0, np.ceil(k / block))
    return project_budget_simplex(u + step * partition.w_derivs(u) * xi_colsums, budget)


def run_sgd(
    graph: InteractionGraph,
    partition: AgentPartition,
    budget: float,
    scheme: int,
    n_iters: int,
    seed,
    step_A: float = 0.6,
    block: int = 100,
    u0: np.ndarray | None = None,
    payoff_star: float | None = None,
    uniform_single_start: bool = False,
    collect_timings: bool = False,
) -> Trajectory:
    """Stochastic gradient ascent fed by one walk per start node per iteration.

    With uniform_single_start a single random start is used instead, which
    scales the estimator by a constant and therefore only rescales the step.
    """
    rng = np.random.default_rng(seed)
    n_ctrl = len(partition.controlled)
    u = np.zeros(n_ctrl) if u0 is None else np.asarray(u0, dtype=float).copy()
    payoff = payoff_fn(graph, partition)
    starts_all = np.array(
        sorted(set(range(graph.node_count)) - set(partition.stubborn)), dtype=int
    )

    ks = [0]
    us = [u.copy()]
    pays = [payoff(u)]
    times = [] if collect_timings else None
    for k in range(n_iters):
        t0 = time.perf_counter() if collect_timings else 0.0
        if len(starts_all) and n_ctrl:
            if uniform_single_start:
                starts = starts_all[rng.integers(len(starts_all), size=1)]
            else:
                starts = starts_all
            contrib = _walk_batch(graph, partition, starts, scheme, rng)
            u = sgd_step(u, contrib.sum(axis=0), k, partition, budget, step_A, block)
        if collect_timings:
            times.append(time.perf_counter() - t0)
        ks.append(k + 1)
        us.append(u.copy())
        pays.append(payoff(u))

    traj = Trajectory(
        scheme=f"sgd{scheme}",
        ks=np.array(ks),
        u=np.array(us),
        payoff=np.array(pays),
        iter_seconds=np.array(times) if collect_timings else None,
    )
    if payoff_star is not None:
        traj.rel_gap = relative_gap(traj.payoff, payoff_star)
    return traj
