"""Gossip opinion process and its stationary fixed point.

One tick activates a set of agents.  Stubborn agents reset to their pinned
opinion, uncontrolled agents copy a polled neighbor, and controlled agents
copy either the planner's target w_i(u_i) (with probability alpha_i) or a
polled neighbor.  Updates within a tick read the pre-tick opinions.  Every
active non-stubborn agent polls, and the (poller, polled) pairs are the
planner's observable even when the poll's value is discarded in favor of
the planner target; the realized opinion law is unchanged by this
convention.

The stationary mean opinion solves a linear system and doubles as the
constant-policy value of the absorbing-chain view of the same process,
where stubborn states absorb, controlled states discount by (1 - alpha_i),
and the planner target plays the running reward.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InfeasibleError
from .network import (
    ActivationModel,
    AgentPartition,
    InteractionGraph,
    influence_rhs,
    substochastic_matrix,
)

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class OpinionState:
    x: np.ndarray
    k: int = 0


@dataclass(frozen=True)
class PollEvent:
    poller: int
    polled: int


def initial_state(graph: InteractionGraph, partition: AgentPartition, fill: float = 0.5) -> OpinionState:
    """Default start: pinned values on stubborn agents, ``fill`` elsewhere."""
    x = np.full(graph.node_count, fill)
    for i in partition.stubborn:
        x[i] = partition.h[i]
    return OpinionState(x=x, k=0)


def sample_poll_targets(cdf: np.ndarray, pollers: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw one polled neighbor per poller from the row-wise cumulative law."""
    if len(pollers) == 0:
        return np.zeros(0, dtype=int)
    r = rng.random(len(pollers))
    return (r[:, None] < cdf[pollers]).argmax(axis=1)


def gossip_step(
    state: OpinionState,
    u: np.ndarray,
    graph: InteractionGraph,
    partition: AgentPartition,
    activation: ActivationModel,
    rng: np.random.Generator,
) -> tuple[OpinionState, list[PollEvent]]:
    """Advance the opinion vector one tick; return the observed poll events."""
    x_old = state.x
    x_new = x_old.copy()
    n = graph.node_count
    if activation.mode == "synchronous":
        active = np.ones(n, dtype=bool)
    else:
        active = rng.random(n) < activation.q

    stubborn = np.zeros(n, dtype=bool)
    stubborn[list(partition.stubborn)] = True
    pollers = np.flatnonzero(active & ~stubborn)
    polled = sample_poll_targets(graph.poll_cdf(), pollers, rng)

    for i in partition.stubborn:
        if active[i]:
            x_new[i] = partition.h[i]

    ctrl_index = partition.control_index()
    w_vals = partition.w_values(u)
    coins = rng.random(len(pollers))
    for poller, target, coin in zip(pollers, polled, coins):
        pos = ctrl_index.get(int(poller))
        if pos is not None and coin < partition.alpha[poller]:
            x_new[poller] = w_vals[pos]
        else:
            x_new[poller] = x_old[target]

    events = [PollEvent(int(i), int(j)) for i, j in zip(pollers, polled)]
    return OpinionState(x=x_new, k=state.k + 1), events


def stationary_opinion(graph: InteractionGraph, partition: AgentPartition, u: np.ndarray) -> np.ndarray:
    """Solve (Id - A) x = rhs(u) for the long-run mean opinion."""
    A = substochastic_matrix(graph, partition)
    system = np.eye(graph.node_count) - A
    rhs = influence_rhs(partition, u)
    try:
        x = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise InfeasibleError(f"stationary system is singular: {exc}") from exc
    residual = np.max(np.abs(system @ x - rhs))
    if residual > RESIDUAL_TOL:
        # one step of iterative refinement before giving up
        x = x + np.linalg.solve(system, rhs - system @ x)
        residual = np.max(np.abs(system @ x - rhs))
        if residual > RESIDUAL_TOL:
            raise InfeasibleError(f"stationary solve residual {residual:.3e} above tolerance")
    return x


def total_payoff(graph: InteractionGraph, partition: AgentPartition, u: np.ndarray) -> float:
    """Sum of stationary opinions over all agents."""
    return float(stationary_opinion(graph, partition, u).sum())


def payoff_coefficients(graph: InteractionGraph, partition: AgentPartition) -> np.ndarray:
    """Row vector c with total payoff = c . rhs(u); one transposed solve."""
    A = substochastic_matrix(graph, partition)
    system = np.eye(graph.node_count) - A
    try:
        return np.linalg.solve(system.T, np.ones(graph.node_count))
    except np.linalg.LinAlgError as exc:
        raise InfeasibleError(f"stationary system is singular: {exc}") from exc


def payoff_fn(graph: InteractionGraph, partition: AgentPartition) -> Callable[[np.ndarray], float]:
    """Fast closure for the total payoff, for per-iteration logging in runners.

    The system matrix does not depend on u, so the payoff reduces to a dot
    product with precomputed coefficients.
    """
    coef = payoff_coefficients(graph, partition)
    base = sum(coef[i] * partition.h[i] for i in partition.stubborn)
    idx = list(partition.controlled)
    c_ctrl = coef[idx] * partition.alpha[idx]

    def payoff(u: np.ndarray) -> float:
        if len(idx) == 0:
            return float(base)
        return float(base + c_ctrl @ partition.w_values(u))

    return payoff


def empirical_mean_opinion(
    graph: InteractionGraph,
    partition: AgentPartition,
    u: np.ndarray,
    activation: ActivationModel,
    n_steps: int,
    n_runs: int,
    seed,
) -> np.ndarray:
    """Monte-Carlo mean of x(n_steps) across independent trajectories.

    Trajectories are advanced in one vectorized batch; the per-tick
    semantics match gossip_step (pre-tick reads, planner coin on controlled
    agents).
    """
    mean, _ = empirical_opinion_stats(graph, partition, u, activation, n_steps, n_runs, seed)
    return mean


def empirical_opinion_stats(
    graph: InteractionGraph,
    partition: AgentPartition,
    u: np.ndarray,
    activation: ActivationModel,
    n_steps: int,
    n_runs: int,
    seed,
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error of x(n_steps) across runs."""
    rng = np.random.default_rng(seed)
    n = graph.node_count
    x0 = initial_state(graph, partition, fill=0.5).x
    X = np.tile(x0, (n_runs, 1))

    stubborn_idx = np.array(partition.stubborn, dtype=int)
    ctrl_idx = np.array(partition.controlled, dtype=int)
    free_idx = np.array(
        sorted(set(range(n)) - set(partition.stubborn)), dtype=int
    )
    cdf = graph.poll_cdf()
    h_vec = np.array([partition.h[i] for i in partition.stubborn])
    w_vals = partition.w_values(u) if len(ctrl_idx) else np.zeros(0)
    alpha_ctrl = partition.alpha[ctrl_idx] if len(ctrl_idx) else np.zeros(0)

    rows = np.arange(n_runs)
    for _ in range(n_steps):
        X_old = X
        X = X_old.copy()
        if activation.mode == "synchronous":
            active = np.ones((n_runs, n), dtype=bool)
        else:
            active = rng.random((n_runs, n)) < activation.q

        # polls for every non-stubborn agent, column by column
        polled = np.zeros((n_runs, len(free_idx)), dtype=int)
        r = rng.random((n_runs, len(free_idx)))
        for col, node in enumerate(free_idx):
            polled[:, col] = np.searchsorted(cdf[node], r[:, col], side="right")
        copies = X_old[rows[:, None], polled]

        for col, node in enumerate(free_idx):
            mask = active[:, node]
            X[mask, node] = copies[mask, col]

        if len(ctrl_idx):
            coins = rng.random((n_runs, len(ctrl_idx)))
            for pos, node in enumerate(ctrl_idx):
                mask = active[:, node] & (coins[:, pos] < alpha_ctrl[pos])
                X[mask, node] = w_vals[pos]

        if len(stubborn_idx):
            for pos, node in enumerate(stubborn_idx):
                X[active[:, node], node] = h_vec[pos]

    mean = X.mean(axis=0)
    if n_runs > 1:
        se = X.std(axis=0, ddof=1) / np.sqrt(n_runs)
    else:
        se = np.zeros(n)
    return mean, se
