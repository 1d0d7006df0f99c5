"""Budget projection, step schedules, and the exact gradient baseline.

The feasible control set is the budget simplex {u >= 0, sum(u) <= M}.  The
exact gradient of the total payoff is available in closed form because the
stationary system matrix does not depend on u; projected ascent on it is
the off-line baseline every learning scheme is measured against.  Since the
objective is separable and concave in u, the true maximizer is also
computed directly by water-filling on the marginal payoffs, which serves as
the gap reference for experiment runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import payoff_coefficients, payoff_fn
from .network import AgentPartition, InteractionGraph


@dataclass(frozen=True)
class StepSchedule:
    """The two step-size sequences used by the learning schemes.

    a(k) = A / ceil((1 + k*log(1+k)) / denom)   (natural log)
    b(k) = B / ceil(k / denom) for k >= 1, with b(0) = B.
    """

    A: float = 0.6
    B: float = 0.6
    denom: int = 100

    def a(self, k):
        k = np.asarray(k, dtype=float)
        out = self.A / np.ceil((1.0 + k * np.log1p(k)) / self.denom)
        return float(out) if out.ndim == 0 else out

    def b(self, k):
        k = np.asarray(k, dtype=float)
        out = self.B / np.maximum(np.ceil(k / self.denom), 1.0)
        return float(out) if out.ndim == 0 else out


@dataclass
class LocalClocks:
    """Per-agent update counters; the step index for local step sizes."""

    counts: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "LocalClocks":
        return cls(counts=np.zeros(n, dtype=np.int64))

    def value(self, node: int) -> int:
        return int(self.counts[node])

    def bump(self, nodes) -> None:
        self.counts[nodes] += 1


@dataclass
class Trajectory:
    """Per-iteration record of a run: controls, payoff, and optional gap."""

    scheme: str
    ks: np.ndarray
    u: np.ndarray
    payoff: np.ndarray
    rel_gap: np.ndarray | None = None
    iter_seconds: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    def final_u(self) -> np.ndarray:
        return self.u[-1]

    def final_gap(self) -> float:
        if self.rel_gap is None:
            raise ValueError("trajectory carries no gap column")
        return float(self.rel_gap[-1])


def relative_gap(payoff: np.ndarray, payoff_star: float) -> np.ndarray:
    return (payoff_star - np.asarray(payoff)) / payoff_star


def project_budget_simplex(v: np.ndarray, budget: float) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum(x) <= budget}.

    Clip at zero first; if the clipped point fits the budget it is the
    projection, otherwise the budget binds and sorting-based water-filling
    on the face {x >= 0, sum(x) = budget} finishes the job.
    """
    if budget <= 0.0:
        raise ValueError("budget must be positive")
    v = np.asarray(v, dtype=float)
    clipped = np.maximum(v, 0.0)
    if clipped.sum() <= budget:
        return clipped
    dropping = np.sort(v)[::-1]
    csum = np.cumsum(dropping) - budget
    j = np.arange(1, len(v) + 1)
    holds = dropping - csum / j > 0.0
    rho = int(np.max(np.flatnonzero(holds))) + 1
    theta = csum[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def exact_gradient(graph: InteractionGraph, partition: AgentPartition, u: np.ndarray) -> np.ndarray:
    """Closed-form payoff gradient: coefficient * alpha_i * w_i'(u_i) per control."""
    coef = payoff_coefficients(graph, partition)
    idx = list(partition.controlled)
    if not idx:
        return np.zeros(0)
    return coef[idx] * partition.alpha[idx] * partition.w_derivs(u)


def run_exact_gd(
    graph: InteractionGraph,
    partition: AgentPartition,
    budget: float,
    u0: np.ndarray | None = None,
    n_iters: int = 10_000,
    step_scale: float = 1.0,
    payoff_star: float | None = None,
    record_every: int = 1,
) -> Trajectory:
    """Projected gradient ascent with diminishing step step_scale / (k + 1).

    Deterministic; the trajectory records the initial point and every
    ``record_every``-th iterate plus the final one.
    """
    n_ctrl = len(partition.controlled)
    u = np.zeros(n_ctrl) if u0 is None else np.asarray(u0, dtype=float).copy()
    payoff = payoff_fn(graph, partition)
    coef = payoff_coefficients(graph, partition)
    idx = list(partition.controlled)
    alpha_ctrl = partition.alpha[idx] if idx else np.zeros(0)
    c_ctrl = coef[idx] if idx else np.zeros(0)

    ks, us, pays = [0], [u.copy()], [payoff(u)]
    for k in range(n_iters):
        grad = c_ctrl * alpha_ctrl * partition.w_derivs(u) if n_ctrl else np.zeros(0)
        u = project_budget_simplex(u + (step_scale / (k + 1)) * grad, budget) if n_ctrl else u
        if (k + 1) % record_every == 0 or k == n_iters - 1:
            ks.append(k + 1)
            us.append(u.copy())
            pays.append(payoff(u))
    traj = Trajectory(
        scheme="gd",
        ks=np.array(ks),
        u=np.array(us),
        payoff=np.array(pays),
    )
    if payoff_star is not None:
        traj.rel_gap = relative_gap(traj.payoff, payoff_star)
    return traj


def exact_optimum(
    graph: InteractionGraph,
    partition: AgentPartition,
    budget: float,
    tol: float = 1e-12,
) -> tuple[np.ndarray, float]:
    """Exact maximizer of the total payoff over the budget simplex.

    The objective separates across controls, so the optimum equalizes the
    marginal payoffs c_i * alpha_i * w_i'(u_i) at some level lam >= 0; a
    double bisection (outer on lam, inner on each u_i) pins it down.  With
    strictly increasing reward curves the budget binds; if every marginal
    is zero the zero control is returned.
    """
    idx = list(partition.controlled)
    payoff = payoff_fn(graph, partition)
    if not idx:
        return np.zeros(0), payoff(np.zeros(0))
    coef = payoff_coefficients(graph, partition)
    gains = coef[idx] * partition.alpha[idx]
    curves = [partition.w[i] for i in idx]

    def control_at(lam: float) -> np.ndarray:
        # largest u in [0, budget] with gain * w'(u) >= lam, per control
        out = np.zeros(len(idx))
        for pos, (g, curve) in enumerate(zip(gains, curves)):
            if g * curve.deriv(0.0) <= lam:
                continue
            if g * curve.deriv(budget) >= lam:
                out[pos] = budget
                continue
            lo, hi = 0.0, budget
            for _ in range(100):
                mid = 0.5 * (lo + hi)
                if g * curve.deriv(mid) >= lam:
                    lo = mid
                else:
                    hi = mid
            out[pos] = 0.5 * (lo + hi)
        return out

    lam_hi = max(g * c.deriv(0.0) for g, c in zip(gains, curves))
    if lam_hi <= 0.0:
        u_star = np.zeros(len(idx))
        return u_star, payoff(u_star)
    if control_at(0.0).sum() <= budget:
        u_star = control_at(0.0)
        return u_star, payoff(u_star)
    lam_lo = 0.0
    for _ in range(200):
        lam = 0.5 * (lam_lo + lam_hi)
        total = control_at(lam).sum()
        if total > budget:
            lam_lo = lam
        else:
            lam_hi = lam
        if lam_hi - lam_lo < tol * max(1.0, lam_hi):
            break
    u_star = control_at(lam_hi)
    # land exactly on the face when the budget binds
    s = u_star.sum()
    if s > 0:
        u_star = u_star * (budget / s) if abs(s - budget) < 1e-6 else u_star
    return u_star, payoff(u_star)


def stationarity_residual(
    graph: InteractionGraph,
    partition: AgentPartition,
    budget: float,
    u: np.ndarray,
    gamma: float = 1e-3,
) -> float:
    """Norm of the projected-gradient fixed-point defect at u."""
    grad = exact_gradient(graph, partition, u)
    moved = project_budget_simplex(u + gamma * grad, budget)
    return float(np.linalg.norm(moved - u))
