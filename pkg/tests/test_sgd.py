from __future__ import annotations

import numpy as np
import pytest

from opinionshape.curves import SaturatingCurve
from opinionshape.errors import NonAbsorbingError
from opinionshape.network import AgentPartition
from opinionshape.optim import exact_gradient
from opinionshape.sgd import (
    _walk_batch,
    run_sgd,
    sample_killed_walk,
    sample_weighted_walk,
    sgd_step,
)

from helpers import graph_from_P


def two_node_to_stubborn(alpha: float):
    """Controlled node 0 with an edge into stubborn node 1 (self-loop)."""
    P = np.array([[0.0, 1.0], [0.0, 1.0]])
    graph = graph_from_P(P)
    partition = AgentPartition(
        controlled=(0,),
        uncontrolled=(),
        stubborn=(1,),
        alpha=np.array([alpha, 0.0]),
        h={1: 0.5},
        w={0: SaturatingCurve()},
    )
    return graph, partition


class TestKilledWalk:
    def test_certain_stop_scores_start_column(self):
        graph, partition = two_node_to_stubborn(1.0)
        out = sample_killed_walk(graph, partition, 0, np.random.default_rng(0))
        assert out[0] == 1.0

    def test_start_next_to_stubborn_scores_nothing(self):
        # uncontrolled start whose only edge leads into the stubborn set
        P = np.array([[0.0, 1.0], [0.0, 1.0]])
        graph = graph_from_P(P)
        partition = AgentPartition(
            controlled=(),
            uncontrolled=(0,),
            stubborn=(1,),
            alpha=np.zeros(2),
            h={1: 0.2},
            w={},
        )
        out = sample_killed_walk(graph, partition, 0, np.random.default_rng(0))
        assert out.shape == (0,)

    def test_stubborn_start_rejected(self, karate_graph, karate_partition):
        with pytest.raises(ValueError, match="stubborn"):
            sample_killed_walk(karate_graph, karate_partition, karate_partition.stubborn[0], np.random.default_rng(0))

    def test_mean_from_fixed_start_matches_fundamental_matrix(self, karate_graph, karate_partition):
        from opinionshape.network import substochastic_matrix

        start = karate_partition.uncontrolled[0]
        A = substochastic_matrix(karate_graph, karate_partition)
        fundamental = np.linalg.inv(np.eye(34) - A)
        idx = list(karate_partition.controlled)
        target = fundamental[start, idx] * karate_partition.alpha[idx]

        rng = np.random.default_rng(11)
        n = 100_000
        samples = _walk_batch(karate_graph, karate_partition, np.full(n, start), 1, rng)
        mean = samples.mean(axis=0)
        se = samples.std(axis=0, ddof=1) / np.sqrt(n)
        assert np.all(np.abs(mean - target) <= 3 * se + 1e-12)


class TestWeightedWalk:
    def test_certain_stop_contributes_exactly_once(self):
        graph, partition = two_node_to_stubborn(1.0)
        out = sample_weighted_walk(graph, partition, 0, np.random.default_rng(0))
        assert out[0] == 1.0

    def test_zero_alpha_contributes_nothing(self):
        graph, partition = two_node_to_stubborn(0.0)
        out = sample_weighted_walk(graph, partition, 0, np.random.default_rng(0))
        assert out[0] == 0.0

    def test_same_mean_lower_variance_than_killed(self, karate_graph, karate_partition):
        from opinionshape.network import substochastic_matrix

        start = karate_partition.controlled[0]
        A = substochastic_matrix(karate_graph, karate_partition)
        fundamental = np.linalg.inv(np.eye(34) - A)
        idx = list(karate_partition.controlled)
        target = fundamental[start, idx] * karate_partition.alpha[idx]

        n = 60_000
        killed = _walk_batch(karate_graph, karate_partition, np.full(n, start), 1, np.random.default_rng(3))
        weighted = _walk_batch(karate_graph, karate_partition, np.full(n, start), 2, np.random.default_rng(4))
        for samples in (killed, weighted):
            mean = samples.mean(axis=0)
            se = samples.std(axis=0, ddof=1) / np.sqrt(n)
            assert np.all(np.abs(mean - target) <= 3 * se + 1e-12)
        assert np.all(weighted.var(axis=0) <= killed.var(axis=0) + 1e-12)

    def test_variance_stable_across_batches(self, karate_graph, karate_partition):
        # second moments should not drift between independent batches
        start = karate_partition.controlled[0]
        batches = []
        for seed in (100, 101):
            rng = np.random.default_rng(seed)
            samples = _walk_batch(karate_graph, karate_partition, np.full(5000, start), 2, rng)
            batches.append(samples.var(axis=0, ddof=1))
        ratio = batches[0] / np.maximum(batches[1], 1e-12)
        assert np.all(ratio > 0.5) and np.all(ratio < 2.0)

    def test_weight_bounded_by_one_and_nonincreasing_effect(self, karate_graph, karate_partition):
        rng = np.random.default_rng(9)
        out = _walk_batch(
            karate_graph, karate_partition,
            np.array(karate_partition.uncontrolled[:5]), 2, rng,
        )
        assert np.all(out >= 0.0)
        # each visit contributes weight*alpha <= 1, and weights only shrink
        assert np.all(out <= 1.0 / min(a for a in karate_partition.alpha[list(karate_partition.controlled)]) + 1e-9)


class TestNonAbsorbing:
    def test_walk_without_exit_raises(self):
        # two uncontrolled nodes polling each other: nothing ever stops a
        # scheme-2 walk, so the step cap must fire
        import opinionshape.sgd as sgd_mod

        P = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        graph = graph_from_P(P)
        partition = AgentPartition(
            controlled=(2,),
            uncontrolled=(0, 1),
            stubborn=(),
            alpha=np.array([0.0, 0.0, 0.5]),
            h={},
            w={2: SaturatingCurve()},
        )
        old_cap = sgd_mod.WALK_STEP_CAP
        sgd_mod.WALK_STEP_CAP = 5_000
        try:
            with pytest.raises(NonAbsorbingError):
                _walk_batch(graph, partition, np.array([0]), 2, np.random.default_rng(0))
        finally:
            sgd_mod.WALK_STEP_CAP = old_cap


class TestSgdStep:
    def test_zero_contributions_keep_control(self, karate_partition, budget):
        u = np.array([1.0, 0.5, 0.2])
        out = sgd_step(u, np.zeros(3), 4, karate_partition, budget)
        assert np.array_equal(out, u)

    def test_single_agent_drift(self, budget):
        graph, partition = two_node_to_stubborn(1.0)
        u = np.array([0.0])
        out = sgd_step(u, np.array([1.0]), 0, partition, budget, step_A=0.6, block=100)
        assert out[0] == pytest.approx(min(budget, 0.6 * partition.w[0].deriv(0.0)))

    def test_step_sequence_blocks(self, karate_partition, budget):
        # a(k) = A/ceil(k/block): constant within a block, halves at the next
        u = np.zeros(3)
        seen = []
        for k in (0, 100, 101):
            out = sgd_step(u, np.full(3, 0.01), k, karate_partition, budget, step_A=0.6, block=100)
            assert out.sum() < budget
            seen.append(out[0])
        assert seen[0] == seen[1]
        assert seen[2] == pytest.approx(seen[0] / 2)

    def test_average_drift_matches_exact_gradient_direction(
        self, karate_graph, karate_partition, budget
    ):
        u = np.array([0.7, 0.7, 0.7])
        grad = exact_gradient(karate_graph, karate_partition, u)
        starts = np.array(sorted(set(range(34)) - set(karate_partition.stubborn)))
        rng = np.random.default_rng(21)
        n = 10_000
        drifts = np.zeros((n, 3))
        wd = karate_partition.w_derivs(u)
        for it in range(n):
            drifts[it] = wd * _walk_batch(karate_graph, karate_partition, starts, 1, rng).sum(axis=0)
        mean = drifts.mean(axis=0)
        se = drifts.std(axis=0, ddof=1) / np.sqrt(n)
        assert np.all(np.abs(mean - grad) <= 3 * se)


class TestRunSgd:
    def test_no_controlled_agents_constant(self, schedule, budget):
        from helpers import all_stubborn_instance

        graph, partition = all_stubborn_instance(4, 0.5)
        traj = run_sgd(graph, partition, budget, 1, 10, seed=0)
        assert traj.u.shape == (11, 0)

    def test_gap_shrinks_on_karate(self, karate_graph, karate_partition, budget, karate_optimum):
        _, payoff_star = karate_optimum
        traj = run_sgd(
            karate_graph, karate_partition, budget, 1, 800, seed=2, payoff_star=payoff_star
        )
        assert traj.rel_gap[-1] < 0.02
        assert np.all(traj.u.sum(axis=1) <= budget + 1e-9)

    def test_scheme2_runs_and_records(self, karate_graph, karate_partition, budget, karate_optimum):
        _, payoff_star = karate_optimum
        traj = run_sgd(
            karate_graph, karate_partition, budget, 2, 300, seed=2, payoff_star=payoff_star
        )
        assert len(traj.ks) == 301
        assert traj.scheme == "sgd2"

    def test_uniform_single_start_variant(self, karate_graph, karate_partition, budget):
        traj = run_sgd(
            karate_graph, karate_partition, budget, 1, 200, seed=7, uniform_single_start=True
        )
        assert len(traj.ks) == 201

    def test_deterministic_given_seed(self, karate_graph, karate_partition, budget):
        t1 = run_sgd(karate_graph, karate_partition, budget, 1, 50, seed=42)
        t2 = run_sgd(karate_graph, karate_partition, budget, 1, 50, seed=42)
        assert np.array_equal(t1.u, t2.u)
