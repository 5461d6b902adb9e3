import logging

import numpy as np
import pytest

from pgbj.metric import Dataset, MetricKind, cdist
from pgbj.pivots import (
    PivotSet,
    SelectionConfig,
    Strategy,
    dedupe,
    farthest_order,
    lloyd,
    select_farthest,
    select_kmeans,
    select_pivots,
    select_random,
)

from conftest import line


class TestRandom:
    def test_best_pair_on_a_line(self):
        R = line("R", [0, 1, 10])
        pv = select_random(R, SelectionConfig(Strategy.RANDOM, num_pivots=2, num_trials=30, seed=4))
        assert sorted(pv.coords[:, 0].tolist()) == [0.0, 10.0]

    @pytest.mark.parametrize("trials", [1, 3])
    def test_m_equals_population(self, trials):
        R = line("R", [3, 1, 2])
        pv = select_random(R, SelectionConfig(num_pivots=3, num_trials=trials))
        assert sorted(pv.coords[:, 0].tolist()) == [1.0, 2.0, 3.0]

    def test_deterministic_under_seed(self, rng):
        R = Dataset.from_array("R", rng.random((100, 2)))
        cfg = SelectionConfig(Strategy.RANDOM, num_pivots=4, num_trials=5, seed=17)
        a, b = select_random(R, cfg), select_random(R, cfg)
        assert np.array_equal(a.coords, b.coords)
        assert len(a) == 4

    def test_too_many_pivots(self):
        with pytest.raises(ValueError, match="cannot select"):
            select_random(line("R", [0, 1]), SelectionConfig(num_pivots=3))


class TestFarthest:
    def test_forced_first(self):
        R = line("R", [0, 4, 5])
        pv = select_farthest(R, SelectionConfig(Strategy.FARTHEST, num_pivots=2), first=1)
        assert pv.coords[:, 0].tolist() == [4.0, 0.0]

    def test_single_pivot_is_the_seeded_first(self):
        R = line("R", [0, 4, 5])
        pv = select_farthest(R, SelectionConfig(Strategy.FARTHEST, num_pivots=1), first=2)
        assert pv.coords[:, 0].tolist() == [5.0]

    def test_trace_in_plane(self):
        sample = np.array([[0.0, 0.0], [10.0, 0.0], [5.0, 1.0]])
        assert farthest_order(sample, 3, 0, MetricKind.L2) == [0, 1, 2]

    def test_replay_argmax_of_summed_distance(self, rng):
        sample = rng.random((60, 3))
        order = farthest_order(sample, 12, 5, MetricKind.L1)
        d = cdist(sample, sample, MetricKind.L1)
        for step in range(1, len(order)):
            chosen = order[:step]
            score = d[:, chosen].sum(axis=1)
            score[chosen] = -np.inf
            assert order[step] == int(np.argmax(score))
        assert len(set(order)) == 12

    def test_uses_sample_of_requested_size(self, rng):
        R = Dataset.from_array("R", rng.random((500, 2)))
        cfg = SelectionConfig(Strategy.FARTHEST, num_pivots=5, sample_size=50, seed=2)
        pv = select_farthest(R, cfg)
        assert len(pv) == 5
        rows = {tuple(r) for r in R.coords}
        assert all(tuple(p) in rows for p in pv.coords)


class TestKMeans:
    def test_two_means_on_four_points(self):
        R = line("R", [0, 1, 9, 10])
        for seed in range(6):
            pv = select_kmeans(R, SelectionConfig(Strategy.KMEANS, num_pivots=2, seed=seed))
            assert sorted(pv.coords[:, 0].tolist()) == [0.5, 9.5]

    def test_m_equals_sample_size(self):
        R = line("R", [0, 3, 7, 8])
        pv = select_kmeans(R, SelectionConfig(Strategy.KMEANS, num_pivots=4, sample_size=4))
        assert sorted(pv.coords[:, 0].tolist()) == [0.0, 3.0, 7.0, 8.0]

    def test_deterministic(self, rng):
        R = Dataset.from_array("R", rng.random((300, 4)))
        cfg = SelectionConfig(Strategy.KMEANS, num_pivots=8, seed=3)
        assert np.array_equal(select_kmeans(R, cfg).coords, select_kmeans(R, cfg).coords)

    def test_empty_cluster_reseeded(self, caplog):
        sample = np.array([[0.0], [1.0], [2.0], [3.0]])
        centers = np.array([[1.5], [100.0]])
        with caplog.at_level(logging.INFO, logger="pgbj.pivots"):
            out = lloyd(sample, centers, 20, MetricKind.L2)
        assert "empty cluster" in caplog.text
        assert np.all(np.abs(out) < 100)


class TestPivotSet:
    def test_dedupe_keeps_first(self):
        pv = dedupe(np.array([[1.0], [0.0], [1.0], [2.0]]), MetricKind.L2)
        assert pv.coords[:, 0].tolist() == [1.0, 0.0, 2.0]

    def test_from_dataset(self):
        pv = PivotSet.from_dataset(line("P", [4, 4, 5]), MetricKind.L1)
        assert len(pv) == 2 and pv.metric is MetricKind.L1
        assert [p.id for p in pv.pivots] == [0, 1]

    @pytest.mark.parametrize("strategy", list(Strategy))
    def test_pivots_are_distinct(self, strategy, rng):
        R = Dataset.from_array("R", rng.integers(0, 3, size=(200, 2)).astype(float))
        pv = select_pivots(R, SelectionConfig(strategy, num_pivots=6, seed=1))
        assert len(np.unique(pv.coords, axis=0)) == len(pv)
