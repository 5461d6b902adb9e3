import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pgbj.metric import Dataset, MetricKind, cdist
from pgbj.oracle import brute_force_knn_join

from conftest import pts, self_join_s


class TestExamples:
    def test_sorted_line(self):
        out = brute_force_knn_join(pts("R", [[0, 0]]), pts("S", [[1, 0], [2, 0], [3, 0]]), 2)
        assert out.neighbors(0) == [(0, 1.0), (1, 2.0)]

    def test_self_join_first_neighbour_is_self(self, rng):
        R = Dataset.from_array("R", rng.random((50, 3)), ids=np.arange(100, 150))
        out = brute_force_knn_join(R, self_join_s(R), 1)
        assert np.array_equal(out.nn_ids[:, 0], out.r_ids)
        assert (out.nn_dists == 0).all()

    def test_k_equals_s(self, rng):
        S = Dataset.from_array("S", rng.random((9, 2)))
        R = Dataset.from_array("R", rng.random((4, 2)))
        out = brute_force_knn_join(R, S, 9)
        for row in range(4):
            assert sorted(out.nn_ids[row].tolist()) == list(range(9))
            assert (np.diff(out.nn_dists[row]) >= 0).all()

    def test_ties_go_to_smaller_id(self):
        S = pts("S", [[1, 0], [-1, 0], [0, 1]], ids=[7, 3, 5])
        out = brute_force_knn_join(pts("R", [[0, 0]]), S, 2)
        assert out.nn_ids[0].tolist() == [3, 5]

    def test_k_larger_than_s(self):
        with pytest.raises(ValueError, match="cross join"):
            brute_force_knn_join(pts("R", [[0, 0]]), pts("S", [[1, 0]]), 2)

    def test_chunking_does_not_matter(self, rng):
        R = Dataset.from_array("R", rng.random((37, 2)))
        S = Dataset.from_array("S", rng.random((20, 2)))
        a = brute_force_knn_join(R, S, 4, chunk=5)
        b = brute_force_knn_join(R, S, 4, chunk=1000)
        assert np.array_equal(a.nn_ids, b.nn_ids) and np.array_equal(a.nn_dists, b.nn_dists)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(list(MetricKind)), st.integers(1, 6))
def test_permutation_invariant_and_matches_sort(seed, metric, k):
    rng = np.random.default_rng(seed)
    R = Dataset.from_array("R", rng.integers(0, 4, (15, 2)).astype(float))
    S = Dataset.from_array("S", rng.integers(0, 4, (12, 2)).astype(float), ids=rng.permutation(40)[:12])
    base = brute_force_knn_join(R, S, k, metric)
    pr, ps = rng.permutation(15), rng.permutation(12)
    shuffled = brute_force_knn_join(R.subset(pr), S.subset(ps), k, metric)
    assert np.array_equal(base.r_ids, shuffled.r_ids)
    assert np.array_equal(base.nn_ids, shuffled.nn_ids)
    d = cdist(R.coords, S.coords, metric)
    for row in range(15):
        want = sorted(zip(d[row].tolist(), S.ids.tolist()))[:k]
        assert base.nn_ids[row].tolist() == [i for _, i in want]
