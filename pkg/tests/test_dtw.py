import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bitcover.dtw import Cost, DtwConfig, dtw_distance, knn_classify
from bitcover.errors import BandTooNarrow, EmptySeries, EmptyTrainSet


def brute_force_dtw(a, b, cfg=DtwConfig()):
    """Oracle: exhaustive enumeration of monotone warping paths."""
    squared = cfg.cost is Cost.SQUARED

    def cell_cost(i, j):
        if cfg.window_radius is not None and abs(i - j) > cfg.window_radius:
            return math.inf
        d = a[i] - b[j]
        return d * d if squared else abs(d)

    best = {}

    def walk(i, j):
        if (i, j) in best:
            return best[(i, j)]
        c = cell_cost(i, j)
        if i == 0 and j == 0:
            result = c
        else:
            candidates = []
            if i > 0:
                candidates.append(walk(i - 1, j))
            if j > 0:
                candidates.append(walk(i, j - 1))
            if i > 0 and j > 0:
                candidates.append(walk(i - 1, j - 1))
            result = c + min(candidates)
        best[(i, j)] = result
        return result

    return walk(len(a) - 1, len(b) - 1)


class TestDistance:
    def test_identity_zero(self):
        for x in ([1.0], [3.0, 1.0, 4.0, 1.0, 5.0], list(range(20))):
            assert dtw_distance(x, x) == 0.0

    def test_hand_example_abs(self):
        a, b = [1.0, 2.0, 3.0], [2.0, 2.0, 3.0]
        assert dtw_distance(a, b) == pytest.approx(brute_force_dtw(a, b))
        assert dtw_distance(a, b) == pytest.approx(1.0)

    def test_hand_example_with_band(self):
        a, b = [1.0, 2.0, 3.0], [2.0, 2.0, 3.0]
        cfg = DtwConfig(window_radius=1)
        assert dtw_distance(a, b, cfg) == pytest.approx(brute_force_dtw(a, b, cfg))
        assert dtw_distance(a, b, cfg) == pytest.approx(1.0)

    def test_brute_force_equivalence_exhaustive_small(self):
        rng = np.random.default_rng(17)
        for _ in range(60):
            la, lb = int(rng.integers(1, 7)), int(rng.integers(1, 7))
            a = rng.normal(size=la).tolist()
            b = rng.normal(size=lb).tolist()
            for cost in (Cost.ABS, Cost.SQUARED):
                cfg = DtwConfig(cost=cost)
                assert dtw_distance(a, b, cfg) == pytest.approx(
                    brute_force_dtw(a, b, cfg), rel=1e-12, abs=1e-12
                )

    def test_band_matches_brute_force(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            n = int(rng.integers(2, 7))
            a = rng.normal(size=n).tolist()
            b = rng.normal(size=n).tolist()
            cfg = DtwConfig(window_radius=1)
            assert dtw_distance(a, b, cfg) == pytest.approx(
                brute_force_dtw(a, b, cfg), rel=1e-12, abs=1e-12
            )

    @settings(max_examples=80, deadline=None)
    @given(
        st.lists(st.floats(min_value=-100, max_value=100), min_size=1, max_size=16),
        st.lists(st.floats(min_value=-100, max_value=100), min_size=1, max_size=16),
        st.sampled_from([Cost.ABS, Cost.SQUARED]),
    )
    def test_symmetry(self, a, b, cost):
        cfg = DtwConfig(cost=cost)
        assert dtw_distance(a, b, cfg) == pytest.approx(dtw_distance(b, a, cfg))

    def test_zero_distance_implies_matchable(self):
        # for Abs cost with distinct values, distance 0 only for repeats
        assert dtw_distance([1.0, 2.0], [1.0, 1.0, 2.0, 2.0, 2.0]) == 0.0
        assert dtw_distance([1.0, 2.0], [1.0, 2.0, 1.0]) > 0.0

    def test_empty_raises(self):
        with pytest.raises(EmptySeries):
            dtw_distance([], [1.0])
        with pytest.raises(EmptySeries):
            dtw_distance([1.0], [])

    def test_band_too_narrow(self):
        with pytest.raises(BandTooNarrow):
            dtw_distance([1.0] * 10, [1.0] * 2, DtwConfig(window_radius=3))

    def test_radius_validation(self):
        with pytest.raises(ValueError):
            DtwConfig(window_radius=0)


class TestKnn:
    def test_exact_match_wins_k1(self):
        train = [[0.0, 0.0], [5.0, 5.0], [9.0, 9.0]]
        labels = [0, 1, 2]
        assert knn_classify(train, labels, [5.0, 5.0], k=1) == 1

    def test_majority_vote_k3(self):
        # nearest is class 1, but classes 0 holds the 2nd and 3rd neighbors
        train = [[0.0], [0.4], [0.6], [10.0]]
        labels = [1, 0, 0, 1]
        distances = [dtw_distance(t, [0.1]) for t in train]
        order = np.argsort(distances)[:3]
        assert labels[order[0]] == 1
        assert knn_classify(train, labels, [0.1], k=3) == 0

    def test_tie_breaks_by_summed_distance(self):
        train = [[0.0], [1.0], [10.0], [11.0]]
        labels = [0, 0, 1, 1]
        # k=4: both classes have 2 votes; class 0 is closer in sum
        assert knn_classify(train, labels, [0.5], k=4) == 0

    def test_tie_breaks_by_lowest_class_index(self):
        train = [[-1.0], [1.0]]
        labels = [1, 0]
        # symmetric distances, one vote each, equal sums -> lowest class index
        assert knn_classify(train, labels, [0.0], k=2) == 0

    def test_k_out_of_range(self):
        with pytest.raises(EmptyTrainSet):
            knn_classify([[1.0]], [0], [1.0], k=2)

    def test_empty_train_set(self):
        with pytest.raises(EmptyTrainSet):
            knn_classify([], [], [1.0], k=1)


class TestScalingShape:
    def test_cost_grows_quadratically_in_cells(self):
        # structural check: cell count doubles four-fold when T doubles
        import time

        rng = np.random.default_rng(0)
        a = rng.normal(size=256).tolist()
        b = rng.normal(size=256).tolist()
        t0 = time.perf_counter()
        dtw_distance(a, b)
        small = time.perf_counter() - t0
        a2 = rng.normal(size=512).tolist()
        b2 = rng.normal(size=512).tolist()
        t0 = time.perf_counter()
        dtw_distance(a2, b2)
        large = time.perf_counter() - t0
        assert large > small  # full [3.0, 5.5] window checked at acceptance scale
