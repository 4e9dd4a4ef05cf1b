import itertools
import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from psm.detectors import (
    PrefixSumTable,
    scan_statistic_arbitrary,
    scan_statistic_consecutive,
    sum_statistic,
    tau_scan_csd,
    tau_scan_sd,
    tau_sum,
    test_scan_csd,
    test_scan_sd,
    test_sum,
)
from psm.errors import BudgetExceededError, ConfigError
from psm.model import ModelConfig, Observation


def naive_windows(X, k):
    n = X.shape[0]
    return np.array([[X[r:r + k, c:c + k].sum() for c in range(n - k + 1)] for r in range(n - k + 1)])


def brute_arbitrary(X, k):
    n = X.shape[0]
    subsets = list(itertools.combinations(range(n), k))
    return max(X[np.ix_(r, c)].sum() for r in subsets for c in subsets)


class TestPrefixSums:
    def test_table_padding(self):
        X = np.arange(9.0).reshape(3, 3)
        t = PrefixSumTable(X).table
        assert t.shape == (4, 4)
        assert np.all(t[0] == 0) and np.all(t[:, 0] == 0)
        assert t[3, 3] == X.sum()

    def test_window_sums_match_naive(self, rng):
        X = rng.standard_normal((9, 9))
        P = PrefixSumTable(X)
        for k in range(1, 10):
            np.testing.assert_allclose(P.window_sums(k), naive_windows(X, k), rtol=1e-12, atol=1e-12)
        assert P.window_sum(2, 3, 4) == pytest.approx(X[2:6, 3:7].sum(), rel=1e-12)

    def test_immutable(self):
        P = PrefixSumTable(np.ones((3, 3)))
        with pytest.raises(ValueError):
            P.table[1, 1] = 0

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 10)).map(lambda t: (t[0], t[0])),
                  elements=st.floats(-1e3, 1e3)), st.data())
    def test_property_scan_vs_naive(self, X, data):
        k = data.draw(st.integers(1, X.shape[0]))
        value, window = scan_statistic_consecutive(X, k)
        sums = naive_windows(X, k)
        assert value == pytest.approx(sums.max(), rel=1e-9, abs=1e-9)
        r, c = window.corner
        assert sums[r, c] == pytest.approx(sums.max(), rel=1e-9, abs=1e-9)


class TestScan:
    def test_tie_break_is_lexicographic(self):
        X = np.zeros((5, 5))
        value, window = scan_statistic_consecutive(X, 2)
        assert value == 0 and window.corner == (0, 0)
        X[3, 1] = X[1, 3] = 1.0
        _, window = scan_statistic_consecutive(X, 1)
        assert window.corner == (1, 3)

    def test_full_window_is_total(self, rng):
        X = rng.standard_normal((6, 6))
        assert scan_statistic_consecutive(X, 6)[0] == pytest.approx(X.sum())
        assert scan_statistic_arbitrary(X, 6) == pytest.approx(X.sum())

    def test_k1_is_max_entry(self, rng):
        X = rng.standard_normal((7, 7))
        assert scan_statistic_consecutive(X, 1)[0] == pytest.approx(X.max(), rel=1e-12)
        assert scan_statistic_arbitrary(X, 1) == X.max()

    @pytest.mark.parametrize("n, k", [(4, 2), (5, 2), (6, 3), (7, 2)])
    def test_arbitrary_vs_brute_force(self, rng, n, k):
        for _ in range(10):
            X = rng.standard_normal((n, n))
            assert scan_statistic_arbitrary(X, k) == pytest.approx(brute_arbitrary(X, k), rel=1e-12)

    def test_arbitrary_window(self, rng):
        X = rng.standard_normal((7, 7))
        value, rect = scan_statistic_arbitrary(X, 3, return_window=True)
        assert X[np.ix_(rect.rows, rect.cols)].sum() == pytest.approx(value)
        assert value >= scan_statistic_consecutive(X, 3)[0] - 1e-12

    def test_arbitrary_budget(self):
        with pytest.raises(BudgetExceededError):
            scan_statistic_arbitrary(np.zeros((40, 40)), 20)


class TestThresholds:
    def test_tau_sum(self):
        assert tau_sum(ModelConfig(n=100, k=30, m=2, lam=0.5)) == 2 * 900 * 0.5 / 2
        with pytest.raises(ConfigError):
            tau_sum(ModelConfig(n=10, k=2))

    @pytest.mark.parametrize("n, k", [(10, 3), (100, 10), (1000, 37), (10**6, 1000)])
    def test_tau_sd_high_precision(self, n, k):
        mpmath.mp.dps = 50
        ref = mpmath.sqrt(mpmath.mpf(4.5) * k**2 * mpmath.log(mpmath.binomial(n, k)))
        assert tau_scan_sd(n, k) == pytest.approx(float(ref), rel=1e-12)

    def test_tau_csd(self):
        assert tau_scan_csd(256, 16) == pytest.approx(math.sqrt(4.5 * 256 * math.log(256)), rel=1e-15)
        assert tau_scan_csd(256, 16, delta=1.0) == pytest.approx(math.sqrt(5 * 256 * math.log(256)))

    def test_monotone_in_n(self):
        vals = [tau_scan_csd(n, 5) for n in range(5, 200)]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_degenerate_sd(self):
        assert tau_scan_sd(7, 7) == 0.0

    @pytest.mark.parametrize("fn", [tau_scan_sd, tau_scan_csd])
    def test_invalid(self, fn):
        with pytest.raises(ConfigError):
            fn(10, 3, delta=0)
        with pytest.raises(ConfigError):
            fn(10, 11)


class TestTests:
    def test_decisions_and_records(self):
        cfg = ModelConfig(n=4, k=2, lam=1.0)
        X = Observation(np.full((4, 4), 0.25))
        out = test_sum(X, cfg)
        assert out.statistic == 4.0 and out.threshold == 2.0 and out.decision == 1
        rec = out.to_record()
        assert set(rec) == {"test", "statistic", "threshold", "decision"}
        json.dumps(rec)
        assert sum_statistic(X) == 4.0

    def test_threshold_equality_rejects(self):
        # T >= tau counts as a detection
        cfg = ModelConfig(n=2, k=1, lam=2.0)
        assert test_sum(np.array([[1.0, 0.0], [0.0, 0.0]]), cfg).decision == 1

    def test_scan_records_corner(self, rng):
        X = rng.standard_normal((10, 10))
        X[4:7, 2:5] += 10
        out = test_scan_csd(X, ModelConfig(n=10, k=3))
        assert out.decision == 1
        assert out.to_record()["corner"] == [4, 2]
        sd = test_scan_sd(X, ModelConfig(n=10, k=3, variant="arbitrary"))
        assert sd.statistic >= out.statistic - 1e-12
        assert sd.threshold > out.threshold
