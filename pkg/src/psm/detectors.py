"""Detection statistics, thresholds and the resulting binary tests."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceededError, ConfigError
from .model import ModelConfig, Observation, Rectangle

DEFAULT_DELTA = 0.5
DEFAULT_SD_BUDGET = 2_000_000  # row subsets enumerated by the arbitrary scan
_SD_CHUNK = 4096


def _matrix(X) -> np.ndarray:
    return X.data if isinstance(X, Observation) else np.asarray(X, dtype=np.float64)


class PrefixSumTable:
    """Summed-area table: ``table[i, j] = sum(X[:i, :j])``, zero-padded."""

    def __init__(self, X):
        data = _matrix(X)
        n = data.shape[0]
        table = np.zeros((n + 1, n + 1), dtype=np.float64)
        np.cumsum(np.cumsum(data, axis=0), axis=1, out=table[1:, 1:])
        table.setflags(write=False)
        self.n = n
        self.table = table

    def window_sum(self, row: int, col: int, k: int) -> float:
        t = self.table
        return float(t[row + k, col + k] - t[row, col + k] - t[row + k, col] + t[row, col])

    def window_sums(self, k: int) -> np.ndarray:
        """All k-by-k window sums; entry ``[r, c]`` is the window at corner ``(r, c)``."""
        if not 1 <= k <= self.n:
            raise ConfigError(f"window size k={k} outside [1, {self.n}]")
        t = self.table
        return t[k:, k:] - t[:-k, k:] - t[k:, :-k] + t[:-k, :-k]


@dataclass(frozen=True)
class DetectionOutcome:
    test: str
    statistic: float
    threshold: float
    decision: int
    argmax_window: Rectangle | None = None

    def to_record(self) -> dict:
        rec = {
            "test": self.test,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "decision": self.decision,
        }
        if self.argmax_window is not None:
            rec["corner"] = list(self.argmax_window.corner)
        return rec


def _outcome(test, statistic, threshold, window=None) -> DetectionOutcome:
    return DetectionOutcome(test, float(statistic), float(threshold), int(statistic >= threshold), window)


def sum_statistic(X) -> float:
    return float(np.sum(_matrix(X)))


def scan_statistic_consecutive(X, k: int) -> tuple[float, Rectangle]:
    """Largest contiguous k-by-k window sum and its window.

    Ties go to the lexicographically smallest ``(row, col)`` corner, which is
    what ``argmax`` over the row-major window grid returns.
    """
    sums = PrefixSumTable(X).window_sums(k)
    flat = int(np.argmax(sums))
    r, c = divmod(flat, sums.shape[1])
    return float(sums[r, c]), Rectangle.window(r, c, k)


def scan_statistic_arbitrary(X, k: int, budget: int = DEFAULT_SD_BUDGET, return_window: bool = False):
    """Largest sum over all k-by-k submatrices with arbitrary row/column sets.

    For a fixed row set S the best column set is the k columns with the
    largest column sums over S, so the maximum over (S, T) equals the maximum
    over S of the sum of the k largest entries of ``X[S].sum(axis=0)``. This
    reduces the search from binom(n, k)**2 pairs to binom(n, k) row subsets.
    """
    data = _matrix(X)
    n = data.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"k={k} outside [1, {n}]")
    count = math.comb(n, k)
    if count > budget:
        raise BudgetExceededError(f"binom({n}, {k}) = {count} row subsets exceeds the enumeration budget {budget}")
    best, best_rows = -math.inf, None
    combos = itertools.combinations(range(n), k)
    while True:
        chunk = np.array(list(itertools.islice(combos, _SD_CHUNK)), dtype=np.intp)
        if chunk.size == 0:
            break
        colsums = data[chunk].sum(axis=1)
        if k < n:
            top = np.partition(colsums, n - k, axis=1)[:, n - k:]
        else:
            top = colsums
        vals = top.sum(axis=1)
        i = int(np.argmax(vals))
        if vals[i] > best:
            best, best_rows = float(vals[i]), chunk[i]
    if not return_window:
        return best
    colsums = data[best_rows].sum(axis=0)
    cols = np.sort(np.argsort(-colsums, kind="stable")[:k])
    return best, Rectangle(tuple(best_rows.tolist()), tuple(cols.tolist()))


def tau_sum(config: ModelConfig) -> float:
    """Sum-test threshold ``m k^2 lam / 2``."""
    if config.lam <= 0:
        raise ConfigError("the sum test needs lam > 0 (its threshold degenerates to 0)")
    return config.m * config.k**2 * config.lam / 2


def _log_binom(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def tau_scan_sd(n: int, k: int, delta: float = DEFAULT_DELTA) -> float:
    if delta <= 0 or not 1 <= k <= n:
        raise ConfigError(f"need delta > 0 and 1 <= k <= n (got delta={delta}, k={k}, n={n})")
    # lgamma round-off can make log binom(n, n) a hair negative
    return math.sqrt((4 + delta) * k**2 * max(_log_binom(n, k), 0.0))


def tau_scan_csd(n: int, k: int, delta: float = DEFAULT_DELTA) -> float:
    if delta <= 0 or not 1 <= k <= n:
        raise ConfigError(f"need delta > 0 and 1 <= k <= n (got delta={delta}, k={k}, n={n})")
    return math.sqrt((4 + delta) * k**2 * math.log(n))


def test_sum(X, config: ModelConfig) -> DetectionOutcome:
    return _outcome("sum", sum_statistic(X), tau_sum(config))


def test_scan_csd(X, config: ModelConfig, delta: float = DEFAULT_DELTA) -> DetectionOutcome:
    stat, window = scan_statistic_consecutive(X, config.k)
    return _outcome("scan_csd", stat, tau_scan_csd(config.n, config.k, delta), window)


def test_scan_sd(X, config: ModelConfig, delta: float = DEFAULT_DELTA, budget: int = DEFAULT_SD_BUDGET) -> DetectionOutcome:
    stat, window = scan_statistic_arbitrary(X, config.k, budget=budget, return_window=True)
    return _outcome("scan_sd", stat, tau_scan_sd(config.n, config.k, delta), window)


# keep pytest from collecting the test_* functions above when imported into test modules
for _fn in (test_sum, test_scan_csd, test_scan_sd):
    _fn.__test__ = False
