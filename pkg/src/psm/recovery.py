"""Support estimators for the consecutive model and recovery metrics.

Windows are always linear (non-wrapping) k-by-k blocks. Masking previously
estimated cells with -inf is implemented by excluding every window that
touches a masked cell, which selects the same argmax without non-finite
arithmetic in the prefix sums.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .detectors import PrefixSumTable
from .errors import BudgetExceededError, ConfigError, RecoveryError
from .model import ModelConfig, Rectangle, SupportSet, Variant, overlap, sample_observation, sample_support

DEFAULT_ML_BUDGET = 10**9


class Estimator(str, enum.Enum):
    ML = "ML"
    PEEL = "Peel"
    MODIFIED_PEEL = "ModifiedPeel"


@dataclass(frozen=True)
class RecoveryResult:
    estimator: Estimator
    estimate: SupportSet
    steps: int
    exact: int | None = None
    overlap_cells: int | None = None
    fallback: bool = False

    def to_record(self) -> dict:
        return {
            "estimator": self.estimator.value,
            "corners": [list(c) for c in self.estimate.corners()],
            "steps": self.steps,
            "exact": self.exact,
            "overlap_cells": self.overlap_cells,
        }


def _structural(n: int, k: int, m: int) -> ModelConfig:
    return ModelConfig(n=n, k=k, m=m, variant=Variant.CONSECUTIVE)


def _window_sums(X, k: int) -> np.ndarray:
    return PrefixSumTable(X).window_sums(k)


def ml_exhaustive(X, k: int, m: int, budget: int = DEFAULT_ML_BUDGET) -> SupportSet:
    """Product-disjoint m-tuple of windows with the largest total sum.

    Exact branch and bound over windows sorted by sum: a branch is cut only
    when even its best completion falls strictly short of the incumbent, so
    every tying optimum is visited. Ties are broken by the lexicographically
    smallest sorted corner list.
    """
    sums = _window_sums(X, k)
    p = sums.shape[0]
    n = p + k - 1
    if p ** (2 * m) > budget:
        raise BudgetExceededError(f"(n-k+1)^(2m) = {p}^{2 * m} candidate tuples exceeds the ML budget {budget}")
    flat = sums.ravel()
    order = np.argsort(-flat, kind="stable")
    vals = flat[order].tolist()
    corners = [divmod(int(i), p) for i in order]
    prefix = np.concatenate([[0.0], np.cumsum(flat[order])]).tolist()
    total = len(vals)

    best_val = -math.inf
    best_key: tuple | None = None
    chosen: list[int] = []

    def slack(value: float) -> float:
        return 1e-9 * (1.0 + abs(value))

    def search(start: int, partial: float) -> None:
        nonlocal best_val, best_key
        left = m - len(chosen)
        if left == 0:
            value = math.fsum(vals[i] for i in chosen)
            key = tuple(sorted(corners[i] for i in chosen))
            if value > best_val or (value == best_val and key < best_key):
                best_val, best_key = value, key
            return
        for idx in range(start, total - left + 1):
            bound = partial + (prefix[idx + left] - prefix[idx])
            if best_key is not None and bound < best_val - slack(best_val):
                break
            r, c = corners[idx]
            if any(abs(r - corners[j][0]) < k and abs(c - corners[j][1]) < k for j in chosen):
                continue
            chosen.append(idx)
            search(idx + 1, partial + vals[idx])
            chosen.pop()

    search(0, 0.0)
    if best_key is None:
        raise RecoveryError(f"no {m} disjoint {k}x{k} windows fit in a {n}x{n} matrix")
    rects = tuple(Rectangle.window(r, c, k) for r, c in best_key)
    return SupportSet(rects, _structural(n, k, m))


def _peel(sums: np.ndarray, k: int, m: int) -> list[tuple[int, int]]:
    p = sums.shape[0]
    avail = np.ones_like(sums, dtype=bool)
    picked = []
    for _ in range(m):
        masked = np.where(avail, sums, -np.inf)
        flat = int(np.argmax(masked))
        if not avail.flat[flat]:
            raise RecoveryError(f"peeling ran out of windows after {len(picked)} of {m} steps")
        r, c = divmod(flat, p)
        picked.append((r, c))
        avail[max(0, r - k + 1): r + k, max(0, c - k + 1): c + k] = False
    return picked


def peel(X, k: int, m: int) -> SupportSet:
    """m successive scan argmaxes, each excluding windows that touch earlier picks."""
    sums = _window_sums(X, k)
    n = sums.shape[0] + k - 1
    rects = tuple(Rectangle.window(r, c, k) for r, c in _peel(sums, k, m))
    return SupportSet(rects, _structural(n, k, m))


def decode_blocks(A: np.ndarray, k: int, m: int) -> list[tuple[int, int]] | None:
    """Split a cell indicator into m disjoint k-by-k blocks, or return None.

    The first set cell in row-major order must be the top-left corner of the
    block that contains it, so peeling anchors off in that order recovers the
    unique decomposition whenever one exists.
    """
    B = np.array(A, dtype=bool)
    n = B.shape[0]
    corners = []
    while B.any():
        if len(corners) == m:
            return None
        r, c = divmod(int(np.argmax(B)), n)
        if r + k > n or c + k > n or not B[r:r + k, c:c + k].all():
            return None
        corners.append((r, c))
        B[r:r + k, c:c + k] = False
    return corners if len(corners) == m else None


def _modified_peel(X, k: int, m: int) -> tuple[SupportSet, int, bool]:
    sums = _window_sums(X, k)
    p = sums.shape[0]
    n = p + k - 1
    work = sums.copy()
    A = np.zeros((n, n), dtype=bool)
    target = m * k * k
    for step in range(1, p * p + 1):
        r, c = divmod(int(np.argmax(work)), p)
        work[r, c] = -np.inf
        A[r:r + k, c:c + k] = True
        count = int(A.sum())
        if count == target:
            corners = decode_blocks(A, k, m)
            if corners is not None:
                rects = tuple(Rectangle.window(a, b, k) for a, b in corners)
                return SupportSet(rects, _structural(n, k, m)), step, False
        elif count > target:
            # A only grows, so no later prefix can decode; plain peeling takes over
            rects = tuple(Rectangle.window(a, b, k) for a, b in _peel(sums, k, m))
            return SupportSet(rects, _structural(n, k, m)), step + m, True
    raise RecoveryError(f"modified peeling found no valid decomposition within {p * p} iterations")


def modified_peel(X, k: int, m: int) -> SupportSet:
    """Greedy window selection until the selected cells form m disjoint blocks.

    Each step takes the best window not yet selected (overlaps allowed) and
    adds its cells to an accumulator. The loop stops at the first prefix whose
    accumulated cells number exactly ``m k^2`` and decode into m disjoint
    k-by-k blocks. If the accumulator overshoots ``m k^2`` first, the result
    falls back to :func:`peel`.
    """
    return _modified_peel(X, k, m)[0]


def exact_match(estimate: SupportSet, truth: SupportSet) -> int:
    """1 iff the two supports cover the same cells (rectangle order ignored)."""
    return int(estimate.cells() == truth.cells())


def overlap_fraction(estimate: SupportSet, truth: SupportSet) -> float:
    cfg = truth.config
    return overlap(estimate, truth) / (cfg.m * cfg.k**2)


def estimate_support(X, k: int, m: int, estimator: Estimator | str, ml_budget: int = DEFAULT_ML_BUDGET):
    """Run one estimator; returns ``(support, steps, fallback)``."""
    estimator = Estimator(estimator)
    if estimator is Estimator.ML:
        return ml_exhaustive(X, k, m, budget=ml_budget), 1, False
    if estimator is Estimator.PEEL:
        return peel(X, k, m), m, False
    return _modified_peel(X, k, m)


def score(estimator, support: SupportSet, steps: int, truth: SupportSet | None, fallback: bool = False) -> RecoveryResult:
    if truth is None:
        return RecoveryResult(Estimator(estimator), support, steps, fallback=fallback)
    return RecoveryResult(
        Estimator(estimator), support, steps,
        exact=exact_match(support, truth),
        overlap_cells=overlap(support, truth),
        fallback=fallback,
    )


def recovery_trial(config: ModelConfig, estimator: Estimator | str, rng: np.random.Generator,
                   ml_budget: int = DEFAULT_ML_BUDGET) -> RecoveryResult:
    """Sample a support and an observation, estimate, and score against the truth."""
    if not config.consecutive:
        raise ConfigError("recovery is implemented for the consecutive variant only")
    truth = sample_support(config, rng)
    obs = sample_observation(truth, config.lam, rng)
    support, steps, fallback = estimate_support(obs, config.k, config.m, estimator, ml_budget)
    return score(estimator, support, steps, truth, fallback)
