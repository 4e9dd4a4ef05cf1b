"""Planted-submatrix models: parameters, supports and observation synthesis.

Indices are 0-based throughout. A support is an ordered tuple of ``m``
k-by-k rectangles whose Cartesian products are pairwise disjoint. In the
consecutive variant every rectangle is a contiguous window; under the cyclic
boundary a window may wrap around the matrix edge.
"""

from __future__ import annotations

import dataclasses
import enum
import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SamplingError

DEFAULT_MAX_ATTEMPTS = 10**6


class Variant(str, enum.Enum):
    ARBITRARY = "arbitrary"
    CONSECUTIVE = "consecutive"


class Placement(str, enum.Enum):
    UNIFORM = "uniform"
    SEPARATED = "separated"


class Boundary(str, enum.Enum):
    LINEAR = "linear"
    CYCLIC = "cyclic"


def _enum(cls, value):
    if isinstance(value, cls):
        return value
    try:
        return cls(str(value).lower())
    except ValueError:
        choices = ", ".join(v.value for v in cls)
        raise ConfigError(f"unknown {cls.__name__.lower()} {value!r} (expected one of {choices})") from None


@dataclass(frozen=True)
class ModelConfig:
    """Ground-truth parameters ``(n, k, m, lam)`` plus model variant.

    ``lam`` is the elevated mean of the planted cells.
    """

    n: int
    k: int
    m: int = 1
    lam: float = 0.0
    variant: Variant = Variant.CONSECUTIVE
    placement: Placement = Placement.UNIFORM
    boundary: Boundary = Boundary.LINEAR

    def __post_init__(self):
        object.__setattr__(self, "variant", _enum(Variant, self.variant))
        object.__setattr__(self, "placement", _enum(Placement, self.placement))
        object.__setattr__(self, "boundary", _enum(Boundary, self.boundary))
        for name in ("n", "k", "m"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        lam = float(self.lam)
        if not np.isfinite(lam) or lam < 0:
            raise ConfigError(f"lam must be a finite nonnegative real, got {self.lam!r}")
        object.__setattr__(self, "lam", lam)
        if self.k > self.n:
            raise ConfigError(f"k={self.k} exceeds n={self.n}")
        if self.m * self.k > self.n:
            raise ConfigError(f"m*k = {self.m * self.k} exceeds n = {self.n}")
        if self.placement is Placement.SEPARATED:
            if self.variant is not Variant.CONSECUTIVE:
                raise ConfigError("separated placement requires the consecutive variant")
            if self.m * 2 * self.k > self.n + self.k:
                raise ConfigError(
                    f"no separated configuration exists: m*2k = {2 * self.m * self.k} > n+k = {self.n + self.k}"
                )

    @property
    def consecutive(self) -> bool:
        return self.variant is Variant.CONSECUTIVE

    @property
    def cyclic(self) -> bool:
        return self.boundary is Boundary.CYCLIC

    @property
    def positions(self) -> int:
        """Number of admissible window starts per axis (consecutive variant)."""
        return self.n if self.cyclic else self.n - self.k + 1

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)

    def structural(self) -> "ModelConfig":
        """The same model without the separation requirement.

        Estimators are only guaranteed to return product-disjoint rectangles,
        so their outputs are checked against this relaxed config.
        """
        return self.replace(placement=Placement.UNIFORM)


@dataclass(frozen=True)
class Rectangle:
    rows: tuple[int, ...]
    cols: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(int(i) for i in self.rows))
        object.__setattr__(self, "cols", tuple(int(j) for j in self.cols))

    @classmethod
    def window(cls, row: int, col: int, k: int, n: int | None = None) -> "Rectangle":
        """Contiguous k-by-k window with top-left corner ``(row, col)``.

        With ``n`` given, indices wrap modulo ``n`` (cyclic boundary).
        """
        rows = range(row, row + k)
        cols = range(col, col + k)
        if n is not None:
            rows = (i % n for i in rows)
            cols = (j % n for j in cols)
        return cls(tuple(rows), tuple(cols))

    @property
    def k(self) -> int:
        return len(self.rows)

    @property
    def corner(self) -> tuple[int, int]:
        return self.rows[0], self.cols[0]

    def cells(self) -> set[tuple[int, int]]:
        return set(itertools.product(self.rows, self.cols))

    def overlap(self, other: "Rectangle") -> int:
        """Number of shared cells, ``|rows ∩ rows'| * |cols ∩ cols'|``."""
        return len(set(self.rows).intersection(other.rows)) * len(set(self.cols).intersection(other.cols))

    def intersects(self, other: "Rectangle") -> bool:
        return not set(self.rows).isdisjoint(other.rows) and not set(self.cols).isdisjoint(other.cols)


@dataclass(frozen=True)
class SupportSet:
    rectangles: tuple[Rectangle, ...]
    config: ModelConfig

    def __post_init__(self):
        object.__setattr__(self, "rectangles", tuple(self.rectangles))
        ok, reason = validate_support(self.rectangles, self.config)
        if not ok:
            raise ConfigError(f"invalid support: {reason}")

    @classmethod
    def _trusted(cls, rectangles, config) -> "SupportSet":
        # sampler outputs satisfy the invariants by construction
        obj = object.__new__(cls)
        object.__setattr__(obj, "rectangles", tuple(rectangles))
        object.__setattr__(obj, "config", config)
        return obj

    @property
    def n(self) -> int:
        return self.config.n

    def corners(self) -> list[tuple[int, int]]:
        return [r.corner for r in self.rectangles]

    def cells(self) -> frozenset[tuple[int, int]]:
        out: set[tuple[int, int]] = set()
        for rect in self.rectangles:
            out |= rect.cells()
        return frozenset(out)

    def to_records(self) -> list[dict]:
        """JSON-ready records: starts for consecutive windows, index lists otherwise."""
        if self.config.consecutive:
            return [{"row_start": r.rows[0], "col_start": r.cols[0]} for r in self.rectangles]
        return [{"rows": list(r.rows), "cols": list(r.cols)} for r in self.rectangles]

    @classmethod
    def from_records(cls, records: list[dict], config: ModelConfig) -> "SupportSet":
        rects = []
        wrap = config.n if config.cyclic else None
        for rec in records:
            if "row_start" in rec:
                rects.append(Rectangle.window(rec["row_start"], rec["col_start"], config.k, wrap))
            else:
                rects.append(Rectangle(rec["rows"], rec["cols"]))
        return cls(tuple(rects), config)


@dataclass(frozen=True, eq=False)
class Observation:
    """An n-by-n real matrix ``X = lam * 1{K} + Z``."""

    data: np.ndarray
    provenance: dict | None = field(default=None)

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ConfigError(f"observation must be a square matrix, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ConfigError("observation contains non-finite entries")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.data.shape[0]


def _is_run(idx: tuple[int, ...], n: int, cyclic: bool) -> bool:
    for a, b in zip(idx, idx[1:]):
        nxt = (a + 1) % n if cyclic else a + 1
        if b != nxt:
            return False
    return True


def _gap(s1: int, s2: int, k: int, n: int, cyclic: bool) -> int:
    """Empty rows (or columns) between two length-k runs starting at s1, s2."""
    d = abs(s1 - s2)
    if cyclic:
        d = min(d, n - d)
    return max(0, d - k)


def validate_support(candidate, config: ModelConfig) -> tuple[bool, str | None]:
    """Check every support invariant; return ``(ok, first_violation)``.

    Violation labels: ``count``, ``size``, ``range``, ``duplicate``,
    ``consecutive``, ``product-disjoint``, ``separation``.
    """
    rects = list(candidate)
    n, k = config.n, config.k
    if len(rects) != config.m:
        return False, f"count: expected {config.m} rectangles, got {len(rects)}"
    for idx, r in enumerate(rects):
        if len(r.rows) != k or len(r.cols) != k:
            return False, f"size: rectangle {idx} is {len(r.rows)}x{len(r.cols)}, expected {k}x{k}"
        if not all(0 <= i < n for i in r.rows + r.cols):
            return False, f"range: rectangle {idx} has indices outside [0, {n})"
        if len(set(r.rows)) != k or len(set(r.cols)) != k:
            return False, f"duplicate: rectangle {idx} repeats an index"
        if config.consecutive and not (
            _is_run(r.rows, n, config.cyclic) and _is_run(r.cols, n, config.cyclic)
        ):
            return False, f"consecutive: rectangle {idx} is not a contiguous window"
    for (a, ra), (b, rb) in itertools.combinations(enumerate(rects), 2):
        if ra.intersects(rb):
            return False, f"product-disjoint: rectangles {a} and {b} share cells"
    if config.placement is Placement.SEPARATED:
        for (a, ra), (b, rb) in itertools.combinations(enumerate(rects), 2):
            gr = _gap(ra.rows[0], rb.rows[0], k, n, config.cyclic)
            gc = _gap(ra.cols[0], rb.cols[0], k, n, config.cyclic)
            if gr < k or gc < k:
                return False, f"separation: rectangles {a} and {b} are {gr} rows / {gc} cols apart (< {k})"
    return True, None


def _starts_conflict(starts: np.ndarray, k: int, n: int, cyclic: bool) -> bool:
    """True if some pair of windows shares a cell (closer than k on both axes)."""
    d = np.abs(starts[:, None, :] - starts[None, :, :])
    if cyclic:
        d = np.minimum(d, n - d)
    close = np.all(d < k, axis=2)
    np.fill_diagonal(close, False)
    return bool(close.any())


def _starts_too_close(starts: np.ndarray, k: int, n: int, cyclic: bool) -> bool:
    # separated: each axis needs gap >= k, i.e. start distance >= 2k
    d = np.abs(starts[:, None, :] - starts[None, :, :])
    if cyclic:
        d = np.minimum(d, n - d)
    bad = np.any(d < 2 * k, axis=2)
    np.fill_diagonal(bad, False)
    return bool(bad.any())


def sample_support(config: ModelConfig, rng: np.random.Generator, max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> SupportSet:
    """Draw a support uniformly over ordered tuples of product-disjoint rectangles.

    Rectangles are drawn i.i.d. and the whole tuple is rejected until the
    disjointness (and, for separated placement, separation) constraints hold.
    """
    n, k, m = config.n, config.k, config.m
    if config.consecutive:
        wrap = n if config.cyclic else None
        for _ in range(max_attempts):
            starts = rng.integers(0, config.positions, size=(m, 2))
            if m > 1:
                if config.placement is Placement.SEPARATED:
                    if _starts_too_close(starts, k, n, config.cyclic):
                        continue
                elif _starts_conflict(starts, k, n, config.cyclic):
                    continue
            rects = tuple(Rectangle.window(r, c, k, wrap) for r, c in starts.tolist())
            return SupportSet._trusted(rects, config)
    else:
        for _ in range(max_attempts):
            rects = []
            for _ in range(m):
                rows = np.sort(rng.choice(n, size=k, replace=False))
                cols = np.sort(rng.choice(n, size=k, replace=False))
                rects.append(Rectangle(tuple(rows.tolist()), tuple(cols.tolist())))
            if all(not a.intersects(b) for a, b in itertools.combinations(rects, 2)):
                return SupportSet._trusted(rects, config)
    raise SamplingError(
        f"no valid support after {max_attempts} attempts for n={n}, k={k}, m={m}; enlarge n or reduce m"
    )


def cell_mask(support: SupportSet) -> np.ndarray:
    """Boolean n-by-n indicator of the planted cells."""
    mask = np.zeros((support.n, support.n), dtype=bool)
    for rect in support.rectangles:
        mask[np.ix_(rect.rows, rect.cols)] = True
    return mask


def sample_null(n: int, rng: np.random.Generator) -> Observation:
    """Pure-noise matrix with i.i.d. standard normal entries."""
    if n < 1:
        raise ConfigError(f"n must be positive, got {n}")
    return Observation(rng.standard_normal((n, n)))


def sample_observation(support: SupportSet, lam: float, rng: np.random.Generator) -> Observation:
    """Noise first, then ``lam`` added on the planted cells.

    The draw order makes ``lam = 0`` bit-identical to :func:`sample_null`
    and keeps the noise shared across ``lam`` for a fixed generator state.
    """
    if lam < 0:
        raise ConfigError(f"lam must be nonnegative, got {lam}")
    data = rng.standard_normal((support.n, support.n))
    if lam:
        data[cell_mask(support)] += lam
    return Observation(data, provenance={"support": support})


def overlap(a: SupportSet, b: SupportSet) -> int:
    """Exact ``|K ∩ K'|`` by summing rectangle-pair intersections."""
    if a.n != b.n:
        raise ConfigError(f"supports live in different matrices ({a.n} vs {b.n})")
    return sum(ra.overlap(rb) for ra in a.rectangles for rb in b.rectangles)
