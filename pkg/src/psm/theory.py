"""Closed-form quantities: divergences, overlap laws, low-degree norms, thresholds.

Consecutive overlap laws use the cyclic convention (n window positions per
axis), under which the printed pmf is exact.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .detectors import DEFAULT_DELTA, tau_scan_csd, tau_scan_sd
from .errors import ConfigError, SaturationError
from .model import Boundary, ModelConfig, Variant, overlap, sample_support

EXP_LIMIT = 700.0
MAX_EXACT_DEGREE = 64


class RegimeLabel(str, enum.Enum):
    IMPOSSIBLE = "Impossible"
    HARD = "Hard"
    EASY = "Easy"
    BOUNDARY = "Boundary"


class Task(str, enum.Enum):
    SD = "SD"
    SR = "SR"
    CSD = "CSD"
    CSR = "CSR"


class MCEstimate(NamedTuple):
    value: float
    stderr: float


def chi_square_gaussian(lam: float, paper_constant: bool = False) -> float:
    """chi^2(N(lam, 1) || N(0, 1)) = exp(lam^2) - 1.

    ``paper_constant=True`` returns half of that, the constant printed in the
    source derivation, for reproducing its bounds.
    """
    lam = float(lam)
    if not math.isfinite(lam):
        raise ConfigError(f"lam must be finite, got {lam}")
    if lam * lam > EXP_LIMIT:
        raise SaturationError(f"exp(lam^2) overflows for lam^2 = {lam * lam:g} > {EXP_LIMIT:g}")
    value = math.expm1(lam * lam)
    return value / 2 if paper_constant else value


@dataclass(frozen=True)
class OverlapPMF:
    support: tuple[int, ...]
    probs: tuple[float, ...]

    @property
    def mean(self) -> float:
        return math.fsum(z * p for z, p in zip(self.support, self.probs))

    def moment(self, d: int) -> float:
        if d == 0:
            return 1.0
        value = math.fsum(p * float(z) ** d for z, p in zip(self.support, self.probs))
        if not math.isfinite(value):
            raise SaturationError(f"moment of order {d} overflows")
        return value


def overlap_pmf_consecutive(n: int, k: int) -> OverlapPMF:
    """Law of ``|S ∩ S'|`` for a fixed length-k run and a uniformly placed one (cyclic)."""
    if not 1 <= k <= n:
        raise ConfigError(f"need 1 <= k <= n, got k={k}, n={n}")
    if 2 * k > n + 1:
        raise ConfigError(f"overlap pmf needs 2k <= n+1 (got k={k}, n={n}); P(0) would be negative")
    probs = [(n - 2 * k + 1) / n] + [2 / n] * (k - 1) + [1 / n]
    return OverlapPMF(tuple(range(k + 1)), tuple(probs))


def hypergeometric_pmf(n: int, k: int, draws: int) -> OverlapPMF:
    """Law of ``|S ∩ S'|`` for two uniform subsets of [n] of sizes k and ``draws``."""
    if not (0 <= k <= n and 0 <= draws <= n):
        raise ConfigError(f"bad hypergeometric parameters n={n}, k={k}, draws={draws}")
    lo, hi = max(0, k + draws - n), min(k, draws)
    # log-domain ratio recurrence p(z+1)/p(z), normalized at the end; this
    # avoids both factorial overflow and the cancellation in differences of
    # large log-gamma values
    logw = [0.0]
    for z in range(lo, hi):
        logw.append(logw[-1] + math.log(k - z) + math.log(draws - z)
                    - math.log(z + 1) - math.log(n - k - draws + z + 1))
    top = max(logw)
    w = [math.exp(v - top) for v in logw]
    total = math.fsum(w)
    return OverlapPMF(tuple(range(lo, hi + 1)), tuple(v / total for v in w))


def _single_axis_pmf(n: int, k: int, variant) -> OverlapPMF:
    variant = Variant(variant)
    if variant is Variant.ARBITRARY:
        return hypergeometric_pmf(n, k, k)
    return overlap_pmf_consecutive(n, k)


def overlap_moment_exact_single(n: int, k: int, d: int, variant=Variant.ARBITRARY) -> float:
    """``E |K ∩ K'|^d`` for one rectangle: the row and column overlaps are i.i.d.,
    so the moment is the squared d-th moment of the one-axis law."""
    if not 0 <= d <= MAX_EXACT_DEGREE:
        raise ConfigError(f"degree must lie in [0, {MAX_EXACT_DEGREE}], got {d}")
    value = _single_axis_pmf(n, k, variant).moment(d) ** 2
    if not math.isfinite(value):
        raise SaturationError(f"moment of order {d} overflows")
    return value


@dataclass(frozen=True)
class OverlapMoments:
    degrees: tuple[int, ...]
    values: tuple[float, ...]
    method: str  # "ExactSingle" or "MonteCarlo"
    stderr: tuple[float, ...]

    @property
    def max_degree(self) -> int:
        return self.degrees[-1]


def exact_moments_single(n: int, k: int, D: int, variant=Variant.ARBITRARY) -> OverlapMoments:
    pmf = _single_axis_pmf(n, k, variant)
    vals = tuple(pmf.moment(d) ** 2 for d in range(D + 1))
    return OverlapMoments(tuple(range(D + 1)), vals, "ExactSingle", (0.0,) * (D + 1))


def sample_overlaps(config: ModelConfig, trials: int, rng: np.random.Generator) -> np.ndarray:
    """Overlaps of ``trials`` independent support pairs drawn by the model sampler."""
    out = np.empty(trials, dtype=np.int64)
    for t in range(trials):
        a = sample_support(config, rng)
        b = sample_support(config, rng)
        out[t] = overlap(a, b)
    return out


def overlap_moment_mc(config: ModelConfig, D: int, trials: int, rng: np.random.Generator) -> OverlapMoments:
    """Plug-in estimates of ``E |K ∩ K'|^d``, d = 0..D, with standard errors."""
    if trials < 1000:
        raise ConfigError(f"overlap_moment_mc needs at least 1000 trials, got {trials}")
    o = sample_overlaps(config, trials, rng).astype(np.float64)
    values, errs = [], []
    for d in range(D + 1):
        powers = o**d
        values.append(float(powers.mean()))
        errs.append(float(powers.std(ddof=1) / math.sqrt(trials)) if d else 0.0)
    return OverlapMoments(tuple(range(D + 1)), tuple(values), "MonteCarlo", tuple(errs))


def low_degree_norm_sq(lam: float, moments: OverlapMoments) -> float:
    """Truncated series ``sum_{d<=D} lam^(2d) / d! * E|K ∩ K'|^d``."""
    terms = []
    log_lam2 = 2 * math.log(lam) if lam > 0 else -math.inf
    for d, mu in zip(moments.degrees, moments.values):
        if d == 0:
            terms.append(mu)
            continue
        if mu == 0 or lam == 0:
            continue
        log_term = d * log_lam2 - math.lgamma(d + 1) + math.log(mu)
        if log_term > EXP_LIMIT:
            raise SaturationError(f"low-degree term of degree {d} overflows")
        terms.append(math.exp(log_term))
    return math.fsum(terms)


def bell_numbers(D: int) -> list[int]:
    """B_0..B_D via the Bell triangle (exact integers)."""
    if D < 0:
        raise ConfigError(f"degree must be nonnegative, got {D}")
    bells = [1]
    row = [1]
    for _ in range(D):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
        bells.append(row[0])
    return bells


def bell_number(d: int) -> int:
    return bell_numbers(d)[d]


def low_degree_bell_bound(lam: float, n: int, k: int, m: int, D: int) -> float:
    """``1 + sum_{d=1}^{D} lam^(2d)/d! * B_d^2 * max(r, r^d)`` with ``r = m^2 k^4 / n^2``."""
    r = (m * k * k / n) ** 2
    bells = bell_numbers(D)
    terms = [1.0]
    if lam > 0:
        for d in range(1, D + 1):
            log_term = (2 * d * math.log(lam) - math.lgamma(d + 1) + 2 * math.log(bells[d])
                        + max(math.log(r), d * math.log(r)))
            if log_term > EXP_LIMIT:
                raise SaturationError(f"Bell bound term of degree {d} overflows")
            terms.append(math.exp(log_term))
    return math.fsum(terms)


def second_moment_bound_consecutive(lam: float, n: int, k: int, m: int, paper_chi2: bool = False) -> float:
    """``[1 + (4k^2/n^2)(exp(chi2 k^2) - 1)]^(m^2)``."""
    chi2 = chi_square_gaussian(lam, paper_chi2)
    if chi2 * k * k > EXP_LIMIT:
        raise SaturationError(f"chi2 * k^2 = {chi2 * k * k:g} exceeds {EXP_LIMIT:g}")
    base = 1 + 4 * k * k / (n * n) * math.expm1(chi2 * k * k)
    log_val = m * m * math.log(base)
    if log_val > EXP_LIMIT:
        raise SaturationError("second-moment bound overflows")
    return math.exp(log_val)


def second_moment_mc(lam: float, config: ModelConfig, trials: int, rng: np.random.Generator,
                     paper_chi2: bool = False) -> MCEstimate:
    """Plug-in mean of ``(1 + chi2)^{|K ∩ K'|}`` over sampled support pairs."""
    chi2 = chi_square_gaussian(lam, paper_chi2)
    o = sample_overlaps(config, trials, rng).astype(np.float64)
    log_vals = o * math.log1p(chi2)
    if log_vals.size and log_vals.max() > EXP_LIMIT:
        raise SaturationError("second-moment integrand overflows")
    vals = np.exp(log_vals)
    stderr = float(vals.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return MCEstimate(float(vals.mean()), stderr)


def exponents(n: int, k: int, m: int, lam: float) -> tuple[float, float, float]:
    """``(alpha, beta, gamma_m)`` with ``lam = n^-alpha``, ``k = n^beta``, ``m = n^gamma_m``."""
    if n < 2:
        raise ConfigError("exponents need n >= 2")
    ln = math.log(n)
    alpha = -math.log(lam) / ln + 0.0 if lam > 0 else math.inf  # + 0.0 turns -0.0 into 0.0
    return alpha, math.log(k) / ln, math.log(m) / ln


def regime_edges(beta: float, gamma_m: float, task) -> tuple[float, float]:
    """``(easy_edge, impossible_edge)`` on the alpha axis.

    Easy when ``alpha < easy_edge``, impossible when ``alpha > impossible_edge``,
    hard in between; the two edges coincide for tasks with no hard region.
    """
    task = Task(task)
    if task is Task.SD:
        sum_edge = 2 * beta + gamma_m - 1  # lam >> n / (m k^2)
        return max(0.0, sum_edge), max(sum_edge, beta / 2)
    if task is Task.SR:
        return max(0.0, beta - 0.5), beta / 2
    if task is Task.CSD:
        return beta, beta
    return beta / 2, beta / 2


def regime_classify(alpha: float, beta: float, gamma_m: float, task, tol: float = 1e-9) -> RegimeLabel:
    """Place an exponent point in the impossible/hard/easy partition.

    Poly-log factors are ignored; a point within ``tol`` of an edge is
    labelled ``Boundary``.
    """
    if not (alpha >= 0) or not (0 < beta < 1) or not (gamma_m >= 0):
        raise ConfigError(f"need alpha >= 0, 0 < beta < 1, gamma_m >= 0 (got {alpha}, {beta}, {gamma_m})")
    easy, impossible = regime_edges(beta, gamma_m, task)
    if abs(alpha - easy) <= tol or abs(alpha - impossible) <= tol:
        return RegimeLabel.BOUNDARY
    if alpha < easy:
        return RegimeLabel.EASY
    if alpha > impossible:
        return RegimeLabel.IMPOSSIBLE
    return RegimeLabel.HARD


@dataclass(frozen=True)
class ThresholdTable:
    n: int
    k: int
    m: int
    delta: float
    lam: float | None
    tau_sum: float | None
    tau_scan_sd: float
    tau_scan_csd: float
    sum_condition: float          # n / (m k^2)
    scan_sd_condition: float      # sqrt(log(n/k) / k)
    scan_csd_condition: float     # sqrt(log(n/k)) / k
    peel_condition: float         # sqrt(24 log n / k)
    chi2_ceiling_sd: float
    chi2_ceiling_csd: float
    lower_bound_delta: float

    def to_record(self) -> dict:
        return asdict(self)


def threshold_table(n: int, k: int, m: int, delta: float = DEFAULT_DELTA, lam: float | None = None,
                    lower_bound_delta: float = 1.0) -> ThresholdTable:
    """Every threshold and sufficient-condition value for one ``(n, k, m)``.

    ``lower_bound_delta`` is the slack in the second-moment target ``1 + delta``
    for the two chi-square ceilings; it is unrelated to the scan-test ``delta``.
    """
    ModelConfig(n=n, k=k, m=m)  # validates the triple
    ld = math.log1p(lower_bound_delta)
    ceiling_sd = min(1 / k, n / (2 * k * k) * math.log1p(n * ld / (m * m * k * k)))
    ceiling_csd = math.log1p(n * n * ld / (4 * k * k * m * m)) / (k * k)
    log_nk = math.log(n / k)
    return ThresholdTable(
        n=n, k=k, m=m, delta=delta, lam=lam,
        tau_sum=(m * k * k * lam / 2) if lam else None,
        tau_scan_sd=tau_scan_sd(n, k, delta),
        tau_scan_csd=tau_scan_csd(n, k, delta),
        sum_condition=n / (m * k * k),
        scan_sd_condition=math.sqrt(log_nk / k),
        scan_csd_condition=math.sqrt(log_nk) / k,
        peel_condition=math.sqrt(24 * math.log(n) / k),
        chi2_ceiling_sd=ceiling_sd,
        chi2_ceiling_csd=ceiling_csd,
        lower_bound_delta=lower_bound_delta,
    )


def cyclic_config(n: int, k: int, m: int = 1) -> ModelConfig:
    """Consecutive config whose sampler realizes the cyclic overlap pmf."""
    return ModelConfig(n=n, k=k, m=m, variant=Variant.CONSECUTIVE, boundary=Boundary.CYCLIC)
