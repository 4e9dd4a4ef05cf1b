"""Seeded Monte Carlo runner: risk and recovery estimates, sweeps, cross-validation.

Every trial draws from its own generator seeded by
``derive_seed(master_seed, tag, index)``, and per-shard results are merged as
integer counts, so estimates are identical for any number of workers.
"""

from __future__ import annotations

import enum
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import detectors, oracles, recovery, theory
from .errors import BudgetExceededError, ConfigError, PSMError
from .model import ModelConfig, Variant, cell_mask, overlap, sample_null, sample_observation, sample_support
from .rng import TAG_ALT, TAG_CROSSVAL, TAG_NULL, TAG_RECOVERY, trial_rng

CI_LEVEL = 0.05
SWEEP_KEYS = ("n", "k", "m", "lambda")


class ExperimentTask(str, enum.Enum):
    DETECT_SUM = "DetectSum"
    DETECT_SCAN_SD = "DetectScanSD"
    DETECT_SCAN_CSD = "DetectScanCSD"
    RECOVER_ML = "RecoverML"
    RECOVER_PEEL = "RecoverPeel"
    RECOVER_MODIFIED_PEEL = "RecoverModifiedPeel"

    @property
    def is_detection(self) -> bool:
        return self.value.startswith("Detect")

    @property
    def estimator(self) -> recovery.Estimator:
        return _ESTIMATORS[self]


_ESTIMATORS = {
    ExperimentTask.RECOVER_ML: recovery.Estimator.ML,
    ExperimentTask.RECOVER_PEEL: recovery.Estimator.PEEL,
    ExperimentTask.RECOVER_MODIFIED_PEEL: recovery.Estimator.MODIFIED_PEEL,
}

_TASK_ALIASES = {
    "sum": ExperimentTask.DETECT_SUM,
    "scan_sd": ExperimentTask.DETECT_SCAN_SD,
    "scan-sd": ExperimentTask.DETECT_SCAN_SD,
    "scan_csd": ExperimentTask.DETECT_SCAN_CSD,
    "scan-csd": ExperimentTask.DETECT_SCAN_CSD,
    "ml": ExperimentTask.RECOVER_ML,
    "peel": ExperimentTask.RECOVER_PEEL,
    "modified_peel": ExperimentTask.RECOVER_MODIFIED_PEEL,
    "modified-peel": ExperimentTask.RECOVER_MODIFIED_PEEL,
    "modifiedpeel": ExperimentTask.RECOVER_MODIFIED_PEEL,
}


def parse_task(value) -> ExperimentTask:
    """Accept enum members, canonical names (any case) or short aliases."""
    if isinstance(value, ExperimentTask):
        return value
    text = str(value).strip()
    for task in ExperimentTask:
        if text.lower() == task.value.lower():
            return task
    try:
        return _TASK_ALIASES[text.lower()]
    except KeyError:
        names = ", ".join(t.value for t in ExperimentTask)
        raise ConfigError(f"unknown task {value!r} (expected one of {names})") from None


def hoeffding_halfwidth(trials: int, level: float = CI_LEVEL) -> float:
    """Distribution-free half-width ``sqrt(log(2/level) / (2 trials))``."""
    return math.sqrt(math.log(2 / level) / (2 * trials))


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig
    task: ExperimentTask = ExperimentTask.DETECT_SCAN_CSD
    trials: int = 100
    master_seed: int = 0
    delta: float = detectors.DEFAULT_DELTA
    sweep: dict | None = None
    ml_budget: int = recovery.DEFAULT_ML_BUDGET

    def __post_init__(self):
        object.__setattr__(self, "task", parse_task(self.task))
        if isinstance(self.trials, bool) or int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError(f"trials must be a positive integer, got {self.trials!r}")
        object.__setattr__(self, "trials", int(self.trials))
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed!r}")
        object.__setattr__(self, "master_seed", int(self.master_seed))
        if not self.delta > 0:
            raise ConfigError(f"delta must be positive, got {self.delta!r}")
        if self.sweep is not None:
            grid = {}
            for key, values in self.sweep.items():
                if key not in SWEEP_KEYS:
                    raise ConfigError(f"cannot sweep over {key!r} (allowed: {', '.join(SWEEP_KEYS)})")
                values = list(values)
                if not values:
                    raise ConfigError(f"sweep list for {key!r} is empty")
                grid[key] = values
            object.__setattr__(self, "sweep", grid)

    def grid_points(self) -> list[dict]:
        """Grid points in a fixed order (n, k, m, lambda), later keys varying fastest."""
        grid = self.sweep or {}
        keys = [k for k in SWEEP_KEYS if k in grid]
        return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]

    def at(self, point: dict) -> "ExperimentConfig":
        """Single-point config for one grid point (validates the model there)."""
        changes = {("lam" if key == "lambda" else key): value for key, value in point.items()}
        return ExperimentConfig(self.model.replace(**changes), self.task, self.trials,
                                self.master_seed, self.delta, None, self.ml_budget)


@dataclass(frozen=True)
class RiskEstimate:
    type1_rate: float
    type2_rate: float
    risk: float
    trials_per_hypothesis: int
    ci_halfwidth: float
    false_alarms: int = 0
    misses: int = 0

    def to_record(self) -> dict:
        return {
            "type1": self.type1_rate,
            "type2": self.type2_rate,
            "risk": self.risk,
            "trials": self.trials_per_hypothesis,
            "ci": self.ci_halfwidth,
        }


@dataclass(frozen=True)
class RecoveryEstimate:
    exact_rate: float
    mean_overlap_fraction: float
    trials: int
    ci_halfwidths: tuple[float, float]
    exact_count: int = 0
    fallbacks: int = 0

    def to_record(self) -> dict:
        return {
            "exact_rate": self.exact_rate,
            "overlap_frac": self.mean_overlap_fraction,
            "trials": self.trials,
            "ci": self.ci_halfwidths[0],
        }


def _shards(trials: int, workers: int) -> list[range]:
    workers = max(1, min(int(workers), trials))
    bounds = np.linspace(0, trials, workers + 1).astype(int)
    return [range(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _map_shards(fn, trials: int, workers: int) -> list:
    shards = _shards(trials, workers)
    if len(shards) == 1:
        return [fn(shards[0])]
    with ThreadPoolExecutor(max_workers=len(shards)) as pool:
        return list(pool.map(fn, shards))


def _detector(config: ExperimentConfig):
    model, delta = config.model, config.delta
    task = config.task
    if task is ExperimentTask.DETECT_SUM:
        detectors.tau_sum(model)  # fail fast on lam = 0
        return lambda X: detectors.test_sum(X, model).decision
    if task is ExperimentTask.DETECT_SCAN_CSD:
        return lambda X: detectors.test_scan_csd(X, model, delta).decision
    if task is ExperimentTask.DETECT_SCAN_SD:
        count = math.comb(model.n, model.k)
        if count > detectors.DEFAULT_SD_BUDGET:
            raise BudgetExceededError(f"binom({model.n}, {model.k}) = {count} row subsets exceeds the scan budget")
        return lambda X: detectors.test_scan_sd(X, model, delta).decision
    raise ConfigError(f"{task.value} is not a detection task")


def estimate_risk(config: ExperimentConfig, workers: int = 1) -> RiskEstimate:
    """Empirical Type-I and Type-II error rates of the configured test.

    Null trial ``i`` uses stream ``(master_seed, TAG_NULL, i)``; alternative
    trial ``i`` uses ``(master_seed, TAG_ALT, i)``, drawing the support and then
    the noise. Because ``lam`` only shifts the planted cells, alternatives at
    different ``lam`` share their support and noise (common random numbers).
    """
    decide = _detector(config)
    model, seed = config.model, config.master_seed

    def run(indices: range) -> tuple[int, int]:
        alarms = misses = 0
        for i in indices:
            alarms += decide(sample_null(model.n, trial_rng(seed, TAG_NULL, i)))
            rng = trial_rng(seed, TAG_ALT, i)
            support = sample_support(model, rng)
            misses += 1 - decide(sample_observation(support, model.lam, rng))
        return alarms, misses

    parts = _map_shards(run, config.trials, workers)
    alarms = sum(p[0] for p in parts)
    misses = sum(p[1] for p in parts)
    t = config.trials
    type1, type2 = alarms / t, misses / t
    return RiskEstimate(type1, type2, type1 + type2, t, hoeffding_halfwidth(t), alarms, misses)


def estimate_recovery(config: ExperimentConfig, workers: int = 1) -> RecoveryEstimate:
    """Exact-recovery rate and mean overlap fraction over seeded trials."""
    if config.task.is_detection:
        raise ConfigError(f"{config.task.value} is not a recovery task")
    model = config.model
    if model.variant is not Variant.CONSECUTIVE:
        raise ConfigError("recovery is implemented for the consecutive variant only")
    estimator, seed = config.task.estimator, config.master_seed
    cells = model.m * model.k**2

    def run(indices: range) -> tuple[int, int, int]:
        exact = covered = fallbacks = 0
        for i in indices:
            res = recovery.recovery_trial(model, estimator, trial_rng(seed, TAG_RECOVERY, i), config.ml_budget)
            exact += res.exact
            covered += res.overlap_cells
            fallbacks += res.fallback
        return exact, covered, fallbacks

    parts = _map_shards(run, config.trials, workers)
    exact = sum(p[0] for p in parts)
    covered = sum(p[1] for p in parts)
    fallbacks = sum(p[2] for p in parts)
    t = config.trials
    half = hoeffding_halfwidth(t)
    return RecoveryEstimate(exact / t, covered / (cells * t), t, (half, half), exact, fallbacks)


def regime_task(task: ExperimentTask, variant: Variant) -> theory.Task:
    """Theory task that labels a harness task: detection by variant, recovery as CSR."""
    if task.is_detection:
        return theory.Task.CSD if variant is Variant.CONSECUTIVE else theory.Task.SD
    return theory.Task.CSR


def regime_label(n: int, k: int, m: int, lam: float, task: ExperimentTask, variant: Variant) -> str | None:
    """Regime of the point's exponents, or None outside the classifier's domain.

    The classifier needs ``alpha >= 0`` and ``0 < beta < 1``, so ``lam > 1``,
    ``k = 1`` and ``k = n`` have no label.
    """
    try:
        alpha, beta, gamma_m = theory.exponents(n, k, m, lam)
        return theory.regime_classify(alpha, beta, gamma_m, regime_task(task, variant)).value
    except ConfigError:
        return None


def _base_row(config: ExperimentConfig, point: dict) -> dict:
    model = config.model
    n = point.get("n", model.n)
    k = point.get("k", model.k)
    m = point.get("m", model.m)
    lam = float(point.get("lambda", model.lam))
    row = dict.fromkeys(("n", "k", "m", "lambda", "alpha", "beta", "gamma_m", "variant", "task", "trials",
                         "type1", "type2", "risk", "exact_rate", "overlap_frac", "ci", "regime", "seed"))
    row.update(n=n, k=k, m=m, variant=model.variant.value, task=config.task.value,
               trials=config.trials, seed=config.master_seed)
    row["lambda"] = lam
    try:
        row["alpha"], row["beta"], row["gamma_m"] = theory.exponents(int(n), int(k), int(m), lam)
    except (ConfigError, ValueError, TypeError):
        pass
    return row


def run_point(config: ExperimentConfig, workers: int = 1, strict: bool = False) -> dict:
    """One table row for a single-point config.

    Library errors are recorded in the row unless ``strict`` is set, in which
    case they propagate.
    """
    row = _base_row(config, {})
    try:
        if config.task.is_detection:
            row.update(estimate_risk(config, workers).to_record())
        else:
            row.update(estimate_recovery(config, workers).to_record())
        model = config.model
        row["regime"] = regime_label(model.n, model.k, model.m, model.lam, config.task, model.variant)
    except PSMError as exc:
        if strict:
            raise
        row["regime"] = f"error: {exc}"
        row["error"] = str(exc)
    return row


def sweep(config: ExperimentConfig, workers: int = 1) -> list[dict]:
    """One row per grid point, in :meth:`ExperimentConfig.grid_points` order.

    All points share the master seed, so a lambda sweep reuses the same
    supports and noise at every lambda. A point that fails validation or
    estimation gets a row whose ``regime`` reads ``error: <message>``.
    """
    rows = []
    for point in config.grid_points():
        try:
            single = config.at(point)
        except PSMError as exc:
            row = _base_row(config, point)
            row["regime"] = f"error: {exc}"
            row["error"] = str(exc)
            rows.append(row)
            continue
        rows.append(run_point(single, workers))
    return rows


# --- cross-validation -------------------------------------------------------

@dataclass
class SuiteResult:
    name: str
    cases: int = 0
    max_discrepancy: float = 0.0
    tolerance: float = 0.0
    mismatches: int = 0
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.cases > 0 and self.mismatches == 0

    def record(self, discrepancy: float) -> None:
        self.cases += 1
        self.max_discrepancy = max(self.max_discrepancy, discrepancy)
        if not discrepancy <= self.tolerance:
            self.mismatches += 1

    def to_record(self) -> dict:
        return {
            "suite": self.name,
            "cases": self.cases,
            "max_discrepancy": self.max_discrepancy,
            "tolerance": self.tolerance,
            "mismatches": self.mismatches,
            "passed": self.passed,
            "detail": self.detail,
        }


@dataclass
class CrossvalReport:
    seed: int
    suites: list[SuiteResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)

    def to_rows(self) -> list[dict]:
        return [s.to_record() for s in self.suites]


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1.0)


def crossval(n_max: int = 12, trials: int = 50, seed: int = 0, scan_impl=None,
             moment_pairs: int = 20_000) -> CrossvalReport:
    """Run every fast-vs-reference equivalence suite and collect the worst gaps.

    Suites: consecutive scan vs direct window sums, arbitrary scan vs full
    (row set, column set) enumeration, ML vs brute force, exact vs Monte
    Carlo overlap moments (z-scores against a 4 sigma tolerance), and the
    rectangle-pair overlap formula vs explicit cell masks. ``scan_impl``
    replaces the consecutive scan under test, e.g. with a deliberately broken
    implementation.
    """
    if n_max < 4:
        raise ConfigError(f"n_max must be at least 4, got {n_max}")
    if trials < 1:
        raise ConfigError(f"trials must be positive, got {trials}")
    scan = scan_impl or detectors.scan_statistic_consecutive
    report = CrossvalReport(seed)

    def rng_for(suite: int, i: int) -> np.random.Generator:
        return trial_rng(seed, TAG_CROSSVAL, suite * 1_000_003 + i)

    s = SuiteResult("scan_consecutive_vs_naive", tolerance=1e-9)
    for i in range(trials):
        rng = rng_for(0, i)
        n = int(rng.integers(4, n_max + 1))
        k = int(rng.integers(1, n + 1))
        X = rng.standard_normal((n, n))
        fast, _ = scan(X, k)
        ref, _ = oracles.naive_scan_consecutive(X, k)
        s.record(_rel(fast, ref))
    report.suites.append(s)

    s = SuiteResult("scan_arbitrary_vs_brute_force", tolerance=1e-9)
    for i in range(trials):
        rng = rng_for(1, i)
        n = int(rng.integers(2, min(n_max, 7) + 1))
        k = int(rng.integers(1, min(n, 3) + 1))
        X = rng.standard_normal((n, n))
        s.record(_rel(detectors.scan_statistic_arbitrary(X, k), oracles.brute_force_scan_arbitrary(X, k)))
    report.suites.append(s)

    s = SuiteResult("ml_vs_brute_force", tolerance=0.0, detail="discrepancy = 1 when cell sets differ")
    for i in range(trials):
        rng = rng_for(2, i)
        n = int(rng.integers(2, min(n_max, 8) + 1))
        k = int(rng.integers(1, min(n, 3) + 1))
        m = int(rng.integers(1, min(2, n // k) + 1))
        X = rng.standard_normal((n, n))
        est = recovery.ml_exhaustive(X, k, m)
        _, corners = oracles.brute_force_ml(X, k, m)
        s.record(float(sorted(est.corners()) != corners))
    report.suites.append(s)

    s = SuiteResult("moments_exact_vs_mc", tolerance=4.0, detail="discrepancy is |z| against the MC stderr")
    for j, (variant, boundary) in enumerate((("consecutive", "cyclic"), ("arbitrary", "linear"))):
        cfg = ModelConfig(n=20, k=3, m=1, variant=variant, boundary=boundary)
        exact = theory.exact_moments_single(20, 3, 4, variant)
        mc = theory.overlap_moment_mc(cfg, 4, moment_pairs, rng_for(3, j))
        for d in range(1, 5):
            s.record(abs(mc.values[d] - exact.values[d]) / mc.stderr[d])
    report.suites.append(s)

    s = SuiteResult("overlap_formula_vs_masks", tolerance=0.0)
    for i in range(trials):
        rng = rng_for(4, i)
        n = int(rng.integers(4, n_max + 1))
        k = int(rng.integers(1, n // 2 + 1))
        m = int(rng.integers(1, max(1, n // (2 * k)) + 1))
        variant = ("consecutive", "arbitrary")[i % 2]
        boundary = ("linear", "cyclic")[(i // 2) % 2]
        cfg = ModelConfig(n=n, k=k, m=m, variant=variant, boundary=boundary)
        a, b = sample_support(cfg, rng), sample_support(cfg, rng)
        s.record(float(abs(overlap(a, b) - int((cell_mask(a) & cell_mask(b)).sum()))))
    report.suites.append(s)
    return report
