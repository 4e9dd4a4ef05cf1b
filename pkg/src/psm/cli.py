"""Command-line entry point ``psm``.

Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 budget or
overflow error, 4 cross-validation failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import detectors, harness, io, recovery, theory
from .errors import BudgetExceededError, ConfigError, SaturationError
from .model import ModelConfig, SupportSet, sample_observation, sample_support
from .rng import TAG_ALT, trial_rng

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_BUDGET, EXIT_CROSSVAL = 0, 1, 2, 3, 4


class _ArgumentError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    # route usage errors through the same exit-code mapping as library errors
    def error(self, message):
        raise _ArgumentError(f"{self.prog}: {message}")


def _list(cast):
    def parse(text: str):
        try:
            return [cast(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a comma-separated list, got {text!r}") from None
    return parse


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _model_args(p: argparse.ArgumentParser, need_nk: bool = True) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--n", type=int, required=need_nk, help="matrix side")
    g.add_argument("--k", type=int, required=need_nk, help="submatrix side")
    g.add_argument("--m", type=int, default=1, help="number of planted submatrices")
    g.add_argument("--lambda", dest="lam", type=float, default=0.0, help="elevated mean of planted cells")
    g.add_argument("--variant", default="consecutive", choices=["arbitrary", "consecutive"])
    g.add_argument("--placement", default="uniform", choices=["uniform", "separated"])
    g.add_argument("--boundary", default="linear", choices=["linear", "cyclic"])


def _output_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", default="csv", choices=["csv", "json"])
    p.add_argument("--out", default=None, help="output path (default: stdout)")


def _model(args) -> ModelConfig:
    return ModelConfig(n=args.n, k=args.k, m=args.m, lam=args.lam, variant=args.variant,
                       placement=args.placement, boundary=args.boundary)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="psm", description="Planted submatrix detection and recovery experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="sample a support and an observation, write the matrix to a file")
    _model_args(p)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", required=True, help="observation file")
    p.add_argument("--binary", action="store_true", help="write the binary format instead of text")
    p.add_argument("--support-out", default=None, help="also write the planted support as JSON")

    p = sub.add_parser("detect", help="run a test on a file, or estimate its risk by simulation")
    _model_args(p)
    p.add_argument("--task", default="DetectScanCSD", help="DetectSum | DetectScanSD | DetectScanCSD")
    p.add_argument("--input", default=None, help="observation file; omit to simulate")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--delta", type=float, default=detectors.DEFAULT_DELTA)
    p.add_argument("--workers", type=int, default=1)
    _output_args(p)

    p = sub.add_parser("recover", help="estimate a support from a file, or estimate recovery rates")
    _model_args(p)
    p.add_argument("--task", default="RecoverPeel", help="RecoverML | RecoverPeel | RecoverModifiedPeel")
    p.add_argument("--input", default=None, help="observation file; omit to simulate")
    p.add_argument("--truth", default=None, help="JSON support file to score a file estimate against")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--workers", type=int, default=1)
    _output_args(p)

    p = sub.add_parser("sweep", help="risk or recovery table over a parameter grid")
    _model_args(p)
    p.add_argument("--task", default="DetectScanCSD")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--delta", type=float, default=detectors.DEFAULT_DELTA)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--grid-lambda", type=_list(float), default=None)
    p.add_argument("--grid-k", type=_list(int), default=None)
    p.add_argument("--grid-m", type=_list(int), default=None)
    p.add_argument("--grid-n", type=_list(int), default=None)
    _output_args(p)

    p = sub.add_parser("theory", help="threshold table and regime labels over a grid")
    _model_args(p)
    p.add_argument("--delta", type=float, default=detectors.DEFAULT_DELTA)
    p.add_argument("--grid-lambda", type=_list(float), default=None)
    p.add_argument("--grid-k", type=_list(int), default=None)
    p.add_argument("--grid-m", type=_list(int), default=None)
    p.add_argument("--grid-n", type=_list(int), default=None)
    p.add_argument("--paper-chi2", action="store_true",
                   help="use chi2 = (exp(lam^2) - 1) / 2 in the second-moment bound column")
    _output_args(p)

    p = sub.add_parser("crossval", help="fast-vs-reference equivalence suites")
    p.add_argument("--n-max", type=int, default=12)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=_seed, default=0)
    _output_args(p)
    return parser


def _emit_records(records: list[dict], args) -> None:
    columns = list(records[0]) if records else []
    io.emit(records, args.format, args.out, columns=columns)


def _cmd_gen(args) -> int:
    model = _model(args)
    rng = trial_rng(args.seed, TAG_ALT, 0)
    support = sample_support(model, rng)
    obs = sample_observation(support, model.lam, rng)
    io.write_observation(obs, args.out, binary=args.binary)
    text = json.dumps({"config": _config_record(model), "seed": args.seed, "support": support.to_records()})
    if args.support_out:
        try:
            with open(args.support_out, "w") as fh:
                fh.write(text + "\n")
        except OSError as exc:
            raise OSError(f"cannot write support to {args.support_out}: {exc}") from exc
    else:
        print(text)
    return EXIT_OK


def _config_record(model: ModelConfig) -> dict:
    return {"n": model.n, "k": model.k, "m": model.m, "lambda": model.lam, "variant": model.variant.value,
            "placement": model.placement.value, "boundary": model.boundary.value}


def _experiment(args, task, sweep=None) -> harness.ExperimentConfig:
    return harness.ExperimentConfig(_model(args), task, args.trials, args.seed,
                                    getattr(args, "delta", detectors.DEFAULT_DELTA), sweep)


def _cmd_detect(args) -> int:
    task = harness.parse_task(args.task)
    if not task.is_detection:
        raise ConfigError(f"{task.value} is not a detection task")
    if args.input is None:
        io.emit([harness.run_point(_experiment(args, task), args.workers, strict=True)], args.format, args.out)
        return EXIT_OK
    X = io.read_observation(args.input)
    if X.n != args.n:
        raise ConfigError(f"--n {args.n} does not match the {X.n}x{X.n} input")
    model = _model(args)
    if task is harness.ExperimentTask.DETECT_SUM:
        outcome = detectors.test_sum(X, model)
    elif task is harness.ExperimentTask.DETECT_SCAN_SD:
        outcome = detectors.test_scan_sd(X, model, args.delta)
    else:
        outcome = detectors.test_scan_csd(X, model, args.delta)
    _emit_records([outcome.to_record()], args)
    return EXIT_OK


def _cmd_recover(args) -> int:
    task = harness.parse_task(args.task)
    if task.is_detection:
        raise ConfigError(f"{task.value} is not a recovery task")
    if args.input is None:
        io.emit([harness.run_point(_experiment(args, task), args.workers, strict=True)], args.format, args.out)
        return EXIT_OK
    X = io.read_observation(args.input)
    if X.n != args.n:
        raise ConfigError(f"--n {args.n} does not match the {X.n}x{X.n} input")
    support, steps, fallback = recovery.estimate_support(X, args.k, args.m, task.estimator)
    truth = None
    if args.truth:
        try:
            with open(args.truth) as fh:
                payload = json.load(fh)
        except OSError as exc:
            raise OSError(f"cannot read support from {args.truth}: {exc}") from exc
        records = payload["support"] if isinstance(payload, dict) else payload
        truth = SupportSet.from_records(records, support.config)
    result = recovery.score(task.estimator, support, steps, truth, fallback)
    record = result.to_record()
    record["corners"] = json.dumps(record["corners"]) if args.format == "csv" else record["corners"]
    _emit_records([record], args)
    return EXIT_OK


def _grid(args) -> dict | None:
    grid = {key: getattr(args, f"grid_{key}") for key in ("n", "k", "m", "lambda")
            if getattr(args, f"grid_{key}") is not None}
    return grid or None


def _cmd_sweep(args) -> int:
    task = harness.parse_task(args.task)
    config = _experiment(args, task, _grid(args) or {"lambda": [args.lam]})
    io.emit(harness.sweep(config, args.workers), args.format, args.out)
    return EXIT_OK


def _theory_row(n, k, m, lam, delta, paper_chi2) -> dict:
    table = theory.threshold_table(n, k, m, delta, lam=lam if lam > 0 else None)
    row = table.to_record()
    alpha, beta, gamma_m = theory.exponents(n, k, m, lam)
    row.update(alpha=alpha, beta=beta, gamma_m=gamma_m)
    for task in theory.Task:
        try:
            row[f"regime_{task.value}"] = theory.regime_classify(alpha, beta, gamma_m, task).value
        except ConfigError:
            row[f"regime_{task.value}"] = None
    try:
        row["second_moment_bound"] = theory.second_moment_bound_consecutive(lam, n, k, m, paper_chi2)
    except SaturationError:
        row["second_moment_bound"] = float("inf")
    return row


def _cmd_theory(args) -> int:
    grid = _grid(args) or {}
    ns = grid.get("n", [args.n])
    ks = grid.get("k", [args.k])
    ms = grid.get("m", [args.m])
    lams = grid.get("lambda", [args.lam])
    rows = []
    for n in ns:
        for k in ks:
            for m in ms:
                for lam in lams:
                    ModelConfig(n=n, k=k, m=m, lam=lam)
                    rows.append(_theory_row(n, k, m, lam, args.delta, args.paper_chi2))
    _emit_records(rows, args)
    return EXIT_OK


def _cmd_crossval(args) -> int:
    report = harness.crossval(args.n_max, args.trials, args.seed)
    _emit_records(report.to_rows(), args)
    if not report.passed:
        failed = ", ".join(s.name for s in report.suites if not s.passed)
        print(f"psm: crossval failed: {failed}", file=sys.stderr)
        return EXIT_CROSSVAL
    return EXIT_OK


_COMMANDS = {
    "gen": _cmd_gen,
    "detect": _cmd_detect,
    "recover": _cmd_recover,
    "sweep": _cmd_sweep,
    "theory": _cmd_theory,
    "crossval": _cmd_crossval,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except (BudgetExceededError, SaturationError, OverflowError) as exc:
        print(f"psm: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, ValueError) as exc:
        print(f"psm: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"psm: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
