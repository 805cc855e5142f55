"""Command-line interface: ``gcomprobust analyze`` and ``gcomprobust simulate``.

Exit codes: 0 success, 2 malformed input or invalid flags, 3 working-model
fit failure, 4 boundary estimate or negative variance.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys

import numpy as np

from . import __version__
from .contrasts import ContrastSpec, contrast_inference, contrast_value, z_quantile
from .dataset import TrialDataset
from .errors import (
    BoundaryTheta,
    ConfigInvalid,
    DataError,
    FitError,
    NegativeQuadraticForm,
    NegativeVariance,
)
from .gcomp import gcomp_estimate
from .ge import ge_se_risk_difference
from .glm import fit_logistic
from .report import AnalysisReport, ArmEstimate, ContrastEntry, Convergence, GeEntry, align_rows
from .simulation import SimulationConfig, run_monte_carlo

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_FIT = 3
EXIT_NUMERIC = 4


class UsageError(Exception):
    """Invalid input or flag combination; mapped to exit code 2."""


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


def _parse_float_list(text: str, what: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated list of numbers, got {text!r}") from None


def read_trial_csv(path, arm_order=None, covariates=None, pi=None):
    """Read a trial CSV into a dataset plus the arm labels and covariate names.

    Required columns: ``arm`` and ``outcome``. Without ``covariates``, every
    other column whose values all parse as numbers is a covariate; remaining
    columns are ignored with a warning.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise UsageError(f"{path}: empty file")
        fields = [f.strip() for f in reader.fieldnames]
        reader.fieldnames = fields
        records = list(reader)
    for col in ("arm", "outcome"):
        if col not in fields:
            raise UsageError(f"{path}: missing required column {col!r}")
    if not records:
        raise UsageError(f"{path}: no data rows")
    for i, rec in enumerate(records, start=1):
        if None in rec or any(v is None for v in rec.values()):
            raise UsageError(f"{path}: row {i} (line {i + 1}) has the wrong number of fields")

    candidates = [f for f in fields if f not in ("arm", "outcome")]
    if covariates is not None:
        for c in covariates:
            if c not in candidates:
                raise UsageError(f"{path}: covariate column {c!r} not found")
        chosen = list(covariates)
    else:
        chosen = [c for c in candidates if all(_is_number(rec[c]) for rec in records)]
    ignored = [c for c in candidates if c not in chosen]
    if ignored:
        _warn(f"ignoring column(s) {', '.join(ignored)}")

    labels = [rec["arm"].strip() for rec in records]
    if arm_order is not None:
        order = list(arm_order)
        unknown = sorted(set(labels) - set(order))
        if unknown:
            row = labels.index(unknown[0]) + 1
            raise UsageError(f"{path}: row {row} (column 'arm'): label {unknown[0]!r} not in --arm-order")
    else:
        order = list(dict.fromkeys(labels))
    index = {lab: t + 1 for t, lab in enumerate(order)}
    arm = np.array([index[lab] for lab in labels], dtype=np.int64)

    outcome = np.empty(len(records))
    for i, rec in enumerate(records):
        raw = rec["outcome"].strip()
        try:
            val = float(raw)
        except ValueError:
            val = math.nan
        if val not in (0.0, 1.0):
            raise UsageError(f"{path}: row {i + 1} (line {i + 2}), column 'outcome': value {raw!r} is not 0 or 1")
        outcome[i] = val

    x = np.empty((len(records), len(chosen)))
    for j, c in enumerate(chosen):
        for i, rec in enumerate(records):
            raw = rec[c].strip()
            if not _is_number(raw):
                raise UsageError(f"{path}: row {i + 1} (line {i + 2}), column {c!r}: {raw!r} is not a number")
            x[i, j] = float(raw)

    k = len(order)
    if k < 2:
        raise UsageError(f"{path}: need at least two arms, found {order}")
    if pi is not None and len(pi) != k:
        raise UsageError(f"--pi has {len(pi)} entries but the data has {k} arms")
    try:
        if pi is None:
            data = TrialDataset.from_arrays(arm, outcome, x, n_arms=k)
        else:
            data = TrialDataset(arm, outcome, x, np.asarray(pi), k)
    except DataError as err:
        raise UsageError(f"{path}: {err}") from None
    return data, tuple(order), tuple(chosen)


def _is_number(text: str) -> bool:
    try:
        return math.isfinite(float(text))
    except (TypeError, ValueError):
        return False


def analyze(data: TrialDataset, specs, *, arm_labels=None, covariate_names=None,
            pi_source="design", alpha=0.05, ge=False) -> AnalysisReport:
    """Fit, estimate, and run inference for each requested contrast."""
    k = data.n_arms
    arm_labels = arm_labels or tuple(str(t) for t in range(1, k + 1))
    covariate_names = covariate_names or tuple(f"x{j + 1}" for j in range(data.n_covariates))
    for spec in specs:
        if max(spec.arm_t, spec.arm_s) > k:
            raise UsageError(f"contrast {spec.short()} refers to an arm beyond k={k}")
    if ge and k != 2:
        raise UsageError("--ge is only available for two-arm trials")

    fit = fit_logistic(data)
    est = gcomp_estimate(data, fit, pi_source)
    z = z_quantile(alpha)
    entries = []
    for spec in specs:
        res = contrast_inference(spec, est, alpha)
        ge_entry = None
        if ge and spec.kind == "risk_difference":
            ge_se = ge_se_risk_difference(fit, data, spec.arm_t, spec.arm_s).se
            value = contrast_value(spec, est.theta)
            ge_entry = GeEntry(ge_se, value - z * ge_se, value + z * ge_se)
        entries.append(
            ContrastEntry(
                contrast=spec.short(),
                kind=spec.kind,
                arm_t=spec.arm_t,
                arm_s=spec.arm_s,
                estimate=res.estimate,
                se=res.se,
                ci_low=res.ci_low,
                ci_high=res.ci_high,
                alpha=alpha,
                reporting_estimate=res.reporting_estimate,
                reporting_low=res.reporting_low,
                reporting_high=res.reporting_high,
                ge=ge_entry,
            )
        )
    counts = data.arm_counts
    arm_se = est.arm_se
    return AnalysisReport(
        n=data.n_subjects,
        k=k,
        p=data.n_covariates,
        arm_labels=tuple(arm_labels),
        covariates=tuple(covariate_names),
        pi=tuple(float(p) for p in est.pi),
        pi_source=pi_source,
        convergence=Convergence(fit.iterations, fit.converged, fit.final_score_norm),
        theta=tuple(
            ArmEstimate(t + 1, arm_labels[t], int(counts[t]), float(est.theta[t]), float(arm_se[t]))
            for t in range(k)
        ),
        contrasts=tuple(entries),
        version=__version__,
    )


def cmd_analyze(args) -> int:
    pi = _parse_float_list(args.pi, "--pi") if args.pi else None
    arm_order = [a.strip() for a in args.arm_order.split(",")] if args.arm_order else None
    covariates = [c.strip() for c in args.covariates.split(",")] if args.covariates else None
    data, labels, names = read_trial_csv(args.csv, arm_order, covariates, pi)
    try:
        specs = [ContrastSpec.parse(c) for c in args.contrast] if args.contrast else [
            ContrastSpec("risk_difference", t, 1) for t in range(2, data.n_arms + 1)
        ]
    except ValueError as err:
        raise UsageError(str(err)) from None
    report = analyze(
        data,
        specs,
        arm_labels=labels,
        covariate_names=names,
        pi_source="design" if pi is not None else "empirical",
        alpha=args.alpha,
        ge=args.ge,
    )
    sys.stdout.write(report.to_json() + "\n" if args.json else report.to_text())
    return EXIT_OK


SIM_COLUMNS = ("Case", "Parameter", "n", "Truth", "Mean", "SD", "SE", "CP")
GE_COLUMNS = ("Ge SE", "Ge CP")


def simulation_rows(summaries, ge: bool) -> list[tuple[str, ...]]:
    """Table rows in the layout Truth, Mean, SD, SE, CP (+ Ge SE, Ge CP), Failed."""

    def fmt(v, digits=4):
        return "NA" if v is None else f"{v:.{digits}f}"

    rows = []
    for summary in summaries:
        cfg = summary.config
        for spec in cfg.contrasts:
            r = summary.row(spec, "robust")
            row = [cfg.case.id, spec.label(), str(cfg.n), fmt(r.truth), fmt(r.mean), fmt(r.sd),
                   fmt(r.avg_se), fmt(r.cp, 2)]
            failed = r.n_failed
            if ge:
                g = summary.row(spec, "ge")
                row += [fmt(g.avg_se), fmt(g.cp, 2)]
                failed = max(failed, g.n_failed)
            row.append(str(failed))
            rows.append(tuple(row))
    return rows


def cmd_simulate(args) -> int:
    if args.seed is None:
        raise UsageError("simulate requires --seed")
    estimators = ("robust", "ge") if args.ge else ("robust",)
    try:
        configs = [
            SimulationConfig(args.case, n, args.reps, args.scheme, args.seed,
                             alpha=args.alpha, estimators=estimators)
            for n in args.n
        ]
    except ConfigInvalid as err:
        raise UsageError(str(err)) from None
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    summaries = [run_monte_carlo(cfg, workers=args.workers) for cfg in configs]

    header = SIM_COLUMNS + (GE_COLUMNS if args.ge else ()) + ("Failed",)
    rows = simulation_rows(summaries, args.ge)
    if args.csv:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        sys.stdout.write(buf.getvalue())
    else:
        sys.stdout.write("\n".join(align_rows([header] + rows)) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gcomprobust",
        description="Covariate-adjusted g-computation for binary outcomes with robust variance.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="analyze a trial dataset from CSV")
    a.add_argument("csv", help="CSV with columns arm, outcome and numeric covariates")
    a.add_argument("--contrast", action="append", metavar="KIND:t,s",
                   help="rd, rr or or (or full kind name) of arm t vs arm s; repeatable")
    a.add_argument("--pi", help="known design allocation p1,p2,...; default is n_t/n")
    a.add_argument("--alpha", type=float, default=0.05)
    a.add_argument("--ge", action="store_true",
                   help="add the Ge et al. model-based SE to risk-difference contrasts (two arms only)")
    a.add_argument("--json", action="store_true", help="emit the JSON report instead of a table")
    a.add_argument("--arm-order", help="comma-separated arm labels mapped to arms 1..k")
    a.add_argument("--covariates", help="comma-separated subset of columns to adjust for")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="Monte Carlo coverage study")
    s.add_argument("--case", required=True, choices=("I", "II", "III"))
    s.add_argument("--n", required=True, type=int, nargs="+")
    s.add_argument("--reps", required=True, type=int)
    s.add_argument("--scheme", default="simple", choices=("simple", "complete"))
    s.add_argument("--seed", type=int)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--ge", action="store_true")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--csv", action="store_true", help="CSV instead of an aligned table")
    s.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, DataError, ConfigInvalid) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except FitError as err:
        print(f"error: working model fit failed ({err.reason}): {err}", file=sys.stderr)
        return EXIT_FIT
    except (BoundaryTheta, NegativeVariance, NegativeQuadraticForm) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
