"""Command line: simulate, smooth, classify, estimate, robustness, report.

Every subcommand writes ``<first output>.manifest.json`` (or
``manifest.json`` inside an output directory) listing hashes of all inputs
and outputs.  Exit status is 0 on success, 1 on bad data and 2 on bad
usage.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .dlm import DlmSpec, estimate, robustness_suite
from .exceptions import DataError, ParseError, ShockPanelError
from .panel import PanelDataset, format_float, load_csv, write_csv
from .pds import LambdaRule
from .reporting import (
    RunManifest,
    read_json,
    validate_estimate,
    write_figure_csv,
    write_json,
    write_pvalue_csv,
)
from .shocks import FlowLabel, classify_panel, exclusion_mask
from .smoother import SmootherResult, smooth_panel
from .synth import BAD_CONTROLS, SynthConfig, generate

__all__ = ["main", "run", "build_parser"]


class UsageError(Exception):
    """Invalid combination of arguments (exit status 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _manifest_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def _manifest(argv, config, seed=None) -> RunManifest:
    return RunManifest(command=["shockpanel", *argv], config=config, seed=seed, version=__version__)


# ---------------------------------------------------------------- simulate

def _cmd_simulate(args, argv) -> None:
    cfg = {}
    if args.config:
        cfg = read_json(args.config)
        if not isinstance(cfg, dict):
            raise DataError(f"{args.config}: config must be a JSON object")
    if args.seed is not None:
        cfg["seed"] = args.seed
    try:
        config = SynthConfig.from_dict(cfg)
    except (TypeError, ValueError) as exc:
        raise DataError(f"invalid generator config: {exc}") from None
    panel, truth = generate(config)
    write_csv(panel, args.out)
    m = _manifest(argv, config.to_dict(), config.seed)
    if args.config:
        m.add_input(args.config)
    m.add_output(args.out)
    if args.truth:
        truth.write_csv(args.truth)
        m.add_output(args.truth)
    m.write(_manifest_path(args.out))


# ------------------------------------------------------------------ smooth

def _smooth_input(args):
    panel = load_csv(args.inp, schema=[args.series])
    return panel, smooth_panel(panel, args.series, bandwidth=args.bandwidth)


def write_smoother_csv(panel: PanelDataset, name: str, results: dict, path) -> None:
    values = panel[name]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit", "year", "value", "fitted", "se", "bandwidth"])
        for unit in panel.units:
            r = results[unit]
            rows = panel.unit_rows(unit)
            for y, v, f, s, h in zip(r.years, values[rows], r.fitted, r.se, r.effective_bandwidth):
                w.writerow([unit, int(y), format_float(v), format_float(f), format_float(s),
                            format_float(h)])


def read_smoother_csv(path, panel: PanelDataset) -> dict:
    """Rebuild per-unit smoother results from a ``smooth`` output file."""
    by_unit: dict = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["unit", "year", "value", "fitted", "se", "bandwidth"]:
            raise ParseError(f"{path}: not a smoother file", row=1)
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != 6:
                raise ParseError(f"{path}: expected 6 fields", row=lineno)
            try:
                vals = [int(rec[1])] + [float(c) if c else np.nan for c in rec[3:6]]
            except ValueError:
                raise ParseError(f"{path}: malformed number", row=lineno) from None
            by_unit.setdefault(rec[0], []).append(vals)
    out = {}
    for unit in panel.units:
        if unit not in by_unit:
            raise DataError(f"{path}: no smoother rows for unit {unit}")
        a = np.asarray(by_unit[unit], dtype=float)
        h = a[:, 3]
        out[unit] = SmootherResult(
            unit=unit, years=a[:, 0].astype(np.int64), fitted=a[:, 1], se=a[:, 2],
            bandwidth=float(np.nanmin(h)), effective_bandwidth=h, sigma=float("nan"),
        )
    return out


def _cmd_smooth(args, argv) -> None:
    panel, results = _smooth_input(args)
    write_smoother_csv(panel, args.series, results, args.out)
    m = _manifest(argv, {"series": args.series, "bandwidth": args.bandwidth})
    m.add_input(args.inp)
    m.add_output(args.out)
    m.write(_manifest_path(args.out))


# ---------------------------------------------------------------- classify

def _cmd_classify(args, argv) -> None:
    panel = load_csv(args.inp, schema=[args.series])
    if args.smoother:
        results = read_smoother_csv(args.smoother, panel)
    else:
        results = smooth_panel(panel, args.series, bandwidth=args.bandwidth)
    classes = classify_panel(panel, args.series, results, args.k)
    uid = panel.unit_ids
    with Path(args.out).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit", "year", "delta", "label", "k"])
        for r in range(panel.n_rows):
            label = FlowLabel.from_code(int(classes.codes[r])).value if classes.classified[r] else ""
            w.writerow([uid[r], int(panel.year[r]), format_float(classes.delta[r]), label,
                        format_float(float(args.k))])
    m = _manifest(argv, {"series": args.series, "k": args.k, "bandwidth": args.bandwidth})
    m.add_input(args.inp)
    if args.smoother:
        m.add_input(args.smoother)
    m.add_output(args.out)
    m.write(_manifest_path(args.out))


# ---------------------------------------------------------------- estimate

def _rule(args) -> LambdaRule:
    if args.lam is not None and args.cv is not None:
        raise UsageError("--lambda and --cv are mutually exclusive")
    if args.lam is not None:
        if args.lam < 0:
            raise UsageError("--lambda must be non-negative")
        return LambdaRule("fixed", args.lam)
    if args.cv is not None:
        if args.cv < 2:
            raise UsageError("--cv needs at least 2 folds")
        return LambdaRule("cv", folds=args.cv, seed=args.cv_seed)
    return LambdaRule()


def _candidates(args, panel: PanelDataset) -> tuple:
    if args.candidates is None:
        names = [n for n in panel.series_names if n.startswith("cov_")]
    elif args.candidates.strip() == "":
        names = []
    else:
        names = [c.strip() for c in args.candidates.split(",") if c.strip()]
    bad = sorted(set(names) & BAD_CONTROLS)
    if bad:
        raise DataError(f"bad controls cannot be candidates: {', '.join(bad)}")
    for n in names:
        if n not in panel:
            raise DataError(f"unknown candidate series {n!r}")
    reserved = {args.outcome, args.series}
    if reserved & set(names):
        raise DataError("outcome and receipt series cannot be candidates")
    return tuple(names)


def _spec(args, panel: PanelDataset) -> DlmSpec:
    if args.leads < 0 or args.lags < 0:
        raise UsageError("--leads and --lags must be non-negative")
    if args.k <= 0:
        raise UsageError("--k must be positive")
    for name in (args.outcome, args.series):
        if name not in panel:
            raise DataError(f"panel has no series {name!r}")
    return DlmSpec(
        outcome=args.outcome,
        base=args.series,
        leads=args.leads,
        lags=args.lags,
        k=float(args.k),
        candidates=_candidates(args, panel),
        unit_trends=not args.no_trends,
        interactions=not args.pooled,
        smoother_block=not args.no_smoother,
        rule=_rule(args),
        selection_mode=args.selection,
    )


def _estimate_input(args):
    panel = load_csv(args.inp)
    spec = _spec(args, panel)
    results = smooth_panel(panel, spec.base, bandwidth=args.bandwidth)
    return panel, spec, results


def _cmd_estimate(args, argv) -> None:
    panel, spec, results = _estimate_input(args)
    if args.exclude:
        spec = replace(spec, exclude=exclusion_mask(panel, results, args.exclude))
    classes = classify_panel(panel, spec.base, results, spec.k)
    out = estimate(spec, panel, results, classes, variant=args.variant)
    write_json(out.to_dict(), args.out)
    m = _manifest(argv, spec.to_dict())
    m.add_input(args.inp)
    m.add_output(args.out)
    m.write(_manifest_path(args.out))


def _cmd_robustness(args, argv) -> None:
    panel, spec, results = _estimate_input(args)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    suite = robustness_suite(panel, results, spec, exclusion_rule=args.exclude or "union")
    m = _manifest(argv, spec.to_dict())
    m.add_input(args.inp)
    for name, out in suite.items():
        path = outdir / f"{name}.json"
        write_json(out.to_dict(), path)
        m.add_output(path)
    m.write(outdir / "manifest.json")


# ------------------------------------------------------------------ report

def _cmd_report(args, argv) -> None:
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    m = _manifest(argv, {"inputs": [str(p) for p in args.inputs]})
    stems = [Path(p).stem for p in args.inputs]
    if len(set(stems)) != len(stems):
        raise UsageError("report inputs must have distinct file names")
    docs = []
    for p in args.inputs:
        doc = read_json(p)
        validate_estimate(doc)
        docs.append(doc)
    for p, stem, doc in zip(args.inputs, stems, docs):
        m.add_input(p)
        fig = outdir / f"{stem}_figure.csv"
        write_figure_csv(doc, fig)
        m.add_output(fig)
        pv = outdir / f"{stem}_pvalues.csv"
        if write_pvalue_csv(doc, pv):
            m.add_output(pv)
    m.write(outdir / "manifest.json")


# ------------------------------------------------------------------ parser

def _add_smoothing(p) -> None:
    p.add_argument("--series", default="ipgt", help="receipt series to smooth (default: ipgt)")
    p.add_argument("--bandwidth", type=float, default=None,
                   help="fixed bandwidth in years (default: rule of thumb)")


def _add_model(p) -> None:
    p.add_argument("--in", dest="inp", required=True, help="panel CSV")
    p.add_argument("--outcome", default="current_expenditures")
    _add_smoothing(p)
    p.add_argument("--k", type=float, default=3.0, help="shock threshold in standard errors")
    p.add_argument("--leads", type=int, default=2)
    p.add_argument("--lags", type=int, default=5)
    p.add_argument("--pooled", action="store_true",
                   help="receipts and smoother only, no shock interactions")
    p.add_argument("--candidates", default=None,
                   help="comma-separated candidate controls (default: all cov_* series)")
    p.add_argument("--no-trends", action="store_true", help="omit unit trend candidates")
    p.add_argument("--no-smoother", action="store_true", help="omit the smoother block")
    p.add_argument("--selection", choices=("column", "block"), default="column")
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="fixed LASSO penalty")
    p.add_argument("--cv", type=int, default=None, metavar="FOLDS",
                   help="cross-validated penalty (1-SE rule)")
    p.add_argument("--cv-seed", type=int, default=0)
    p.add_argument("--exclude", choices=("union", "lower_bound", "share", "intersection"),
                   default=None, help="drop lowest-decile units by this rule")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shockpanel", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="draw a synthetic panel")
    p.add_argument("--config", default=None, help="generator config JSON")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="panel CSV to write")
    p.add_argument("--truth", default=None, help="ground-truth CSV to write")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("smooth", help="local linear trend per unit")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    _add_smoothing(p)
    p.set_defaults(func=_cmd_smooth)

    p = sub.add_parser("classify", help="label regular flows and shocks")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--smoother", default=None, help="output of 'smooth' (recomputed if omitted)")
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=float, choices=(3.0, 4.0, 5.0), default=3.0)
    _add_smoothing(p)
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("estimate", help="distributed-lag model with double selection")
    _add_model(p)
    p.add_argument("--variant", default="baseline", help="label stored in the output")
    p.add_argument("--out", required=True, help="estimate JSON to write")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("robustness", help="baseline plus the robustness variants")
    _add_model(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_robustness)

    p = sub.add_parser("report", help="plot data and p-value tables from estimate JSON")
    p.add_argument("inputs", nargs="+", help="estimate JSON files")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_report)
    return parser


def run(argv=None) -> int:
    """Run one subcommand; returns the exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args, argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (DataError, ShockPanelError) as exc:
        print(f"shockpanel: error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"shockpanel: error: {exc.filename}: no such file", file=sys.stderr)
        return 1
    except (ValueError, UnicodeDecodeError) as exc:
        print(f"shockpanel: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())
