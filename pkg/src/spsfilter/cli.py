"""Command-line front end: ``spsfilter point|sweep|figure|limits|selftest``.

Exit codes: 0 success, 1 failed self-test checks, 2 usage error, 3 every
point failed, 4 a metric missed its accuracy budget in ``point``.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .filters import FilterSpec
from .gridsum import BACKEND
from .liouville import RateSet
from .metrics import LIMIT_NAMES, METRIC_NAMES, IntegrationConfig, analytic_limits
from .oracles import limit_convergence_suite, quadrature_oracle
from .sweep import (DEFAULTS, FIGURE_IDS, PARAMETERS, PlotSpec, RunManifest, SweepAxis,
                    SweepGrid, SweepResult, UsageError, csv_text, figure_preset, heatmap_svg,
                    point_inputs, run_point, run_sweep, to_json)

EXIT_OK, EXIT_SELFTEST, EXIT_USAGE, EXIT_ALL_FAILED, EXIT_ACCURACY = 0, 1, 2, 3, 4

_FLAG_PARAMS = (("gamma_pump", "--gamma-pump"), ("gamma_deph", "--gamma-deph"),
                ("gamma_F", "--gamma-f"), ("pulse_T", "--pulse"), ("detuning", "--detuning"))
_CFG_KEYS = ("rel_tol", "abs_tol", "horizon_factor", "quad_nodes", "path")


def _metrics_arg(text: str) -> tuple:
    names = tuple(m for m in (s.strip() for s in text.split(",")) if m)
    bad = [m for m in names if m not in METRIC_NAMES]
    if bad:
        raise argparse.ArgumentTypeError(
            f"unknown metric(s) {', '.join(bad)}; valid: {', '.join(METRIC_NAMES)}")
    return names


def _axis_arg(text: str) -> SweepAxis:
    parts = text.split(":")
    if len(parts) not in (4, 5):
        raise argparse.ArgumentTypeError("axis must look like NAME:MIN:MAX:POINTS[:log|linear]")
    try:
        return SweepAxis(parts[0], float(parts[1]), float(parts[2]), int(parts[3]),
                         *(parts[4:] or ["log"]))
    except (ValueError, UsageError) as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _add_common(p: argparse.ArgumentParser, params: bool = True):
    if params:
        for name, flag in _FLAG_PARAMS:
            p.add_argument(flag, dest=name, type=float, default=None,
                           help=f"{name} in units of gamma_diss (default {DEFAULTS[name]:g})")
        p.add_argument("--metrics", type=_metrics_arg, default=None,
                       help="comma list out of ind,g2T,g2inf,qy (default all)")
    p.add_argument("--rel-tol", type=float, default=None, help="relative error budget")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default 1)")
    p.add_argument("--out", type=Path, default=None, help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--config", type=Path, default=None, help="JSON configuration file")
    p.add_argument("--timing", action="store_true",
                   help="fill the wall_ms column (output then differs between runs)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spsfilter", description=(
        "Figures of merit of a spectrally filtered, pulse-pumped two-level emitter. "
        "All rates are in units of gamma_diss."))
    ap.add_argument("--version", action="version", version=f"spsfilter {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("point", help="evaluate metrics at one parameter point")
    _add_common(p)

    p = sub.add_parser("sweep", help="evaluate a parameter grid")
    _add_common(p)
    p.add_argument("--axis", type=_axis_arg, action="append", default=None,
                   help="NAME:MIN:MAX:POINTS[:log|linear]; repeat for a second axis")
    p.add_argument("--svg", type=Path, default=None, help="heatmap of the first metric")

    p = sub.add_parser("figure", help="regenerate a reference heatmap")
    p.add_argument("figure_id", help=f"one of {', '.join(FIGURE_IDS)}")
    p.add_argument("--points", type=int, default=40, help="points per axis (default 40)")
    p.add_argument("--svg", type=Path, default=None, help="heatmap output file")
    _add_common(p, params=False)

    p = sub.add_parser("limits", help="evaluate closed-form limits")
    p.add_argument("name", nargs="?", default="all", help=f"one of {', '.join(LIMIT_NAMES)}")
    for name, flag in _FLAG_PARAMS[:4]:
        p.add_argument(flag, dest=name, type=float, default=None)

    p = sub.add_parser("selftest", help="run the oracle and closed-form checks")
    p.add_argument("--out", type=Path, default=None, help="JSON summary file (default stdout)")
    return ap


def _load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read config {path}: {e}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    unknown = set(cfg) - {"parameters", "axes", "metrics", "workers", *_CFG_KEYS}
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return cfg


def _resolve(args, cfg: dict) -> tuple[dict, tuple, IntegrationConfig, int]:
    params = dict(DEFAULTS)
    params.update(cfg.get("parameters", {}))
    for name, _ in _FLAG_PARAMS:
        v = getattr(args, name, None)
        if v is not None:
            params[name] = v
    unknown = set(params) - set(PARAMETERS)
    if unknown:
        raise UsageError(f"unknown parameters: {', '.join(sorted(unknown))}")
    metrics = getattr(args, "metrics", None)
    if metrics is None:
        metrics = tuple(cfg.get("metrics", METRIC_NAMES))
    icfg = {k: cfg[k] for k in _CFG_KEYS if k in cfg}
    if args.rel_tol is not None:
        icfg["rel_tol"] = args.rel_tol
    workers = args.workers if args.workers is not None else int(cfg.get("workers", 1))
    try:
        return params, metrics, IntegrationConfig(**icfg), workers
    except (TypeError, ValueError) as e:
        raise UsageError(str(e)) from None


def _emit(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _write_result(result, args):
    text = to_json(result, args.timing) + "\n" if args.format == "json" \
        else csv_text(result, args.timing)
    _emit(text, args.out)
    if args.out is not None:
        args.out.with_name(args.out.name + ".manifest.json").write_text(
            result.manifest.to_json() + "\n")


def _cmd_point(args) -> int:
    params, metrics, icfg, _ = _resolve(args, _load_config(args.config))
    rates, filt = point_inputs(params)
    rec = run_point(rates, filt, metrics, icfg)
    # a one-point sweep so the output format matches ``sweep``
    grid = SweepGrid(axes=(), fixed=tuple(params.items()), metrics=metrics)
    manifest = RunManifest(__version__, BACKEND, grid.as_dict(), asdict(icfg), rec.wall_time,
                           [dict(index=0, **rec.flags)] if rec.flags else [])
    _write_result(SweepResult(grid, [params], [rec], manifest), args)
    if "accuracy" in rec.flags.values():
        return EXIT_ACCURACY
    if metrics and len(rec.flags) == len(metrics):
        return EXIT_ALL_FAILED
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    params, metrics, icfg, workers = _resolve(args, cfg)
    axes = args.axis if args.axis else [SweepAxis(**a) for a in cfg.get("axes", [])]
    if not axes:
        raise UsageError("sweep needs at least one --axis (or 'axes' in the config)")
    swept = {a.name for a in axes} | ({"gamma_deph"} if any(a.name == "Gamma" for a in axes)
                                       else set())
    fixed = tuple((k, v) for k, v in params.items() if k not in swept)
    grid = SweepGrid(axes=tuple(axes), fixed=fixed, metrics=metrics)
    if args.svg is not None and len(grid.axes) != 2:
        raise UsageError("--svg needs exactly two axes")
    return _finish_sweep(grid, None, icfg, workers, args)


def _cmd_figure(args) -> int:
    cfg = _load_config(args.config)
    grid, plot = figure_preset(args.figure_id, args.points)
    _, _, icfg, workers = _resolve(args, cfg)
    return _finish_sweep(grid, plot, icfg, workers, args)


def _finish_sweep(grid, plot, icfg, workers, args) -> int:
    result = run_sweep(grid, workers, icfg)
    _write_result(result, args)
    if args.svg is not None:
        if plot is None:
            metric = grid.metrics[0] if grid.metrics else "ind"
            names = [a.name for a in grid.axes]
            plot = PlotSpec(metric, metric, names[-1], names[0])
        args.svg.write_text(heatmap_svg(result, plot))
    return EXIT_ALL_FAILED if result.all_failed else EXIT_OK


def _cmd_limits(args) -> int:
    names = LIMIT_NAMES if args.name == "all" else (args.name,)
    kw = {n: getattr(args, n) for n, _ in _FLAG_PARAMS[:4] if getattr(args, n) is not None}
    for name in names:
        print(f"{name}\t{analytic_limits(name, **kw)!r}")
    return EXIT_OK


def _cmd_selftest(args) -> int:
    reports = limit_convergence_suite()
    quick = (
        ("qy", dict(gamma_pump=5.0, gamma_deph=10.0, pulse_T=0.01), 1.0, 400, 0.01),
        ("ind", dict(gamma_pump=0.01, gamma_deph=10.0, pulse_T=1.0), 1e4, 200, 0.02),
        ("g2T", dict(gamma_pump=1.0, gamma_deph=2.0, pulse_T=0.5), 1.0, 40, 0.02),
    )
    for metric, params, width, points, tol in quick:
        r = quadrature_oracle(metric, RateSet(**params), FilterSpec(width), points=points,
                              tolerance=tol)
        r.quantity = f"quadrature {metric}"
        r.meta.update(params, gamma_F=width)
        reports.append(r)
    for r in reports:
        mark = "PASS" if r.passed else "FAIL"
        print(f"{mark}  {r.quantity:<32} engine={r.engine:.6g} reference={r.oracle:.6g} "
              f"dev={r.deviation:.2e} tol={r.tolerance:g}", file=sys.stderr)
    failed = sum(not r.passed for r in reports)
    print(f"{len(reports) - failed}/{len(reports)} checks passed", file=sys.stderr)
    summary = {"passed": failed == 0, "checks": [r.as_dict() for r in reports]}
    _emit(json.dumps(summary, indent=2, default=float) + "\n", args.out)
    return EXIT_OK if failed == 0 else EXIT_SELFTEST


_COMMANDS = {"point": _cmd_point, "sweep": _cmd_sweep, "figure": _cmd_figure,
             "limits": _cmd_limits, "selftest": _cmd_selftest}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "workers", None) is not None and args.workers < 1:
        parser.error("--workers must be >= 1")
    try:
        return _COMMANDS[args.command](args)
    except UsageError as e:
        print(f"spsfilter {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        # invalid rates and the like
        print(f"spsfilter {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
