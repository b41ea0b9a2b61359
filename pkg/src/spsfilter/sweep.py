"""Parameter grids, parallel sweeps, figure presets and their CSV/JSON/SVG output.

Rows always come out in lexicographic grid order (first axis slowest), so a
sweep's CSV depends only on the grid and the tolerances, never on how many
workers computed it.
"""
from __future__ import annotations

import csv
import io
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from html import escape

import numpy as np

from . import __version__
from .filters import FilterSpec
from .gridsum import BACKEND
from .liouville import RateSet
from .metrics import (METRIC_NAMES, AccuracyError, DegenerateInputError, IntegrationConfig,
                      MetricRecord, g2_filtered_at_T, g2_infinity, indistinguishability,
                      qy_ratio)

__all__ = [
    "PARAMETERS", "SweepAxis", "SweepGrid", "RunManifest", "SweepResult", "PlotSpec",
    "FIGURE_IDS", "CSV_COLUMNS", "run_point", "run_sweep", "figure_preset",
    "point_inputs", "write_csv", "csv_text", "to_json", "heatmap_svg", "UsageError",
]

PARAMETERS = ("gamma_pump", "gamma_deph", "gamma_F", "pulse_T", "detuning")
# Gamma is the transverse relaxation rate during the pulse; sweeping it fixes gamma_deph
AXIS_NAMES = PARAMETERS + ("Gamma",)
DEFAULTS = dict(gamma_pump=1.0, gamma_deph=0.0, gamma_F=1.0, pulse_T=1.0, detuning=0.0)

CSV_COLUMNS = ("gamma_pump", "gamma_deph", "gamma_f", "pulse_T", "detuning",
               "ind", "ind_err", "g2_T", "g2_T_err", "g2_inf", "g2_inf_err",
               "qy_ratio", "qy_err", "status", "wall_ms", "rel_tol", "abs_tol")

# metric id -> (MetricRecord attribute, CSV value column, CSV error column)
_FIELDS = {
    "ind": ("indistinguishability", "ind", "ind_err"),
    "g2T": ("g2_at_T", "g2_T", "g2_T_err"),
    "g2inf": ("g2_infinity", "g2_inf", "g2_inf_err"),
    "qy": ("qy_ratio", "qy_ratio", "qy_err"),
}


class UsageError(ValueError):
    """Bad user input to the sweep layer (unknown preset, malformed grid...)."""


@dataclass(frozen=True)
class SweepAxis:
    name: str
    min: float
    max: float
    points: int
    scale: str = "log"

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise UsageError(f"unknown axis {self.name!r}; valid: {', '.join(AXIS_NAMES)}")
        if self.scale not in ("linear", "log"):
            raise UsageError(f"scale must be 'linear' or 'log', got {self.scale!r}")
        if int(self.points) != self.points or self.points < 2:
            raise UsageError(f"axis {self.name}: points must be an integer >= 2")
        lo, hi = float(self.min), float(self.max)
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise UsageError(f"axis {self.name}: need finite min < max")
        if self.scale == "log" and lo <= 0.0:
            raise UsageError(f"axis {self.name}: log scale needs positive bounds")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)
        object.__setattr__(self, "points", int(self.points))

    def values(self) -> list[float]:
        if self.scale == "log":
            v = np.logspace(math.log10(self.min), math.log10(self.max), self.points)
        else:
            v = np.linspace(self.min, self.max, self.points)
        # pin the endpoints so they print exactly as given
        v[0], v[-1] = self.min, self.max
        return [float(x) for x in v]


@dataclass(frozen=True)
class SweepGrid:
    """Axes (first one slowest), fixed values for everything else, metrics to compute."""

    axes: tuple
    fixed: tuple = ()
    metrics: tuple = METRIC_NAMES

    def __post_init__(self):
        axes = tuple(a if isinstance(a, SweepAxis) else SweepAxis(**a) for a in self.axes)
        names = [a.name for a in axes]
        if len(set(names)) != len(names):
            raise UsageError(f"repeated axis in {names}")
        if "Gamma" in names and "gamma_deph" in names:
            raise UsageError("Gamma and gamma_deph cannot both be swept")
        fixed = dict(self.fixed)
        for k in fixed:
            if k not in PARAMETERS:
                raise UsageError(f"unknown parameter {k!r}; valid: {', '.join(PARAMETERS)}")
            if k in names:
                raise UsageError(f"{k} is both swept and fixed")
        for m in self.metrics:
            if m not in METRIC_NAMES:
                raise UsageError(f"unknown metric {m!r}; valid: {', '.join(METRIC_NAMES)}")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "fixed", tuple(sorted(fixed.items())))
        object.__setattr__(self, "metrics", tuple(m for m in METRIC_NAMES if m in self.metrics))

    @property
    def shape(self) -> tuple:
        return tuple(a.points for a in self.axes)

    def points(self) -> list[dict]:
        """Full parameter dicts in lexicographic order."""
        base = dict(DEFAULTS)
        base.update(dict(self.fixed))
        out = []
        for combo in np.ndindex(*self.shape):
            p = dict(base)
            for axis, i in zip(self.axes, combo):
                p[axis.name] = axis.values()[i]
            if "Gamma" in p:
                p["gamma_deph"] = 2.0 * p.pop("Gamma") - p["gamma_pump"] - 1.0
            out.append({k: p[k] for k in PARAMETERS})
        return out

    def as_dict(self) -> dict:
        return {"axes": [asdict(a) for a in self.axes], "fixed": dict(self.fixed),
                "metrics": list(self.metrics)}

    @classmethod
    def from_dict(cls, d: dict) -> "SweepGrid":
        try:
            return cls(axes=tuple(SweepAxis(**a) for a in d["axes"]),
                       fixed=tuple(d.get("fixed", {}).items()),
                       metrics=tuple(d.get("metrics", METRIC_NAMES)))
        except (KeyError, TypeError) as e:
            raise UsageError(f"malformed grid description: {e}") from None


@dataclass
class RunManifest:
    engine_version: str
    kernel_backend: str
    grid: dict
    config: dict
    wall_time: float
    flags: list
    python: str = field(default_factory=platform.python_version)
    numpy: str = np.__version__

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


@dataclass
class SweepResult:
    grid: SweepGrid
    params: list
    records: list
    manifest: RunManifest

    @property
    def all_failed(self) -> bool:
        return bool(self.records) and all(_status(r) == "failed" for r in self.records)


# -- evaluation ---------------------------------------------------------------

def point_inputs(params: dict) -> tuple[RateSet, FilterSpec]:
    """RateSet and FilterSpec for one parameter dict (rates in units of gamma_diss)."""
    rates = RateSet(gamma_pump=params["gamma_pump"], gamma_deph=params["gamma_deph"],
                    pulse_T=params["pulse_T"], detuning=params["detuning"])
    return rates, FilterSpec(params["gamma_F"], params["detuning"])


def run_point(rates: RateSet, filt: FilterSpec, metrics=METRIC_NAMES,
              cfg: IntegrationConfig = IntegrationConfig()) -> MetricRecord:
    """Evaluate the selected metrics at one point.

    A failing metric leaves its value ``None`` and records why in
    ``flags[metric]`` ("accuracy", "degenerate" or "invalid"); the others
    are still computed.
    """
    calls = {
        "ind": lambda: indistinguishability(rates, filt, cfg, with_error=True),
        "g2T": lambda: g2_filtered_at_T(rates, filt, cfg, with_error=True),
        "g2inf": lambda: g2_infinity(rates, cfg, with_error=True),
        "qy": lambda: qy_ratio(rates, filt, cfg, with_error=True),
    }
    rec = MetricRecord()
    start = time.perf_counter()
    for m in METRIC_NAMES:
        if m not in metrics:
            continue
        try:
            value, err = calls[m]()
        except AccuracyError as e:
            rec.flags[m] = "accuracy"
            rec.errors[m] = e.bound
            continue
        except DegenerateInputError:
            rec.flags[m] = "degenerate"
            continue
        except (ValueError, ArithmeticError):
            rec.flags[m] = "invalid"
            continue
        setattr(rec, _FIELDS[m][0], value)
        rec.errors[m] = err
    rec.wall_time = time.perf_counter() - start
    return rec


def _status(rec: MetricRecord) -> str:
    if not rec.flags:
        return "ok"
    computed = [m for m in _FIELDS if getattr(rec, _FIELDS[m][0]) is not None]
    return "partial" if computed else "failed"


def _work(task):
    params, metrics, cfg = task
    rates, filt = point_inputs(params)
    return run_point(rates, filt, metrics, cfg)


def run_sweep(grid: SweepGrid, workers: int = 1,
              cfg: IntegrationConfig = IntegrationConfig()) -> SweepResult:
    """Evaluate every grid point, in parallel when ``workers > 1``."""
    if workers < 1:
        raise UsageError("workers must be >= 1")
    params = grid.points()
    tasks = [(p, grid.metrics, cfg) for p in params]
    start = time.perf_counter()
    if workers == 1:
        records = [_work(t) for t in tasks]
    else:
        chunk = max(1, len(tasks) // (8 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_work, tasks, chunksize=chunk))
    wall = time.perf_counter() - start
    flags = [{"index": i, **r.flags} for i, r in enumerate(records) if r.flags]
    manifest = RunManifest(engine_version=__version__, kernel_backend=BACKEND,
                           grid=grid.as_dict(), config=asdict(cfg), wall_time=wall,
                           flags=flags)
    return SweepResult(grid, params, records, manifest)


# -- output ----------------------------------------------------------------------

def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def _row(params: dict, rec: MetricRecord, cfg: dict, timing: bool) -> list[str]:
    row = [_fmt(params[k]) for k in PARAMETERS]
    for m, (attr, _, _) in _FIELDS.items():
        row += [_fmt(getattr(rec, attr)), _fmt(rec.errors.get(m))]
    status = _status(rec)
    if rec.flags:
        status += ":" + ";".join(f"{m}={rec.flags[m]}" for m in sorted(rec.flags))
    row.append(status)
    row.append(f"{rec.wall_time * 1e3:.3f}" if timing else "")
    row += [_fmt(cfg["rel_tol"]), _fmt(cfg["abs_tol"])]
    return row


def write_csv(result: SweepResult, fh, timing: bool = False) -> None:
    """Write the sweep as CSV.

    ``wall_ms`` is left empty unless ``timing`` is set, which keeps the file
    byte-identical across runs and worker counts.
    """
    fh.write("# rates and times in units of gamma_diss (1/gamma_diss); "
             "*_err columns are absolute error bounds\n")
    axes = ", ".join(f"{a.name} {a.scale} [{a.min!r}, {a.max!r}] x{a.points}"
                     for a in result.grid.axes)
    fh.write(f"# spsfilter {result.manifest.engine_version}, axes: {axes or 'none'}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for p, r in zip(result.params, result.records):
        w.writerow(_row(p, r, result.manifest.config, timing))


def csv_text(result: SweepResult, timing: bool = False) -> str:
    buf = io.StringIO()
    write_csv(result, buf, timing)
    return buf.getvalue()


def to_json(result: SweepResult, timing: bool = False) -> str:
    rows = []
    for p, r in zip(result.params, result.records):
        row = dict(zip(CSV_COLUMNS, _row(p, r, result.manifest.config, timing)))
        rows.append({k: (float(v) if v and k not in ("status",) else (v or None))
                     for k, v in row.items()})
    return json.dumps({"manifest": asdict(result.manifest), "rows": rows}, indent=2,
                      sort_keys=True)


# -- figure presets ------------------------------------------------------------------

@dataclass(frozen=True)
class PlotSpec:
    """How to draw one metric of a two-axis sweep as a heatmap.

    Axis ticks show the swept value times ``x_factor`` / ``y_factor``; this is
    how dimensionless products such as ``gamma_F * T`` are labelled.
    """

    metric: str
    title: str
    x_label: str
    y_label: str
    x_factor: float = 1.0
    y_factor: float = 1.0


FIGURE_IDS = ("fig1a", "fig1b", "fig2a", "fig2b", "fig3", "fig4a", "fig4b", "fig5a", "fig5b")

_DECADES = dict(min=1e-2, max=1e2, scale="log")


def figure_preset(fig_id: str, points: int = 40) -> tuple[SweepGrid, PlotSpec]:
    """Grid and plot description that regenerate one of the reference heatmaps.

    The first axis is the plot's y axis, the second its x axis.
    """
    if fig_id not in FIGURE_IDS:
        raise UsageError(f"unknown figure {fig_id!r}; valid ids: {', '.join(FIGURE_IDS)}")
    kind, variant = fig_id[:4], fig_id[4:]
    T_axis = SweepAxis("pulse_T", points=points, **_DECADES)
    F_axis = SweepAxis("gamma_F", points=points, **_DECADES)
    pump = {"a": 0.01, "b": 5.0}.get(variant)
    if kind in ("fig1", "fig2", "fig5"):
        metric = {"fig1": "ind", "fig2": "g2T", "fig5": "qy"}[kind]
        grid = SweepGrid(axes=(T_axis, F_axis),
                         fixed=(("gamma_deph", 10.0), ("gamma_pump", pump)),
                         metrics=(metric,))
        label = {"ind": "indistinguishability", "g2T": "g2 at end of pulse",
                 "qy": "quantum-yield ratio"}[metric]
        title = f"{label}, gamma_deph=10, gamma_pump={pump:g}"
        return grid, PlotSpec(metric, title, "gamma_F", "T")
    if kind == "fig4":
        deph = {"a": 0.0, "b": 10.0}[variant]
        grid = SweepGrid(axes=(T_axis, SweepAxis("gamma_pump", points=points, **_DECADES)),
                         fixed=(("gamma_deph", deph),), metrics=("g2inf",))
        return grid, PlotSpec("g2inf", f"g2 for a long detector window, gamma_deph={deph:g}",
                              "gamma_pump", "T")
    # short pulse, weak pump: gamma_F*T and Gamma*T over 1e-2..1e1
    T = 0.01
    grid = SweepGrid(axes=(SweepAxis("Gamma", 1.0, 1e3, points),
                           SweepAxis("gamma_F", 1.0, 1e3, points)),
                     fixed=(("pulse_T", T), ("gamma_pump", 0.01)), metrics=("g2T",))
    return grid, PlotSpec("g2T", "g2 at end of a short pulse", "gamma_F*T", "Gamma*T",
                          x_factor=T, y_factor=T)


# -- SVG ---------------------------------------------------------------------------------

# viridis anchors
_CMAP = ((68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37))


def _color(u: float) -> str:
    if not math.isfinite(u):
        return "#bbbbbb"
    u = min(max(u, 0.0), 1.0) * (len(_CMAP) - 1)
    i = min(int(u), len(_CMAP) - 2)
    f = u - i
    rgb = [round(a + (b - a) * f) for a, b in zip(_CMAP[i], _CMAP[i + 1])]
    return "#%02x%02x%02x" % tuple(rgb)


def heatmap_svg(result: SweepResult, plot: PlotSpec) -> str:
    """Standalone SVG heatmap with a colour bar; failed points are grey."""
    grid = result.grid
    if len(grid.axes) != 2:
        raise UsageError("heatmaps need exactly two axes")
    ny, nx = grid.shape
    attr = _FIELDS[plot.metric][0]
    z = np.array([np.nan if getattr(r, attr) is None else getattr(r, attr)
                  for r in result.records], dtype=float).reshape(ny, nx)
    finite = z[np.isfinite(z)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0

    cell, left, top = 10, 70, 40
    W, H = left + nx * cell + 110, top + ny * cell + 60
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'font-family="sans-serif" font-size="11">',
           f'<text x="{left}" y="20" font-size="13">{escape(plot.title)}</text>']
    for iy in range(ny):
        y = top + (ny - 1 - iy) * cell          # first row at the bottom
        for ix in range(nx):
            out.append(f'<rect x="{left + ix * cell}" y="{y}" width="{cell}" height="{cell}" '
                       f'fill="{_color((z[iy, ix] - lo) / span)}"/>')

    xs = [v * plot.x_factor for v in grid.axes[1].values()]
    ys = [v * plot.y_factor for v in grid.axes[0].values()]
    base = top + ny * cell
    for ix in sorted({0, nx // 2, nx - 1}):
        out.append(f'<text x="{left + ix * cell + cell / 2}" y="{base + 14}" '
                   f'text-anchor="middle">{xs[ix]:.3g}</text>')
    for iy in sorted({0, ny // 2, ny - 1}):
        out.append(f'<text x="{left - 4}" y="{top + (ny - 1 - iy) * cell + cell * 0.8}" '
                   f'text-anchor="end">{ys[iy]:.3g}</text>')
    out.append(f'<text x="{left + nx * cell / 2}" y="{base + 32}" text-anchor="middle">'
               f'{escape(plot.x_label)} ({grid.axes[1].scale})</text>')
    out.append(f'<text x="16" y="{top + ny * cell / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ny * cell / 2})">'
               f'{escape(plot.y_label)} ({grid.axes[0].scale})</text>')

    bx, steps = left + nx * cell + 20, 50
    bar_h = ny * cell
    for k in range(steps):
        out.append(f'<rect x="{bx}" y="{top + bar_h * (steps - 1 - k) / steps:.2f}" width="16" '
                   f'height="{bar_h / steps + 0.5:.2f}" fill="{_color(k / (steps - 1))}"/>')
    out.append(f'<text x="{bx + 20}" y="{top + 8}">{hi:.4g}</text>')
    out.append(f'<text x="{bx + 20}" y="{top + bar_h}">{lo:.4g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
