"""Render cinest CSV artifacts as vector figures.

Three figure kinds:

* ``sweep`` -- per-node asymptotic variance versus degree, minimum
  annotated, unstable rows dropped with a legend note;
* ``convergence`` -- log-log network MSE versus time from a trajectory
  CSV, one line per replicate;
* ``scaled-moment`` -- the ensemble's scaled second moment versus time,
  with the analytic reference overlaid when the CSV carries it.

Rendering is deterministic given (CSV, spec): the plotted series are the
CSV values verbatim.  Pixel output may vary across matplotlib versions;
the data in the figure does not.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

__all__ = [
    "FigureSpec",
    "SchemaError",
    "RenderError",
    "SweepPlotInfo",
    "ConvergencePlotInfo",
    "build_sweep_figure",
    "build_convergence_figure",
    "render_sweep",
    "render_convergence",
]

KINDS = ("sweep", "convergence", "scaled-moment")

LOG_FLOOR = 1e-16


class SchemaError(ValueError):
    """The CSV does not match the documented schema."""


class RenderError(RuntimeError):
    """Nothing can be drawn from the given data."""


@dataclass(frozen=True)
class FigureSpec:
    """What to plot and how."""

    csv: Path
    kind: str
    out: Path = Path("figure.svg")
    xscale: str | None = None  # None = the kind's default
    yscale: str | None = None
    annotate: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; "
                             f"expected one of {KINDS}")
        object.__setattr__(self, "csv", Path(self.csv))
        object.__setattr__(self, "out", Path(self.out))


@dataclass(frozen=True)
class SweepPlotInfo:
    """Series actually drawn in a sweep figure."""

    degrees: np.ndarray
    variances: np.ndarray
    argmin_degree: int
    n_unstable_dropped: int


@dataclass(frozen=True)
class ConvergencePlotInfo:
    """Series actually drawn in a convergence / scaled-moment figure."""

    times: np.ndarray
    series: dict
    reference: float | None
    floor_clamped: bool


def _read_csv(path, required):
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"CSV not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise SchemaError(
                    f"{path.name}: missing required column '{col}' "
                    f"(found: {', '.join(header) or 'nothing'})")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path.name}: no data rows")
    return header, rows


def _column(rows, name, path, dtype=float):
    try:
        return np.array([dtype(r[name]) for r in rows])
    except (TypeError, ValueError) as exc:
        raise SchemaError(
            f"{Path(path).name}: column '{name}' is not numeric: {exc}"
        ) from None


def _clamp_for_log(values):
    """Positive floor for log axes; zero-noise runs plot as a flat line."""
    positive = values[values > 0]
    floor = positive.min() / 10.0 if positive.size else LOG_FLOOR
    floor = max(floor, LOG_FLOOR)
    clamped = np.maximum(values, floor)
    return clamped, bool(np.any(values < floor))


def build_sweep_figure(spec):
    """Figure for the variance-versus-degree tradeoff curve."""
    _, rows = _read_csv(spec.csv, required=("d", "sigma_d_sq", "stable"))
    d = _column(rows, "d", spec.csv)
    sigma_sq = _column(rows, "sigma_d_sq", spec.csv)
    stable = _column(rows, "stable", spec.csv) != 0

    n_dropped = int((~stable).sum())
    d, sigma_sq = d[stable], sigma_sq[stable]
    if d.size == 0:
        raise RenderError(f"{spec.csv.name}: every row is unstable; "
                          "nothing to plot")

    fig, ax = plt.subplots(figsize=(6.0, 3.4))
    marker = "o" if d.size == 1 else None
    label = "per-node asymptotic variance"
    if n_dropped:
        label += f" ({n_dropped} unstable degrees omitted)"
    ax.plot(d, sigma_sq, marker=marker, lw=1.4, label=label)

    i_min = int(np.argmin(sigma_sq))
    argmin_degree = int(d[i_min])
    if spec.annotate:
        ax.plot([d[i_min]], [sigma_sq[i_min]], "v", color="crimson", ms=7,
                label=f"minimum at d = {argmin_degree}")
        ax.annotate(f"d = {argmin_degree}",
                    xy=(d[i_min], sigma_sq[i_min]),
                    xytext=(8, 10), textcoords="offset points",
                    color="crimson")
    ax.set_xscale(spec.xscale or "linear")
    ax.set_yscale(spec.yscale or "linear")
    ax.set_xlabel("degree d")
    ax.set_ylabel(r"$\sigma_d^2$")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return fig, SweepPlotInfo(degrees=d, variances=sigma_sq,
                              argmin_degree=argmin_degree,
                              n_unstable_dropped=n_dropped)


def build_convergence_figure(spec):
    """Figure for MSE-versus-time or scaled-second-moment-versus-time."""
    if spec.kind == "convergence":
        _, rows = _read_csv(
            spec.csv,
            required=("replicate", "t", "agent", "mse",
                      "scaled_second_moment"))
        rows = [r for r in rows if int(r["agent"]) == -1]
        if not rows:
            raise RenderError(f"{spec.csv.name}: no network-aggregate rows "
                              "(agent = -1)")
        reps = sorted({int(r["replicate"]) for r in rows})
        series = {}
        clamped_any = False
        fig, ax = plt.subplots(figsize=(6.0, 3.4))
        times = None
        for rep in reps:
            rrows = [r for r in rows if int(r["replicate"]) == rep]
            t = _column(rrows, "t", spec.csv)
            mse = _column(rrows, "mse", spec.csv)
            shown, clamped = _clamp_for_log(mse)
            clamped_any |= clamped
            ax.plot(t, shown, lw=1.0, alpha=0.8,
                    label=f"replicate {rep}" if len(reps) <= 6 else None)
            series[f"replicate {rep}"] = mse
            times = t if times is None else times
        ax.set_ylabel("network MSE")
        reference = None
    else:  # scaled-moment
        header, rows = _read_csv(spec.csv,
                                 required=("t", "scaled_second_moment"))
        t = _column(rows, "t", spec.csv)
        moment = _column(rows, "scaled_second_moment", spec.csv)
        fig, ax = plt.subplots(figsize=(6.0, 3.4))
        ax.plot(t, moment, lw=1.4, label="ensemble scaled second moment")
        series = {"scaled_second_moment": moment}
        times = t
        clamped_any = False
        reference = None
        if "trace_s_over_n" in header:
            reference = float(_column(rows, "trace_s_over_n", spec.csv)[0])
            ax.axhline(reference, color="crimson", ls="--", lw=1.0,
                       label="analytic Tr(S)/N")
            series["trace_s_over_n"] = np.full_like(moment, reference)
        else:
            warnings.warn(
                f"{spec.csv.name}: no 'trace_s_over_n' column; plotting "
                "without the analytic reference", RuntimeWarning,
                stacklevel=2)
        ax.set_ylabel(r"$(t+1)\,\cdot\,$network MSE")

    ax.set_xscale(spec.xscale or "log")
    ax.set_yscale(spec.yscale or ("log" if spec.kind == "convergence"
                                  else "linear"))
    ax.set_xlabel("iteration t")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return fig, ConvergencePlotInfo(times=times, series=series,
                                    reference=reference,
                                    floor_clamped=clamped_any)


def _save(fig, out):
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out)
    plt.close(fig)
    return out


def render_sweep(spec):
    """Write the sweep figure; returns the output path."""
    fig, _ = build_sweep_figure(spec)
    return _save(fig, spec.out)


def render_convergence(spec):
    """Write a convergence or scaled-moment figure; returns the path."""
    fig, _ = build_convergence_figure(spec)
    return _save(fig, spec.out)
