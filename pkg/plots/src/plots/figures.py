"""Batch figure generation from tomography result CSV files.

Four plot kinds, each tied to one CSV schema produced by the inversion
command line:

    convergence   ``variant,iteration,objective`` benchmark traces; one
                  curve per variant
    profile       ``look,stage,s,amp`` reflectivity profiles; vertical
                  stems for the raw solver support (stage ``candidate``)
                  and open circles for the final estimate (``selected``)
    histogram     any CSV with a numeric column (``method,look,error``
                  dumps in practice); unit-area bars, bin width by the
                  Freedman-Diaconis rule
    scatter       any CSV; first two numeric columns as points

``render`` writes the image and returns the numbers behind it, so
callers can assert on the data rather than the pixels.  Everything is
headless; figures never depend on a display.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")  # batch only; must precede pyplot
import matplotlib.pyplot as plt
import numpy as np

__all__ = ["KINDS", "PlotSpec", "RenderResult", "render"]

KINDS = ("convergence", "profile", "histogram", "scatter")
PROFILE_STAGES = ("candidate", "selected")


@dataclass(frozen=True)
class PlotSpec:
    """One figure request: a kind, an input CSV and an output image.

    ``rayleigh`` rescales profile x-axes to resolution units; ``column``
    names the histogram value column (default: the last numeric one).
    """

    kind: str
    source: str | Path
    output: str | Path
    xlabel: str | None = None
    ylabel: str | None = None
    logx: bool = False
    logy: bool = False
    rayleigh: float | None = None
    column: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unsupported kind {self.kind!r} (expected one of {KINDS})")
        if self.rayleigh is not None and self.rayleigh <= 0:
            raise ValueError("rayleigh must be positive")


@dataclass(frozen=True)
class RenderResult:
    """What was drawn: series labels, histogram bins, or the row count."""

    kind: str
    output: str
    series: tuple[str, ...] = ()
    edges: np.ndarray | None = None
    density: np.ndarray | None = None
    n_rows: int = 0


def _read_table(path) -> tuple[list[str], list[dict]]:
    try:
        with open(path, encoding="utf-8", newline="") as f:
            reader = csv.DictReader(f)
            rows = list(reader)
            header = reader.fieldnames
    except OSError as e:
        raise ValueError(f"cannot read {path}: {e.strerror}") from e
    if header is None or not rows:
        raise ValueError(f"{path}: empty input")
    return list(header), rows


def _float_columns(header, rows) -> list[str]:
    """Columns whose every cell parses as a finite float."""
    out = []
    for col in header:
        try:
            vals = [float(r[col]) for r in rows]
        except (TypeError, ValueError):
            continue
        if all(np.isfinite(v) for v in vals):
            out.append(col)
    return out


def _new_axes(spec):
    fig, ax = plt.subplots(figsize=(6.4, 4.2), layout="constrained")
    if spec.logx:
        ax.set_xscale("log")
    if spec.logy:
        ax.set_yscale("log")
    return fig, ax


def _finish(fig, ax, spec, xlabel, ylabel):
    ax.set_xlabel(spec.xlabel or xlabel)
    ax.set_ylabel(spec.ylabel or ylabel)
    out = Path(spec.output)
    meta = {"Date": None} if out.suffix.lower() == ".svg" else None
    try:
        fig.savefig(out, dpi=120, metadata=meta)
    finally:
        plt.close(fig)


def _render_convergence(spec) -> RenderResult:
    header, rows = _read_table(spec.source)
    if header != ["variant", "iteration", "objective"]:
        raise ValueError(f"{spec.source}: schema mismatch for convergence "
                         f"(got columns {header})")
    series: dict[str, tuple[list, list]] = {}
    for r in rows:
        xs, ys = series.setdefault(r["variant"], ([], []))
        xs.append(float(r["iteration"]))
        ys.append(float(r["objective"]))
    fig, ax = _new_axes(spec)
    for name, (xs, ys) in series.items():
        ax.plot(xs, ys, lw=1.4, label=name)
    ax.grid(alpha=0.3)
    ax.legend(frameon=False)
    _finish(fig, ax, spec, "iteration", "objective")
    return RenderResult(kind="convergence", output=str(spec.output),
                        series=tuple(series), n_rows=len(rows))


def _render_profile(spec) -> RenderResult:
    header, rows = _read_table(spec.source)
    if header != ["look", "stage", "s", "amp"]:
        raise ValueError(f"{spec.source}: schema mismatch for profile "
                         f"(got columns {header})")
    scale = spec.rayleigh or 1.0
    stages: dict[str, tuple[list, list]] = {st: ([], []) for st in PROFILE_STAGES}
    for r in rows:
        if r["stage"] not in stages:
            raise ValueError(f"{spec.source}: unknown stage {r['stage']!r}")
        xs, ys = stages[r["stage"]]
        xs.append(float(r["s"]) / scale)
        ys.append(float(r["amp"]))
    fig, ax = _new_axes(spec)
    xc, ac = stages["candidate"]
    if xc:
        ax.vlines(xc, 0.0, ac, color="C0", lw=1.6, label="before selection")
    xs_, as_ = stages["selected"]
    if xs_:
        ax.plot(xs_, as_, "o", color="C3", mfc="none", ms=9, mew=1.6,
                label="after selection")
    ax.axhline(0.0, color="0.6", lw=0.8)
    ax.legend(frameon=False)
    xlabel = "elevation / Rayleigh" if spec.rayleigh else "elevation [m]"
    _finish(fig, ax, spec, xlabel, "amplitude")
    return RenderResult(kind="profile", output=str(spec.output), n_rows=len(rows))


def _render_histogram(spec) -> RenderResult:
    header, rows = _read_table(spec.source)
    numeric = _float_columns(header, rows)
    if spec.column is not None:
        if spec.column not in header:
            raise ValueError(f"{spec.source}: no column {spec.column!r}")
        col = spec.column
    elif numeric:
        col = numeric[-1]
    else:
        raise ValueError(f"{spec.source}: schema mismatch for histogram "
                         "(no numeric column)")
    data = np.array([float(r[col]) for r in rows])
    edges = np.histogram_bin_edges(data, bins="fd")
    density, edges = np.histogram(data, bins=edges, density=True)
    fig, ax = _new_axes(spec)
    ax.stairs(density, edges, fill=True, alpha=0.75, color="C0")
    ax.grid(alpha=0.3)
    _finish(fig, ax, spec, col, "density")
    return RenderResult(kind="histogram", output=str(spec.output),
                        edges=edges, density=density, n_rows=len(rows))


def _render_scatter(spec) -> RenderResult:
    header, rows = _read_table(spec.source)
    numeric = _float_columns(header, rows)
    if len(numeric) < 2:
        raise ValueError(f"{spec.source}: schema mismatch for scatter "
                         "(need two numeric columns)")
    xcol, ycol = numeric[:2]
    x = np.array([float(r[xcol]) for r in rows])
    y = np.array([float(r[ycol]) for r in rows])
    fig, ax = _new_axes(spec)
    ax.plot(x, y, ".", ms=5, alpha=0.8, color="C0")
    ax.grid(alpha=0.3)
    _finish(fig, ax, spec, xcol, ycol)
    return RenderResult(kind="scatter", output=str(spec.output), n_rows=len(rows))


_RENDERERS = {
    "convergence": _render_convergence,
    "profile": _render_profile,
    "histogram": _render_histogram,
    "scatter": _render_scatter,
}


def render(spec: PlotSpec) -> RenderResult:
    """Draw one spec to its output file and return the plotted data."""
    return _RENDERERS[spec.kind](spec)
