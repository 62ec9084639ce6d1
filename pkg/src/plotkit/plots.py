"""The three shipped plot kinds: time series, rate fit, field heatmap."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.collections import LineCollection

from .io import (
    read_boundary_csv,
    read_diagnostics_csv,
    read_field_snapshot,
    read_sweep_json,
)


@dataclass
class PlotSpec:
    """One figure request: input artifact, plot kind, output image path."""

    kind: str  # "timeseries" | "rate" | "field"
    input_path: str
    output_path: str
    columns: list[str] = field(default_factory=lambda: ["E"])
    reference_mu: float | None = None
    overlay_path: str | None = None
    style: dict = field(default_factory=dict)


def _new_axes(style: dict):
    fig, ax = plt.subplots(figsize=style.get("figsize", (6.4, 4.8)), dpi=style.get("dpi", 110))
    return fig, ax


def _save(fig, out_path: str | Path) -> str:
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out)
    plt.close(fig)
    return str(out)


def plot_timeseries(
    csv_path: str | Path,
    columns: list[str],
    out_path: str | Path,
    reference_mu: float | None = None,
    style: dict | None = None,
) -> str:
    """Plot one labeled line per requested diagnostics column against time.

    With ``reference_mu`` set and column ``E`` requested, the closed-form
    shear-wave energy decay (1/4) e^{-8 pi^2 mu t} is drawn for comparison.
    Raises if a requested column is not in the schema; warns on a CSV with
    no data rows and emits empty axes.
    """
    data = read_diagnostics_csv(csv_path)
    for col in columns:
        if col not in data:
            raise ValueError(f"column {col!r} not present in {csv_path}")
    t = data["t"]
    fig, ax = _new_axes(style or {})
    if t.size == 0:
        warnings.warn(f"{csv_path} has no data rows; emitting empty axes")
    for col in columns:
        ax.plot(t, data[col], label=col, linewidth=1.5)
    if reference_mu is not None and "E" in columns and t.size:
        tt = np.linspace(t[0], t[-1], 256)
        ax.plot(
            tt,
            0.25 * np.exp(-8 * np.pi**2 * reference_mu * tt),
            "k--",
            linewidth=1.0,
            label=r"$\frac{1}{4}e^{-8\pi^2\mu t}$",
        )
    ax.set_xlabel("t")
    ax.legend(loc="best")
    ax.grid(True, alpha=0.3)
    return _save(fig, out_path)


def plot_rate(
    json_path: str | Path,
    out_path: str | Path,
    style: dict | None = None,
) -> dict:
    """Log-log divergence-norm vs viscosity: scatter, fitted line, and a
    reference line of slope -1/2.

    The slope annotation uses the report's own fitted value verbatim when
    present; otherwise a least-squares fit of the plotted points. Returns
    the fitted slope and the annotation text.
    """
    data = read_sweep_json(json_path)
    nu = np.asarray(data["nu"], dtype=float)
    div = np.asarray(data["div_L2L2"], dtype=float)
    coef = np.polyfit(np.log(nu), np.log(div), 1)
    fitted = float(coef[0])
    annotated = float(data["slope_div_L2L2"]) if "slope_div_L2L2" in data else fitted
    annotation = f"fitted slope = {annotated:.17g}"

    fig, ax = _new_axes(style or {})
    ax.loglog(nu, div, "o", label=r"$\|\mathrm{div}\,v^\nu\|_{L^2L^2}$")
    grid = np.geomspace(nu.min(), nu.max(), 64)
    ax.loglog(grid, np.exp(coef[1]) * grid ** coef[0], "-", label=annotation)
    anchor = div[0] * (grid / nu[0]) ** (-0.5)
    ax.loglog(grid, anchor, "k--", linewidth=1.0, label="slope $-1/2$")
    ax.set_xlabel(r"$\nu$")
    ax.legend(loc="best")
    ax.grid(True, which="both", alpha=0.3)
    path = _save(fig, out_path)
    return {
        "output": path,
        "fitted_slope": fitted,
        "annotated_slope": annotated,
        "annotation": annotation,
    }


def plot_field(
    snapshot_path: str | Path,
    out_path: str | Path,
    overlay_path: str | Path | None = None,
    style: dict | None = None,
) -> str:
    """Heatmap of a CNSF field snapshot on the unit square, with an optional
    boundary-polyline overlay.

    Overlay segments whose coordinates leave the unit square were produced
    on a different grid convention; they trigger a warning but are still
    drawn.
    """
    values = read_field_snapshot(snapshot_path)
    fig, ax = _new_axes(style or {})
    im = ax.imshow(
        values.T,
        origin="lower",
        extent=(0.0, 1.0, 0.0, 1.0),
        cmap=(style or {}).get("cmap", "viridis"),
        interpolation="nearest",
    )
    fig.colorbar(im, ax=ax, shrink=0.85)
    if overlay_path is not None:
        segs = read_boundary_csv(overlay_path)
        if segs.size and (segs.min() < 0.0 or segs.max() > 1.0):
            warnings.warn(
                f"{overlay_path} has coordinates outside the unit square; "
                "the polyline grid does not match the field — plotting anyway"
            )
        ax.add_collection(LineCollection(segs, colors="white", linewidths=1.2))
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    return _save(fig, out_path)


def render(spec: PlotSpec):
    """Dispatch a PlotSpec to its plot kind."""
    if spec.kind == "timeseries":
        return plot_timeseries(
            spec.input_path, spec.columns, spec.output_path, spec.reference_mu, spec.style
        )
    if spec.kind == "rate":
        return plot_rate(spec.input_path, spec.output_path, spec.style)
    if spec.kind == "field":
        return plot_field(spec.input_path, spec.output_path, spec.overlay_path, spec.style)
    raise ValueError(f"unknown plot kind {spec.kind!r}")
