"""Figure generation from simulation artifacts.

Consumes only the documented output formats of the simulation package:
diagnostics CSV time series, viscosity-sweep JSON, CNSF field snapshots,
and boundary-polyline CSV. Produces PNG/SVG figures.
"""

from .io import (
    DIAGNOSTICS_COLUMNS,
    read_boundary_csv,
    read_diagnostics_csv,
    read_field_snapshot,
    read_sweep_json,
)
from .plots import PlotSpec, plot_field, plot_rate, plot_timeseries

__all__ = [
    "DIAGNOSTICS_COLUMNS",
    "PlotSpec",
    "plot_field",
    "plot_rate",
    "plot_timeseries",
    "read_boundary_csv",
    "read_diagnostics_csv",
    "read_field_snapshot",
    "read_sweep_json",
]
