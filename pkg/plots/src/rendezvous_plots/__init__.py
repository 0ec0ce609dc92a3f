"""Figure generation for rendezvous MPC experiment CSVs."""

from .figures import (
    ZX_PLANE_THRUSTERS,
    FigureSpec,
    SchemaError,
    plot_actuation,
    plot_timing,
    plot_trajectory,
    read_actuation,
    read_trajectory,
    render,
)

__version__ = "0.1.0"
