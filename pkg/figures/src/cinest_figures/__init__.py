"""Figures from cinest CSV outputs.

This package never recomputes any estimator math: it plots exactly the
values the simulator and the analytic pipeline wrote to CSV.
"""

__version__ = "0.1.0"

from .render import (FigureSpec, RenderError, SchemaError,
                     build_convergence_figure, build_sweep_figure,
                     render_convergence, render_sweep)

__all__ = [
    "__version__",
    "FigureSpec",
    "SchemaError",
    "RenderError",
    "build_sweep_figure",
    "build_convergence_figure",
    "render_sweep",
    "render_convergence",
]
