"""plotkit: offline figures from peakonlab CSV/JSON run artifacts."""

from .figures import KINDS, FigureSpec, render
from .io import (SchemaError, read_diagnostics, read_prediction,
                 read_snapshots, read_trajectory)

__all__ = ["FigureSpec", "KINDS", "SchemaError", "render",
           "read_diagnostics", "read_prediction", "read_snapshots",
           "read_trajectory"]

__version__ = "0.1.0"
