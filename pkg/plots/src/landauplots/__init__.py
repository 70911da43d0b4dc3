"""Figure rendering for landaulab artifact files.

The package reads the CSV/JSON artifacts written by a ``landaulab`` run and
renders them to raster images.  It has no in-process coupling to the solver:
anything it needs must come through the documented artifact schemas.
"""

from .io import PlotDataError, load_fit_json, load_table
from .figures import FIGURE_KINDS, render

__all__ = [
    "FIGURE_KINDS",
    "PlotDataError",
    "load_fit_json",
    "load_table",
    "render",
]
