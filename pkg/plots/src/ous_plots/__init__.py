"""Figure regeneration from the sampling harness's published CSV schema."""

from .render import FIGURE_KINDS, FigureSpec, build_figure, read_rows, render

__all__ = ["FIGURE_KINDS", "FigureSpec", "build_figure", "read_rows", "render"]

__version__ = "0.1.0"
