"""plotkit: figure renderer for beliefsafe experiment CSVs."""

from .figures import KINDS, FigureSpec, MissingColumnsError, build_figure, read_csv, render

__version__ = "0.1.0"

__all__ = [
    "KINDS",
    "FigureSpec",
    "MissingColumnsError",
    "build_figure",
    "read_csv",
    "render",
]
