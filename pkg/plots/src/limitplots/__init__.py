"""Figures for convergence experiments, rendered from CSV artifacts only."""

from .figures import FigureSpec, SchemaError, render

__all__ = ["FigureSpec", "SchemaError", "render"]
__version__ = "0.1.0"
