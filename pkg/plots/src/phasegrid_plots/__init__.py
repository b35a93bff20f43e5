"""Offline rendering of learning-curve figures from aggregate CSV files."""

from .render import CurveSelection, SchemaError, build_figure, read_aggregate, render

__version__ = "0.1.0"

__all__ = ["CurveSelection", "SchemaError", "build_figure", "read_aggregate", "render"]
