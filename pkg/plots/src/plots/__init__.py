"""Offline figure generation for tomography result CSVs."""

from .figures import KINDS, PlotSpec, RenderResult, render

__all__ = ["KINDS", "PlotSpec", "RenderResult", "render"]
