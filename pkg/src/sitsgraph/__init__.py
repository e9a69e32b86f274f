"""Spatio-temporal graphs from satellite image time series."""

__version__ = "0.1.0"

from . import analysis, datacube, features, forecast, metrics, neural, segmentation, stgraph
from .datacube import SitsCube, load_cube, save_cube
from .segmentation import SegStack, felzenszwalb, segment_cube, slic
from .stgraph import StGraph, build_graph

__all__ = [
    "SegStack",
    "SitsCube",
    "StGraph",
    "__version__",
    "analysis",
    "build_graph",
    "datacube",
    "features",
    "felzenszwalb",
    "forecast",
    "load_cube",
    "metrics",
    "neural",
    "save_cube",
    "segment_cube",
    "segmentation",
    "slic",
    "stgraph",
]
