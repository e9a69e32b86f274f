from .mesh import MeshGraph, build_mesh
from .model import (
    Forecaster,
    ForecastConfig,
    baseline_average,
    baseline_persistence,
    gn_block,
    huber,
    pixel_embedding,
)
from .train import ForecastSample, make_site_splits, train_forecaster

__all__ = [
    "ForecastConfig",
    "ForecastSample",
    "Forecaster",
    "MeshGraph",
    "baseline_average",
    "baseline_persistence",
    "build_mesh",
    "gn_block",
    "huber",
    "make_site_splits",
    "pixel_embedding",
    "train_forecaster",
]
