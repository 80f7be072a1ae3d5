"""Distance-to-feature patch scoring: training, heatmaps, saccaded detection."""

from ._dift import (
    DataError,
    DimError,
    Model,
    NumericError,
    boundary_chains,
    dense_heatmap,
    detect,
    euclid_dist,
    hill_climb,
    saccade_points,
    score_fn,
    synth_image,
    target_vector,
    train,
)

__all__ = [
    "DataError",
    "DimError",
    "Model",
    "NumericError",
    "boundary_chains",
    "dense_heatmap",
    "detect",
    "euclid_dist",
    "hill_climb",
    "saccade_points",
    "score_fn",
    "synth_image",
    "target_vector",
    "train",
]
