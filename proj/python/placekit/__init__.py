"""Dense object-placement toolkit: python surface over the C++ core."""

from _placekit import (
    OracleParams,
    PlacekitError,
    Predictor,
    ScaleGrid,
    Scene,
    box_from_index,
    clip_box,
    generate_scene,
    index_from_box,
    iou,
    normalize,
    oracle_heatmap,
    oracle_plausibility,
    read_dataset,
    read_toph,
    scale_of_box,
    slice_fixed_location,
    slice_fixed_scale,
    sparse_contrastive_loss,
    top_k_boxes,
)

__all__ = [
    "OracleParams",
    "PlacekitError",
    "Predictor",
    "ScaleGrid",
    "Scene",
    "box_from_index",
    "clip_box",
    "generate_scene",
    "index_from_box",
    "iou",
    "normalize",
    "oracle_heatmap",
    "oracle_plausibility",
    "read_dataset",
    "read_toph",
    "scale_of_box",
    "slice_fixed_location",
    "slice_fixed_scale",
    "sparse_contrastive_loss",
    "top_k_boxes",
]
