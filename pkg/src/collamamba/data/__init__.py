from .scene import AgentRig, GridSpec, Scene, SceneObject, generate_scene
from .raster import (
    feature_signature,
    fov_mask,
    is_occluded,
    is_visible,
    rasterize_bev,
    rasterize_frame,
)
from .dataset_io import Dataset, export_dataset, import_dataset

__all__ = [
    "AgentRig", "Dataset", "GridSpec", "Scene", "SceneObject",
    "export_dataset", "feature_signature", "fov_mask", "generate_scene",
    "import_dataset", "is_occluded", "is_visible", "rasterize_bev",
    "rasterize_frame",
]
