from .config import NetConfig, Variant
from .model import CollaMambaNet, DetectionOutput
from .accounting import Row, count_flops, count_params
from .snapshot import load_weights, read_snapshot, save_weights

__all__ = [
    "CollaMambaNet",
    "DetectionOutput",
    "NetConfig",
    "Row",
    "Variant",
    "count_flops",
    "count_params",
    "load_weights",
    "read_snapshot",
    "save_weights",
]
