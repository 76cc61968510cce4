from .common import (
    CausalConv1d,
    LayerNorm,
    Linear,
    Module,
    conv2d,
    pixel_shuffle_2x,
    resize_bilinear,
    rng_for,
    sigmoid,
    silu,
    softplus,
)
from .directions import (
    SCAN_DIRECTIONS,
    DirectionOrder,
    inverse_order,
    order_directions,
    temporal_order,
    temporal_order_inverse,
)
from .branch import SelectiveBranch
from .embed import (
    ConvOut,
    PatchEmbed,
    PatchExpand,
    PatchMerge,
    PosEmbed2D,
    TemporalPosEmbed,
    expand_to,
)
from .fusion import FusionBlock, FusionStack
from .mamba2d import Mamba2DBlock
from .st import STMambaBlock

__all__ = [
    "CausalConv1d", "ConvOut", "DirectionOrder", "FusionBlock", "FusionStack",
    "LayerNorm", "Linear", "Mamba2DBlock", "Module", "PatchEmbed", "PatchExpand",
    "PatchMerge", "PosEmbed2D", "SCAN_DIRECTIONS", "STMambaBlock",
    "SelectiveBranch", "TemporalPosEmbed", "conv2d", "expand_to", "inverse_order",
    "order_directions", "pixel_shuffle_2x", "resize_bilinear", "rng_for",
    "sigmoid", "silu", "softplus", "temporal_order", "temporal_order_inverse",
]
