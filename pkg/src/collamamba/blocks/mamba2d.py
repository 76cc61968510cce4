"""Four-direction selective-scan block over a 2D token grid.

Pipeline: pre-norm -> gated up-projection (x2) -> depthwise causal
convolution along the row-major sequence -> silu -> selective scan along
each of the four direction orders -> inverse reorder -> elementwise mean ->
norm -> silu gate -> down-projection -> residual add.  Shape preserved;
with zeroed projections the block is an exact identity via the residual.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgumentError, NumericOverflowError
from ..runtime import map_ordered
from .branch import SelectiveBranch
from .common import CausalConv1d, LayerNorm, Linear, Module, overflow_guard, rng_for, silu
from .directions import SCAN_DIRECTIONS, inverse_order, order_directions


class Mamba2DBlock(Module):
    def __init__(self, channels: int, seed: int, tag: str, n_state: int = 16,
                 dt_rank: int = 6, expand: int = 2, conv_width: int = 4):
        super().__init__()
        rng = rng_for(seed, tag)
        self.tag = tag
        self.channels = channels
        self.d_inner = expand * channels
        self.norm = self.child("norm", LayerNorm(channels))
        self.in_proj = self.child("in_proj", Linear(channels, 2 * self.d_inner, rng))
        self.conv = self.child("conv", CausalConv1d(conv_width, self.d_inner, rng))
        self.branches = self.children(
            "dir", [SelectiveBranch(self.d_inner, n_state, dt_rank, rng)
                    for _ in SCAN_DIRECTIONS])
        self.out_norm = self.child("out_norm", LayerNorm(self.d_inner))
        self.out_proj = self.child("out_proj", Linear(self.d_inner, channels, rng))

    def __call__(self, tokens: np.ndarray) -> np.ndarray:
        if tokens.ndim != 4 or tokens.shape[-1] != self.channels:
            raise InvalidArgumentError(
                f"{self.tag}: expected (B, H, W, {self.channels}); got {tokens.shape}")
        b, h, w, c = tokens.shape
        res = tokens
        with overflow_guard(self.tag):
            uz = self.in_proj(self.norm(tokens)).reshape(b, h * w, 2 * self.d_inner)
            u, z = uz[..., :self.d_inner], uz[..., self.d_inner:]
            u = silu(self.conv(u))

            def run(idx_branch):
                idx, branch = idx_branch
                direction = SCAN_DIRECTIONS[idx]
                perm = order_directions(h, w, direction)
                inv = inverse_order(h, w, direction)
                return branch(u[:, perm])[:, inv]

            outs = map_ordered(run, list(enumerate(self.branches)))
            y = outs[0]
            for o in outs[1:]:
                y = y + o
            y = y * np.asarray(1.0 / len(outs), dtype=y.dtype)
            y = self.out_norm(y) * silu(z)
            out = res + self.out_proj(y).reshape(b, h, w, c)
        if not np.all(np.isfinite(out)):
            raise NumericOverflowError(f"non-finite activations in block {self.tag}")
        return out
