"""Three-direction spatial-temporal selective-scan block.

Operates on a frame stack (B, T, H, W, c), oldest frame first.  Three
parallel scans over the same up-projected sequence:

* spatial forward  -- frames concatenated front-to-back, each unfolded
  row-major (length T*H*W),
* spatial backward -- the exact reversal,
* temporal         -- tokens regrouped position-major, time-minor
  (length H*W*T), reading each spatial position through time.

Branch outputs are merged by elementwise mean, gated, down-projected, and
added residually.  T=1 degenerates to a bidirectional 1D block plus a
length-1 temporal scan.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgumentError, NumericOverflowError
from ..runtime import map_ordered
from .branch import SelectiveBranch
from .common import CausalConv1d, LayerNorm, Linear, Module, overflow_guard, rng_for, silu
from .directions import temporal_order, temporal_order_inverse


class STMambaBlock(Module):
    N_DIRECTIONS = 3  # spatial forward, spatial backward, temporal

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
                    for _ in range(self.N_DIRECTIONS)])
        self.out_norm = self.child("out_norm", LayerNorm(self.d_inner))
        self.out_proj = self.child("out_proj", Linear(self.d_inner, channels, rng))

    def __call__(self, frames: np.ndarray) -> np.ndarray:
        if frames.ndim != 5 or frames.shape[-1] != self.channels:
            raise InvalidArgumentError(
                f"{self.tag}: expected (B, T, H, W, {self.channels}); got {frames.shape}")
        b, t, h, w, c = frames.shape
        frame_len = h * w
        res = frames
        with overflow_guard(self.tag):
            uz = self.in_proj(self.norm(frames)).reshape(b, t * frame_len, 2 * self.d_inner)
            u, z = uz[..., :self.d_inner], uz[..., self.d_inner:]
            u = silu(self.conv(u))

            perm_t = temporal_order(t, frame_len)
            inv_t = temporal_order_inverse(t, frame_len)

            def run(item):
                kind, branch = item
                if kind == "fwd":
                    return branch(u)
                if kind == "bwd":
                    return branch(u[:, ::-1])[:, ::-1]
                return branch(u[:, perm_t])[:, inv_t]

            outs = map_ordered(run, list(zip(("fwd", "bwd", "tmp"), self.branches)))
            y = outs[0]
            for o in outs[1:]:
                y = y + o
            y = y * np.asarray(1.0 / len(outs), dtype=y.dtype)
            y = self.out_norm(y) * silu(z)
            out = res + self.out_proj(y).reshape(b, t, h, w, c)
        if not np.all(np.isfinite(out)):
            raise NumericOverflowError(f"non-finite activations in block {self.tag}")
        return out
