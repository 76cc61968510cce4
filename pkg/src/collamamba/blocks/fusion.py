"""Cross-feature fusion block and the shared-parameter fusion stack.

A fusion block mixes one neighbor sequence into the ego sequence: both are
normalised and up-projected by their own input maps, concatenated along the
sequence axis (ego first), swept by a forward and a backward selective
scan so state flows across the agent boundary in both orders, gated, and
the ego half is sliced back out and added residually to the ego input.

The stack applies its blocks in order against the same neighbor; the same
stack instance (one parameter set) serves every neighbor, which is what
keeps fusion cost linear in the neighbor count.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgumentError, NumericOverflowError
from ..runtime import map_ordered
from .branch import SelectiveBranch
from .common import CausalConv1d, LayerNorm, Linear, Module, overflow_guard, rng_for, silu


class FusionBlock(Module):
    def __init__(self, channels: int, seed: int, tag: str, n_state: int = 16,
                 dt_rank: int = 6, expand: int = 2, conv_width: int = 4):
        super().__init__()
        rng = rng_for(seed, tag)
        self.tag = tag
        self.channels = channels
        self.d_inner = expand * channels
        self.norm_ego = self.child("norm_ego", LayerNorm(channels))
        self.norm_other = self.child("norm_other", LayerNorm(channels))
        self.in_proj_ego = self.child("in_proj_ego", Linear(channels, 2 * self.d_inner, rng))
        self.in_proj_other = self.child("in_proj_other", Linear(channels, 2 * self.d_inner, rng))
        self.conv = self.child("conv", CausalConv1d(conv_width, self.d_inner, rng))
        self.branches = self.children(
            "dir", [SelectiveBranch(self.d_inner, n_state, dt_rank, rng) for _ in range(2)])
        self.out_norm = self.child("out_norm", LayerNorm(self.d_inner))
        self.out_proj = self.child("out_proj", Linear(self.d_inner, channels, rng))

    def __call__(self, ego: np.ndarray, other: np.ndarray) -> np.ndarray:
        if ego.shape != other.shape:
            raise InvalidArgumentError(
                f"{self.tag}: ego {ego.shape} and neighbor {other.shape} must match "
                "(no cross-agent resampling here)")
        if ego.ndim != 3 or ego.shape[-1] != self.channels:
            raise InvalidArgumentError(
                f"{self.tag}: expected (B, l, {self.channels}); got {ego.shape}")
        length = ego.shape[1]
        res = ego
        with overflow_guard(self.tag):
            uz_e = self.in_proj_ego(self.norm_ego(ego))
            uz_n = self.in_proj_other(self.norm_other(other))
            u = np.concatenate([uz_e[..., :self.d_inner], uz_n[..., :self.d_inner]], axis=1)
            z = np.concatenate([uz_e[..., self.d_inner:], uz_n[..., self.d_inner:]], axis=1)
            u = silu(self.conv(u))

            def run(item):
                kind, branch = item
                if kind == "fwd":
                    return branch(u)
                return branch(u[:, ::-1])[:, ::-1]

            outs = map_ordered(run, list(zip(("fwd", "bwd"), self.branches)))
            y = (outs[0] + outs[1]) * np.asarray(0.5, dtype=u.dtype)
            y = self.out_norm(y) * silu(z)
            out = res + self.out_proj(y[:, :length])
        if not np.all(np.isfinite(out)):
            raise NumericOverflowError(f"non-finite activations in block {self.tag}")
        return out


class FusionStack(Module):
    """Depth-stacked fusion blocks with one shared parameter set for all
    neighbor applications."""

    def __init__(self, depth: int, channels: int, seed: int, tag: str, **kw):
        super().__init__()
        self.blocks = self.children(
            "block", [FusionBlock(channels, seed, f"{tag}.block.{i}", **kw)
                      for i in range(depth)])

    def fuse_one(self, ego: np.ndarray, other: np.ndarray) -> np.ndarray:
        for blk in self.blocks:
            ego = blk(ego, other)
        return ego

    def fuse_all(self, ego: np.ndarray, others) -> np.ndarray:
        """Sequential fusion, one stack pass per neighbor, in the order
        given (callers supply ascending agent id).  Empty list -> ego
        returned unchanged (the defined identity)."""
        for other in others:
            ego = self.fuse_one(ego, other)
        return ego
