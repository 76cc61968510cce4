"""Patch embedding, positional tables, and resolution-changing layers."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgumentError
from .common import LayerNorm, Module, conv2d, pixel_shuffle_2x, resize_bilinear, rng_for


class PatchEmbed(Module):
    """Overlapping patch projection (kernel=patch, step=stride) + layer norm.

    Zero padding is chosen so the output grid is exactly
    (ceil(h/stride), ceil(w/stride)): total pad = patch - stride per axis,
    split evenly (extra on the bottom/right), plus bottom/right fill when an
    extent is not a stride multiple.
    """

    def __init__(self, c_in: int, c_out: int, patch: int, stride: int, seed: int, tag: str):
        super().__init__()
        if c_out <= 0:
            raise InvalidArgumentError("c_out must be positive")
        if patch < stride:
            raise InvalidArgumentError("patch must be >= stride")
        rng = rng_for(seed, tag)
        self.patch, self.stride = patch, stride
        self.c_in, self.c_out = c_in, c_out
        fan_in = patch * patch * c_in
        self.w = self.param("w", rng.standard_normal((patch, patch, c_in, c_out))
                            / np.sqrt(fan_in))
        self.b = self.param("b", np.zeros(c_out))
        self.norm = self.child("norm", LayerNorm(c_out))

    def __call__(self, bev: np.ndarray) -> np.ndarray:
        if bev.ndim != 4 or bev.shape[-1] != self.c_in:
            raise InvalidArgumentError(
                f"expected (B, h, w, {self.c_in}); got {bev.shape}")
        _, h, w, _ = bev.shape
        out_h = -(-h // self.stride)
        out_w = -(-w // self.stride)
        def pads(extent, n_out):
            total = (n_out - 1) * self.stride + self.patch - extent
            lead = (self.patch - self.stride) // 2
            return lead, total - lead
        top, bot = pads(h, out_h)
        left, right = pads(w, out_w)
        y = conv2d(bev, self.w, self.b, stride=self.stride, pad=(top, bot, left, right))
        return self.norm(y)


class PosEmbed2D(Module):
    """Learned additive spatial table, stored (1, H, W, c)."""

    def __init__(self, h: int, w: int, c: int, seed: int, tag: str):
        super().__init__()
        rng = rng_for(seed, tag)
        self.table = self.param("table", rng.standard_normal((1, h, w, c)) * 0.02)

    def __call__(self, tokens: np.ndarray) -> np.ndarray:
        if tokens.shape[1:] != self.table.shape[1:]:
            raise InvalidArgumentError(
                f"token grid {tokens.shape[1:]} does not match table {self.table.shape[1:]}")
        return tokens + self.table


class TemporalPosEmbed(Module):
    """Learned additive per-frame table, stored (1, 1, 1, T, c) and applied
    over the frame axis of a (B, T, H, W, c) stack."""

    def __init__(self, n_frames: int, c: int, seed: int, tag: str):
        super().__init__()
        rng = rng_for(seed, tag)
        self.table = self.param("table", rng.standard_normal((1, 1, 1, n_frames, c)) * 0.02)

    def __call__(self, frames: np.ndarray) -> np.ndarray:
        n_frames, c = self.table.shape[3:]
        if frames.ndim != 5 or frames.shape[1] != n_frames or frames.shape[-1] != c:
            raise InvalidArgumentError(
                f"frame stack {frames.shape} does not match temporal table "
                f"({n_frames} frames, {c} channels)")
        return frames + self.table.reshape(1, n_frames, 1, 1, c)


class PatchMerge(Module):
    """2x2 downsample: concatenate each neighborhood (4c channels), layer
    norm, then project 4c -> c without bias.  Odd extents are zero-padded
    bottom/right first."""

    def __init__(self, c: int, seed: int, tag: str):
        super().__init__()
        rng = rng_for(seed, tag)
        self.c = c
        self.norm = self.child("norm", LayerNorm(4 * c))
        self.w = self.param("w", rng.standard_normal((4 * c, c)) / np.sqrt(4 * c))

    def __call__(self, tokens: np.ndarray) -> np.ndarray:
        b, h, w, c = tokens.shape
        if h % 2 or w % 2:
            tokens = np.pad(tokens, ((0, 0), (0, h % 2), (0, w % 2), (0, 0)))
            b, h, w, c = tokens.shape
        # neighborhood order: top-left, top-right, bottom-left, bottom-right
        quads = np.concatenate([tokens[:, 0::2, 0::2], tokens[:, 0::2, 1::2],
                                tokens[:, 1::2, 0::2], tokens[:, 1::2, 1::2]], axis=-1)
        return self.norm(quads) @ self.w


class PatchExpand(Module):
    """2x upsample: layer norm, project c -> 4c without bias, pixel shuffle."""

    def __init__(self, c: int, seed: int, tag: str):
        super().__init__()
        rng = rng_for(seed, tag)
        self.norm = self.child("norm", LayerNorm(c))
        self.w = self.param("w", rng.standard_normal((c, 4 * c)) / np.sqrt(c))

    def __call__(self, tokens: np.ndarray) -> np.ndarray:
        return pixel_shuffle_2x(self.norm(tokens) @ self.w)


class ConvOut(Module):
    """Final 3x3 same-pad convolution to the head channel count."""

    def __init__(self, c_in: int, c_out: int, seed: int, tag: str):
        super().__init__()
        rng = rng_for(seed, tag)
        self.w = self.param("w", rng.standard_normal((3, 3, c_in, c_out))
                            / np.sqrt(9 * c_in))
        self.b = self.param("b", np.zeros(c_out))

    def __call__(self, grid: np.ndarray) -> np.ndarray:
        return conv2d(grid, self.w, self.b, stride=1, pad=(1, 1, 1, 1))


def expand_to(tokens: np.ndarray, expands: list[PatchExpand],
              target_hw: tuple[int, int]) -> np.ndarray:
    """Apply 2x expand stages then bilinear-resize to the exact target."""
    th, tw = target_hw
    if th < tokens.shape[1] or tw < tokens.shape[2]:
        raise InvalidArgumentError(
            f"target {target_hw} smaller than source {tokens.shape[1:3]}")
    for ex in expands:
        tokens = ex(tokens)
    return resize_bilinear(tokens, th, tw)
