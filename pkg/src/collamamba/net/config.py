"""Network configuration and variant selection.

Defaults reproduce the reference configuration: 200x704x64 BEV rasters at
0.4 m voxels, patch 8 / stride 4 embedding to 96 channels, a depth-10
encoder with one 2x merge, depth-4 shared fusion, a two-stage decoder to a
(100, 352, 384) head grid, and history settings of depth 8 / length 10 for
the history variant versus depth 12 / length 20 for the miss-tolerant one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from ..errors import InvalidArgumentError


class Variant(str, enum.Enum):
    SIMPLE = "simple"   # encoder + cross-agent fusion + decoder + heads
    ST = "st"           # + local history boosting
    MISS = "miss"       # + global-feature prediction and mode switching

    @classmethod
    def parse(cls, name) -> "Variant":
        if isinstance(name, Variant):
            return name
        try:
            return cls(str(name).lower())
        except ValueError as exc:
            raise InvalidArgumentError(
                f"unknown variant {name!r}; expected simple|st|miss") from exc


@dataclass(frozen=True)
class NetConfig:
    h0: int = 200
    w0: int = 704
    c0: int = 64
    patch: int = 8
    stride: int = 4
    c: int = 96
    n_state: int = 16
    dt_rank: int = 6
    expand: int = 2
    conv_width: int = 4
    enc_depth: int = 10
    enc_merge_after: int = 4     # blocks run before the 2x merge
    dec_stages: int = 2
    dec_depth: int = 2           # blocks per decoder stage
    fusion_depth: int = 4
    out_ch: int = 384
    head_channels: tuple = (2, 14, 4)   # cls / reg / dir (2 anchors x {1, 7, 2})
    st_depth: int = 8
    l_his: int = 10
    boost_temporal_depth: int = 4
    boost_spatial_depth: int = 4
    seed: int = 0

    def __post_init__(self):
        if min(self.h0, self.w0, self.c0, self.c, self.patch, self.stride,
               self.n_state, self.dt_rank, self.expand, self.conv_width,
               self.enc_depth, self.dec_stages, self.dec_depth, self.fusion_depth,
               self.out_ch, self.st_depth, self.l_his, self.boost_temporal_depth,
               self.boost_spatial_depth) < 1:
            raise InvalidArgumentError("all extents and depths must be >= 1")
        if self.patch < self.stride:
            raise InvalidArgumentError("patch must be >= stride")
        if not (0 <= self.enc_merge_after <= self.enc_depth):
            raise InvalidArgumentError("enc_merge_after must lie within the encoder depth")
        if self.h0 % (2 * self.stride) or self.w0 % (2 * self.stride):
            raise InvalidArgumentError(
                "h0 and w0 must be divisible by 2*stride for the merge stage")

    # derived extents -------------------------------------------------------
    @property
    def grid_h(self) -> int:
        return self.h0 // self.stride

    @property
    def grid_w(self) -> int:
        return self.w0 // self.stride

    @property
    def lat_h(self) -> int:
        return self.grid_h // 2

    @property
    def lat_w(self) -> int:
        return self.grid_w // 2

    @property
    def seq_len(self) -> int:
        """Shared-feature length l (tokens after patching and one merge)."""
        return self.lat_h * self.lat_w

    @property
    def d_inner(self) -> int:
        return self.expand * self.c

    @property
    def dec_hw(self) -> tuple[int, int]:
        side = 2 ** self.dec_stages
        return self.lat_h * side, self.lat_w * side

    @classmethod
    def defaults(cls, variant: Variant = Variant.SIMPLE) -> "NetConfig":
        """Full-scale configuration for a variant: history depth 8 and
        trajectory length 10 for ``st``, 12 and 20 for ``miss``."""
        variant = Variant.parse(variant)
        if variant is Variant.MISS:
            return cls(st_depth=12, l_his=20)
        return cls()

    @classmethod
    def tiny(cls, **overrides) -> "NetConfig":
        """Desk-scale configuration for tests and the simulator."""
        base = dict(h0=32, w0=32, c0=4, patch=8, stride=4, c=16, n_state=4,
                    dt_rank=2, enc_depth=2, enc_merge_after=1, dec_stages=2,
                    dec_depth=1, fusion_depth=1, st_depth=1, l_his=3,
                    boost_temporal_depth=1, boost_spatial_depth=1)
        base.update(overrides)
        return cls(**base)
