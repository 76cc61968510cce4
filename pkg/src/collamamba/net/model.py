"""The end-to-end forward pipeline.

encode -> (boost) -> share -> fuse_global -> decode -> detect, with the
history encoder, single-frame feature boosting, and the global-trajectory
predictor attached per variant.  All stages are pure given the weights;
weights are fully determined by (seed, config) and independent of variant,
so variants sharing a stage share its exact tensors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..blocks import (
    ConvOut,
    FusionStack,
    Linear,
    Mamba2DBlock,
    Module,
    PatchEmbed,
    PatchExpand,
    PatchMerge,
    PosEmbed2D,
    STMambaBlock,
    TemporalPosEmbed,
    resize_bilinear,
    rng_for,
)
from ..errors import InsufficientHistoryError, InvalidArgumentError
from .config import NetConfig, Variant


@dataclass
class DetectionOutput:
    cls: np.ndarray   # (B, H, W, 2)  anchor scores
    reg: np.ndarray   # (B, H, W, 14) box deltas, 2 anchors x 7
    dir: np.ndarray   # (B, H, W, 4)  heading bins, 2 anchors x 2


class CollaMambaNet(Module):
    def __init__(self, cfg: NetConfig = NetConfig(), variant: Variant = Variant.SIMPLE):
        super().__init__()
        variant = Variant.parse(variant)
        self.cfg = cfg
        self.variant = variant
        seed = cfg.seed
        kw = dict(n_state=cfg.n_state, dt_rank=cfg.dt_rank, expand=cfg.expand,
                  conv_width=cfg.conv_width)

        self.patch_embed = self.child(
            "encoder.patch_embed",
            PatchEmbed(cfg.c0, cfg.c, cfg.patch, cfg.stride, seed, "encoder.patch_embed"))
        self.pos_embed = self.child(
            "encoder.pos_embed", PosEmbed2D(cfg.grid_h, cfg.grid_w, cfg.c, seed,
                                            "encoder.pos_embed"))
        self.enc_blocks = self.children(
            "encoder.block", [Mamba2DBlock(cfg.c, seed, f"encoder.block.{i}", **kw)
                              for i in range(cfg.enc_depth)])
        self.enc_merge = self.child("encoder.merge", PatchMerge(cfg.c, seed, "encoder.merge"))

        self.fusion = self.child(
            "fusion", FusionStack(cfg.fusion_depth, cfg.c, seed, "fusion", **kw))

        self.dec_stages = []
        for s in range(cfg.dec_stages):
            blocks = self.children(
                f"decoder.stage{s}.block",
                [Mamba2DBlock(cfg.c, seed, f"decoder.stage{s}.block.{i}", **kw)
                 for i in range(cfg.dec_depth)])
            expand = self.child(f"decoder.expand.{s}",
                                PatchExpand(cfg.c, seed, f"decoder.expand.{s}"))
            self.dec_stages.append((blocks, expand))
        self.out_conv = self.child("decoder.out_conv",
                                   ConvOut(cfg.c, cfg.out_ch, seed, "decoder.out_conv"))

        ch_cls, ch_reg, ch_dir = cfg.head_channels
        self.head_cls = self.child("head.cls", Linear(cfg.out_ch, ch_cls,
                                                      rng_for(seed, "head.cls")))
        self.head_reg = self.child("head.reg", Linear(cfg.out_ch, ch_reg,
                                                      rng_for(seed, "head.reg")))
        self.head_dir = self.child("head.dir", Linear(cfg.out_ch, ch_dir,
                                                      rng_for(seed, "head.dir")))

        if variant in (Variant.ST, Variant.MISS):
            self.hist_merge = self.child("history.merge",
                                         PatchMerge(cfg.c, seed, "history.merge"))
            self.hist_temporal = self.child(
                "history.temporal_embed",
                TemporalPosEmbed(cfg.l_his, cfg.c, seed, "history.temporal_embed"))
            self.hist_blocks = self.children(
                "history.block", [STMambaBlock(cfg.c, seed, f"history.block.{i}", **kw)
                                  for i in range(cfg.st_depth)])
            self.boost_temporal = self.children(
                "boost.temporal.block",
                [Mamba2DBlock(cfg.c, seed, f"boost.temporal.block.{i}", **kw)
                 for i in range(cfg.boost_temporal_depth)])
            self.boost_mlp = self.child(
                "boost.mlp", Linear(cfg.l_his * cfg.c, cfg.c, rng_for(seed, "boost.mlp")))
            self.boost_fusion = self.child(
                "boost.fusion",
                FusionStack(cfg.boost_spatial_depth, cfg.c, seed, "boost.fusion", **kw))

        if variant is Variant.MISS:
            self.pred_temporal = self.child(
                "predictor.temporal_embed",
                TemporalPosEmbed(cfg.l_his, cfg.c, seed, "predictor.temporal_embed"))
            self.pred_blocks = self.children(
                "predictor.block",
                [STMambaBlock(cfg.c, seed, f"predictor.block.{i}", **kw)
                 for i in range(cfg.st_depth)])
            self.pred_head_blocks = self.children(
                "predictor.head.block",
                [Mamba2DBlock(cfg.c, seed, f"predictor.head.block.{i}", **kw)
                 for i in range(cfg.boost_temporal_depth)])
            self.pred_mlp = self.child(
                "predictor.mlp", Linear(cfg.l_his * cfg.c, cfg.c,
                                        rng_for(seed, "predictor.mlp")))

    # ------------------------------------------------------------------ ops

    def encode(self, bev: np.ndarray) -> np.ndarray:
        """(B, h0, w0, c0) -> sequence-form features (B, l, c)."""
        cfg = self.cfg
        if bev.ndim != 4 or bev.shape[1:] != (cfg.h0, cfg.w0, cfg.c0):
            raise InvalidArgumentError(
                f"expected (B, {cfg.h0}, {cfg.w0}, {cfg.c0}); got {bev.shape}")
        x = self.pos_embed(self.patch_embed(bev))
        for blk in self.enc_blocks[:cfg.enc_merge_after]:
            x = blk(x)
        x = self.enc_merge(x)
        for blk in self.enc_blocks[cfg.enc_merge_after:]:
            x = blk(x)
        return x.reshape(x.shape[0], cfg.seq_len, cfg.c)

    def fuse_global(self, ego: np.ndarray, neighbors) -> np.ndarray:
        """Shared-parameter fusion, one stack pass per neighbor (callers
        order neighbors by ascending agent id).  No neighbors -> ego."""
        neighbors = list(neighbors)
        for nb in neighbors:
            if nb.shape != ego.shape:
                raise InvalidArgumentError(
                    f"neighbor shape {nb.shape} != ego shape {ego.shape}")
        return self.fusion.fuse_all(ego, neighbors)

    def decode(self, fused: np.ndarray) -> np.ndarray:
        """(B, l, c) -> head grid (B, H, W, out_ch)."""
        cfg = self.cfg
        if fused.ndim != 3 or fused.shape[1] != cfg.seq_len or fused.shape[2] != cfg.c:
            raise InvalidArgumentError(
                f"cannot re-grid {fused.shape} onto ({cfg.lat_h}, {cfg.lat_w}, {cfg.c})")
        x = fused.reshape(fused.shape[0], cfg.lat_h, cfg.lat_w, cfg.c)
        for blocks, expand in self.dec_stages:
            for blk in blocks:
                x = blk(x)
            x = expand(x)
        x = resize_bilinear(x, *cfg.dec_hw)
        return self.out_conv(x)

    def detect(self, grid: np.ndarray) -> DetectionOutput:
        if grid.ndim != 4 or grid.shape[-1] != self.cfg.out_ch:
            raise InvalidArgumentError(
                f"expected (B, H, W, {self.cfg.out_ch}); got {grid.shape}")
        return DetectionOutput(cls=self.head_cls(grid), reg=self.head_reg(grid),
                               dir=self.head_dir(grid))

    # ------------------------------------------------------- history pathway

    def _require_history(self):
        if self.variant is Variant.SIMPLE:
            raise InvalidArgumentError(
                "history operations need the st or miss variant")

    def history_encode(self, frames: np.ndarray) -> np.ndarray:
        """(B, l_his, h0, w0, c0) -> per-frame sequences (B, l_his, l, c).

        Frames share the main patch/positional embeddings; the history
        pathway owns its merge, temporal table, and scan blocks.
        """
        self._require_history()
        cfg = self.cfg
        if frames.ndim != 5 or frames.shape[1] != cfg.l_his or \
                frames.shape[2:] != (cfg.h0, cfg.w0, cfg.c0):
            raise InvalidArgumentError(
                f"expected (B, {cfg.l_his}, {cfg.h0}, {cfg.w0}, {cfg.c0}); "
                f"got {frames.shape}")
        b, t = frames.shape[:2]
        flat = frames.reshape(b * t, cfg.h0, cfg.w0, cfg.c0)
        x = self.pos_embed(self.patch_embed(flat))
        x = x.reshape(b, t, cfg.grid_h, cfg.grid_w, cfg.c)
        x = self.hist_temporal(x)
        x = self.hist_merge(x.reshape(b * t, cfg.grid_h, cfg.grid_w, cfg.c))
        x = x.reshape(b, t, cfg.lat_h, cfg.lat_w, cfg.c)
        for blk in self.hist_blocks:
            x = blk(x)
        return x.reshape(b, t, cfg.seq_len, cfg.c)

    def _temporal_reduce(self, hist, blocks, mlp) -> np.ndarray:
        """(B, T, l, c) -> (B, l, c): scan the (positions x frames) grid,
        then reduce time with a per-position projection, residual on the
        newest frame."""
        b, t, length, c = hist.shape
        grid = np.ascontiguousarray(hist.transpose(0, 2, 1, 3))  # (B, l, T, c)
        for blk in blocks:
            grid = blk(grid)
        return hist[:, -1] + mlp(grid.reshape(b, length, t * c))

    def boost_features(self, current: np.ndarray, hist: np.ndarray) -> np.ndarray:
        """Refine current features with history cues: temporal fusion of the
        encoded trajectory into an auxiliary sequence, then spatial fusion
        of that sequence into ``current``."""
        self._require_history()
        cfg = self.cfg
        if hist.ndim != 4 or hist.shape[1] != cfg.l_his:
            raise InvalidArgumentError(
                f"expected history (B, {cfg.l_his}, l, c); got {hist.shape}")
        if current.shape != (hist.shape[0], hist.shape[2], hist.shape[3]):
            raise InvalidArgumentError(
                f"current {current.shape} does not match history frames "
                f"{hist.shape}")
        aux = self._temporal_reduce(hist, self.boost_temporal, self.boost_mlp)
        return self.boost_fusion.fuse_one(current, aux)

    def predict_global(self, traj: np.ndarray) -> np.ndarray:
        """Predict current global features from the stacked trajectory of
        the last l_his fused sequences (B, l_his, l, c).  The scan stack
        runs in its 1D configuration: positions feed the spatial scans
        directly (no patching, width-1 grid)."""
        if self.variant is not Variant.MISS:
            raise InvalidArgumentError("predict_global needs the miss variant")
        cfg = self.cfg
        if traj.ndim != 4 or traj.shape[1] != cfg.l_his:
            raise InsufficientHistoryError(
                f"global trajectory must hold exactly {cfg.l_his} frames; "
                f"got {traj.shape}")
        b, t, length, c = traj.shape
        x = traj.reshape(b, t, length, 1, c)
        x = self.pred_temporal(x)
        for blk in self.pred_blocks:
            x = blk(x)
        hist = x.reshape(b, t, length, c)
        return self._temporal_reduce(hist, self.pred_head_blocks, self.pred_mlp)

    # ----------------------------------------------------------- composites

    def forward_single(self, bev: np.ndarray, neighbors=()) -> DetectionOutput:
        """encode -> fuse -> decode -> detect for one observation."""
        fused = self.fuse_global(self.encode(bev), neighbors)
        return self.detect(self.decode(fused))
