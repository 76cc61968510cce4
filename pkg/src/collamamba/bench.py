"""Timed complexity benchmarks with linear fits.

Each axis times a real forward path on a monotonic clock, discards warm-up
iterations, and reports the median of the remaining repeats together with
the analytic FLOPs estimate for the same work:

* ``seqlen``    -- a fusion-block stack applied to (1, L, c) sequences;
* ``neighbors`` -- ``fuse_global`` with k neighbors at fixed length;
* ``history``   -- the spatial-temporal scan stack over l_his frames.

All three paths are linear by construction; the fit (slope, R^2) and the
consecutive doubling ratios quantify how well wall time tracks that.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .blocks import FusionStack, STMambaBlock
from .errors import InvalidArgumentError
from .net import NetConfig
from .net.accounting import _fusion_block, _scan_block
from .runtime import get_dtype

AXES = ("seqlen", "neighbors", "history")
DEFAULT_POINTS = {
    "seqlen": (550, 1100, 2200, 4400),
    "neighbors": (1, 2, 3, 4, 5, 6, 7, 8),
    "history": (2, 4, 8, 16),
}


@dataclass
class BenchPoint:
    value: int
    median_us: float
    flops_est: int


@dataclass
class BenchReport:
    axis: str
    points: list
    slope_us: float
    intercept_us: float
    r_squared: float

    @property
    def doubling_ratios(self) -> list:
        """median(2x)/median(x) for consecutive point pairs where the axis
        value exactly doubles."""
        out = []
        for a, b in zip(self.points, self.points[1:]):
            if b.value == 2 * a.value and a.median_us > 0:
                out.append(b.median_us / a.median_us)
        return out


def _timed(fn, repeats: int, warmup: int = 2) -> float:
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - t0) * 1e6)
    return float(np.median(samples))


def _fit(xs, ys):
    slope, intercept = np.polyfit(xs, ys, 1)
    pred = slope * np.asarray(xs) + intercept
    ss_res = float(((np.asarray(ys) - pred) ** 2).sum())
    ss_tot = float(((np.asarray(ys) - np.mean(ys)) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def run_bench(axis: str, points=None, repeats: int = 5, seed: int = 0,
              cfg: NetConfig | None = None, depth: int = 2) -> BenchReport:
    if axis not in AXES:
        raise InvalidArgumentError(f"unknown axis {axis!r}; choose from {AXES}")
    points = list(points) if points is not None else list(DEFAULT_POINTS[axis])
    if not points:
        raise InvalidArgumentError("benchmark range is empty")
    if sorted(points) != points or len(set(points)) != len(points):
        raise InvalidArgumentError("axis values must be strictly increasing")
    if repeats < 5:
        raise InvalidArgumentError("need at least 5 samples per point")
    cfg = cfg or NetConfig.defaults()
    rng = np.random.default_rng(seed)
    dtype = get_dtype()
    out: list[BenchPoint] = []

    if axis == "seqlen":
        stack = FusionStack(depth, cfg.c, seed, "bench.fusion", n_state=cfg.n_state,
                            dt_rank=cfg.dt_rank, expand=cfg.expand,
                            conv_width=cfg.conv_width)
        for length in points:
            ego = rng.standard_normal((1, length, cfg.c)).astype(dtype)
            nb = rng.standard_normal((1, length, cfg.c)).astype(dtype)
            med = _timed(lambda: stack.fuse_one(ego, nb), repeats)
            out.append(BenchPoint(length, med, depth * _fusion_block(length, cfg)))
    elif axis == "neighbors":
        length = 550
        stack = FusionStack(depth, cfg.c, seed, "bench.fusion", n_state=cfg.n_state,
                            dt_rank=cfg.dt_rank, expand=cfg.expand,
                            conv_width=cfg.conv_width)
        ego = rng.standard_normal((1, length, cfg.c)).astype(dtype)
        for k in points:
            nbs = [rng.standard_normal((1, length, cfg.c)).astype(dtype)
                   for _ in range(k)]
            med = _timed(lambda: stack.fuse_all(ego, nbs), repeats)
            out.append(BenchPoint(k, med, k * depth * _fusion_block(length, cfg)))
    else:  # history
        length = 550
        blocks = [STMambaBlock(cfg.c, seed, f"bench.st.{i}", n_state=cfg.n_state,
                               dt_rank=cfg.dt_rank, expand=cfg.expand,
                               conv_width=cfg.conv_width) for i in range(depth)]
        for t in points:
            frames = rng.standard_normal((1, t, length, 1, cfg.c)).astype(dtype)
            def run(fr=frames):
                x = fr
                for blk in blocks:
                    x = blk(x)
                return x
            med = _timed(run, repeats)
            out.append(BenchPoint(t, med, depth * _scan_block(t * length, cfg, 3)))

    slope, intercept, r2 = _fit([p.value for p in out], [p.median_us for p in out])
    return BenchReport(axis=axis, points=out, slope_us=slope,
                       intercept_us=intercept, r_squared=r2)
