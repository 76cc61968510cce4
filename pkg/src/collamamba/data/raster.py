"""BEV rasterisation: visible objects stamp a seeded per-object feature
signature onto the cells their footprint covers.

Grids live in the shared world frame (neighbor features arrive pre-aligned
to the ego raster), so pose error is modelled downstream as a grid shift.
Visibility combines range, angular sector, and a simple ray-cast occlusion
test against other footprints; after stamping, a hard field-of-view mask
zeroes every out-of-view cell, making the mask idempotent by construction.
"""

from __future__ import annotations

import math

import numpy as np

from ..runtime import get_dtype
from .scene import AgentRig, GridSpec, SceneObject


def feature_signature(obj_id: int, feature_seed: int, c0: int) -> np.ndarray:
    """Fixed random projection of the object id: the same object yields the
    same (hence correlated) features in every agent's raster."""
    rng = np.random.default_rng(np.random.SeedSequence((feature_seed, obj_id)))
    return rng.standard_normal(c0)


def _wrap(angle: float) -> float:
    return (angle + math.pi) % (2 * math.pi) - math.pi


def _inside_rect(px, py, obj: SceneObject):
    dx, dy = px - obj.x, py - obj.y
    cos_h, sin_h = math.cos(obj.heading), math.sin(obj.heading)
    u = cos_h * dx + sin_h * dy
    v = -sin_h * dx + cos_h * dy
    return (np.abs(u) <= obj.length / 2) & (np.abs(v) <= obj.width / 2)


def is_occluded(obj: SceneObject, rig: AgentRig, others, n_samples: int = 32) -> bool:
    """True when the sight line from the rig to the object center crosses
    another object's footprint."""
    ts = (np.arange(1, n_samples + 1) / (n_samples + 1))
    px = rig.x + ts * (obj.x - rig.x)
    py = rig.y + ts * (obj.y - rig.y)
    for other in others:
        if other.obj_id == obj.obj_id:
            continue
        if bool(np.any(_inside_rect(px, py, other))):
            return True
    return False


def is_visible(obj: SceneObject, rig: AgentRig, others) -> bool:
    dist = math.hypot(obj.x - rig.x, obj.y - rig.y)
    if dist > rig.fov_range:
        return False
    bearing = math.atan2(obj.y - rig.y, obj.x - rig.x)
    if abs(_wrap(bearing - rig.heading)) > rig.fov_half_angle:
        return False
    return not is_occluded(obj, rig, others)


def fov_mask(bev: np.ndarray, rig: AgentRig, grid: GridSpec) -> np.ndarray:
    """Zero cells outside the rig's range/sector; idempotent."""
    rows = (np.arange(grid.h0) + 0.5) * grid.voxel + grid.y_min
    cols = (np.arange(grid.w0) + 0.5) * grid.voxel + grid.x_min
    dy = rows[:, None] - rig.y
    dx = cols[None, :] - rig.x
    in_range = dx * dx + dy * dy <= rig.fov_range ** 2
    bearing = np.arctan2(dy, dx)
    rel = np.mod(bearing - rig.heading + np.pi, 2 * np.pi) - np.pi
    keep = in_range & (np.abs(rel) <= rig.fov_half_angle)
    return np.where(keep[:, :, None], bev, 0).astype(bev.dtype)


def rasterize_bev(objects, rig: AgentRig, grid: GridSpec,
                  dtype=None) -> np.ndarray:
    """Render one agent's observation (h0, w0, c0)."""
    dtype = dtype or get_dtype()
    bev = np.zeros((grid.h0, grid.w0, grid.c0), dtype=dtype)
    objects = sorted(objects, key=lambda o: o.obj_id)
    for obj in objects:
        if not is_visible(obj, rig, objects):
            continue
        sig = feature_signature(obj.obj_id, rig.feature_seed, grid.c0).astype(dtype)
        half_diag = math.hypot(obj.length, obj.width) / 2
        r_lo = max(0, int((obj.y - half_diag - grid.y_min) / grid.voxel))
        r_hi = min(grid.h0, int((obj.y + half_diag - grid.y_min) / grid.voxel) + 1)
        c_lo = max(0, int((obj.x - half_diag - grid.x_min) / grid.voxel))
        c_hi = min(grid.w0, int((obj.x + half_diag - grid.x_min) / grid.voxel) + 1)
        if r_lo >= r_hi or c_lo >= c_hi:
            continue
        cy = (np.arange(r_lo, r_hi) + 0.5) * grid.voxel + grid.y_min
        cx = (np.arange(c_lo, c_hi) + 0.5) * grid.voxel + grid.x_min
        inside = _inside_rect(cx[None, :], cy[:, None], obj)
        bev[r_lo:r_hi, c_lo:c_hi][inside] += sig
    return fov_mask(bev, rig, grid)


def rasterize_frame(scene, frame_idx: int, dtype=None) -> list:
    """All agents' observations for one frame, in agent-id order."""
    return [rasterize_bev(scene.frames[frame_idx], rig, scene.grid, dtype=dtype)
            for rig in scene.rigs]
