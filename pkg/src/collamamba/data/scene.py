"""Deterministic synthetic scenes: seeded object placement, constant
velocity motion with reflective bounds, and per-agent sensing rigs."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidArgumentError


@dataclass(frozen=True)
class GridSpec:
    """BEV raster geometry: rows span y, columns span x."""

    x_min: float = -140.8
    x_max: float = 140.8
    y_min: float = -40.0
    y_max: float = 40.0
    voxel: float = 0.4
    c0: int = 64

    def __post_init__(self):
        if self.voxel <= 0:
            raise InvalidArgumentError("voxel size must be positive")
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise InvalidArgumentError("degenerate grid extents")

    @property
    def h0(self) -> int:
        return int(round((self.y_max - self.y_min) / self.voxel))

    @property
    def w0(self) -> int:
        return int(round((self.x_max - self.x_min) / self.voxel))

    @property
    def max_range(self) -> float:
        return math.hypot(max(abs(self.x_min), abs(self.x_max)),
                          max(abs(self.y_min), abs(self.y_max)))

    @classmethod
    def from_net(cls, cfg, voxel: float = 0.4) -> "GridSpec":
        """Geometry matching a network config's raster extents, centered."""
        return cls(x_min=-cfg.w0 * voxel / 2, x_max=cfg.w0 * voxel / 2,
                   y_min=-cfg.h0 * voxel / 2, y_max=cfg.h0 * voxel / 2,
                   voxel=voxel, c0=cfg.c0)


@dataclass
class SceneObject:
    obj_id: int
    x: float
    y: float
    length: float
    width: float
    heading: float
    vx: float
    vy: float


@dataclass
class AgentRig:
    agent_id: int
    x: float
    y: float
    heading: float
    fov_range: float
    fov_half_angle: float   # pi = full circle
    feature_seed: int


@dataclass
class Scene:
    grid: GridSpec
    rigs: list
    frames: list            # frames[t] = list[SceneObject], ground truth
    frame_period_s: float = 0.1

    @property
    def n_frames(self) -> int:
        return len(self.frames)


def _rng(seed: int, tag: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, zlib.crc32(tag.encode()))))


def _step(obj: SceneObject, dt: float, grid: GridSpec) -> SceneObject:
    x, y = obj.x + obj.vx * dt, obj.y + obj.vy * dt
    vx, vy = obj.vx, obj.vy
    while not (grid.x_min <= x <= grid.x_max):
        x = 2 * (grid.x_min if x < grid.x_min else grid.x_max) - x
        vx = -vx
    while not (grid.y_min <= y <= grid.y_max):
        y = 2 * (grid.y_min if y < grid.y_min else grid.y_max) - y
        vy = -vy
    heading = math.atan2(vy, vx) if (vx or vy) else obj.heading
    return SceneObject(obj.obj_id, x, y, obj.length, obj.width, heading, vx, vy)


def generate_scene(seed: int, n_agents: int, n_objects: int, n_frames: int,
                   grid: GridSpec = GridSpec(), frame_period_s: float = 0.1,
                   max_speed: float = 8.0) -> Scene:
    """Seeded world: objects placed uniformly with random headings and
    speeds, moved by constant velocity with reflection at the bounds."""
    if n_agents < 1 or n_frames < 1 or n_objects < 0:
        raise InvalidArgumentError("need n_agents >= 1, n_frames >= 1, n_objects >= 0")
    rng = _rng(seed, "scene")
    margin = 3.0
    objects = []
    for i in range(n_objects):
        speed = rng.uniform(0.0, max_speed)
        ang = rng.uniform(-math.pi, math.pi)
        objects.append(SceneObject(
            obj_id=i,
            x=float(rng.uniform(grid.x_min + margin, grid.x_max - margin)),
            y=float(rng.uniform(grid.y_min + margin, grid.y_max - margin)),
            length=float(rng.uniform(3.5, 5.0)),
            width=float(rng.uniform(1.6, 2.2)),
            heading=ang,
            vx=float(speed * math.cos(ang)),
            vy=float(speed * math.sin(ang))))

    rigs = []
    for a in range(n_agents):
        rigs.append(AgentRig(
            agent_id=a,
            x=float(rng.uniform(grid.x_min / 2, grid.x_max / 2)),
            y=float(rng.uniform(grid.y_min / 2, grid.y_max / 2)),
            heading=float(rng.uniform(-math.pi, math.pi)),
            fov_range=float(rng.uniform(0.5, 1.0) * grid.max_range),
            fov_half_angle=float(rng.uniform(math.pi / 3, math.pi)),
            feature_seed=seed + 1))

    frames = [objects]
    for _ in range(n_frames - 1):
        frames.append([_step(o, frame_period_s, grid) for o in frames[-1]])
    return Scene(grid=grid, rigs=rigs, frames=frames, frame_period_s=frame_period_s)
