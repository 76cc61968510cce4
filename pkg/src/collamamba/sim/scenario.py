"""Scenario configuration: a JSON-serialisable description of one
deterministic multi-agent run."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..errors import InvalidArgumentError
from ..net import NetConfig, Variant


@dataclass(frozen=True)
class ScenarioConfig:
    n_agents: int = 2
    n_frames: int = 40
    frame_period_ms: float = 100.0
    latency_ms: float = 20.0
    latency_jitter_ms: float = 0.0     # uniform extra latency, seeded per link
    miss_interval: int | None = None   # miss event every m-th frame; None = never
    miss_mode: str = "deterministic"   # or "bernoulli" (seeded, p = 1/m)
    tau0_ms: float = 50.0              # max wait for neighbor messages
    seed: int = 0
    variant: str = "miss"
    n_objects: int = 6
    voxel_m: float = 0.4
    pose_noise_std_m: float = 0.0
    store_outputs: bool = False
    net: dict = field(default_factory=dict)  # NetConfig overrides (desk scale)

    def __post_init__(self):
        if self.n_agents < 1:
            raise InvalidArgumentError("n_agents must be >= 1")
        if self.n_frames < 1:
            raise InvalidArgumentError("n_frames must be >= 1")
        if self.miss_interval is not None and self.miss_interval < 1:
            raise InvalidArgumentError("miss_interval must be >= 1 or null")
        if self.miss_mode not in ("deterministic", "bernoulli"):
            raise InvalidArgumentError("miss_mode must be deterministic|bernoulli")
        if self.tau0_ms < 0:
            raise InvalidArgumentError("tau0_ms must be >= 0")
        if self.latency_ms < 0 or self.latency_jitter_ms < 0:
            raise InvalidArgumentError("latencies must be >= 0")
        Variant.parse(self.variant)

    def net_config(self) -> NetConfig:
        overrides = dict(self.net)
        overrides.setdefault("seed", self.seed)
        return NetConfig.tiny(**overrides)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise InvalidArgumentError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**data)


def save_scenario(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(cfg.to_json())


def load_scenario(path) -> ScenarioConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"scenario file is not valid json: {exc}") from exc
    if not isinstance(data, dict):
        raise InvalidArgumentError("scenario file must hold a json object")
    return ScenarioConfig.from_dict(data)
