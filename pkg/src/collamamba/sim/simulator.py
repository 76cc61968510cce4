"""Deterministic discrete-time multi-agent simulator.

Every frame, every agent rasterises its observation, encodes it (boosted by
local history in the st/miss variants), and broadcasts the sequence-form
payload.  Acting as ego, each agent waits for neighbor messages up to the
budget tau0 and then picks a processing mode:

    received within tau0          -> neighbor feature fusion
    nothing received, history full -> collaborative prediction
    nothing received, history short-> ego only

The fused output of whichever mode ran is appended to the agent's global
feature trajectory, so predicted frames feed later predictions too.  The
whole run is a single-threaded event loop over (frame, agent) in fixed
order, fully determined by the scenario seed; wall_us in the log is
simulation-clock microseconds (the wait time), never host time, so replays
are byte-identical.
"""

from __future__ import annotations

import enum
import math
import zlib
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from ..data import GridSpec, generate_scene, rasterize_bev
from ..errors import InvalidArgumentError
from ..net import CollaMambaNet, Variant, load_weights
from .scenario import ScenarioConfig

CSV_SCHEMA_VERSION = 1
CSV_HEADER = "frame,agent_id,mode,delta_tau_ms,bytes,cv_log2,wall_us,schema_version"


class Mode(str, enum.Enum):
    FEATURE_FUSION = "fusion"
    COLLABORATIVE_PREDICTION = "prediction"
    EGO_ONLY = "ego_only"


def decide_mode(delta_tau_ms: float, recv_flag: bool, tau0_ms: float,
                history_ready: bool) -> Mode:
    """Total mode decision.

    The two defining guards are (dt <= tau0 and recv) -> fusion and
    (dt > tau0 and not recv and ready) -> prediction.  The simulator
    evaluates at the earlier of first arrival and tau0, which makes those
    guards exhaustive; for arbitrary inputs the full truth table is
    availability-driven:

        recv  ready  dt<=tau0   mode
        yes   *      *          fusion       (data arrived; use it)
        no    yes    *          prediction
        no    no     *          ego_only
    """
    if recv_flag:
        return Mode.FEATURE_FUSION
    if history_ready:
        return Mode.COLLABORATIVE_PREDICTION
    return Mode.EGO_ONLY


@dataclass
class AgentMessage:
    sender: int
    frame_idx: int
    payload: np.ndarray          # (l, c) feature sequence
    precision: str
    send_ts_ms: float
    arrival_ts_ms: float         # math.inf when dropped

    @property
    def payload_nbytes(self) -> int:
        return int(self.payload.nbytes)


def comm_volume(message_or_nbytes) -> float:
    """#CV: base-2 log of the payload byte count (headers excluded)."""
    nbytes = (message_or_nbytes.payload_nbytes
              if isinstance(message_or_nbytes, AgentMessage)
              else int(message_or_nbytes))
    if nbytes <= 0:
        raise InvalidArgumentError("payload must be non-empty")
    return math.log2(nbytes)


def inject_pose_noise(bev: np.ndarray, err_xy, voxel: float,
                      rng: np.random.Generator | None = None,
                      std_m: float = 0.0) -> np.ndarray:
    """Integer-cell translation of the raster with zero fill.

    err_xy = (error along x / columns, error along y / rows) in meters; when
    a generator and std are given instead, the error is sampled Gaussian.
    """
    if voxel <= 0:
        raise InvalidArgumentError("voxel must be positive")
    if rng is not None:
        err_xy = rng.normal(0.0, std_m, size=2)
    dc = int(round(float(err_xy[0]) / voxel))
    dr = int(round(float(err_xy[1]) / voxel))
    if dr == 0 and dc == 0:
        return bev.copy()
    out = np.zeros_like(bev)
    h, w = bev.shape[:2]
    src_r = slice(max(0, -dr), min(h, h - dr))
    dst_r = slice(max(0, dr), min(h, h + dr))
    src_c = slice(max(0, -dc), min(w, w - dc))
    dst_c = slice(max(0, dc), min(w, w + dc))
    out[dst_r, dst_c] = bev[src_r, src_c]
    return out


@dataclass
class FrameRecord:
    frame: int
    agent_id: int
    mode: Mode
    delta_tau_ms: float
    bytes_received: int
    cv_log2: float
    wall_us: int


@dataclass
class CommLog:
    records: list = field(default_factory=list)

    def append(self, rec: FrameRecord) -> None:
        self.records.append(rec)

    def to_csv(self, path) -> None:
        Path(path).write_text(self.to_csv_text())

    def to_csv_text(self) -> str:
        lines = [CSV_HEADER]
        for r in self.records:
            lines.append(
                f"{r.frame},{r.agent_id},{r.mode.value},{r.delta_tau_ms:.6f},"
                f"{r.bytes_received},{r.cv_log2:.6f},{r.wall_us},{CSV_SCHEMA_VERSION}")
        return "\n".join(lines) + "\n"


def mode_fractions(log: CommLog, warmup_frames: int = 0) -> dict:
    """Exact per-mode fractions (rational arithmetic) over post-warm-up
    records; fractions sum to 1."""
    post = [r for r in log.records if r.frame >= warmup_frames]
    if not post:
        raise InvalidArgumentError("no records after warm-up")
    total = len(post)
    out = {mode: Fraction(sum(1 for r in post if r.mode is mode), total)
           for mode in Mode}
    assert sum(out.values()) == 1
    return out


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    log: CommLog
    outputs: list                 # outputs[frame][agent] -> DetectionOutput | None
    warmup_frames: int
    message_nbytes: int


def _rng(seed: int, tag: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, zlib.crc32(tag.encode()))))


def run_scenario(cfg: ScenarioConfig, weights=None,
                 _zero_dropped_payloads: bool = False) -> ScenarioResult:
    """Run one scenario; deterministic given (config, weights).

    ``weights`` may be None (seeded init), a CMBW snapshot path, or a
    prebuilt net matching the scenario's variant and net config.
    ``_zero_dropped_payloads`` supports the prediction-isolation invariant:
    it wipes every in-flight payload that will never arrive, which must not
    change any output.
    """
    variant = Variant.parse(cfg.variant)
    net_cfg = cfg.net_config()
    if isinstance(weights, CollaMambaNet):
        net = weights
    else:
        net = CollaMambaNet(net_cfg, variant)
        if weights is not None:
            load_weights(net, weights)

    grid = GridSpec.from_net(net_cfg, voxel=cfg.voxel_m)
    scene = generate_scene(cfg.seed, cfg.n_agents, cfg.n_objects, cfg.n_frames,
                           grid=grid, frame_period_s=cfg.frame_period_ms / 1000.0)
    lat_rng = _rng(cfg.seed, "latency")
    miss_rng = _rng(cfg.seed, "miss")
    noise_rng = _rng(cfg.seed, "pose_noise")

    with_history = variant in (Variant.ST, Variant.MISS)
    local_frames = [deque(maxlen=net_cfg.l_his) for _ in range(cfg.n_agents)]
    global_traj = [deque(maxlen=net_cfg.l_his) for _ in range(cfg.n_agents)]

    log = CommLog()
    outputs: list = []
    message_nbytes = 0

    for t in range(cfg.n_frames):
        frame_start = t * cfg.frame_period_ms
        if cfg.miss_interval is None:
            miss = False
        elif cfg.miss_mode == "bernoulli":
            miss = bool(miss_rng.random() < 1.0 / cfg.miss_interval)
        else:
            miss = (t + 1) % cfg.miss_interval == 0

        # observe + encode (+ boost), fixed agent order
        seqs = []
        for a in range(cfg.n_agents):
            bev = rasterize_bev(scene.frames[t], scene.rigs[a], grid)
            if cfg.pose_noise_std_m > 0:
                bev = inject_pose_noise(bev, None, grid.voxel, rng=noise_rng,
                                        std_m=cfg.pose_noise_std_m)
            seq = net.encode(bev[None])
            if with_history and len(local_frames[a]) == net_cfg.l_his:
                hist = net.history_encode(np.stack(local_frames[a])[None])
                seq = net.boost_features(seq, hist)
            local_frames[a].append(bev)
            seqs.append(seq)

        # broadcast
        inbox: list[list[AgentMessage]] = [[] for _ in range(cfg.n_agents)]
        for sender in range(cfg.n_agents):
            for receiver in range(cfg.n_agents):
                if sender == receiver:
                    continue
                latency = cfg.latency_ms
                if cfg.latency_jitter_ms > 0:
                    latency += float(lat_rng.uniform(0.0, cfg.latency_jitter_ms))
                arrival = math.inf if miss else frame_start + latency
                payload = seqs[sender][0]
                if _zero_dropped_payloads and not math.isfinite(arrival):
                    payload = np.zeros_like(payload)
                inbox[receiver].append(AgentMessage(
                    sender=sender, frame_idx=t, payload=payload,
                    precision=str(seqs[sender].dtype), send_ts_ms=frame_start,
                    arrival_ts_ms=arrival))

        # receive + fuse + detect, fixed agent order
        frame_out = []
        for a in range(cfg.n_agents):
            within = [m for m in inbox[a]
                      if m.arrival_ts_ms - frame_start <= cfg.tau0_ms]
            within.sort(key=lambda m: m.sender)
            recv = bool(within)
            offsets = [m.arrival_ts_ms - frame_start for m in inbox[a]
                       if math.isfinite(m.arrival_ts_ms)]
            delta_tau = min(offsets) if recv else cfg.tau0_ms
            ready = (variant is Variant.MISS
                     and len(global_traj[a]) == net_cfg.l_his)
            mode = decide_mode(delta_tau, recv, cfg.tau0_ms, ready)

            ego_seq = seqs[a]
            if mode is Mode.FEATURE_FUSION:
                fused = net.fuse_global(ego_seq, [m.payload[None] for m in within])
                accepted_bytes = sum(m.payload_nbytes for m in within)
            elif mode is Mode.COLLABORATIVE_PREDICTION:
                predicted = net.predict_global(np.stack(global_traj[a])[None])
                fused = net.fuse_global(ego_seq, [predicted])
                accepted_bytes = 0
            else:
                fused = ego_seq
                accepted_bytes = 0
            global_traj[a].append(fused[0])

            det = None
            if cfg.store_outputs:
                det = net.detect(net.decode(fused))
            frame_out.append(det)

            nbytes = ego_seq[0].nbytes
            message_nbytes = nbytes
            log.append(FrameRecord(
                frame=t, agent_id=a, mode=mode, delta_tau_ms=float(delta_tau),
                bytes_received=int(accepted_bytes), cv_log2=comm_volume(nbytes),
                wall_us=int(round(delta_tau * 1000.0))))
        outputs.append(frame_out)

    return ScenarioResult(config=cfg, log=log, outputs=outputs,
                          warmup_frames=net_cfg.l_his if variant is Variant.MISS else 0,
                          message_nbytes=message_nbytes)
