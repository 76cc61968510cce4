"""Versioned binary dataset container ("CMBD"): a scene plus the rendered
per-agent grids, round-tripping bit-for-bit.

Layout, little-endian:

    magic    4 bytes  b"CMBD"
    version  u32      (currently 1)
    meta_len u32, metadata json (scene geometry, rigs, per-frame objects)
    count    u32      number of tensors
    per tensor: name_len u16 + utf-8 name, dtype u8 {0: f32, 1: f64},
                ndim u8, dims u32 * ndim, raw values

Metadata floats survive the json round trip exactly (repr-based encoding),
so import(export(x)) == x bitwise.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..errors import FormatError
from .scene import AgentRig, GridSpec, Scene, SceneObject

MAGIC = b"CMBD"
VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


@dataclass
class Dataset:
    scene: Scene
    grids: np.ndarray   # (n_frames, n_agents, h0, w0, c0)


def _scene_meta(scene: Scene) -> dict:
    return {
        "grid": asdict(scene.grid),
        "frame_period_s": scene.frame_period_s,
        "rigs": [asdict(r) for r in scene.rigs],
        "frames": [[asdict(o) for o in frame] for frame in scene.frames],
    }


def _scene_from_meta(meta: dict) -> Scene:
    return Scene(
        grid=GridSpec(**meta["grid"]),
        rigs=[AgentRig(**r) for r in meta["rigs"]],
        frames=[[SceneObject(**o) for o in frame] for frame in meta["frames"]],
        frame_period_s=meta["frame_period_s"],
    )


def export_dataset(dataset: Dataset, path) -> None:
    meta = json.dumps(_scene_meta(dataset.scene)).encode("utf-8")
    chunks = [MAGIC, struct.pack("<I", VERSION),
              struct.pack("<I", len(meta)), meta]
    tensors = [("grids", dataset.grids)]
    chunks.append(struct.pack("<I", len(tensors)))
    for name, arr in tensors:
        raw = name.encode("utf-8")
        code = _CODES[np.dtype(arr.dtype)]
        chunks.append(struct.pack("<H", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<BB", code, arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())
    Path(path).write_bytes(b"".join(chunks))


def import_dataset(path) -> Dataset:
    buf = Path(path).read_bytes()
    view = memoryview(buf)
    off = 0

    def take(n):
        nonlocal off
        if off + n > len(buf):
            raise FormatError("truncated dataset container")
        out = view[off:off + n]
        off += n
        return out

    if bytes(take(4)) != MAGIC:
        raise FormatError("bad magic bytes; not a CMBD container")
    (version,) = struct.unpack("<I", take(4))
    if version != VERSION:
        raise FormatError(f"unsupported dataset version {version}")
    (meta_len,) = struct.unpack("<I", take(4))
    try:
        meta = json.loads(bytes(take(meta_len)).decode("utf-8"))
        scene = _scene_from_meta(meta)
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"invalid metadata block: {exc}") from exc
    (count,) = struct.unpack("<I", take(4))
    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = bytes(take(name_len)).decode("utf-8")
        code, ndim = struct.unpack("<BB", take(2))
        if code not in _DTYPES:
            raise FormatError(f"unknown dtype code {code}")
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        n_items = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        tensors[name] = np.frombuffer(
            take(n_items * _DTYPES[code].itemsize), dtype=_DTYPES[code]
        ).reshape(shape).copy()
    if off != len(buf):
        raise FormatError("trailing bytes after last tensor")
    if "grids" not in tensors:
        raise FormatError("dataset container missing the grids tensor")
    return Dataset(scene=scene, grids=tensors["grids"])
