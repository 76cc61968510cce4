"""Versioned binary weight container ("CMBW").

Layout, little-endian throughout:

    magic     4 bytes  b"CMBW"
    version   u32      (currently 1)
    count     u32      number of tensors
    per tensor:
        name_len u16, name utf-8,
        dtype    u8   (0 = float32, 1 = float64),
        ndim     u8,  dims u32 * ndim,
        data     raw little-endian values

Snapshots enable bitwise replay: loading a snapshot restores the exact
tensors that produced it, regardless of the seed the target net was built
with.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError, InvalidArgumentError

MAGIC = b"CMBW"
VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


def save_weights(net, path) -> None:
    path = Path(path)
    chunks = [MAGIC, struct.pack("<I", VERSION)]
    items = list(net.named_params())
    chunks.append(struct.pack("<I", len(items)))
    for name, arr in items:
        raw = name.encode("utf-8")
        code = _CODES[np.dtype(arr.dtype)]
        chunks.append(struct.pack("<H", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<BB", code, arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())
    path.write_bytes(b"".join(chunks))


def read_snapshot(path) -> dict[str, np.ndarray]:
    """Parse a container fully (no partial state on error)."""
    buf = Path(path).read_bytes()
    view = memoryview(buf)
    off = 0

    def take(n):
        nonlocal off
        if off + n > len(buf):
            raise FormatError("truncated weight container")
        out = view[off:off + n]
        off += n
        return out

    if bytes(take(4)) != MAGIC:
        raise FormatError("bad magic bytes; not a CMBW container")
    (version,) = struct.unpack("<I", take(4))
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}")
    (count,) = struct.unpack("<I", take(4))
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = bytes(take(name_len)).decode("utf-8")
        code, ndim = struct.unpack("<BB", take(2))
        if code not in _DTYPES:
            raise FormatError(f"unknown dtype code {code} for {name!r}")
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        n_items = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        data = np.frombuffer(take(n_items * _DTYPES[code].itemsize),
                             dtype=_DTYPES[code]).reshape(shape)
        if name in out:
            raise FormatError(f"duplicate tensor name {name!r}")
        out[name] = data.copy()
    if off != len(buf):
        raise FormatError("trailing bytes after last tensor")
    return out


def load_weights(net, path) -> None:
    """Restore a snapshot into ``net`` (names and shapes must match the
    net exactly; the net is untouched if validation fails)."""
    snap = read_snapshot(path)
    current = dict(net.named_params())
    missing = sorted(set(current) - set(snap))
    extra = sorted(set(snap) - set(current))
    if missing or extra:
        raise InvalidArgumentError(
            f"snapshot does not match model: missing={missing[:3]} extra={extra[:3]}")
    for name, arr in snap.items():
        if tuple(arr.shape) != tuple(current[name].shape):
            raise InvalidArgumentError(
                f"shape mismatch for {name!r}: snapshot {arr.shape}, "
                f"model {current[name].shape}")
    for name, arr in snap.items():
        current[name][:] = arr.astype(current[name].dtype)
