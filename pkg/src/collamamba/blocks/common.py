"""Shared building blocks: parameter registry, linear/norm layers,
activations, and convolution helpers.

Parameters are plain numpy arrays registered on a small ``Module`` base so
they can be counted, snapshotted, and zeroed by name.  Every module draws
its weights from a generator derived from (seed, module tag), so weights
are independent of construction order: two model variants that share a tag
share the exact same tensors for it.
"""

from __future__ import annotations

import contextlib
import zlib

import numpy as np

from ..errors import InvalidArgumentError, NumericOverflowError
from ..runtime import get_dtype


@contextlib.contextmanager
def overflow_guard(tag: str):
    """Surface non-finite values produced inside a block as a numeric
    overflow naming the block, wherever validation first trips on them."""
    try:
        yield
    except InvalidArgumentError as exc:
        if "non-finite" in str(exc):
            raise NumericOverflowError(
                f"non-finite activations in block {tag}") from exc
        raise


def rng_for(seed: int, tag: str) -> np.random.Generator:
    """Deterministic generator for one named module."""
    return np.random.default_rng(np.random.SeedSequence((seed, zlib.crc32(tag.encode()))))


class Module:
    """Named container of parameters and child modules."""

    def __init__(self):
        self._params: dict[str, np.ndarray] = {}
        self._children: dict[str, Module] = {}

    def param(self, name: str, arr: np.ndarray) -> np.ndarray:
        arr = np.ascontiguousarray(arr, dtype=get_dtype())
        self._params[name] = arr
        return arr

    def child(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    def children(self, name: str, modules) -> list:
        for i, m in enumerate(modules):
            self._children[f"{name}.{i}"] = m
        return list(modules)

    def named_params(self, prefix: str = ""):
        for name, arr in self._params.items():
            yield (f"{prefix}{name}", arr)
        for cname, mod in self._children.items():
            yield from mod.named_params(prefix=f"{prefix}{cname}.")

    def param_count(self) -> int:
        return sum(arr.size for _, arr in self.named_params())

    def zero_params(self) -> None:
        """Zero every learnable tensor in place (testing aid: with zeroed
        projections each block collapses to its residual identity)."""
        for _, arr in self.named_params():
            arr[:] = 0

    def set_param(self, path: str, value: np.ndarray) -> None:
        mod, leaf = self._resolve(path)
        if leaf not in mod._params:
            raise InvalidArgumentError(f"unknown parameter {path!r}")
        cur = mod._params[leaf]
        if tuple(value.shape) != tuple(cur.shape):
            raise InvalidArgumentError(
                f"shape mismatch for {path!r}: stored {value.shape}, expected {cur.shape}")
        cur[:] = value.astype(cur.dtype)

    def _resolve(self, path: str):
        mod = self
        parts = path.split(".")
        i = 0
        while i < len(parts) - 1:
            # child names may themselves contain dots (list entries)
            for j in range(len(parts) - 1, i, -1):
                key = ".".join(parts[i:j])
                if key in mod._children:
                    mod = mod._children[key]
                    i = j
                    break
            else:
                break
        return mod, ".".join(parts[i:])


class Linear(Module):
    """Dense map x @ w (+ bias); w stored (in, out)."""

    def __init__(self, n_in: int, n_out: int, rng, bias: bool = True, scale: float | None = None):
        super().__init__()
        std = (1.0 / np.sqrt(n_in)) if scale is None else scale
        self.w = self.param("w", rng.standard_normal((n_in, n_out)) * std)
        self.b = self.param("b", np.zeros(n_out)) if bias else None

    def __call__(self, x):
        y = x @ self.w
        return y + self.b if self.b is not None else y


class LayerNorm(Module):
    def __init__(self, width: int, eps: float = 1e-5):
        super().__init__()
        self.g = self.param("g", np.ones(width))
        self.b = self.param("b", np.zeros(width))
        self.eps = eps

    def __call__(self, x):
        mu = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        return (x - mu) / np.sqrt(var + np.asarray(self.eps, dtype=x.dtype)) * self.g + self.b


def sigmoid(x):
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z)).astype(x.dtype)


def silu(x):
    return x * sigmoid(x)


def softplus(x):
    return (np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0)).astype(x.dtype)


class CausalConv1d(Module):
    """Depthwise causal convolution along the sequence axis of (B, L, d)."""

    def __init__(self, width: int, channels: int, rng):
        super().__init__()
        self.width = width
        self.w = self.param("w", rng.standard_normal((width, channels)) / np.sqrt(width))
        self.b = self.param("b", np.zeros(channels))

    def __call__(self, x):
        length = x.shape[1]
        out = np.broadcast_to(self.b, x.shape).copy()
        for k in range(self.width):
            lag = self.width - 1 - k
            if lag >= length:
                continue
            if lag == 0:
                out += self.w[k] * x
            else:
                out[:, lag:] += self.w[k] * x[:, :length - lag]
        return out


def conv2d(x, w, bias=None, stride: int = 1, pad: tuple[int, int, int, int] = (0, 0, 0, 0)):
    """2D convolution on channels-last (B, H, W, Cin) with kernel
    (kh, kw, Cin, Cout); ``pad`` is (top, bottom, left, right) zero padding."""
    top, bot, left, right = pad
    if any(pad):
        x = np.pad(x, ((0, 0), (top, bot), (left, right), (0, 0)))
    kh, kw = w.shape[:2]
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(1, 2))
    win = win[:, ::stride, ::stride]
    y = np.tensordot(win, w, axes=([3, 4, 5], [2, 0, 1]))
    if bias is not None:
        y = y + bias
    return y.astype(x.dtype)


def pixel_shuffle_2x(x):
    """(B, H, W, 4c) -> (B, 2H, 2W, c); channel groups are ordered
    (row offset, column offset, channel)."""
    b, h, w, c4 = x.shape
    c = c4 // 4
    y = x.reshape(b, h, w, 2, 2, c)
    y = y.transpose(0, 1, 3, 2, 4, 5)
    return y.reshape(b, 2 * h, 2 * w, c)


def resize_bilinear(x, out_h: int, out_w: int):
    """Bilinear resize of (B, H, W, C); identity when sizes already match."""
    b, h, w, c = x.shape
    if (h, w) == (out_h, out_w):
        return x
    def axis_coords(n_in, n_out):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0, n_in - 1)
        lo = np.floor(src).astype(np.int64)
        hi = np.minimum(lo + 1, n_in - 1)
        frac = (src - lo).astype(x.dtype)
        return lo, hi, frac
    r0, r1, rf = axis_coords(h, out_h)
    c0, c1, cf = axis_coords(w, out_w)
    rf = rf[None, :, None, None]
    cf = cf[None, None, :, None]
    top = x[:, r0][:, :, c0] * (1 - cf) + x[:, r0][:, :, c1] * cf
    bot = x[:, r1][:, :, c0] * (1 - cf) + x[:, r1][:, :, c1] * cf
    return (top * (1 - rf) + bot * rf).astype(x.dtype)
