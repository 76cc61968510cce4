"""Diagonal state-space scan kernels.

Four forms of the same linear system are exposed:

* ``discretize_zoh``   -- zero-order-hold discretisation of (A, B) with
  timescale delta, with a 3-term Taylor fallback of (exp(z)-1)/z below
  |z| = 1e-4 to avoid catastrophic cancellation;
* ``scan_recurrent``   -- the step-by-step recurrence
  h_t = A_bar h_{t-1} + B_bar x_t,  y_t = C h_t + D x_t;
* ``scan_conv``        -- the equivalent causal convolution with kernel
  K = (C B_bar, C A_bar B_bar, ..., C A_bar^{L-1} B_bar), LTI only;
* ``selective_scan``   -- per-step discretisation of (A, B_t) with delta_t
  followed by the recurrence with C_t (the input-dependent form), plus its
  analytic adjoint ``selective_scan_backward``.

All scans accept ``x`` shaped (L, d) or batched (B, L, d) and run in the
element type of the parameter record.  The compiled backend is used when
numba imports; otherwise a vectorised numpy fallback with identical
operation ordering takes over.  Within either backend, a constant-stream
selective scan reproduces the LTI recurrence bit-for-bit in 64-bit mode.

FLOPs accounting convention (published, since conventions differ between
profilers): one multiply-add counts as 2 FLOPs, and each state element
costs ``SCAN_MACS_PER_STATE = 6`` multiply-adds per step (discretise,
state update, output projection).
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgumentError, UnsupportedModeError
from .params import DiscreteSsmParams, SelectiveInputs, SsmParams

try:
    from . import _scan_numba as _backend
    BACKEND = "numba"
except ImportError:  # pragma: no cover - exercised only without numba
    from . import _scan_numpy as _backend
    BACKEND = "numpy"

from ._scan_numpy import SERIES_THRESHOLD

# Multiply-adds charged per state element per scan step; see module docstring.
SCAN_MACS_PER_STATE = 6
FLOPS_PER_MAC = 2


# ---------------------------------------------------------------------------
# discretisation

def discretize_zoh(a, b, delta):
    """Zero-order-hold discretisation of a diagonal system.

    a, b broadcast against each other over the trailing state axis; delta
    broadcasts over the leading axes of the result (scalar, per channel, or
    per step and channel).  Returns (a_bar, b_bar) with the broadcast shape.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    delta = np.asarray(delta)
    dtype = a.dtype if a.dtype in (np.float32, np.float64) else np.float64
    a = a.astype(dtype, copy=False)
    b = b.astype(dtype, copy=False)
    delta = delta.astype(dtype, copy=False)
    for name, arr in (("a", a), ("b", b), ("delta", delta)):
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError(f"{name} contains non-finite entries")
    if np.any(delta < 0):
        raise InvalidArgumentError("delta must be positive")
    d_exp = delta[..., None] if delta.ndim else delta
    try:
        a_b, b_b, dt_b = np.broadcast_arrays(a, b, d_exp)
    except ValueError as exc:
        raise InvalidArgumentError(f"incompatible shapes: {exc}") from exc
    for arr in (a_b, b_b, dt_b):
        arr.flags.writeable = False
    shape = a_b.shape
    a_flat = np.ascontiguousarray(a_b).reshape(-1)
    b_flat = np.ascontiguousarray(b_b).reshape(-1)
    dt_flat = np.ascontiguousarray(dt_b).reshape(-1)
    a_bar = np.empty_like(a_flat)
    b_bar = np.empty_like(a_flat)
    _backend.zoh_elementwise(a_flat, b_flat, dt_flat, a_bar, b_bar)
    return a_bar.reshape(shape), b_bar.reshape(shape)


# ---------------------------------------------------------------------------
# shape plumbing

def _as_batched(x):
    x = np.asarray(x)
    if x.ndim == 2:
        return x[None], True
    if x.ndim == 3:
        return x, False
    raise InvalidArgumentError(f"x must be (L, d) or (B, L, d); got shape {x.shape}")


def _check_channels(x, n_channels):
    if x.shape[-1] != n_channels:
        raise InvalidArgumentError(
            f"x has {x.shape[-1]} channels but params define {n_channels}")


def _full_c(c, d, n, dtype):
    c = np.asarray(c, dtype=dtype)
    if c.shape == (n,):
        c = np.broadcast_to(c, (d, n))
    return np.ascontiguousarray(c)


# ---------------------------------------------------------------------------
# scans

def scan_recurrent(p: DiscreteSsmParams, x):
    """Left-to-right recurrence from h_0 = 0.  Empty input -> empty output."""
    if not isinstance(p, DiscreteSsmParams):
        raise InvalidArgumentError("scan_recurrent expects DiscreteSsmParams")
    xb, squeeze = _as_batched(x)
    _check_channels(xb, p.n_channels)
    dtype = p.a_bar.dtype
    xb = np.ascontiguousarray(xb, dtype=dtype)
    if xb.shape[1] == 0:
        y = np.empty_like(xb)
    else:
        c = _full_c(p.c, p.n_channels, p.n_state, dtype)
        y = _backend.scan_lti(p.a_bar, p.b_bar, c, p.d_skip, xb)
    return y[0] if squeeze else y


def scan_conv(p: DiscreteSsmParams, x):
    """Convolutional form of the LTI scan (kernel built explicitly).

    The kernel and convolution are evaluated in float64 via FFT and cast
    back, so agreement with ``scan_recurrent`` is limited by the working
    precision of the recurrence, not the transform.
    """
    if isinstance(p, (SelectiveInputs, SsmParams)):
        raise UnsupportedModeError(
            "scan_conv supports time-invariant parameters only; "
            "use selective_scan for per-step inputs")
    if not isinstance(p, DiscreteSsmParams):
        raise InvalidArgumentError("scan_conv expects DiscreteSsmParams")
    xb, squeeze = _as_batched(x)
    _check_channels(xb, p.n_channels)
    dtype = p.a_bar.dtype
    n_batch, length, d = xb.shape
    if length == 0:
        y = np.empty_like(xb, dtype=dtype)
        return y[0] if squeeze else y

    a_bar = p.a_bar.astype(np.float64)
    b_bar = p.b_bar.astype(np.float64)
    c = _full_c(p.c, d, p.n_state, np.float64)
    # kernel[k] = C . (A_bar^k B_bar) per channel
    powers = np.ones((d, p.n_state, length))
    if length > 1:
        np.cumprod(np.broadcast_to(a_bar[:, :, None], (d, p.n_state, length - 1)),
                   axis=-1, out=powers[:, :, 1:])
    kern = ((c * b_bar)[:, :, None] * powers).sum(axis=1)  # (d, L)

    x64 = np.moveaxis(xb.astype(np.float64), 1, 2)  # (B, d, L)
    nfft = 1 << int(np.ceil(np.log2(2 * length - 1))) if length > 1 else 1
    yf = np.fft.rfft(x64, n=nfft, axis=-1) * np.fft.rfft(kern, n=nfft, axis=-1)
    conv = np.fft.irfft(yf, n=nfft, axis=-1)[..., :length] if length > 1 else x64 * kern
    y = np.moveaxis(conv, 2, 1) + p.d_skip.astype(np.float64) * xb
    y = y.astype(dtype)
    return y[0] if squeeze else y


def conv_kernel(p: DiscreteSsmParams, length: int) -> np.ndarray:
    """The structured convolution kernel (d, length): C A_bar^k B_bar."""
    if not isinstance(p, DiscreteSsmParams):
        raise InvalidArgumentError("conv_kernel expects DiscreteSsmParams")
    if length < 1:
        raise InvalidArgumentError("length must be >= 1")
    c = _full_c(p.c, p.n_channels, p.n_state, p.a_bar.dtype)
    powers = np.ones((p.n_channels, p.n_state, length), dtype=p.a_bar.dtype)
    if length > 1:
        np.cumprod(np.broadcast_to(p.a_bar[:, :, None],
                                   (p.n_channels, p.n_state, length - 1)),
                   axis=-1, out=powers[:, :, 1:])
    return ((c * p.b_bar)[:, :, None] * powers).sum(axis=1)


def _norm_streams(s: SelectiveInputs, xb):
    """Broadcast streams to (B, L, *) matching the batched input."""
    n_batch, length, d = xb.shape
    if s.length != length:
        raise InvalidArgumentError(
            f"stream length {s.length} != input length {length}")
    def up(arr, last):
        if arr.ndim == 2:
            arr = np.broadcast_to(arr[None], (n_batch, length, arr.shape[-1]))
        elif arr.shape[0] != n_batch:
            raise InvalidArgumentError("stream batch does not match input batch")
        if arr.shape[-1] != last:
            raise InvalidArgumentError(
                f"stream channel width {arr.shape[-1]} != expected {last}")
        return np.ascontiguousarray(arr, dtype=xb.dtype)
    return up(s.delta, d), up(s.b, s.b.shape[-1]), up(s.c, s.c.shape[-1])


def selective_scan(p: SsmParams, s: SelectiveInputs, x):
    """Input-dependent scan: per-step ZOH of (A, B_t) with delta_t, then the
    recurrence with C_t.  Only ``p.a`` and ``p.d_skip`` participate; the
    projection streams come from ``s``.  Reduces exactly to
    ``scan_recurrent`` when the streams are constant.
    """
    if not isinstance(p, SsmParams):
        raise InvalidArgumentError("selective_scan expects SsmParams")
    if not isinstance(s, SelectiveInputs):
        raise InvalidArgumentError("selective_scan expects SelectiveInputs")
    xb, squeeze = _as_batched(x)
    _check_channels(xb, p.n_channels)
    dtype = p.a.dtype
    xb = np.ascontiguousarray(xb, dtype=dtype)
    if xb.shape[1] == 0:
        y = np.empty_like(xb)
        return y[0] if squeeze else y
    delta, b_s, c_s = _norm_streams(s, xb)
    if b_s.shape[-1] != p.n_state or c_s.shape[-1] != p.n_state:
        raise InvalidArgumentError("b/c stream width must equal the state size")
    y = _backend.scan_selective(delta, p.a, b_s, c_s, p.d_skip, xb)
    return y[0] if squeeze else y


def scan_flops(length: int, d: int, n: int) -> int:
    """Analytic FLOPs of one selective scan pass; exactly linear in length."""
    if length < 0 or d <= 0 or n <= 0:
        raise InvalidArgumentError("scan_flops arguments must be positive")
    return FLOPS_PER_MAC * SCAN_MACS_PER_STATE * length * d * n


# ---------------------------------------------------------------------------
# analytic adjoint

def _phi_and_deriv(z, a_bar):
    small = np.abs(z) < SERIES_THRESHOLD
    z_safe = np.where(small, 1.0, z)
    phi = np.where(small, 1.0 + z * (0.5 + z / 6.0), (a_bar - 1.0) / z_safe)
    dphi = np.where(small, 0.5 + z * (1.0 / 3.0 + z * 0.125),
                    (a_bar * (z - 1.0) + 1.0) / (z_safe * z_safe))
    return phi, dphi


def selective_scan_backward(p: SsmParams, s: SelectiveInputs, x, dy):
    """Adjoint of ``selective_scan`` via the reverse-time recurrence.

    Returns (dx, ddelta, db, dc, da, dd) shaped like the corresponding
    inputs.  The forward state trajectory is rematerialised, so memory is
    O(B L d N); intended for verification-scale problems.
    """
    xb, squeeze = _as_batched(x)
    _check_channels(xb, p.n_channels)
    dtype = p.a.dtype
    xb = np.ascontiguousarray(xb, dtype=dtype)
    dyb = np.asarray(dy, dtype=dtype)
    if dyb.shape != np.asarray(x).shape:
        raise InvalidArgumentError(
            f"dy shape {np.asarray(dy).shape} must match y shape {np.asarray(x).shape}")
    dyb = dyb[None] if squeeze else dyb
    delta, b_s, c_s = _norm_streams(s, xb)
    n_batch, length, d = xb.shape
    n = p.n_state

    # forward, keeping the state trajectory
    z = delta[..., None] * p.a                        # (B, L, d, N)
    a_bar = np.exp(z)
    phi, dphi = _phi_and_deriv(z, a_bar)
    w = delta[..., None] * b_s[:, :, None, :]         # delta * B_t
    b_bar = phi * w
    h = np.empty((n_batch, length, d, n), dtype=dtype)
    hk = np.zeros((n_batch, d, n), dtype=dtype)
    for t in range(length):
        hk = a_bar[:, t] * hk + b_bar[:, t] * xb[:, t, :, None]
        h[:, t] = hk

    # reverse sweep
    lam = np.zeros((n_batch, d, n), dtype=dtype)
    da_bar = np.empty_like(a_bar)
    du = np.empty_like(a_bar)
    for t in range(length - 1, -1, -1):
        lam = c_s[:, t, None, :] * dyb[:, t, :, None] + (
            a_bar[:, t + 1] * lam if t + 1 < length else 0.0)
        h_prev = h[:, t - 1] if t > 0 else 0.0
        da_bar[:, t] = lam * h_prev
        du[:, t] = lam

    db_bar = du * xb[..., None]
    dx = (b_bar * du).sum(axis=-1) + p.d_skip * dyb
    dc = (dyb[..., None] * h).sum(axis=2)             # (B, L, N)
    dd = (dyb * xb).sum(axis=(0, 1))                  # (d,)

    dz = da_bar * a_bar + (db_bar * w) * dphi
    dw = db_bar * phi
    ddelta = (dz * p.a).sum(axis=-1) + (dw * b_s[:, :, None, :]).sum(axis=-1)
    db = (dw * delta[..., None]).sum(axis=2)          # (B, L, N)
    da = (dz * delta[..., None]).sum(axis=(0, 1))     # (d, N)

    if squeeze:
        dx = dx[0]
    if s.delta.ndim == 2:
        ddelta = ddelta.sum(axis=0) if not squeeze else ddelta[0]
        db = db.sum(axis=0) if not squeeze else db[0]
        dc = dc.sum(axis=0) if not squeeze else dc[0]
    return dx, ddelta, db, dc, da, dd
