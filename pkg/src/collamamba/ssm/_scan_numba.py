"""Compiled scan cores (numba).

All kernels are strict IEEE (no fastmath), single-threaded, and release the
GIL so callers may run independent scans on worker threads.  The zero-order
hold math lives in one inlined helper shared by the elementwise discretiser
and the fused selective scan, which makes the two paths bit-identical for a
given element type: ``selective_scan`` with constant streams reproduces
``scan_recurrent(discretize_zoh(...))`` exactly in 64-bit mode.

Float constants are typed float32 so the 32-bit kernels run in pure f32.
Under f64 they promote losslessly except the series coefficients, whose
representation error is ~1e-8 relative on a term that is itself O(z^2) with
|z| < 1e-4 -- far below every stated tolerance.
"""

import numba
import numpy as np

# Below this |delta * a| the closed form (exp(z) - 1)/z catastrophically
# cancels; switch to its 3-term Taylor series.
SERIES_THRESHOLD = np.float32(1e-4)

_ONE = np.float32(1.0)
_HALF = np.float32(0.5)
_SIXTH = np.float32(1.0 / 6.0)
_THIRD = np.float32(1.0 / 3.0)
_EIGHTH = np.float32(0.125)


@numba.njit(inline="always")
def _zoh_pair(a, b, dt):
    """One ZOH step: a_bar = exp(dt*a), b_bar = phi(dt*a) * (dt*b)."""
    z = dt * a
    a_bar = np.exp(z)
    if abs(z) < SERIES_THRESHOLD:
        phi = _ONE + z * (_HALF + z * _SIXTH)
    else:
        phi = (a_bar - _ONE) / z
    return a_bar, phi * (dt * b)


@numba.njit(cache=True, nogil=True)
def zoh_elementwise(a, b, dt, a_bar, b_bar):
    for i in range(a.shape[0]):
        ab, bb = _zoh_pair(a[i], b[i], dt[i])
        a_bar[i] = ab
        b_bar[i] = bb


@numba.njit(cache=True, nogil=True)
def scan_lti(a_bar, b_bar, c, d_skip, x):
    """Recurrent scan with constant parameters.

    a_bar, b_bar, c: (d, N); d_skip: (d,); x: (B, L, d) -> y: (B, L, d).
    """
    n_batch, length, d = x.shape
    n = a_bar.shape[1]
    y = np.empty_like(x)
    h = np.zeros((d, n), dtype=x.dtype)
    for bi in range(n_batch):
        h[:, :] = 0.0
        for t in range(length):
            for i in range(d):
                xv = x[bi, t, i]
                acc = x.dtype.type(0.0)
                for k in range(n):
                    hv = a_bar[i, k] * h[i, k] + b_bar[i, k] * xv
                    h[i, k] = hv
                    acc += c[i, k] * hv
                y[bi, t, i] = acc + d_skip[i] * xv
    return y


@numba.njit(cache=True, nogil=True)
def scan_selective(delta, a, b_s, c_s, d_skip, x):
    """Fused selective scan: per-step ZOH discretisation + recurrence.

    delta: (B, L, d); a: (d, N); b_s, c_s: (B, L, N); d_skip: (d,);
    x: (B, L, d) -> y: (B, L, d).
    """
    n_batch, length, d = x.shape
    n = a.shape[1]
    y = np.empty_like(x)
    h = np.zeros((d, n), dtype=x.dtype)
    for bi in range(n_batch):
        h[:, :] = 0.0
        for t in range(length):
            for i in range(d):
                dt = delta[bi, t, i]
                xv = x[bi, t, i]
                acc = x.dtype.type(0.0)
                for k in range(n):
                    a_bar, b_bar = _zoh_pair(a[i, k], b_s[bi, t, k], dt)
                    hv = a_bar * h[i, k] + b_bar * xv
                    h[i, k] = hv
                    acc += c_s[bi, t, k] * hv
                y[bi, t, i] = acc + d_skip[i] * xv
    return y
