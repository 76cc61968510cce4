"""Pure-numpy scan cores, used when numba is unavailable.

Mirrors the compiled backend: one shared ZOH helper feeds both the
elementwise discretiser and the fused selective scan, so constant-stream
selective scans reduce to the recurrent LTI scan bit-for-bit within this
backend as well.  The recurrence loops over time with all channel/state
work vectorised per step.
"""

import numpy as np

SERIES_THRESHOLD = np.float32(1e-4)

_ONE = np.float32(1.0)
_HALF = np.float32(0.5)
_SIXTH = np.float32(1.0 / 6.0)


def _zoh_pair(a, b, dt):
    z = dt * a
    a_bar = np.exp(z)
    small = np.abs(z) < SERIES_THRESHOLD
    z_safe = np.where(small, _ONE, z)
    phi = np.where(small, _ONE + z * (_HALF + z * _SIXTH), (a_bar - _ONE) / z_safe)
    return a_bar, phi * (dt * b)


def zoh_elementwise(a, b, dt, a_bar, b_bar):
    ab, bb = _zoh_pair(a, b, dt)
    a_bar[:] = ab
    b_bar[:] = bb


def scan_lti(a_bar, b_bar, c, d_skip, x):
    n_batch, length, d = x.shape
    y = np.empty_like(x)
    h = np.zeros((n_batch, d, a_bar.shape[1]), dtype=x.dtype)
    for t in range(length):
        h = a_bar * h + b_bar * x[:, t, :, None]
        y[:, t] = (c * h).sum(axis=-1) + d_skip * x[:, t]
    return y


def scan_selective(delta, a, b_s, c_s, d_skip, x):
    n_batch, length, d = x.shape
    y = np.empty_like(x)
    h = np.zeros((n_batch, d, a.shape[1]), dtype=x.dtype)
    for t in range(length):
        a_bar, b_bar = _zoh_pair(a, b_s[:, t, None, :], delta[:, t, :, None])
        h = a_bar * h + b_bar * x[:, t, :, None]
        y[:, t] = (c_s[:, t, None, :] * h).sum(axis=-1) + d_skip * x[:, t]
    return y
