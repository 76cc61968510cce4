"""One selective-scan branch: the per-direction learnable set.

Each scan direction owns its input-conditioned projections (timescale via a
low-rank map, input/output state projections), a log-parameterised negative
evolution diagonal, and a skip vector.  The evolution diagonal starts at
a_k = -(k+1) per channel, so every branch is stable out of the box.
"""

from __future__ import annotations

import numpy as np

from ..runtime import get_dtype
from ..ssm import SelectiveInputs, SsmParams, selective_scan
from .common import Linear, Module, softplus


class SelectiveBranch(Module):
    def __init__(self, d_inner: int, n_state: int, dt_rank: int, rng,
                 dt_min: float = 1e-3, dt_max: float = 0.1):
        super().__init__()
        self.d_inner = d_inner
        self.n_state = n_state
        self.dt_rank = dt_rank
        self.x_proj = self.child("x_proj", Linear(d_inner, dt_rank + 2 * n_state, rng, bias=False))
        self.dt_proj = self.child("dt_proj", Linear(dt_rank, d_inner, rng))
        # bias such that softplus(bias) lands log-uniformly in [dt_min, dt_max]
        dt = np.exp(rng.uniform(np.log(dt_min), np.log(dt_max), size=d_inner))
        self.dt_proj.b[:] = (dt + np.log(-np.expm1(-dt))).astype(get_dtype())
        self.a_log = self.param("a_log", np.tile(np.log(np.arange(1.0, n_state + 1.0)),
                                                 (d_inner, 1)))
        self.d_skip = self.param("d_skip", np.ones(d_inner))

    def __call__(self, seq: np.ndarray) -> np.ndarray:
        """seq: (B, L, d_inner) in visit order -> scanned output, same shape."""
        proj = self.x_proj(seq)
        r, n = self.dt_rank, self.n_state
        delta = softplus(self.dt_proj(proj[..., :r]))
        b_s = proj[..., r:r + n]
        c_s = proj[..., r + n:]
        params = SsmParams(a=-np.exp(self.a_log), b=np.zeros(n, dtype=seq.dtype),
                           c=np.zeros(n, dtype=seq.dtype), d_skip=self.d_skip)
        streams = SelectiveInputs(delta=delta, b=np.ascontiguousarray(b_s),
                                  c=np.ascontiguousarray(c_s))
        return selective_scan(params, streams, np.ascontiguousarray(seq))
