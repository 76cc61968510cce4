"""Parameter records for diagonal state-space models.

Shapes follow the per-channel diagonal convention used throughout the
package: for ``d`` channels and state size ``N``,

* ``a``        -- (d, N) diagonal of the continuous evolution matrix,
* ``b``        -- (d, N) input projection (or (N,) shared across channels),
* ``c``        -- (d, N) output projection (or (N,) shared),
* ``d_skip``   -- (d,)  scalar residual per channel.

Records are frozen; arrays are marked read-only at construction so one
record can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from ..errors import InvalidArgumentError
from ..runtime import get_dtype


def _freeze(arr, dtype) -> np.ndarray:
    out = np.asarray(arr, dtype=dtype)
    if out is arr and out.flags.writeable:
        # never alias caller-visible mutable storage
        out = out.copy()
    elif not out.flags.owndata and out.flags.writeable:
        out = out.copy()
    out.setflags(write=False)
    return out


def _check_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite entries")


@dataclass(frozen=True)
class SsmParams:
    """Continuous-time diagonal SSM parameters for one channel group."""

    a: np.ndarray       # (d, N)
    b: np.ndarray       # (d, N) or (N,)
    c: np.ndarray       # (d, N) or (N,)
    d_skip: np.ndarray  # (d,)

    def __post_init__(self):
        dtype = get_dtype()
        for f in fields(self):
            object.__setattr__(self, f.name, _freeze(getattr(self, f.name), dtype))
            _check_finite(f.name, getattr(self, f.name))
        if self.a.ndim != 2:
            raise InvalidArgumentError(f"a must be (channels, state); got shape {self.a.shape}")
        if self.d_skip.shape != (self.a.shape[0],):
            raise InvalidArgumentError("d_skip must have one entry per channel")
        for name in ("b", "c"):
            arr = getattr(self, name)
            if arr.shape not in ((self.a.shape[1],), self.a.shape):
                raise InvalidArgumentError(
                    f"{name} must be (N,) or (d, N)={self.a.shape}; got {arr.shape}")

    @property
    def n_channels(self) -> int:
        return self.a.shape[0]

    @property
    def n_state(self) -> int:
        return self.a.shape[1]

    @staticmethod
    def stable_init(n_channels: int, n_state: int, rng: np.random.Generator | None = None):
        """Stable real initialisation: diagonal entries a_in = -(n+1).

        Every evolution entry is strictly negative, so any positive timescale
        yields |exp(delta*a)| < 1 and bounded scans on bounded input.
        """
        rng = rng or np.random.default_rng(0)
        a = -np.tile(np.arange(1.0, n_state + 1.0), (n_channels, 1))
        b = rng.standard_normal((n_channels, n_state)) / np.sqrt(n_state)
        c = rng.standard_normal((n_channels, n_state)) / np.sqrt(n_state)
        d_skip = np.ones(n_channels)
        return SsmParams(a, b, c, d_skip)


@dataclass(frozen=True)
class DiscreteSsmParams:
    """Zero-order-hold discretised parameters (time-invariant).

    ``a_bar``/``b_bar`` are per-channel (d, N); ``delta`` records the step
    used for discretisation (scalar or per channel).  Per-step parameter
    streams never live here -- they are the realm of ``SelectiveInputs``.
    """

    a_bar: np.ndarray   # (d, N)
    b_bar: np.ndarray   # (d, N)
    c: np.ndarray       # (d, N) or (N,)
    d_skip: np.ndarray  # (d,)
    delta: np.ndarray   # () or (d,)

    def __post_init__(self):
        dtype = get_dtype()
        for f in fields(self):
            object.__setattr__(self, f.name, _freeze(getattr(self, f.name), dtype))
            _check_finite(f.name, getattr(self, f.name))
        if self.a_bar.ndim != 2:
            raise InvalidArgumentError(
                f"a_bar must be (channels, state); got shape {self.a_bar.shape} "
                "(per-step parameter streams belong in SelectiveInputs)")
        if self.b_bar.shape != self.a_bar.shape:
            raise InvalidArgumentError("b_bar must match a_bar shape")
        if self.d_skip.shape != (self.a_bar.shape[0],):
            raise InvalidArgumentError("d_skip must have one entry per channel")
        if self.c.shape not in ((self.a_bar.shape[1],), self.a_bar.shape):
            raise InvalidArgumentError(
                f"c must be (N,) or (d, N)={self.a_bar.shape}; got {self.c.shape}")
        if self.delta.ndim > 1 or (self.delta.ndim == 1 and
                                   self.delta.shape != (self.a_bar.shape[0],)):
            raise InvalidArgumentError("delta must be scalar or per channel")

    @property
    def n_channels(self) -> int:
        return self.a_bar.shape[0]

    @property
    def n_state(self) -> int:
        return self.a_bar.shape[1]


@dataclass(frozen=True)
class SelectiveInputs:
    """Per-timestep parameter streams for the input-dependent scan.

    ``delta`` is per channel, (L, d); ``b`` and ``c`` are shared across
    channels, (L, N).  A leading batch axis is accepted on all three when
    the scanned input carries one.
    """

    delta: np.ndarray  # (L, d) or (B, L, d)
    b: np.ndarray      # (L, N) or (B, L, N)
    c: np.ndarray      # (L, N) or (B, L, N)

    def __post_init__(self):
        dtype = get_dtype()
        for f in fields(self):
            object.__setattr__(self, f.name, _freeze(getattr(self, f.name), dtype))
            _check_finite(f.name, getattr(self, f.name))
        if not (self.delta.ndim == self.b.ndim == self.c.ndim):
            raise InvalidArgumentError("delta, b, c must share rank")
        if self.delta.ndim not in (2, 3):
            raise InvalidArgumentError("streams must be (L, *) or (B, L, *)")
        if self.b.shape != self.c.shape:
            raise InvalidArgumentError("b and c streams must share shape")
        if self.delta.shape[:-1] != self.b.shape[:-1]:
            raise InvalidArgumentError(
                f"streams must share length: delta {self.delta.shape}, b {self.b.shape}")

    @property
    def length(self) -> int:
        return self.delta.shape[-2]
