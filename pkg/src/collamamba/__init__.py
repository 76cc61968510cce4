"""CollaMamba: a collaborative-perception state-space stack.

Forward-pass library for sequence-form BEV perception built on selective
state-space scans: multi-direction 2D blocks, cross-agent fusion,
history-aware boosting, miss-tolerant collaborative prediction, plus a
deterministic multi-agent communication simulator and benchmark harness.
"""

from . import errors, runtime
from .runtime import get_dtype, get_precision, set_precision, set_threads, use_precision

__version__ = "0.1.0"

__all__ = [
    "errors",
    "runtime",
    "get_dtype",
    "get_precision",
    "set_precision",
    "set_threads",
    "use_precision",
    "__version__",
]
