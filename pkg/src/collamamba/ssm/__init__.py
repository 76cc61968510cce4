from .params import DiscreteSsmParams, SelectiveInputs, SsmParams
from .kernels import (
    BACKEND,
    FLOPS_PER_MAC,
    SCAN_MACS_PER_STATE,
    SERIES_THRESHOLD,
    conv_kernel,
    discretize_zoh,
    scan_conv,
    scan_flops,
    scan_recurrent,
    selective_scan,
    selective_scan_backward,
)

__all__ = [
    "BACKEND",
    "DiscreteSsmParams",
    "FLOPS_PER_MAC",
    "SCAN_MACS_PER_STATE",
    "SERIES_THRESHOLD",
    "SelectiveInputs",
    "SsmParams",
    "conv_kernel",
    "discretize_zoh",
    "scan_conv",
    "scan_flops",
    "scan_recurrent",
    "selective_scan",
    "selective_scan_backward",
]
