"""bitcover: video classification from compressed bitstream statistics.

Parses H.264 Annex B streams into per-frame size series without decoding,
and classifies those series with a from-scratch residual 1D CNN, with
KLD separability diagnostics and a DTW 1-NN baseline for comparison.
"""

__version__ = "0.1.0"

JSONL_FORMAT_VERSION = 1

from .bitstream import (
    AccessUnit,
    FrameSizeSeries,
    FrameType,
    NalUnit,
    extract_frame_sizes,
    group_access_units,
    scan_nal_units,
)
from .series import DatasetTensor, Window, assemble, window_series, znormalize
from .errors import BitcoverError

__all__ = [
    "AccessUnit",
    "BitcoverError",
    "DatasetTensor",
    "FrameSizeSeries",
    "FrameType",
    "NalUnit",
    "Window",
    "assemble",
    "extract_frame_sizes",
    "group_access_units",
    "scan_nal_units",
    "window_series",
    "znormalize",
    "__version__",
]
