"""Windowing and normalization of frame-size series into training tensors."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .bitstream import FrameSizeSeries, FrameType
from .errors import ShapeMismatch

ZNORM_SIGMA_FLOOR = 1e-12

# Optional second channel: frame type encoded as a signed indicator.
FRAME_TYPE_CHANNEL = {
    FrameType.I: 1.0,
    FrameType.P: 0.0,
    FrameType.B: -1.0,
    FrameType.UNKNOWN: 0.0,
}

TENSOR_MAGIC = b"BCDT"
TENSOR_VERSION = 1


@dataclass
class Window:
    """A fixed-length slice of one series; values has shape (T, C).

    Channel 0 holds sizes; channel 1, when present, the frame-type code.
    """

    values: np.ndarray
    label: int | None
    origin: tuple[str, int]
    padded: bool = False
    degenerate: bool = False
    constant: bool = False

    def __post_init__(self):
        if self.values.ndim == 1:
            self.values = self.values[:, None]

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[1]


@dataclass
class DatasetTensor:
    """N windows of T frames and C channels with one-hot labels over K classes."""

    windows: np.ndarray          # (N, T, C) float32
    labels: np.ndarray           # (N, K) float32 one-hot
    class_names: list[str]
    origins: list[tuple[str, int]] = field(default_factory=list)

    @property
    def num_windows(self) -> int:
        return self.windows.shape[0]

    @property
    def window_len(self) -> int:
        return self.windows.shape[1]

    @property
    def channels(self) -> int:
        return self.windows.shape[2]

    @property
    def num_classes(self) -> int:
        return self.labels.shape[1]

    def label_indices(self) -> np.ndarray:
        return np.argmax(self.labels, axis=1)


def window_series(
    series: FrameSizeSeries,
    window_len: int,
    stride: int | None = None,
    label: int | None = None,
    type_channel: bool = False,
) -> list[Window]:
    """Cut a series into fixed-length windows.

    With stride s and series length L >= T this yields floor((L-T)/s) + 1
    windows; shorter series produce a single window right-padded with the
    mean of the available values (so the pad becomes zero after
    z-normalization).  Default stride is T (non-overlapping).
    """
    if window_len < 1:
        raise ValueError("window_len must be >= 1")
    stride = window_len if stride is None else stride
    if stride < 1:
        raise ValueError("stride must be >= 1")

    sizes = np.asarray(series.values, dtype=np.float32)
    channels = [sizes]
    if type_channel:
        channels.append(
            np.asarray([FRAME_TYPE_CHANNEL[t] for t in series.frame_types], dtype=np.float32)
        )
    data = np.stack(channels, axis=1)

    length = data.shape[0]
    windows: list[Window] = []
    if length >= window_len:
        for start in range(0, length - window_len + 1, stride):
            windows.append(
                Window(
                    values=data[start:start + window_len].copy(),
                    label=label,
                    origin=(series.source_id, start),
                )
            )
        return windows

    # Short series: one padded window.
    padded = np.zeros((window_len, data.shape[1]), dtype=np.float32)
    if length:
        padded[:length] = data
        padded[length:] = data.mean(axis=0)
    windows.append(
        Window(
            values=padded,
            label=label,
            origin=(series.source_id, 0),
            padded=True,
            degenerate=length == 0,
        )
    )
    return windows


def znormalize_values(values: np.ndarray) -> tuple[np.ndarray, bool]:
    """(x - mean) / population stdev; constant input maps to zeros + flag."""
    values = np.asarray(values, dtype=np.float32)
    mean = values.mean(dtype=np.float64)
    sigma = values.std(dtype=np.float64)
    if sigma < ZNORM_SIGMA_FLOOR:
        return np.zeros_like(values), True
    return ((values - mean) / sigma).astype(np.float32), False


def znormalize(window):
    """Z-normalize a Window (size channel only) or a bare array (whole)."""
    if isinstance(window, Window):
        normed, constant = znormalize_values(window.values[:, 0])
        values = window.values.copy()
        values[:, 0] = normed
        return Window(
            values=values,
            label=window.label,
            origin=window.origin,
            padded=window.padded,
            degenerate=window.degenerate,
            constant=constant,
        )
    normed, _ = znormalize_values(np.asarray(window))
    return normed


def one_hot(labels: Sequence[int], num_classes: int) -> np.ndarray:
    out = np.zeros((len(labels), num_classes), dtype=np.float32)
    for i, lab in enumerate(labels):
        if not 0 <= lab < num_classes:
            raise ShapeMismatch(f"label {lab} outside 0..{num_classes - 1}")
        out[i, lab] = 1.0
    return out


def assemble(
    windows: Sequence[Window],
    labels: Sequence[int] | None,
    class_names: Sequence[str],
) -> DatasetTensor:
    """Stack windows into an (N, T, C) tensor with one-hot labels.

    When labels is None, each window's own label attribute is used.
    """
    if not windows:
        raise ShapeMismatch("no windows to assemble")
    if labels is None:
        labels = [w.label for w in windows]
        if any(lab is None for lab in labels):
            raise ShapeMismatch("unlabeled window and no explicit labels given")
    if len(labels) != len(windows):
        raise ShapeMismatch(f"{len(windows)} windows but {len(labels)} labels")

    t0, c0 = windows[0].values.shape
    for i, w in enumerate(windows):
        if w.values.shape != (t0, c0):
            raise ShapeMismatch(
                f"window {i} has shape {w.values.shape}, expected {(t0, c0)}"
            )

    stacked = np.stack([w.values for w in windows]).astype(np.float32)
    return DatasetTensor(
        windows=stacked,
        labels=one_hot(list(labels), len(class_names)),
        class_names=list(class_names),
        origins=[w.origin for w in windows],
    )


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".classes.json")


def write_tensor(tensor: DatasetTensor, path: str | Path) -> None:
    """Write the flat binary tensor file plus its class-name sidecar JSON."""
    path = Path(path)
    n, t, c = tensor.windows.shape
    k = tensor.labels.shape[1]
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(struct.pack("<I", TENSOR_VERSION))
        fh.write(struct.pack("<4Q", n, t, c, k))
        fh.write(np.ascontiguousarray(tensor.windows, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(tensor.labels, dtype="<f4").tobytes())
    sidecar = {"class_names": tensor.class_names}
    if tensor.origins:
        sidecar["origins"] = [[sid, int(start)] for sid, start in tensor.origins]
    _sidecar_path(path).write_text(json.dumps(sidecar, sort_keys=True), encoding="utf-8")


def read_tensor(path: str | Path) -> DatasetTensor:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != TENSOR_MAGIC:
        raise ShapeMismatch(f"{path}: not a tensor file (bad magic)")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != TENSOR_VERSION:
        raise ShapeMismatch(f"{path}: unsupported tensor version {version}")
    n, t, c, k = struct.unpack_from("<4Q", raw, 8)
    offset = 4 + 4 + 32
    need = offset + 4 * (n * t * c + n * k)
    if len(raw) != need:
        raise ShapeMismatch(f"{path}: expected {need} bytes, found {len(raw)}")
    windows = np.frombuffer(raw, dtype="<f4", count=n * t * c, offset=offset)
    labels = np.frombuffer(raw, dtype="<f4", count=n * k, offset=offset + 4 * n * t * c)

    sidecar = _sidecar_path(path)
    class_names = [f"class{i}" for i in range(k)]
    origins: list[tuple[str, int]] = []
    if sidecar.exists():
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        class_names = meta.get("class_names", class_names)
        origins = [(sid, start) for sid, start in meta.get("origins", [])]
    return DatasetTensor(
        windows=windows.reshape(n, t, c).copy(),
        labels=labels.reshape(n, k).copy(),
        class_names=class_names,
        origins=origins,
    )
