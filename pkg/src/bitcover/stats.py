"""Histogram-based Kullback-Leibler divergence diagnostics.

Quantifies how separable classes are from frame-size distributions alone:
each clip gets a smoothed histogram on bin edges shared across the whole
comparison set, and divergences are averaged over clip pairs within and
between classes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import BinMismatch, EmptyInput, InsufficientClips

DEFAULT_BINS = 64
SMOOTHING_ALPHA = 1e-6


@dataclass(frozen=True)
class SizeHistogram:
    bin_edges: np.ndarray   # (B+1,) ascending
    probs: np.ndarray       # (B,) non-negative, sums to 1


@dataclass(frozen=True)
class KldMatrix:
    """Pairwise class divergences in nats; entry (i, j) is D(class_i || class_j).

    The diagonal holds the mean divergence between distinct clips of the same
    class, so it is positive whenever clips differ at all.
    """

    class_names: list[str]
    values: np.ndarray      # (K, K) float64

    def diagonal_mean(self) -> float:
        return float(np.mean(np.diag(self.values)))

    def diagonal_max(self) -> float:
        return float(np.max(np.diag(self.values)))

    def offdiagonal_min(self) -> float:
        k = len(self.class_names)
        mask = ~np.eye(k, dtype=bool)
        return float(np.min(self.values[mask]))

    def separability_ratio(self) -> float:
        """Smallest between-class divergence over largest within-class one."""
        diag_max = self.diagonal_max()
        if diag_max <= 0.0:
            return float("inf")
        return self.offdiagonal_min() / diag_max

    def report(self) -> dict:
        return {
            "class_names": self.class_names,
            "diag_mean": self.diagonal_mean(),
            "diag_max": self.diagonal_max(),
            "offdiag_min": self.offdiagonal_min(),
            "separability_ratio": self.separability_ratio(),
        }

    def to_csv(self) -> str:
        lines = ["," + ",".join(self.class_names)]
        for name, row in zip(self.class_names, self.values):
            lines.append(name + "," + ",".join(f"{v:.9g}" for v in row))
        return "\n".join(lines) + "\n"


def histogram(
    values: Sequence[float],
    bins: int = DEFAULT_BINS,
    value_range: tuple[float, float] | None = None,
    alpha: float = SMOOTHING_ALPHA,
) -> SizeHistogram:
    """Equal-width histogram with additive smoothing so all bins are positive."""
    if bins < 2:
        raise ValueError("bins must be >= 2")
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise EmptyInput("cannot histogram an empty value list")
    if value_range is None:
        lo, hi = float(arr.min()), float(arr.max())
    else:
        lo, hi = float(value_range[0]), float(value_range[1])
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(arr, bins=edges)
    total = counts.sum()
    probs = counts / total if total else np.zeros(bins)
    probs = probs + alpha
    probs = probs / probs.sum()
    return SizeHistogram(bin_edges=edges, probs=probs)


def kld(p: SizeHistogram, q: SizeHistogram) -> float:
    """D(p || q) in nats; finite because smoothing keeps q positive."""
    if p.bin_edges.shape != q.bin_edges.shape or not np.array_equal(
        p.bin_edges, q.bin_edges
    ):
        raise BinMismatch("histograms do not share bin edges")
    mask = p.probs > 0
    return float(np.sum(p.probs[mask] * np.log(p.probs[mask] / q.probs[mask])))


def build_kld_matrix(
    clips_by_class: Mapping[str, Sequence[Sequence[float]]],
    bins: int = DEFAULT_BINS,
) -> KldMatrix:
    """Mean pairwise clip divergence within (diagonal) and across classes.

    All clip histograms share global bin edges spanning the pooled data so
    every pair is comparable.  Each class needs at least two clips.
    """
    class_names = list(clips_by_class.keys())
    for name in class_names:
        if len(clips_by_class[name]) < 2:
            raise InsufficientClips(
                f"class {name!r} has {len(clips_by_class[name])} clip(s); need >= 2"
            )

    lo = min(min(clip) for clips in clips_by_class.values() for clip in clips)
    hi = max(max(clip) for clips in clips_by_class.values() for clip in clips)
    hists = {
        name: [histogram(clip, bins, (lo, hi)) for clip in clips_by_class[name]]
        for name in class_names
    }

    k = len(class_names)
    values = np.zeros((k, k), dtype=np.float64)
    for i, name_i in enumerate(class_names):
        for j, name_j in enumerate(class_names):
            if i == j:
                pairs = [
                    kld(a, b)
                    for ai, a in enumerate(hists[name_i])
                    for bi, b in enumerate(hists[name_i])
                    if ai != bi
                ]
            else:
                pairs = [kld(a, b) for a in hists[name_i] for b in hists[name_j]]
            values[i, j] = float(np.mean(pairs))
    return KldMatrix(class_names=class_names, values=values)
