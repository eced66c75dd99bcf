"""Dynamic time warping distance and 1-NN classification.

The DP is deliberately a plain scalar loop: this is the traditional
baseline whose quadratic cost the benchmark harness measures, not a path
to optimize.  Memory stays at two rows regardless of series length.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from math import inf
from typing import Sequence

from .errors import BandTooNarrow, EmptySeries, EmptyTrainSet


class Cost(enum.Enum):
    ABS = "abs"
    SQUARED = "squared"


@dataclass(frozen=True)
class DtwConfig:
    window_radius: int | None = None   # Sakoe-Chiba band; None = unconstrained
    cost: Cost = Cost.ABS

    def __post_init__(self):
        if self.window_radius is not None and self.window_radius < 1:
            raise ValueError("window_radius must be >= 1 when set")


def dtw_distance(a: Sequence[float], b: Sequence[float], cfg: DtwConfig = DtwConfig()) -> float:
    """Classic DTW: D(i,j) = cost(a_i, b_j) + min of the three predecessors."""
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        raise EmptySeries("both series must be non-empty")
    radius = cfg.window_radius
    if radius is not None and abs(n - m) > radius:
        raise BandTooNarrow(
            f"band radius {radius} cannot reach cell ({n},{m}); "
            f"lengths differ by {abs(n - m)}"
        )
    # Keep the rolling rows over the shorter series.
    if m > n:
        a, b = b, a
        n, m = m, n
    a = [float(v) for v in a]
    b = [float(v) for v in b]
    squared = cfg.cost is Cost.SQUARED

    prev = [inf] * (m + 1)
    prev[0] = 0.0
    for i in range(1, n + 1):
        cur = [inf] * (m + 1)
        ai = a[i - 1]
        if radius is None:
            lo, hi = 1, m
        else:
            lo, hi = max(1, i - radius), min(m, i + radius)
        for j in range(lo, hi + 1):
            d = ai - b[j - 1]
            c = d * d if squared else (d if d >= 0.0 else -d)
            best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            if prev[j - 1] < best:
                best = prev[j - 1]
            cur[j] = c + best
        prev = cur
    return prev[m]


def knn_classify(
    train_vectors: Sequence[Sequence[float]],
    train_labels: Sequence[int],
    query: Sequence[float],
    k: int = 1,
    cfg: DtwConfig = DtwConfig(),
) -> int:
    """Majority vote over the k nearest training series by DTW distance.

    Ties break by smallest summed distance among tied classes, then by
    lowest class index, so results are order-independent.
    """
    if not train_vectors:
        raise EmptyTrainSet("no training vectors")
    if len(train_vectors) != len(train_labels):
        raise ValueError("train vectors and labels differ in length")
    if k < 1 or k > len(train_vectors):
        raise EmptyTrainSet(f"k={k} out of range for {len(train_vectors)} examples")

    distances = [dtw_distance(vec, query, cfg) for vec in train_vectors]
    nearest = sorted(range(len(distances)), key=lambda i: (distances[i], i))[:k]

    votes: dict[int, tuple[int, float]] = {}
    for idx in nearest:
        label = train_labels[idx]
        count, total = votes.get(label, (0, 0.0))
        votes[label] = (count + 1, total + distances[idx])
    ranked = sorted(votes.items(), key=lambda kv: (-kv[1][0], kv[1][1], kv[0]))
    return ranked[0][0]
