"""Plaintext ROC-AUC mathematics.

Everything the encrypted protocols compute has a plaintext counterpart here:
the exact Mann-Whitney AUC, the uniform decision grid, per-party threshold
counts, the adjacent-pair transform and the trapezoidal AUC over the grid.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from fedauc import _core
from fedauc.errors import DegenerateLabels, InvalidGrid, NonMonotone

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Sample:
    score: float
    label: int

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise ValueError(f"non-finite score {self.score!r}")
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


def clamp_scores(scores) -> tuple[np.ndarray, int]:
    """Clamp scores into [0, 1]; returns the clamped array and how many moved."""
    s = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    out = np.clip(s, 0.0, 1.0)
    return out, int(np.count_nonzero(out != s))


@dataclass(frozen=True)
class LocalDataset:
    """One party's prediction scores and binary labels.

    Stored column-wise; ``samples`` gives the row view.  Scores outside
    [0, 1] are clamped at construction with a warning.
    """

    scores: np.ndarray
    labels: np.ndarray
    party_id: int = 0

    def __post_init__(self):
        scores, n_clamped = clamp_scores(self.scores)
        labels = np.asarray(self.labels)
        if labels.shape != scores.shape or scores.ndim != 1:
            raise ValueError("scores and labels must be 1-d and the same length")
        if labels.size and not np.all((labels == 0) | (labels == 1)):
            raise ValueError("labels must be 0 or 1")
        if n_clamped:
            logger.warning("party %d: clamped %d scores into [0, 1]", self.party_id, n_clamped)
        scores.setflags(write=False)
        labels = labels.astype(np.int8)
        labels.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_samples(cls, samples, party_id: int = 0) -> "LocalDataset":
        samples = list(samples)
        return cls(
            np.array([s.score for s in samples], dtype=np.float64),
            np.array([s.label for s in samples], dtype=np.int8),
            party_id,
        )

    @property
    def samples(self) -> list[Sample]:
        return [Sample(float(s), int(y)) for s, y in zip(self.scores, self.labels)]

    def __len__(self) -> int:
        return int(self.scores.size)

    @property
    def n_positive(self) -> int:
        return int(np.count_nonzero(self.labels == 1))

    @property
    def n_negative(self) -> int:
        return len(self) - self.n_positive


@dataclass(frozen=True)
class DecisionGrid:
    """Strictly descending thresholds from 1.0 down to 0.0."""

    thresholds: np.ndarray

    def __post_init__(self):
        th = np.array(self.thresholds, dtype=np.float64)
        if th.ndim != 1 or th.size < 2:
            raise InvalidGrid("a decision grid needs at least 2 points")
        if th[0] != 1.0 or th[-1] != 0.0:
            raise InvalidGrid("grid must start at 1.0 and end at 0.0")
        if not np.all(np.diff(th) < 0):
            raise InvalidGrid("grid thresholds must be strictly descending")
        th.setflags(write=False)
        object.__setattr__(self, "thresholds", th)

    @property
    def n_points(self) -> int:
        return int(self.thresholds.size)


def make_grid(n_points: int) -> DecisionGrid:
    if int(n_points) != n_points or n_points < 2:
        raise InvalidGrid(f"n_points must be an integer >= 2, got {n_points!r}")
    n = int(n_points)
    k = np.arange(n, dtype=np.float64)
    return DecisionGrid((n - 1 - k) / (n - 1))


@dataclass(frozen=True)
class CountVector:
    """Cumulative TP/FP counts per decision point; the last entry holds totals."""

    tp: np.ndarray
    fp: np.ndarray

    def __post_init__(self):
        tp = np.array(self.tp, dtype=np.int64)
        fp = np.array(self.fp, dtype=np.int64)
        if tp.ndim != 1 or tp.shape != fp.shape or tp.size < 2:
            raise ValueError("tp and fp must be 1-d, equal length, length >= 2")
        if np.any(tp < 0) or np.any(fp < 0):
            raise ValueError("counts must be non-negative")
        tp.setflags(write=False)
        fp.setflags(write=False)
        object.__setattr__(self, "tp", tp)
        object.__setattr__(self, "fp", fp)

    @property
    def n_points(self) -> int:
        return int(self.tp.size)

    @property
    def total_positive(self) -> int:
        return int(self.tp[-1])

    @property
    def total_negative(self) -> int:
        return int(self.fp[-1])

    @property
    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.tp) >= 0) and np.all(np.diff(self.fp) >= 0))

    def __add__(self, other: "CountVector") -> "CountVector":
        if self.n_points != other.n_points:
            raise ValueError("cannot add CountVectors over different grids")
        return CountVector(self.tp + other.tp, self.fp + other.fp)

    @classmethod
    def zeros(cls, n_points: int) -> "CountVector":
        return cls(np.zeros(n_points, np.int64), np.zeros(n_points, np.int64))


@dataclass(frozen=True)
class PairVectors:
    """Adjacent-pair sums of TP and differences of FP (length N-1)."""

    t: np.ndarray
    f: np.ndarray


def sum_counts(counts) -> CountVector:
    counts = list(counts)
    if not counts:
        raise ValueError("no counts to sum")
    total = counts[0]
    for c in counts[1:]:
        total = total + c
    return total


def exact_auc(scores, labels) -> float:
    """Exact ROC-AUC as the Mann-Whitney statistic, ties counted as 1/2."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    pos = np.sort(s[y == 1])
    neg = np.sort(s[y != 1])
    if pos.size == 0 or neg.size == 0:
        raise DegenerateLabels("exact AUC needs at least one positive and one negative")
    below = np.searchsorted(neg, pos, side="left")
    below_or_tied = np.searchsorted(neg, pos, side="right")
    # twice the U statistic, kept integral so the final division rounds once
    twice_u = int(below.sum(dtype=np.int64)) + int(below_or_tied.sum(dtype=np.int64))
    return twice_u / (2 * pos.size * neg.size)


def local_counts(dataset: LocalDataset, grid: DecisionGrid) -> CountVector:
    """TP/FP counts with strict ``score > threshold`` for every grid point
    except the last, which holds the party's class totals."""
    n = grid.n_points
    asc = np.ascontiguousarray(grid.thresholds[: n - 1][::-1])
    pos, neg = _core.label_histograms(dataset.scores, dataset.labels, asc)
    # bucket b holds samples above exactly thresholds[b..n-2]
    return CountVector(np.cumsum(pos), np.cumsum(neg))


def pair_transform(counts: CountVector) -> PairVectors:
    tp = counts.tp
    fp = counts.fp
    t = tp[1:] + tp[:-1]
    f = fp[1:] - fp[:-1]
    if np.any(f < 0):
        raise NonMonotone("FP counts decrease along the grid")
    return PairVectors(t, f)


def trapezoid_terms(counts: CountVector) -> tuple[int, int]:
    """Return the integer ``(num, denom)`` with AUC = num / denom."""
    pv = pair_transform(counts)
    num = sum(int(a) * int(b) for a, b in zip(pv.t, pv.f))
    denom = 2 * counts.total_positive * counts.total_negative
    return num, denom


def trapezoid_auc(global_counts: CountVector) -> float:
    if global_counts.total_positive <= 0 or global_counts.total_negative <= 0:
        raise DegenerateLabels("global positive and negative totals must be > 0")
    num, denom = trapezoid_terms(global_counts)
    return num / denom


def trapezoid_fraction(global_counts: CountVector) -> Fraction:
    num, denom = trapezoid_terms(global_counts)
    if denom == 0:
        raise DegenerateLabels("global positive and negative totals must be > 0")
    return Fraction(num, denom)


def roc_points(counts: CountVector) -> list[tuple[float, float]]:
    """(FPR, TPR) per decision point, from the origin to (1, 1)."""
    p = counts.total_positive
    q = counts.total_negative
    if p <= 0 or q <= 0:
        raise DegenerateLabels("ROC needs both classes")
    return [(int(f) / q, int(t) / p) for t, f in zip(counts.tp, counts.fp)]
