"""Score-file ingestion, synthetic data and cross-party partitioning."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from fedauc.errors import EmptyInput, InvalidConfig, ParseError
from fedauc.metrics import LocalDataset, clamp_scores

log = logging.getLogger(__name__)

SYNTH_STD = 0.15
PARTITION_MODES = ("uniform_random", "contiguous", "label_skew")


@dataclass(frozen=True)
class ScoreData:
    """Parsed scores and labels; unpacks as ``scores, labels``."""

    scores: np.ndarray
    labels: np.ndarray
    clamped: int = 0

    def __iter__(self):
        return iter((self.scores, self.labels))

    def __len__(self):
        return int(self.scores.size)


def _parse_row(row: list[str], lineno: int) -> tuple[float, int]:
    if len(row) != 2:
        raise ParseError(f"expected 2 fields, got {len(row)}", lineno)
    try:
        score = float(row[0])
    except ValueError:
        raise ParseError(f"non-numeric score {row[0].strip()!r}", lineno) from None
    if not math.isfinite(score):
        raise ParseError(f"non-finite score {row[0].strip()!r}", lineno)
    label = row[1].strip()
    if label not in ("0", "1"):
        raise ParseError(f"label must be 0 or 1, got {label!r}", lineno)
    return score, int(label)


def ingest(path) -> ScoreData:
    """Read a ``score,label`` CSV; an optional header row is skipped."""
    scores, labels = [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and row[0].strip().lower() == "score":
                continue
            s, y = _parse_row(row, lineno)
            scores.append(s)
            labels.append(y)
    if not scores:
        raise EmptyInput(f"{path}: no samples")
    clamped, n = clamp_scores(np.array(scores, dtype=np.float64))
    if n:
        log.warning("%s: clamped %d score(s) into [0, 1]", path, n)
    return ScoreData(clamped, np.array(labels, dtype=np.int8), n)


def write_scores(path, scores, labels) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["score", "label"])
        for s, y in zip(np.asarray(scores).tolist(), np.asarray(labels).tolist()):
            w.writerow([repr(float(s)), int(y)])
    return path


def synth(count: int, pos_fraction: float = 0.5, separation: float = 0.6, seed=None) -> ScoreData:
    """Two clamped Gaussians centred at ``0.5 +/- separation/2``."""
    if count < 2:
        raise InvalidConfig("count must be >= 2")
    if not 0 < pos_fraction < 1:
        raise InvalidConfig("pos_fraction must be in (0, 1)")
    if not 0 <= separation <= 1:
        raise InvalidConfig("separation must be in [0, 1]")
    rng = np.random.default_rng(seed)
    labels = (rng.random(count) < pos_fraction).astype(np.int8)
    centre = np.where(labels == 1, 0.5 + separation / 2, 0.5 - separation / 2)
    scores = np.clip(rng.normal(centre, SYNTH_STD), 0.0, 1.0)
    return ScoreData(scores, labels)


@dataclass(frozen=True)
class PartitionSpec:
    mode: str = "uniform_random"
    seed: int | None = None
    alpha: float = 1.0

    def __post_init__(self):
        if self.mode not in PARTITION_MODES:
            raise InvalidConfig(f"unknown partition mode {self.mode!r}")
        if self.mode == "label_skew" and not self.alpha > 0:
            raise InvalidConfig("label_skew needs alpha > 0")

    @classmethod
    def parse(cls, text: str, seed: int | None = None) -> "PartitionSpec":
        """Accept ``uniform_random``, ``contiguous`` or ``label_skew(0.1)``."""
        text = text.strip()
        if text.startswith("label_skew"):
            arg = text[len("label_skew"):].strip("() ")
            return cls("label_skew", seed, float(arg) if arg else 1.0)
        return cls(text, seed)


def partition(samples, M: int, spec: PartitionSpec | None = None) -> list[LocalDataset]:
    """Split ``(scores, labels)`` into ``M`` disjoint parties."""
    if M < 2:
        raise InvalidConfig("need at least 2 parties")
    spec = spec or PartitionSpec()
    scores, labels = samples
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n = scores.size
    rng = np.random.default_rng(spec.seed)
    if spec.mode == "uniform_random":
        owner = rng.integers(0, M, n)
    elif spec.mode == "contiguous":
        owner = np.repeat(np.arange(M), [len(c) for c in np.array_split(np.arange(n), M)])
    else:
        owner = np.empty(n, dtype=np.int64)
        for cls in (0, 1):
            idx = np.flatnonzero(labels == cls)
            share = rng.dirichlet(np.full(M, spec.alpha))
            if not np.all(np.isfinite(share)) or share.sum() <= 0:
                # tiny alpha can underflow every component
                share = np.eye(M)[rng.integers(M)]
            share = share / share.sum()
            owner[idx] = rng.choice(M, size=idx.size, p=share)
    return [LocalDataset(scores[owner == m], labels[owner == m], m) for m in range(M)]
