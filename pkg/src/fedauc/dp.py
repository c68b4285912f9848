"""Laplace-noise baseline for federated AUC.

Each client perturbs its per-threshold TP, FP, TN and FN counts with
independent Laplace noise (sensitivity 1).  A total budget ``epsilon`` is
split evenly over the ``4N`` released statistics.  Noisy counts are summed
and plugged into the trapezoid rule with no clamping, so small datasets can
produce AUC values far outside ``[0, 1]``.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass

import numpy as np

from fedauc.errors import DegenerateLabels, InvalidConfig
from fedauc.metrics import CountVector, DecisionGrid, local_counts, make_grid

SENSITIVITY = 1.0


@dataclass(frozen=True)
class DpConfig:
    epsilon: float
    n_points: int

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidConfig("epsilon must be > 0")
        if self.n_points < 2:
            raise InvalidConfig("n_points must be >= 2")

    @property
    def per_stat_epsilon(self) -> float:
        return self.epsilon / (4 * self.n_points)

    @property
    def laplace_scale(self) -> float:
        return SENSITIVITY / self.per_stat_epsilon


@dataclass(frozen=True)
class NoisyStats:
    tp: np.ndarray
    fp: np.ndarray
    tn: np.ndarray
    fn: np.ndarray

    def __add__(self, other: "NoisyStats") -> "NoisyStats":
        return NoisyStats(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)


def dp_client_stats(counts: CountVector, total_pos: int, total_neg: int, cfg: DpConfig,
                    rng: np.random.Generator) -> NoisyStats:
    if counts.n_points != cfg.n_points:
        raise InvalidConfig(f"counts have {counts.n_points} points, config expects {cfg.n_points}")
    tp = counts.tp.astype(np.float64)
    fp = counts.fp.astype(np.float64)
    tn = total_neg - fp
    fn = total_pos - tp
    b = cfg.laplace_scale
    noise = rng.laplace(0.0, b, size=(4, cfg.n_points))
    return NoisyStats(tp + noise[0], fp + noise[1], tn + noise[2], fn + noise[3])


def dp_aggregate_auc(noisy) -> float:
    parts = list(noisy)
    if not parts:
        raise InvalidConfig("need at least one party")
    tot = parts[0]
    for p in parts[1:]:
        tot = tot + p
    pos = tot.tp + tot.fn
    neg = tot.fp + tot.tn
    if np.any(pos == 0) or np.any(neg == 0):
        raise DegenerateLabels("noisy class total is exactly zero")
    tpr = tot.tp / pos
    fpr = tot.fp / neg
    return float(np.sum((tpr[1:] + tpr[:-1]) * np.diff(fpr)) / 2.0)


def _party_counts(datasets, grid: DecisionGrid) -> list[CountVector]:
    return [d if isinstance(d, CountVector) else local_counts(d, grid) for d in datasets]


def dp_trial_values(datasets, cfg: DpConfig, trials: int = 100, seed: int = 0) -> np.ndarray:
    counts = _party_counts(datasets, make_grid(cfg.n_points))
    out = np.empty(trials)
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        out[t] = dp_aggregate_auc(
            dp_client_stats(c, c.total_positive, c.total_negative, cfg, rng) for c in counts
        )
    return out


def dp_trials(datasets, cfg: DpConfig, trials: int = 100, seed: int = 0) -> tuple[float, float]:
    """Sample mean and standard deviation of the DP AUC over fresh noise draws."""
    if trials < 2:
        raise InvalidConfig("trials must be >= 2")
    vals = dp_trial_values(datasets, cfg, trials, seed).tolist()
    # statistics is exact on repeated values where numpy leaves rounding residue
    return statistics.fmean(vals), statistics.stdev(vals)


def budget_check(cfg: DpConfig) -> bool:
    return math.isclose(cfg.per_stat_epsilon * 4 * cfg.n_points, cfg.epsilon, rel_tol=1e-15)


__all__ = [
    "DpConfig", "NoisyStats", "dp_client_stats", "dp_aggregate_auc", "dp_trials",
    "dp_trial_values", "budget_check",
]
