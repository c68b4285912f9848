"""Malicious-aggregator behaviours and detection analytics.

Strategies act only on ciphertexts and the public key, as a real aggregator
would.  :func:`run_attack_experiment` substitutes a strategy for the honest
aggregator inside the double-run protocol and counts how often verification
catches it, and whether any accepted run reported a wrong AUC.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from types import MappingProxyType

import numpy as np

from fedauc.errors import InvalidConfig
from fedauc.he.base import HeParams, KeyPair, backend_of, get_backend
from fedauc.metrics import local_counts, sum_counts, trapezoid_fraction
from fedauc.protocol.malicious import (
    MaliciousConfig,
    MaskedSubmission,
    RunOutput,
    aggregator_blind,
    aggregator_products,
    aggregator_sum,
    default_tolerance,
    run_once,
    verify,
)
from fedauc.protocol.semihonest import draw_mask

log = logging.getLogger(__name__)

ATTACK_KINDS = (
    "reorder_slots",
    "drop_party",
    "inject_ciphertext",
    "scale_result",
    "cross_run_replay",
    "selective_slot_tamper",
)

_ALLOWED = {
    "identity": set(),
    "reorder_slots": {"shift"},
    "drop_party": {"party"},
    "inject_ciphertext": {"party", "magnitude_bits"},
    "scale_result": {"factor"},
    "cross_run_replay": set(),
    "selective_slot_tamper": {"slots", "magnitude_bits"},
}

_DEFAULT_RUNS = {"drop_party": (1, 2), "cross_run_replay": (2,)}

# parameters that would need keys or plaintext statistics
_PRIVILEGED = {"secret_key", "private_key", "sk", "plaintext", "counts", "true_auc", "randomness"}


def detection_log2(N: int, S: int) -> float:
    """``log2`` of ``(S! (SN-S)! / (SN)!)**2``."""
    if N < 1 or S < 1:
        raise InvalidConfig("need N >= 1 and S >= 1")
    sn = S * N
    ln = math.lgamma(S + 1) + math.lgamma(sn - S + 1) - math.lgamma(sn + 1)
    return 2 * ln / math.log(2)


def detection_probability(N: int, S: int) -> float:
    """Probability that a slot-guessing aggregator evades double-run verification."""
    lg = detection_log2(N, S)
    if S * N <= 2000:
        return float(Fraction(1, math.comb(S * N, S) ** 2))
    return 2.0 ** lg


def multiplier_guess_probability(bits_per_value: int, values: int) -> float:
    if bits_per_value <= 0 or values <= 0:
        raise InvalidConfig("arguments must be positive")
    return 2.0 ** (-(bits_per_value * values))


@dataclass(frozen=True)
class AttackStrategy:
    kind: str
    params: dict = field(default_factory=dict)
    runs: tuple[int, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in _ALLOWED:
            raise InvalidConfig(f"unknown attack kind {self.kind!r}")
        keys = set(self.params)
        if keys & _PRIVILEGED:
            raise InvalidConfig(f"strategy needs privileged knowledge: {sorted(keys & _PRIVILEGED)}")
        bad = keys - _ALLOWED[self.kind]
        if bad:
            raise InvalidConfig(f"unexpected parameters for {self.kind}: {sorted(bad)}")
        runs = self.runs if self.runs is not None else _DEFAULT_RUNS.get(self.kind, (1,))
        if not runs or not set(runs) <= {1, 2}:
            raise InvalidConfig("runs must be a non-empty subset of (1, 2)")
        if self.kind == "cross_run_replay" and 2 not in runs:
            raise InvalidConfig("cross_run_replay acts on run 2")
        object.__setattr__(self, "runs", tuple(sorted(runs)))
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    @classmethod
    def identity(cls) -> "AttackStrategy":
        return cls("identity")

    def describe(self) -> str:
        extra = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.kind}[{extra}]@runs{''.join(map(str, self.runs))}"


def _sum_unchecked(subs):
    # a cheating aggregator ignores the party-count precondition
    be = backend_of(subs[0].enc_t_all)
    acc = subs[0].ciphertexts()
    for s in subs[1:]:
        acc = [be.add_ct(a, b) for a, b in zip(acc, s.ciphertexts())]
    return tuple(acc)


class AdversarialAggregator:
    """Stateful aggregator applying one strategy across the two runs of a trial."""

    def __init__(self, strategy: AttackStrategy, keypair_public, rng: np.random.Generator):
        self.strategy = strategy
        self.pk = keypair_public
        self.rng = rng
        self.run = 0
        self.first_submissions = None
        self._party = None

    def _pick_party(self, m: int) -> int:
        if self._party is None:
            p = self.strategy.params.get("party")
            self._party = int(p) % m if p is not None else int(self.rng.integers(m))
        return self._party

    def _random_ct(self, n_slots: int, bits: int):
        be = get_backend(self.pk.backend)
        vals = self.rng.integers(0, 1 << bits, n_slots, dtype=np.int64)
        return be.encrypt(self.pk, vals, rng=self.rng)

    def __call__(self, subs, width, rng) -> RunOutput:
        self.run += 1
        if self.run == 1:
            self.first_submissions = list(subs)
        active = self.run in self.strategy.runs
        kind = self.strategy.kind if active else "identity"
        p = self.strategy.params
        subs = list(subs)

        if kind == "drop_party":
            del subs[self._pick_party(len(subs))]
        elif kind == "inject_ciphertext":
            j = self._pick_party(len(subs))
            bits = int(p.get("magnitude_bits", 30))
            subs[j] = MaskedSubmission(self._random_ct(width, bits), self._random_ct(width, bits),
                                       self._random_ct(1, bits), self._random_ct(1, bits), subs[j].party_id)
        elif kind == "cross_run_replay" and self.run == 2:
            subs = list(self.first_submissions)

        t_all, f_all, dt, df = _sum_unchecked(subs)
        be = backend_of(t_all)
        if kind == "reorder_slots":
            shift = p.get("shift")
            shift = int(shift) if shift is not None else int(self.rng.integers(1, width))
            t_all = be.rotate(t_all, shift)
        elif kind == "selective_slot_tamper":
            bits = int(p.get("magnitude_bits", 20))
            slots = p.get("slots", 3)
            idx = (list(slots) if not isinstance(slots, int)
                   else self.rng.choice(width, size=min(slots, width), replace=False))
            for target in ("t", "f"):
                off = np.zeros(width, dtype=np.int64)
                off[list(idx)] = self.rng.integers(1, 1 << bits, len(idx))
                ct = be.encrypt(self.pk, off, rng=self.rng)
                if target == "t":
                    t_all = be.add_ct(t_all, ct)
                else:
                    f_all = be.add_ct(f_all, ct)

        inner, dd = aggregator_products(t_all, f_all, dt, df, width)
        factor = float(p.get("factor", 1.01)) if kind == "scale_result" else 1.0
        return aggregator_blind(inner, dd, draw_mask(rng), num_factor=factor)


@dataclass
class DetectionReport:
    trials: int
    detected: int
    strategy: AttackStrategy
    config: tuple[int, int, int]
    soundness_violations: int = 0
    effective: int = 0
    backend: str = "exact"

    def __post_init__(self):
        if self.detected > self.trials:
            raise ValueError("detected cannot exceed trials")

    @property
    def detection_rate(self) -> float:
        return self.detected / self.trials if self.trials else 0.0

    def to_row(self) -> dict:
        N, S, M = self.config
        return {
            "strategy": self.strategy.kind,
            "params": json.dumps(dict(self.strategy.params), sort_keys=True),
            "runs": "".join(map(str, self.strategy.runs)),
            "backend": self.backend,
            "N": N, "S": S, "M": M,
            "trials": self.trials,
            "detected": self.detected,
            "detection_rate": self.detection_rate,
            "effective": self.effective,
            "soundness_violations": self.soundness_violations,
        }


def _matches(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol


def run_attack_experiment(strategy: AttackStrategy, datasets, config: MaliciousConfig, trials: int,
                          keypair: KeyPair | None = None, seed: int = 0) -> DetectionReport:
    """Run ``trials`` verified evaluations with ``strategy`` as the aggregator."""
    if trials < 1:
        raise InvalidConfig("trials must be >= 1")
    if keypair is None:
        keypair = get_backend("exact").keygen(HeParams(), seed=seed)
    counts = [local_counts(d, config.grid) for d in datasets]
    honest = float(trapezoid_fraction(sum_counts(counts)))
    tol = config.tolerance if config.tolerance is not None else default_tolerance(keypair.public_key.backend)
    detected = violations = effective = 0
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        adv = AdversarialAggregator(strategy, keypair.public_key, np.random.default_rng([strategy.seed, t, 1]))
        first = run_once(counts, config, keypair, rng, aggregator=adv)
        second = run_once(counts, config, keypair, rng, aggregator=adv)
        verdict = verify(first.auc, second.auc, tol)
        if not (_matches(first.auc, honest, tol) and _matches(second.auc, honest, tol)):
            effective += 1
        if not verdict.accepted:
            detected += 1
        elif not _matches(verdict.auc, honest, tol):
            violations += 1
    report = DetectionReport(trials, detected, strategy, (config.grid.n_points, config.split_count, len(counts)),
                             violations, effective, keypair.public_key.backend)
    log.info("attack %s: detected %d/%d, violations %d", strategy.describe(), detected, trials, violations)
    return report


# -- exhaustive slot-guessing adversary --------------------------------------------

def slot_guess_evasion(trials: int, N: int = 2, S: int = 2, M: int = 2, alpha: int = 3,
                       seed: int = 0, samples: int = 40) -> tuple[int, int]:
    """Evasion count of an aggregator that scales a random ``S``-subset of share slots.

    In each run the adversary multiplies ``S`` randomly chosen positions of
    the aggregated ``T`` share vector by ``alpha``.  Verification passes only
    when both guesses land exactly on the pair-value share group, so the
    evasion rate should match :func:`detection_probability`.  Keys get one
    extra level of depth to pay for the slot-selective plaintext product.

    Returns ``(evaded, trials)``.
    """
    from fedauc.metrics import LocalDataset, make_grid

    rng = np.random.default_rng(seed)
    grid = make_grid(N)
    datasets = []
    for m in range(M):
        scores = rng.uniform(0, 1, samples)
        labels = (rng.uniform(0, 1, samples) < scores).astype(int)
        labels[:2] = [0, 1]
        datasets.append(LocalDataset(scores, labels, m))
    counts = [local_counts(d, grid) for d in datasets]
    cfg = MaliciousConfig(grid, split_count=S)
    be = get_backend("exact")
    width = S * N
    ring = 16
    while ring // 2 < width:
        ring *= 2
    kp = be.keygen(HeParams(ring_dimension=ring, mult_depth=3), seed=seed)

    def guesser(subs, w, run_rng):
        t_all, f_all, dt, df = aggregator_sum(subs)
        sel = np.ones(w, dtype=np.int64)
        sel[run_rng.choice(w, size=S, replace=False)] = alpha
        t_all = be.mul_plain(t_all, sel)
        inner, dd = aggregator_products(t_all, f_all, dt, df, w)
        return aggregator_blind(inner, dd, draw_mask(run_rng))

    evaded = 0
    for t in range(trials):
        trng = np.random.default_rng([seed, t])
        a = run_once(counts, cfg, kp, trng, aggregator=guesser).auc
        b = run_once(counts, cfg, kp, trng, aggregator=guesser).auc
        evaded += a == b
    return evaded, trials


# -- result sinks -------------------------------------------------------------------

def write_reports(reports, path, fmt: str = "csv") -> Path:
    rows = [r.to_row() for r in reports]
    path = Path(path)
    if fmt == "json":
        path.write_text(json.dumps(rows, indent=2) + "\n")
    elif fmt == "csv":
        with path.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["strategy"])
            w.writeheader()
            w.writerows(rows)
    else:
        raise InvalidConfig(f"unknown format {fmt!r}")
    return path
