"""Verifiable protocol against a malicious aggregator.

Clients share a :class:`CommonRandomness` instance the aggregator never sees.
Each client

1. scales its pair values by ``r3``/``r4``, its class totals by ``r5``/``r6``
   and a second copy of the totals by ``r7``/``r8``,
2. adds zero-sum masks ``tr``/``fr`` (columns cancel across parties),
3. splits every packed value into ``S`` additive shares, replicating the
   co-factor (bit ``b[n]`` picks which side is split),
4. permutes the ``S*N`` shares with the common permutation ``pi`` and
   encrypts.

The aggregator sums submissions, takes the inner product of the two share
vectors (``r0*num + r1*d`` with ``d = TP*FP``), the product of the second
totals (``r2*d``), and blinds both with one random ``c``.  A client recovers
``num / (2*d)`` from the ratio.  Running everything twice with independent
randomness and comparing the two results exposes tampering.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from fedauc.errors import DegenerateLabels, InvalidConfig, TooFewParties, VerificationFailed
from fedauc.he.base import CipherVector, KeyPair, PublicKey, SecretKey, backend_of, get_backend
from fedauc.metrics import CountVector, DecisionGrid, LocalDataset, local_counts, pair_transform
from fedauc.protocol.semihonest import (
    MASK_LOG2_RANGE,
    BlindMask,
    draw_mask,
    finalize_ratio,
    require_ciphertexts,
)

log = logging.getLogger(__name__)

MULTIPLIER_LOG2_RANGE = (10.0, 26.0)
DEFAULT_MASK_BITS = 20
EXACT_TOLERANCE = 0.0
APPROX_TOLERANCE = 5e-6


def default_tolerance(backend_name: str) -> float:
    return EXACT_TOLERANCE if backend_name == "exact" else APPROX_TOLERANCE


@dataclass(frozen=True)
class CommonRandomness:
    """Randomness shared by all clients for one protocol run.

    ``tr``/``fr`` have shape ``(N+1, M)``: rows ``0..N-2`` mask pair values,
    row ``N-1`` the totals and row ``N`` the second copy of the totals.
    """

    r3: int
    r4: int
    r5: int
    r6: int
    r7: int
    r8: int
    tr: np.ndarray
    fr: np.ndarray
    pi: np.ndarray
    b: np.ndarray
    split_count: int
    mask_bits: int = DEFAULT_MASK_BITS

    def __post_init__(self):
        for name in ("r3", "r4", "r5", "r6", "r7", "r8"):
            if int(getattr(self, name)) <= 0:
                raise InvalidConfig(f"{name} must be a positive integer")
        if self.split_count < 2:
            raise InvalidConfig("split_count must be >= 2")
        tr = np.array(self.tr, dtype=np.int64)
        fr = np.array(self.fr, dtype=np.int64)
        if tr.ndim != 2 or tr.shape != fr.shape or tr.shape[1] < 2:
            raise InvalidConfig("tr/fr must be equal-shape (N+1) x M matrices with M >= 2")
        n = tr.shape[0] - 1
        if n < 2:
            raise InvalidConfig("need at least 2 decision points")
        if tr.sum(axis=1).any() or fr.sum(axis=1).any():
            raise InvalidConfig("mask rows must sum to zero across parties")
        pi = np.array(self.pi, dtype=np.int64)
        if pi.shape != (self.split_count * n,) or not np.array_equal(np.sort(pi), np.arange(pi.size)):
            raise InvalidConfig("pi must be a permutation of size S*N")
        b = np.array(self.b, dtype=np.int8)
        if b.shape != (n,) or not np.isin(b, (0, 1)).all():
            raise InvalidConfig("b must be a bit array of length N")
        for name, arr in (("tr", tr), ("fr", fr), ("pi", pi), ("b", b)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_parties(self) -> int:
        return self.tr.shape[1]

    @property
    def n_points(self) -> int:
        return self.tr.shape[0] - 1

    @property
    def width(self) -> int:
        return self.split_count * self.n_points

    @property
    def r0(self) -> int:
        return self.r3 * self.r4

    @property
    def r1(self) -> int:
        return self.r5 * self.r6

    @property
    def r2(self) -> int:
        return self.r7 * self.r8


def _zero_sum_matrix(rng, rows: int, cols: int, bound: int) -> np.ndarray:
    m = rng.integers(-bound, bound + 1, size=(rows, cols), dtype=np.int64)
    m[:, -1] = -m[:, :-1].sum(axis=1)
    return m


def gen_common_randomness(M: int, N: int, S: int, seed=None,
                          multiplier_log2: tuple[float, float] = MULTIPLIER_LOG2_RANGE,
                          mask_bits: int = DEFAULT_MASK_BITS) -> CommonRandomness:
    """Draw fresh common randomness.

    Multipliers are integers drawn log-uniformly from ``2**multiplier_log2``;
    masks are uniform integers of magnitude below ``2**mask_bits``.
    """
    if M < 2:
        raise TooFewParties(f"need at least 2 parties, got {M}")
    if N < 2 or S < 2:
        raise InvalidConfig("need N >= 2 and S >= 2")
    lo, hi = multiplier_log2
    if not 0 <= lo <= hi <= 62:
        raise InvalidConfig("multiplier_log2 must satisfy 0 <= lo <= hi <= 62")
    if not 0 <= mask_bits <= 40:
        raise InvalidConfig("mask_bits must be in [0, 40]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    r = [max(1, int(round(2.0 ** rng.uniform(lo, hi)))) for _ in range(6)]
    bound = (1 << mask_bits) - 1
    return CommonRandomness(
        *r,
        tr=_zero_sum_matrix(rng, N + 1, M, bound),
        fr=_zero_sum_matrix(rng, N + 1, M, bound),
        pi=rng.permutation(S * N),
        b=rng.integers(0, 2, N, dtype=np.int8),
        split_count=S,
        mask_bits=mask_bits,
    )


@dataclass(frozen=True)
class MaskedSubmission:
    enc_t_all: CipherVector
    enc_f_all: CipherVector
    enc_dt: CipherVector
    enc_df: CipherVector
    party_id: int

    def ciphertexts(self) -> list[CipherVector]:
        return [self.enc_t_all, self.enc_f_all, self.enc_dt, self.enc_df]


@dataclass(frozen=True)
class RunOutput:
    enc_blinded_num: CipherVector
    enc_blinded_denom: CipherVector


@dataclass(frozen=True)
class VerifiedAuc:
    auc: float
    auc_prime: float
    accepted: bool
    tolerance: float

    def __post_init__(self):
        if self.accepted != (abs(self.auc - self.auc_prime) <= self.tolerance):
            raise ValueError("accepted flag disagrees with the tolerance check")


@dataclass(frozen=True)
class MaskedVectors:
    """Plaintext client-side vectors just before encryption."""

    t_all: list
    f_all: list
    dt: int
    df: int


def _split(value: int, s: int, rng, bound: int) -> list[Fraction]:
    base = Fraction(value, s)
    z = [int(x) for x in rng.integers(-bound, bound + 1, s - 1)] if bound else [0] * (s - 1)
    return [base + zi for zi in z] + [base - sum(z)]


def mask_and_split(counts: CountVector, cr: CommonRandomness, party_id: int,
                   rng: np.random.Generator | None = None) -> MaskedVectors:
    n = cr.n_points
    if counts.n_points != n:
        raise InvalidConfig(f"counts have {counts.n_points} points, randomness expects {n}")
    if not 0 <= party_id < cr.n_parties:
        raise InvalidConfig(f"party_id {party_id} outside 0..{cr.n_parties - 1}")
    rng = rng if rng is not None else np.random.default_rng()
    pv = pair_transform(counts)
    m = party_id
    tr = cr.tr[:, m].tolist()
    fr = cr.fr[:, m].tolist()
    tp, fp = counts.total_positive, counts.total_negative
    tv = [cr.r3 * int(x) + tr[k] for k, x in enumerate(pv.t.tolist())] + [cr.r5 * tp + tr[n - 1]]
    fv = [cr.r4 * int(x) + fr[k] for k, x in enumerate(pv.f.tolist())] + [cr.r6 * fp + fr[n - 1]]
    s = cr.split_count
    bound = (1 << cr.mask_bits) - 1
    t_sh: list = []
    f_sh: list = []
    for k in range(n):
        if cr.b[k] == 0:
            t_sh += _split(tv[k], s, rng, bound)
            f_sh += [Fraction(fv[k])] * s
        else:
            t_sh += [Fraction(tv[k])] * s
            f_sh += _split(fv[k], s, rng, bound)
    pi = cr.pi.tolist()
    return MaskedVectors(
        [t_sh[i] for i in pi], [f_sh[i] for i in pi],
        cr.r7 * tp + int(cr.tr[n, m]), cr.r8 * fp + int(cr.fr[n, m]),
    )


def _as_plain(values) -> np.ndarray:
    if all(isinstance(v, int) or v.denominator == 1 for v in values):
        return np.array([int(v) for v in values], dtype=object)
    return np.array(values, dtype=object)


def client_mask_split(counts: CountVector, cr: CommonRandomness, party_id: int, pk: PublicKey,
                      rng: np.random.Generator | None = None) -> MaskedSubmission:
    be = get_backend(pk.backend)
    if cr.width > pk.params.slot_count:
        raise InvalidConfig(f"S*N = {cr.width} exceeds {pk.params.slot_count} slots")
    mv = mask_and_split(counts, cr, party_id, rng)
    return MaskedSubmission(
        be.encrypt(pk, _as_plain(mv.t_all), rng=rng),
        be.encrypt(pk, _as_plain(mv.f_all), rng=rng),
        be.encrypt(pk, np.array([mv.dt], dtype=object), rng=rng),
        be.encrypt(pk, np.array([mv.df], dtype=object), rng=rng),
        party_id,
    )


# -- aggregator ---------------------------------------------------------------

def aggregator_sum(submissions) -> tuple[CipherVector, ...]:
    subs = list(submissions)
    if len(subs) < 2:
        raise TooFewParties(f"need at least 2 parties, got {len(subs)}")
    for s in subs:
        require_ciphertexts(*s.ciphertexts())
    be = backend_of(subs[0].enc_t_all)
    acc = subs[0].ciphertexts()
    for s in subs[1:]:
        acc = [be.add_ct(a, b) for a, b in zip(acc, s.ciphertexts())]
    return tuple(acc)


def aggregator_products(t_all, f_all, dt, df, width: int | None = None):
    """Return ``(Enc(<T_all, F_all>), Enc(DT*DF))``."""
    require_ciphertexts(t_all, f_all, dt, df)
    be = backend_of(t_all)
    return be.sum_slots(be.mul_ct(t_all, f_all), width), be.mul_ct(dt, df)


def aggregator_blind(inner, dd, mask: BlindMask, num_factor: float = 1.0) -> RunOutput:
    """Blind both values with ``c``; ``num_factor`` exists for adversary simulation."""
    be = backend_of(inner)
    c_num = mask.c if num_factor == 1.0 else mask.c * num_factor
    return RunOutput(be.mul_scalar(inner, c_num), be.mul_scalar(dd, mask.c))


def aggregator_compute(submissions, rng: np.random.Generator | None = None,
                       width: int | None = None, mask: BlindMask | None = None) -> RunOutput:
    t_all, f_all, dt, df = aggregator_sum(submissions)
    inner, dd = aggregator_products(t_all, f_all, dt, df, width)
    return aggregator_blind(inner, dd, mask if mask is not None else draw_mask(rng))


# -- client side ----------------------------------------------------------------

def decrypt_run(run: RunOutput, sk: SecretKey):
    be = get_backend(sk.backend)
    return be.decrypt(sk, run.enc_blinded_num)[0], be.decrypt(sk, run.enc_blinded_denom)[0]


def client_unmask(run, cr: CommonRandomness) -> float:
    """Recover the trapezoid AUC from a decrypted ``(num', denom')`` pair."""
    num_c, denom_c = run
    ratio = Fraction(finalize_ratio(num_c, denom_c))
    auc = (ratio - Fraction(cr.r1, cr.r2)) * Fraction(cr.r2, cr.r0) / 2
    return float(auc)


@dataclass
class MaliciousConfig:
    grid: DecisionGrid
    split_count: int = 4
    multiplier_log2: tuple[float, float] = MULTIPLIER_LOG2_RANGE
    mask_bits: int = DEFAULT_MASK_BITS
    blind_log2: tuple[float, float] = MASK_LOG2_RANGE
    tolerance: float | None = None

    def randomness(self, M: int, seed) -> CommonRandomness:
        return gen_common_randomness(M, self.grid.n_points, self.split_count, seed,
                                     self.multiplier_log2, self.mask_bits)


@dataclass
class RunTrace:
    """Per-run artifacts, kept for cost accounting and adversary replay."""

    randomness: CommonRandomness
    submissions: list
    output: RunOutput
    auc: float
    extra: dict = field(default_factory=dict)


def run_once(counts: list[CountVector], cfg: MaliciousConfig, keypair: KeyPair,
             rng: np.random.Generator, aggregator=None) -> RunTrace:
    """One full run; ``aggregator(submissions, width, rng) -> RunOutput`` may be swapped."""
    M = len(counts)
    cr = cfg.randomness(M, rng)
    subs = [client_mask_split(c, cr, m, keypair.public_key, rng) for m, c in enumerate(counts)]
    if aggregator is None:
        out = aggregator_compute(subs, width=cr.width, mask=draw_mask(rng, cfg.blind_log2))
    else:
        out = aggregator(subs, cr.width, rng)
    auc = client_unmask(decrypt_run(out, keypair.private_key), cr)
    return RunTrace(cr, subs, out, auc)


def verify(auc: float, auc_prime: float, tolerance: float) -> VerifiedAuc:
    ok = math.isfinite(auc) and math.isfinite(auc_prime) and abs(auc - auc_prime) <= tolerance
    return VerifiedAuc(auc, auc_prime, ok, tolerance)


def run_verified(datasets, cfg: MaliciousConfig, keypair: KeyPair,
                 rng: np.random.Generator | None = None, raise_on_reject: bool = True) -> VerifiedAuc:
    """Execute the protocol twice with independent randomness and compare."""
    rng = rng if rng is not None else np.random.default_rng()
    counts = [c if isinstance(c, CountVector) else local_counts(c, cfg.grid) for c in datasets]
    tol = cfg.tolerance if cfg.tolerance is not None else default_tolerance(keypair.public_key.backend)
    first = run_once(counts, cfg, keypair, rng)
    second = run_once(counts, cfg, keypair, rng)
    result = verify(first.auc, second.auc, tol)
    if not result.accepted:
        log.warning("verification rejected: %r vs %r", first.auc, second.auc)
        if raise_on_reject:
            raise VerificationFailed(first.auc, second.auc, tol)
    return result
