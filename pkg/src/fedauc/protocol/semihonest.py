"""Semi-honest aggregation protocol.

Clients encrypt their adjacent-pair vectors ``T``/``F`` and class totals; the
aggregator sums them homomorphically, forms the trapezoid numerator
``sum(T*F)`` and denominator ``2*TP*FP``, blinds both with one random factor
``c`` and returns them.  Any client decrypts and divides.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from fedauc.errors import DegenerateLabels, RoleViolation, TooFewParties
from fedauc.he.base import CipherVector, PublicKey, SecretKey, backend_of, get_backend
from fedauc.metrics import DecisionGrid, LocalDataset, local_counts, pair_transform

log = logging.getLogger(__name__)

MASK_LOG2_RANGE = (20.0, 40.0)
DENOM_TOLERANCE = 1e-6


@dataclass(frozen=True)
class ClientSubmission:
    enc_t: CipherVector
    enc_f: CipherVector
    enc_tp_total: CipherVector
    enc_fp_total: CipherVector
    party_id: int

    def ciphertexts(self) -> list[CipherVector]:
        return [self.enc_t, self.enc_f, self.enc_tp_total, self.enc_fp_total]


@dataclass(frozen=True)
class AggregatedStats:
    enc_t: CipherVector
    enc_f: CipherVector
    enc_tp_total: CipherVector
    enc_fp_total: CipherVector

    def __iter__(self):
        return iter((self.enc_t, self.enc_f, self.enc_tp_total, self.enc_fp_total))


@dataclass(frozen=True)
class BlindedOutput:
    enc_num_c: CipherVector
    enc_denom_c: CipherVector


@dataclass(frozen=True)
class BlindMask:
    c: float

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError("blind mask must be a positive finite real")


def require_ciphertexts(*items) -> None:
    """Boundary check: only ciphertexts may reach the aggregator."""
    for it in items:
        if not isinstance(it, CipherVector):
            raise RoleViolation(f"aggregator received a {type(it).__name__}, expected ciphertext")


def client_prepare(dataset: LocalDataset, grid: DecisionGrid, pk: PublicKey,
                   rng: np.random.Generator | None = None) -> ClientSubmission:
    be = get_backend(pk.backend)
    counts = local_counts(dataset, grid)
    pv = pair_transform(counts)
    enc = lambda v: be.encrypt(pk, np.asarray(v, dtype=np.int64), rng=rng)  # noqa: E731
    return ClientSubmission(
        enc(pv.t), enc(pv.f),
        enc([counts.total_positive]), enc([counts.total_negative]),
        dataset.party_id,
    )


def aggregate(submissions) -> AggregatedStats:
    subs = list(submissions)
    if len(subs) < 2:
        raise TooFewParties(f"need at least 2 parties, got {len(subs)}")
    for s in subs:
        require_ciphertexts(*s.ciphertexts())
    be = backend_of(subs[0].enc_t)
    acc = subs[0].ciphertexts()
    for s in subs[1:]:
        acc = [be.add_ct(a, b) for a, b in zip(acc, s.ciphertexts())]
    return AggregatedStats(*acc)


def compute_num_denom(enc_t, enc_f, enc_tp_total, enc_fp_total, width: int | None = None):
    """Return ``(Enc(sum T*F), Enc(2*TP*FP))``.

    ``width`` bounds the slot summation to the ``N-1`` packed pairs.
    """
    require_ciphertexts(enc_t, enc_f, enc_tp_total, enc_fp_total)
    be = backend_of(enc_t)
    num = be.sum_slots(be.mul_ct(enc_t, enc_f), width)
    denom = be.mul_scalar(be.mul_ct(enc_tp_total, enc_fp_total), 2)
    return num, denom


def draw_mask(rng: np.random.Generator | None = None,
              log2_range: tuple[float, float] = MASK_LOG2_RANGE) -> BlindMask:
    rng = rng if rng is not None else np.random.default_rng()
    return BlindMask(float(2.0 ** rng.uniform(*log2_range)))


def blind(enc_num, enc_denom, rng: np.random.Generator | None = None,
          mask: BlindMask | None = None) -> tuple[BlindedOutput, BlindMask]:
    require_ciphertexts(enc_num, enc_denom)
    mask = mask if mask is not None else draw_mask(rng)
    be = backend_of(enc_num)
    return BlindedOutput(be.mul_scalar(enc_num, mask.c), be.mul_scalar(enc_denom, mask.c)), mask


def finalize_ratio(num, denom):
    """Divide decrypted values, exactly when both are rationals."""
    if abs(float(denom)) < DENOM_TOLERANCE:
        raise DegenerateLabels(f"blinded denominator {float(denom):.3g} is too close to zero")
    if isinstance(num, (int, Fraction)) and isinstance(denom, (int, Fraction)):
        return Fraction(num) / Fraction(denom)
    return float(num) / float(denom)


def client_finalize(out: BlindedOutput, sk: SecretKey) -> float:
    be = get_backend(sk.backend)
    num = be.decrypt(sk, out.enc_num_c)[0]
    denom = be.decrypt(sk, out.enc_denom_c)[0]
    return float(finalize_ratio(num, denom))


def run_semi_honest(datasets, grid: DecisionGrid, keypair, rng: np.random.Generator | None = None) -> float:
    """Convenience wrapper running all roles in-process."""
    rng = rng if rng is not None else np.random.default_rng()
    subs = [client_prepare(d, grid, keypair.public_key, rng) for d in datasets]
    agg = aggregate(subs)
    num, denom = compute_num_denom(*agg, width=grid.n_points - 1)
    out, _ = blind(num, denom, rng)
    return client_finalize(out, keypair.private_key)
