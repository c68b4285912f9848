"""Exact reference backend.

Ciphertexts wrap exact rational vectors, so every homomorphic identity holds
with equality.  Keys are markers only; nothing here is secret.  Use it to
test protocol logic independently of lattice noise.
"""

from __future__ import annotations

import hashlib
import json
import secrets
from fractions import Fraction
from math import gcd

import numpy as np

from fedauc.errors import ParamMismatch
from fedauc.he.base import (
    Backend,
    CipherVector,
    HeParams,
    KeyPair,
    PlainVector,
    PublicKey,
    SecretKey,
    as_plain,
    is_small_int,
    mock_ciphertext_size,
    register,
)


def _lcm(a: int, b: int) -> int:
    return a // gcd(a, b) * b


class RatVec:
    """Vector of rationals sharing one positive denominator.

    Only a prefix is stored; slots past ``len(num)`` are zero.
    """

    __slots__ = ("num", "den")

    def __init__(self, num: np.ndarray, den: int = 1):
        self.num = num
        self.den = den

    @classmethod
    def from_values(cls, values) -> "RatVec":
        arr = np.asarray(values)
        if arr.dtype.kind in "iub":
            return cls(np.array([int(x) for x in arr], dtype=object), 1)
        fracs = [Fraction(x) for x in arr.tolist()]
        den = 1
        for f in fracs:
            if f.denominator != 1:
                den = _lcm(den, f.denominator)
        return cls(np.array([f.numerator * (den // f.denominator) for f in fracs], dtype=object), den)

    def __len__(self):
        return self.num.shape[0]

    def _padded(self, n: int) -> np.ndarray:
        if len(self) >= n:
            return self.num
        out = np.zeros(n, dtype=object)
        out[: len(self)] = self.num
        return out

    def add(self, other: "RatVec") -> "RatVec":
        n = max(len(self), len(other))
        a, b = self._padded(n), other._padded(n)
        if self.den == other.den:
            return RatVec(a + b, self.den)
        den = _lcm(self.den, other.den)
        return RatVec(a * (den // self.den) + b * (den // other.den), den)

    def mul(self, other: "RatVec") -> "RatVec":
        n = min(len(self), len(other))
        return RatVec(self.num[:n] * other.num[:n], self.den * other.den)

    def scale(self, s: Fraction) -> "RatVec":
        if s.denominator == 1:
            return RatVec(self.num * s.numerator, self.den)
        return RatVec(self.num * s.numerator, self.den * s.denominator)

    def total(self, width: int | None = None) -> "RatVec":
        num = self.num if width is None else self.num[:width]
        return RatVec(np.array([sum(num.tolist(), 0)], dtype=object), self.den)

    def rotate(self, k: int, slots: int) -> "RatVec":
        k %= slots
        if k == 0:
            return RatVec(self.num.copy(), self.den)
        full = self._padded(slots)
        return RatVec(np.roll(full, -k), self.den)

    def fractions(self) -> np.ndarray:
        d = self.den
        return np.array([Fraction(int(x), d) for x in self.num], dtype=object)

    def floats(self) -> np.ndarray:
        d = self.den
        return np.array([int(x) / d for x in self.num], dtype=np.float64)

    def to_json(self) -> dict:
        return {"den": str(self.den), "num": [str(int(x)) for x in self.num]}

    @classmethod
    def from_json(cls, d: dict) -> "RatVec":
        return cls(np.array([int(x) for x in d["num"]], dtype=object), int(d["den"]))


def _to_fraction(s) -> Fraction:
    if isinstance(s, Fraction):
        return s
    if isinstance(s, (int, np.integer)):
        return Fraction(int(s))
    return Fraction(float(s))


def key_id_for(name: str, params: HeParams, seed: int | None) -> str:
    if seed is None:
        return secrets.token_hex(16)
    blob = json.dumps([name, params.to_dict(), int(seed)], sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:32]


class ExactBackend(Backend):
    name = "exact"
    tag = b"EXCT"

    def keygen(self, params: HeParams, seed: int | None = None) -> KeyPair:
        kid = key_id_for(self.name, params, seed)
        return KeyPair(
            PublicKey(self.name, params, kid),
            SecretKey(self.name, params, kid),
            params,
        )

    def _wrap(self, like: CipherVector | PublicKey, level: int, payload) -> CipherVector:
        return CipherVector(self.name, like.params, like.key_id, level, payload,
                            mock_ciphertext_size(like.params))

    def encrypt(self, pk, plain, rng=None):
        self._check_key(pk)
        arr = as_plain(plain, pk.params)
        return self._wrap(pk, pk.params.mult_depth, RatVec.from_values(arr))

    def decrypt(self, sk, ct):
        self._check_key(sk)
        self._check_ct(ct)
        if ct.key_id != sk.key_id:
            raise ParamMismatch("ciphertext was not encrypted under this key")
        return PlainVector(ct.payload.fractions())

    def add_ct(self, a, b):
        self._check_ct(a, b)
        return self._wrap(a, min(a.level, b.level), a.payload.add(b.payload))

    def mul_ct(self, a, b):
        self._check_ct(a, b)
        self._need_level(a)
        self._need_level(b)
        return self._wrap(a, min(a.level, b.level) - 1, a.payload.mul(b.payload))

    def mul_scalar(self, a, s):
        self._check_ct(a)
        level = a.level
        if not is_small_int(s):
            self._need_level(a)
            level -= 1
        return self._wrap(a, level, a.payload.scale(_to_fraction(s)))

    def mul_plain(self, a, plain):
        self._check_ct(a)
        self._need_level(a)
        return self._wrap(a, a.level - 1, a.payload.mul(RatVec.from_values(as_plain(plain, a.params))))

    def rotate(self, a, k):
        self._check_ct(a)
        return self._wrap(a, a.level, a.payload.rotate(int(k), a.params.slot_count))

    def sum_slots(self, a, width=None):
        self._check_ct(a)
        return self._wrap(a, a.level, a.payload.total(width))

    def _encode_payload(self, ct):
        return json.dumps(ct.payload.to_json()).encode()

    def _decode_payload(self, header, body):
        return RatVec.from_json(json.loads(body))


EXACT = register(ExactBackend())
