"""Noise-model backend emulating CKKS approximation error.

Each ciphertext carries the exact message plus an explicit float64 error
vector over all slots.  Fresh encryptions draw zero-mean Gaussian error with
standard deviation ``params.noise_std``; products propagate error the way
approximate arithmetic does (``x*eb + y*ea + ea*eb``) and every operation
that would rescale or key-switch in a lattice scheme adds a fresh draw.
Error is absolute, as in CKKS, so large messages keep their relative
precision.

Per-operation draws are seeded from a hash of the operands, so identical
computations give identical ciphertexts.
"""

from __future__ import annotations

import hashlib
import json
import struct
from fractions import Fraction

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
from fedauc.he.exact import RatVec, _to_fraction, key_id_for


class NoisyPayload:
    __slots__ = ("exact", "noise")

    def __init__(self, exact: RatVec, noise: np.ndarray):
        self.exact = exact
        self.noise = noise

    def message(self, slots: int) -> np.ndarray:
        out = np.zeros(slots, dtype=np.float64)
        out[: len(self.exact)] = self.exact.floats()
        return out


def _op_rng(tag: str, *parts) -> np.random.Generator:
    h = hashlib.blake2b(tag.encode(), digest_size=16)
    for p in parts:
        if isinstance(p, np.ndarray):
            h.update(p.tobytes())
        else:
            h.update(repr(p).encode())
    return np.random.default_rng(int.from_bytes(h.digest(), "little"))


class NoisyBackend(Backend):
    name = "noisy"
    tag = b"NOIS"

    def keygen(self, params: HeParams, seed: int | None = None) -> KeyPair:
        kid = key_id_for(self.name, params, seed)
        return KeyPair(PublicKey(self.name, params, kid), SecretKey(self.name, params, kid), params)

    def _wrap(self, like, level, exact, noise) -> CipherVector:
        return CipherVector(self.name, like.params, like.key_id, level,
                            NoisyPayload(exact, noise), mock_ciphertext_size(like.params))

    @staticmethod
    def _fresh(params: HeParams, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        if params.noise_std == 0:
            return np.zeros(params.slot_count)
        return rng.normal(0.0, params.noise_std * scale, params.slot_count)

    def encrypt(self, pk, plain, rng=None):
        self._check_key(pk)
        arr = as_plain(plain, pk.params)
        rng = rng if rng is not None else np.random.default_rng()
        return self._wrap(pk, pk.params.mult_depth, RatVec.from_values(arr), self._fresh(pk.params, rng))

    def decrypt(self, sk, ct):
        self._check_key(sk)
        self._check_ct(ct)
        if ct.key_id != sk.key_id:
            raise ParamMismatch("ciphertext was not encrypted under this key")
        p = ct.payload
        return PlainVector(p.message(ct.params.slot_count) + p.noise)

    def add_ct(self, a, b):
        self._check_ct(a, b)
        return self._wrap(a, min(a.level, b.level), a.payload.exact.add(b.payload.exact),
                          a.payload.noise + b.payload.noise)

    def mul_ct(self, a, b):
        self._check_ct(a, b)
        self._need_level(a)
        self._need_level(b)
        slots = a.params.slot_count
        xa, xb = a.payload.message(slots), b.payload.message(slots)
        ea, eb = a.payload.noise, b.payload.noise
        noise = xa * eb + xb * ea + ea * eb
        noise += self._fresh(a.params, _op_rng("mul", ea, eb))
        return self._wrap(a, min(a.level, b.level) - 1, a.payload.exact.mul(b.payload.exact), noise)

    def mul_scalar(self, a, s):
        self._check_ct(a)
        fs = _to_fraction(s)
        noise = a.payload.noise * float(fs)
        level = a.level
        if not is_small_int(s):
            self._need_level(a)
            level -= 1
            noise = noise + self._fresh(a.params, _op_rng("scalar", a.payload.noise, fs))
        return self._wrap(a, level, a.payload.exact.scale(fs), noise)

    def mul_plain(self, a, plain):
        self._check_ct(a)
        self._need_level(a)
        arr = as_plain(plain, a.params)
        p = np.zeros(a.params.slot_count)
        p[: arr.size] = [float(x) for x in arr]
        noise = a.payload.noise * p + self._fresh(a.params, _op_rng("plain", a.payload.noise, p))
        return self._wrap(a, a.level - 1, a.payload.exact.mul(RatVec.from_values(arr)), noise)

    def rotate(self, a, k):
        self._check_ct(a)
        slots = a.params.slot_count
        noise = np.roll(a.payload.noise, -int(k)) + self._fresh(a.params, _op_rng("rot", a.payload.noise, k))
        return self._wrap(a, a.level, a.payload.exact.rotate(int(k), slots), noise)

    def sum_slots(self, a, width=None):
        self._check_ct(a)
        slots = a.params.slot_count
        w = slots if width is None else min(int(width), slots)
        rounds = max(1, int(np.ceil(np.log2(max(w, 2)))))
        total = a.payload.noise[:w].sum()
        noise = np.full(slots, total) + self._fresh(
            a.params, _op_rng("sum", a.payload.noise, w), scale=np.sqrt(rounds))
        return self._wrap(a, a.level, a.payload.exact.total(w), noise)

    def _encode_payload(self, ct):
        head = json.dumps(ct.payload.exact.to_json()).encode()
        return struct.pack(">I", len(head)) + head + ct.payload.noise.astype("<f8").tobytes()

    def _decode_payload(self, header, body):
        (n,) = struct.unpack(">I", body[:4])
        exact = RatVec.from_json(json.loads(body[4:4 + n]))
        noise = np.frombuffer(body[4 + n:], dtype="<f8").astype(np.float64)
        return NoisyPayload(exact, noise)


NOISY = register(NoisyBackend())
