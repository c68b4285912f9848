"""Backend-agnostic homomorphic-encryption contract.

A backend encrypts packed vectors of reals into :class:`CipherVector` objects
and supports slot-wise addition and multiplication, scalar multiplication,
slot rotation and slot summation.  Levels model the multiplicative depth:
fresh ciphertexts start at ``params.mult_depth``; ``mul_ct`` and
``mul_scalar`` by a non-integer constant consume one level each.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

import numpy as np

from fedauc.errors import DepthExhausted, ParamMismatch, SlotOverflow, UnsupportedParams

# mul_scalar by an integer of at most this magnitude needs no rescale
SMALL_INT_SCALAR = 2**31


@dataclass(frozen=True)
class HeParams:
    ring_dimension: int = 2**14
    scale_bits: int = 50
    security_bits: int = 128
    noise_std: float = 1e-9
    mult_depth: int = 2
    # lattice backend only: bits of message magnitude the base modulus must hold
    message_bits: int = 128

    def __post_init__(self):
        n = self.ring_dimension
        if not isinstance(n, (int, np.integer)) or n < 2 or n & (n - 1):
            raise UnsupportedParams(f"ring_dimension must be a power of two >= 2, got {n!r}")
        if self.scale_bits < 30:
            raise UnsupportedParams("scale_bits must be >= 30")
        if not self.noise_std >= 0:
            raise UnsupportedParams("noise_std must be >= 0")
        if self.mult_depth < 0:
            raise UnsupportedParams("mult_depth must be >= 0")
        if self.security_bits < 0:
            raise UnsupportedParams("security_bits must be >= 0")

    @property
    def slot_count(self) -> int:
        return self.ring_dimension // 2

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "HeParams":
        return cls(**d)


@dataclass(frozen=True)
class PublicKey:
    backend: str
    params: HeParams
    key_id: str
    material: Any = dataclasses.field(repr=False, compare=False, default=None)


@dataclass(frozen=True)
class SecretKey:
    backend: str
    params: HeParams
    key_id: str
    material: Any = dataclasses.field(repr=False, compare=False, default=None)


@dataclass(frozen=True)
class KeyPair:
    public_key: PublicKey
    private_key: SecretKey
    params: HeParams


@dataclass(frozen=True)
class PlainVector:
    """Decoded slot values.

    The exact backend yields :class:`fractions.Fraction` entries; the
    approximate backends yield floats.
    """

    slots: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.slots)
        if arr.ndim != 1:
            raise ValueError("PlainVector must be 1-d")
        if arr.dtype != object and not np.all(np.isfinite(arr)):
            raise ValueError("PlainVector entries must be finite")
        object.__setattr__(self, "slots", arr)

    def __len__(self) -> int:
        return int(self.slots.size)

    def __getitem__(self, i):
        return self.slots[i]

    def as_float(self) -> np.ndarray:
        return np.array([float(x) for x in self.slots], dtype=np.float64)


@dataclass(frozen=True, eq=False)
class CipherVector:
    backend: str
    params: HeParams
    key_id: str
    level: int
    payload: Any = dataclasses.field(repr=False)
    serialized_size: int = 0


def as_plain(plain, params: HeParams) -> np.ndarray:
    if isinstance(plain, PlainVector):
        arr = plain.slots
    else:
        arr = np.asarray(plain)
        if arr.dtype.kind not in "iufO":
            arr = arr.astype(np.float64)
    if arr.ndim != 1:
        raise ValueError("plaintext must be a 1-d vector")
    if arr.size > params.slot_count:
        raise SlotOverflow(f"{arr.size} values do not fit in {params.slot_count} slots")
    return arr


def is_small_int(s) -> bool:
    if isinstance(s, Fraction):
        return s.denominator == 1 and abs(s) < SMALL_INT_SCALAR
    if isinstance(s, (int, np.integer)):
        return abs(int(s)) < SMALL_INT_SCALAR
    f = float(s)
    return f.is_integer() and abs(f) < SMALL_INT_SCALAR


def mock_ciphertext_size(params: HeParams) -> int:
    """Wire size charged for one mock ciphertext: two ring elements of 8-byte words."""
    return 2 * params.ring_dimension * 8


class Backend:
    """Base class; subclasses implement the ``_``-prefixed hooks."""

    name: str = ""
    tag: bytes = b"????"

    # -- keys ---------------------------------------------------------------
    def keygen(self, params: HeParams, seed: int | None = None) -> KeyPair:
        raise NotImplementedError

    # -- helpers ------------------------------------------------------------
    def _check_key(self, key, params: HeParams | None = None):
        if key.backend != self.name:
            raise ParamMismatch(f"key belongs to backend {key.backend!r}, not {self.name!r}")

    def _check_ct(self, *cts: CipherVector):
        first = cts[0]
        for ct in cts:
            if ct.backend != self.name:
                raise ParamMismatch(f"ciphertext from backend {ct.backend!r} given to {self.name!r}")
            if ct.params != first.params or ct.key_id != first.key_id:
                raise ParamMismatch("ciphertexts under different keys or parameters")

    @staticmethod
    def _need_level(ct: CipherVector):
        if ct.level < 1:
            raise DepthExhausted("no multiplicative levels left")

    # -- contract -----------------------------------------------------------
    def encrypt(self, pk: PublicKey, plain, rng: np.random.Generator | None = None) -> CipherVector:
        raise NotImplementedError

    def decrypt(self, sk: SecretKey, ct: CipherVector) -> PlainVector:
        raise NotImplementedError

    def add_ct(self, a: CipherVector, b: CipherVector) -> CipherVector:
        raise NotImplementedError

    def sub_ct(self, a: CipherVector, b: CipherVector) -> CipherVector:
        return self.add_ct(a, self.mul_scalar(b, -1))

    def mul_ct(self, a: CipherVector, b: CipherVector) -> CipherVector:
        raise NotImplementedError

    def mul_scalar(self, a: CipherVector, s) -> CipherVector:
        raise NotImplementedError

    def mul_plain(self, a: CipherVector, plain) -> CipherVector:
        """Slot-wise product with an unencrypted vector (consumes a level)."""
        raise NotImplementedError

    def rotate(self, a: CipherVector, k: int) -> CipherVector:
        """Cyclic left rotation: slot ``i`` of the result is slot ``i + k``."""
        raise NotImplementedError

    def sum_slots(self, a: CipherVector, width: int | None = None) -> CipherVector:
        """Put the sum of the first ``width`` slots (default: all) in slot 0."""
        raise NotImplementedError

    def ciphertext_size(self, params: HeParams, level: int | None = None) -> int:
        return mock_ciphertext_size(params)

    # -- wire format ----------------------------------------------------------
    def _encode_payload(self, ct: CipherVector) -> bytes:
        raise NotImplementedError

    def _decode_payload(self, header: dict, body: bytes):
        raise NotImplementedError

    def serialize(self, ct: CipherVector) -> bytes:
        self._check_ct(ct)
        header = json.dumps(
            {"params": ct.params.to_dict(), "key_id": ct.key_id, "level": ct.level},
            sort_keys=True,
        ).encode()
        body = self._encode_payload(ct)
        inner = struct.pack(">I", len(header)) + header + body
        return self.tag + struct.pack(">Q", len(inner)) + inner

    def deserialize(self, blob: bytes) -> CipherVector:
        if blob[:4] != self.tag:
            raise ParamMismatch(f"expected backend tag {self.tag!r}, got {blob[:4]!r}")
        (length,) = struct.unpack(">Q", blob[4:12])
        inner = blob[12:12 + length]
        if len(inner) != length:
            raise ValueError("truncated ciphertext")
        (hlen,) = struct.unpack(">I", inner[:4])
        header = json.loads(inner[4:4 + hlen])
        params = HeParams.from_dict(header["params"])
        payload = self._decode_payload(header, inner[4 + hlen:])
        return CipherVector(
            self.name, params, header["key_id"], header["level"], payload,
            self.ciphertext_size(params, header["level"]),
        )


_REGISTRY: dict[str, Backend] = {}


def register(backend: Backend) -> Backend:
    _REGISTRY[backend.name] = backend
    return backend


def get_backend(name: str) -> Backend:
    if name not in _REGISTRY and name in ("ckks", "lattice"):
        from fedauc.he import ckks  # noqa: F401  (registers itself)
    try:
        return _REGISTRY["ckks" if name == "lattice" else name]
    except KeyError:
        raise UnsupportedParams(f"unknown HE backend {name!r}") from None


def backend_of(obj) -> Backend:
    return get_backend(obj.backend)


def deserialize(blob: bytes) -> CipherVector:
    tag = blob[:4]
    for b in list(_REGISTRY.values()):
        if b.tag == tag:
            return b.deserialize(blob)
    if tag == b"CKKS":
        return get_backend("ckks").deserialize(blob)
    raise ParamMismatch(f"unknown backend tag {tag!r}")
