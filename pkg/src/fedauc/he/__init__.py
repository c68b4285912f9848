"""Homomorphic-encryption backends behind a common contract.

``exact`` and ``noisy`` are always available; ``ckks`` (alias ``lattice``)
is a genuine RNS-CKKS implementation loaded on first use.
"""

from fedauc.he.base import (
    Backend,
    CipherVector,
    HeParams,
    KeyPair,
    PlainVector,
    PublicKey,
    SecretKey,
    backend_of,
    deserialize,
    get_backend,
    mock_ciphertext_size,
)
from fedauc.he.exact import EXACT, ExactBackend
from fedauc.he.noisy import NOISY, NoisyBackend

__all__ = [
    "Backend", "CipherVector", "HeParams", "KeyPair", "PlainVector", "PublicKey", "SecretKey",
    "backend_of", "deserialize", "get_backend", "mock_ciphertext_size",
    "EXACT", "ExactBackend", "NOISY", "NoisyBackend",
]
