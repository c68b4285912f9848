"""Party registry, the trusted-setup stub and role-scoped key views."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from fedauc.errors import InvalidConfig, RoleViolation, TooFewParties
from fedauc.he.base import HeParams, KeyPair, PublicKey, get_backend
from fedauc.metrics import LocalDataset
from fedauc.sim.bus import AGGREGATOR, Transcript

log = logging.getLogger(__name__)

SETUP_MARKER = "SETUP-OUT-OF-SCOPE"


@dataclass(frozen=True)
class PartyDescriptor:
    party_id: int
    dataset: LocalDataset = field(repr=False)


@dataclass(frozen=True)
class PartyRegistry:
    parties: tuple[PartyDescriptor, ...]
    aggregator: str = AGGREGATOR

    def __post_init__(self):
        ids = [p.party_id for p in self.parties]
        if len(set(ids)) != len(ids):
            raise InvalidConfig("party ids must be unique")
        object.__setattr__(self, "parties", tuple(self.parties))

    @classmethod
    def from_datasets(cls, datasets) -> "PartyRegistry":
        return cls(tuple(PartyDescriptor(d.party_id, d) for d in datasets))

    @property
    def M(self) -> int:
        return len(self.parties)

    @property
    def ids(self) -> list[int]:
        return [p.party_id for p in self.parties]

    def require_protocol_ready(self):
        if self.M < 2:
            raise TooFewParties(f"protocol runs need M >= 2, got {self.M}")


class AggregatorKeys:
    """The aggregator's view of the key material: public key only."""

    __slots__ = ("_pk",)

    def __init__(self, pk: PublicKey):
        self._pk = pk

    @property
    def public_key(self) -> PublicKey:
        return self._pk

    @property
    def private_key(self):
        raise RoleViolation("the aggregator role has no access to the private key")

    def __getattr__(self, name):
        if name in ("sk", "secret_key", "keypair"):
            raise RoleViolation("the aggregator role has no access to the private key")
        raise AttributeError(name)


@dataclass(frozen=True)
class TrustedSetup:
    keypair: KeyPair = field(repr=False)
    designated_party: int
    party_ids: tuple[int, ...] = ()

    def client_keys(self, party_id: int) -> KeyPair:
        if party_id not in self.party_ids:
            raise RoleViolation(f"{party_id} is not a registered input party")
        return self.keypair

    def aggregator_keys(self) -> AggregatorKeys:
        return AggregatorKeys(self.keypair.public_key)


def trusted_setup(registry: PartyRegistry, params: HeParams, backend: str = "exact",
                  seed: int | None = None, transcript: Transcript | None = None) -> TrustedSetup:
    """Generate keys at a randomly designated party and hand them out directly.

    Key distribution is a stub: there is no PKI and no secure channel.
    """
    if registry.M < 2:
        raise InvalidConfig(f"trusted setup needs M >= 2, got {registry.M}")
    rng = np.random.default_rng(seed)
    designated = registry.ids[int(rng.integers(registry.M))]
    key_seed = None if seed is None else int(rng.integers(2**62))
    kp = get_backend(backend).keygen(params, seed=key_seed)
    log.info("%s: party %s generated keys for backend %s; distribution is a direct handoff",
             SETUP_MARKER, designated, backend)
    if transcript is not None:
        transcript.note(SETUP_MARKER, designated_party=designated, backend=backend)
    return TrustedSetup(kp, designated, tuple(registry.ids))
