"""In-process message bus with serialization, transcripts and cost accounting."""

from __future__ import annotations

import dataclasses
import json
import time
from collections import defaultdict
from contextlib import contextmanager
from dataclasses import dataclass, field

from fedauc.errors import RoleViolation
from fedauc.he.base import CipherVector, backend_of, deserialize

AGGREGATOR = "aggregator"


def client_role(pid: int) -> str:
    return f"client{pid}"


@dataclass(frozen=True)
class TranscriptEntry:
    seq: int
    sender: str
    receiver: str
    kind: str
    ciphertexts: int
    size: int
    wire_bytes: int

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


class Transcript:
    """Append-only ordered message log."""

    def __init__(self):
        self._entries: list[TranscriptEntry] = []
        self._notes: list[dict] = []

    def append(self, sender, receiver, kind, ciphertexts, size, wire_bytes) -> TranscriptEntry:
        e = TranscriptEntry(len(self._entries), sender, receiver, kind, ciphertexts, size, wire_bytes)
        self._entries.append(e)
        return e

    def note(self, kind: str, **info) -> None:
        """Record a local event that is not a message (e.g. the setup stub)."""
        self._notes.append({"seq": len(self._entries), "kind": kind, **info})

    @property
    def entries(self) -> tuple[TranscriptEntry, ...]:
        return tuple(self._entries)

    @property
    def notes(self) -> tuple[dict, ...]:
        return tuple(self._notes)

    def __len__(self):
        return len(self._entries)

    def to_jsonl(self) -> str:
        lines = [json.dumps({"note": n}, sort_keys=True) for n in self._notes]
        lines += [json.dumps(e.to_dict(), sort_keys=True) for e in self._entries]
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_jsonl())


@dataclass
class CostReport:
    ciphertexts_sent: dict = field(default_factory=lambda: defaultdict(int))
    ciphertexts_received: dict = field(default_factory=lambda: defaultdict(int))
    bytes_sent: dict = field(default_factory=lambda: defaultdict(int))
    bytes_received: dict = field(default_factory=lambda: defaultdict(int))
    phase_ms: dict = field(default_factory=lambda: defaultdict(float))
    config: dict = field(default_factory=dict)

    def record(self, sender: str, receiver: str, n_ct: int, size: int) -> None:
        self.ciphertexts_sent[sender] += n_ct
        self.ciphertexts_received[receiver] += n_ct
        self.bytes_sent[sender] += size
        self.bytes_received[receiver] += size

    def role_bytes(self, role: str) -> int:
        return self.bytes_sent.get(role, 0) + self.bytes_received.get(role, 0)

    def role_ciphertexts(self, role: str) -> int:
        return self.ciphertexts_sent.get(role, 0) + self.ciphertexts_received.get(role, 0)

    @property
    def client_roles(self) -> list[str]:
        roles = set(self.bytes_sent) | set(self.bytes_received)
        return sorted(r for r in roles if r != AGGREGATOR)

    @property
    def client_bytes(self) -> int:
        """Traffic of the busiest single client (all clients are symmetric)."""
        return max((self.role_bytes(r) for r in self.client_roles), default=0)

    @property
    def client_ciphertexts(self) -> int:
        return max((self.role_ciphertexts(r) for r in self.client_roles), default=0)

    @property
    def server_bytes(self) -> int:
        return self.role_bytes(AGGREGATOR)

    @property
    def server_ciphertexts(self) -> int:
        return self.role_ciphertexts(AGGREGATOR)

    @contextmanager
    def phase(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.phase_ms[name] += (time.perf_counter() - t0) * 1000.0

    def to_dict(self) -> dict:
        return {
            "ciphertexts_sent": dict(self.ciphertexts_sent),
            "ciphertexts_received": dict(self.ciphertexts_received),
            "bytes_sent": dict(self.bytes_sent),
            "bytes_received": dict(self.bytes_received),
            "client_bytes": self.client_bytes,
            "server_bytes": self.server_bytes,
            "client_ciphertexts": self.client_ciphertexts,
            "server_ciphertexts": self.server_ciphertexts,
            "phase_ms": dict(self.phase_ms),
            "config": dict(self.config),
        }


class MessageBus:
    """Delivers dataclass messages, round-tripping every ciphertext through bytes.

    Messages addressed to the aggregator may only carry ciphertexts and
    integer identifiers.
    """

    def __init__(self, transcript: Transcript | None = None, cost: CostReport | None = None):
        self.transcript = transcript if transcript is not None else Transcript()
        self.cost = cost if cost is not None else CostReport()

    def send(self, sender: str, receiver: str, message):
        kind = type(message).__name__
        values = {}
        n_ct = size = wire = 0
        for f in dataclasses.fields(message):
            v = getattr(message, f.name)
            if isinstance(v, CipherVector):
                blob = backend_of(v).serialize(v)
                values[f.name] = deserialize(blob)
                n_ct += 1
                size += v.serialized_size
                wire += len(blob)
            elif receiver == AGGREGATOR and not (isinstance(v, int) and f.name == "party_id"):
                raise RoleViolation(f"{kind}.{f.name} is not a ciphertext; refusing to deliver it to the aggregator")
            else:
                values[f.name] = v
        self.transcript.append(sender, receiver, kind, n_ct, size, wire)
        self.cost.record(sender, receiver, n_ct, size)
        return type(message)(**values)
