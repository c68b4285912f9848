"""Scenario configuration, execution and parameter sweeps."""

from __future__ import annotations

import csv
import itertools
import json
import logging
import os
import typing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from fedauc.errors import InvalidConfig, VerificationFailed
from fedauc.he.base import HeParams
from fedauc.io import PartitionSpec, ingest, partition, synth
from fedauc.metrics import local_counts, make_grid, sum_counts, trapezoid_auc
from fedauc.protocol import malicious as mal
from fedauc.protocol import semihonest as sh
from fedauc.sim.bus import AGGREGATOR, CostReport, MessageBus, Transcript, client_role
from fedauc.sim.roles import PartyRegistry, trusted_setup

log = logging.getLogger(__name__)

PROTOCOLS = ("semi_honest", "malicious", "dp_baseline", "exact_oracle")
PHASES = ("client_prep", "aggregation", "blind", "finalize")
RESULT_COLUMNS = (
    "scenario_id", "protocol", "backend", "M", "N", "S", "epsilon", "auc", "auc_prime", "accepted",
    "client_bytes", "server_bytes", *(f"phase_ms_{p}" for p in PHASES), "status",
)
SEED_ENV = "FEDAUC_SEED"

# independent streams derived from the scenario seed
_DATA, _PARTITION, _SETUP, _PROTOCOL, _ATTACK = range(5)


def derive_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, stream]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class ScenarioConfig:
    protocol: str = "semi_honest"
    backend: str = "exact"
    parties: int = 15
    decision_points: int = 100
    splits: int = 4
    epsilon: float | None = None
    data: str | None = None
    synth: int = 10_000
    pos_fraction: float = 0.5
    separation: float = 0.6
    partition: str = "uniform_random"
    seed: int = 0
    ring_dimension: int = 2**14
    noise_std: float = 1e-9
    scale_bits: int = 50
    mult_depth: int = 2
    message_bits: int = 128
    security_bits: int = 128
    mask_bits: int = mal.DEFAULT_MASK_BITS
    attack: str | None = None
    scenario_id: str = ""

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise InvalidConfig(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.parties < 2:
            raise InvalidConfig(f"need at least 2 parties, got {self.parties}")
        if self.decision_points < 2:
            raise InvalidConfig("need at least 2 decision points")
        if self.protocol == "malicious" and self.splits < 2:
            raise InvalidConfig("malicious protocol needs splits >= 2")
        if self.protocol == "dp_baseline" and not (self.epsilon and self.epsilon > 0):
            raise InvalidConfig("dp_baseline needs epsilon > 0")
        if self.attack is not None and self.protocol != "malicious":
            raise InvalidConfig("attacks apply to the malicious protocol only")
        if self.data is None and self.synth < 2:
            raise InvalidConfig("synth count must be >= 2")
        if not self.scenario_id:
            sid = f"{self.protocol}-{self.backend}-M{self.parties}-N{self.decision_points}"
            if self.protocol == "malicious":
                sid += f"-S{self.splits}"
            if self.protocol == "dp_baseline":
                sid += f"-eps{self.epsilon:g}"
            if self.attack:
                sid += f"-{self.attack}"
            object.__setattr__(self, "scenario_id", f"{sid}-seed{self.seed}")

    @property
    def he_params(self) -> HeParams:
        return HeParams(ring_dimension=self.ring_dimension, scale_bits=self.scale_bits,
                        security_bits=self.security_bits, noise_std=self.noise_std,
                        mult_depth=self.mult_depth, message_bits=self.message_bits)

    def echo(self) -> dict:
        return {"M": self.parties, "N": self.decision_points, "S": self.splits, "backend": self.backend,
                "protocol": self.protocol, "seed": self.seed}

    @classmethod
    def from_mapping(cls, mapping: dict, env: dict | None = None) -> "ScenarioConfig":
        """Build from string or typed values; ``FEDAUC_SEED`` in ``env`` overrides the seed."""
        env = os.environ if env is None else env
        hints = typing.get_type_hints(cls)
        kw = {}
        for key, raw in mapping.items():
            key = key.replace("-", "_")
            if key not in hints:
                raise InvalidConfig(f"unknown config key {key!r}")
            kw[key] = _coerce(key, raw, hints[key])
        if env.get(SEED_ENV):
            kw["seed"] = _coerce("seed", env[SEED_ENV], int)
        return cls(**kw)


def _coerce(key: str, raw, hint):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    args = typing.get_args(hint)
    optional = type(None) in args
    if optional and text.lower() in ("", "none", "null"):
        return None
    base = next((a for a in args if a is not type(None)), hint) if args else hint
    try:
        if base is int:
            return int(text, 0) if not text.lower().startswith("2**") else 2 ** int(text[3:])
        if base is float:
            return float(text)
    except ValueError:
        raise InvalidConfig(f"{key}: cannot parse {raw!r} as {base.__name__}") from None
    return text


def parse_config_text(text: str) -> dict[str, list[str]]:
    """Parse ``key = value`` lines; ``#`` starts a comment, commas give value lists."""
    out: dict[str, list[str]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise InvalidConfig(f"line {lineno}: empty key")
        out[key] = [v.strip() for v in value.split(",")]
    return out


def expand_grid(spec: dict[str, list], env: dict | None = None) -> list[ScenarioConfig]:
    """Cartesian product of list-valued keys, one config per combination."""
    keys = list(spec)
    values = [v if isinstance(v, (list, tuple)) else [v] for v in spec.values()]
    return [ScenarioConfig.from_mapping(dict(zip(keys, combo)), env) for combo in itertools.product(*values)]


def load_configs(path, env: dict | None = None) -> list[ScenarioConfig]:
    return expand_grid(parse_config_text(Path(path).read_text()), env)


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    auc: float
    auc_prime: float | None
    accepted: bool | None
    reference_auc: float
    cost: CostReport
    transcript: Transcript
    extra: dict = field(default_factory=dict)

    def row(self, status: str = "ok") -> dict:
        c = self.config
        r = {
            "scenario_id": c.scenario_id, "protocol": c.protocol, "backend": c.backend,
            "M": c.parties, "N": c.decision_points, "S": c.splits,
            "epsilon": "" if c.epsilon is None else c.epsilon,
            "auc": repr(float(self.auc)),
            "auc_prime": "" if self.auc_prime is None else repr(float(self.auc_prime)),
            "accepted": "" if self.accepted is None else str(self.accepted).lower(),
            "client_bytes": self.cost.client_bytes, "server_bytes": self.cost.server_bytes,
        }
        for p in PHASES:
            r[f"phase_ms_{p}"] = round(self.cost.phase_ms.get(p, 0.0), 3)
        r["status"] = status
        return r


def _load_datasets(cfg: ScenarioConfig):
    if cfg.data is not None:
        samples = ingest(cfg.data)
    else:
        samples = synth(cfg.synth, cfg.pos_fraction, cfg.separation, seed=derive_seed(cfg.seed, _DATA))
    spec = PartitionSpec.parse(cfg.partition, seed=derive_seed(cfg.seed, _PARTITION))
    return partition(samples, cfg.parties, spec)


def _run_semi_honest(cfg, registry, setup, grid, bus: MessageBus, rng):
    cost = bus.cost
    received = []
    for p in registry.parties:
        with cost.phase("client_prep"):
            sub = sh.client_prepare(p.dataset, grid, setup.client_keys(p.party_id).public_key, rng)
        received.append(bus.send(client_role(p.party_id), AGGREGATOR, sub))
    with cost.phase("aggregation"):
        num, denom = sh.compute_num_denom(*sh.aggregate(received), width=grid.n_points - 1)
    with cost.phase("blind"):
        out, _ = sh.blind(num, denom, rng)
    aucs = []
    for p in registry.parties:
        msg = bus.send(AGGREGATOR, client_role(p.party_id), out)
        with cost.phase("finalize"):
            aucs.append(sh.client_finalize(msg, setup.client_keys(p.party_id).private_key))
    return aucs[0], None, None


def _malicious_once(cfg, registry, setup, counts, bus: MessageBus, rng, aggregator):
    cost = bus.cost
    mcfg = mal.MaliciousConfig(make_grid(cfg.decision_points), cfg.splits, mask_bits=cfg.mask_bits)
    with cost.phase("client_prep"):
        cr = mcfg.randomness(registry.M, rng)
    received = []
    for idx, p in enumerate(registry.parties):
        with cost.phase("client_prep"):
            sub = mal.client_mask_split(counts[idx], cr, idx, setup.client_keys(p.party_id).public_key, rng)
        received.append(bus.send(client_role(p.party_id), AGGREGATOR, sub))
    if aggregator is None:
        with cost.phase("aggregation"):
            t_all, f_all, dt, df = mal.aggregator_sum(received)
            inner, dd = mal.aggregator_products(t_all, f_all, dt, df, cr.width)
        with cost.phase("blind"):
            out = mal.aggregator_blind(inner, dd, sh.draw_mask(rng, mcfg.blind_log2))
    else:
        with cost.phase("aggregation"):
            out = aggregator(received, cr.width, rng)
    aucs = []
    for p in registry.parties:
        msg = bus.send(AGGREGATOR, client_role(p.party_id), out)
        with cost.phase("finalize"):
            aucs.append(mal.client_unmask(mal.decrypt_run(msg, setup.client_keys(p.party_id).private_key), cr))
    return aucs[0]


def _run_malicious(cfg, registry, setup, grid, bus: MessageBus, rng):
    counts = [local_counts(p.dataset, grid) for p in registry.parties]
    aggregator = None
    if cfg.attack:
        from fedauc.adversary import AdversarialAggregator, AttackStrategy

        strategy = AttackStrategy(cfg.attack, seed=cfg.seed)
        aggregator = AdversarialAggregator(strategy, setup.aggregator_keys().public_key,
                                           np.random.default_rng(derive_seed(cfg.seed, _ATTACK)))
    first = _malicious_once(cfg, registry, setup, counts, bus, rng, aggregator)
    second = _malicious_once(cfg, registry, setup, counts, bus, rng, aggregator)
    verdict = mal.verify(first, second, mal.default_tolerance(cfg.backend))
    if not verdict.accepted:
        log.warning("%s: verification rejected (%r vs %r)", cfg.scenario_id, first, second)
        err = VerificationFailed(first, second, verdict.tolerance)
        err.transcript = bus.transcript
        err.cost = bus.cost
        raise err
    return verdict.auc, verdict.auc_prime, True


def _run_dp(cfg, registry, grid, cost: CostReport, rng):
    from fedauc.dp import DpConfig, dp_aggregate_auc, dp_client_stats

    dcfg = DpConfig(cfg.epsilon, cfg.decision_points)
    noisy = []
    with cost.phase("client_prep"):
        for p in registry.parties:
            c = local_counts(p.dataset, grid)
            noisy.append(dp_client_stats(c, c.total_positive, c.total_negative, dcfg, rng))
    with cost.phase("aggregation"):
        auc = dp_aggregate_auc(noisy)
    return auc, None, None


def run_scenario(config: ScenarioConfig) -> ScenarioResult:
    """Execute one scenario end to end.

    Raises the underlying protocol error on failure; a rejected malicious run
    raises :class:`VerificationFailed` with ``transcript`` and ``cost`` attached.
    """
    cfg = config
    grid = make_grid(cfg.decision_points)
    datasets = _load_datasets(cfg)
    registry = PartyRegistry.from_datasets(datasets)
    registry.require_protocol_ready()
    reference = trapezoid_auc(sum_counts(local_counts(d, grid) for d in datasets))
    transcript = Transcript()
    cost = CostReport(config=cfg.echo())
    bus = MessageBus(transcript, cost)
    rng = np.random.default_rng(derive_seed(cfg.seed, _PROTOCOL))

    if cfg.protocol == "exact_oracle":
        auc, auc_prime, accepted = reference, None, None
    elif cfg.protocol == "dp_baseline":
        auc, auc_prime, accepted = _run_dp(cfg, registry, grid, cost, rng)
    else:
        setup = trusted_setup(registry, cfg.he_params, cfg.backend,
                              seed=derive_seed(cfg.seed, _SETUP), transcript=transcript)
        runner = _run_semi_honest if cfg.protocol == "semi_honest" else _run_malicious
        auc, auc_prime, accepted = runner(cfg, registry, setup, grid, bus, rng)
    log.info("%s: auc=%.10f", cfg.scenario_id, auc)
    return ScenarioResult(cfg, float(auc), auc_prime, accepted, reference, cost, transcript)


def _failure_row(cfg: ScenarioConfig, exc: Exception) -> dict:
    row = dict.fromkeys(RESULT_COLUMNS, "")
    row.update(scenario_id=cfg.scenario_id, protocol=cfg.protocol, backend=cfg.backend, M=cfg.parties,
               N=cfg.decision_points, S=cfg.splits, epsilon="" if cfg.epsilon is None else cfg.epsilon)
    if isinstance(exc, VerificationFailed):
        row.update(auc=repr(exc.auc), auc_prime=repr(exc.auc_prime), accepted="false")
        cost = getattr(exc, "cost", None)
        if cost is not None:
            row.update(client_bytes=cost.client_bytes, server_bytes=cost.server_bytes)
    row["status"] = f"error:{type(exc).__name__}"
    return row


def _row_for(cfg: ScenarioConfig) -> dict:
    try:
        return run_scenario(cfg).row()
    except Exception as exc:  # recorded per row; the sweep goes on
        log.error("%s failed: %s", cfg.scenario_id, exc)
        return _failure_row(cfg, exc)


def sweep(configs, out=None, fmt: str = "csv", workers: int = 1) -> list[dict]:
    """Run every config and return one row per scenario; failures become rows too."""
    configs = list(configs)
    if not configs:
        raise InvalidConfig("sweep needs at least one config")
    if fmt not in ("csv", "json"):
        raise InvalidConfig(f"unknown format {fmt!r}")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_row_for, configs))
    else:
        rows = [_row_for(c) for c in configs]
    if out is not None:
        write_rows(rows, out, fmt)
    return rows


def write_rows(rows, out, fmt: str = "csv") -> Path:
    path = Path(out)
    if fmt == "json":
        path.write_text(json.dumps(list(rows), indent=2) + "\n")
    else:
        with path.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(RESULT_COLUMNS))
            w.writeheader()
            w.writerows(rows)
    return path


def linear_fit_r2(x, y) -> tuple[float, float]:
    """Slope and coefficient of determination of a least-squares line."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, icept = np.polyfit(x, y, 1)
    ss_res = float(np.sum((y - (slope * x + icept)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return float(slope), 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot


__all__ = [
    "PROTOCOLS", "RESULT_COLUMNS", "ScenarioConfig", "ScenarioResult", "run_scenario", "sweep",
    "parse_config_text", "expand_grid", "load_configs", "write_rows", "derive_seed", "linear_fit_r2",
]
