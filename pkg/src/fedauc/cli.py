"""Command-line entry point: ``fedauc {run,sweep,attack,dp,gen}``.

Exit status is 0 on success, 2 on usage or configuration errors and 1 when a
scenario fails (including a rejected verification).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from fedauc.errors import FedAucError, InvalidConfig, VerificationFailed

log = logging.getLogger("fedauc.cli")

USAGE_ERROR = 2
SCENARIO_ERROR = 1

# CLI flag -> ScenarioConfig key
_SCENARIO_FLAGS = {
    "protocol": "protocol", "backend": "backend", "parties": "parties",
    "decision_points": "decision_points", "splits": "splits", "epsilon": "epsilon",
    "data": "data", "synth": "synth", "seed": "seed", "partition": "partition",
    "ring_dimension": "ring_dimension", "noise_std": "noise_std", "attack": "attack",
}


class _UsageError(Exception):
    pass


class _ScenarioFailure(Exception):
    """Error raised while a valid scenario was executing."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _scenario_args(p: argparse.ArgumentParser, multi: bool = False) -> None:
    kind = str if multi else None
    p.add_argument("--config", help="key = value scenario file")
    p.add_argument("--protocol", help="semi_honest, malicious, dp_baseline or exact_oracle")
    p.add_argument("--backend", help="exact, noisy or ckks")
    p.add_argument("--parties", type=kind or int)
    p.add_argument("--decision-points", type=kind or int)
    p.add_argument("--splits", type=kind or int)
    p.add_argument("--epsilon", type=kind or float)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--data", help="score,label CSV")
    src.add_argument("--synth", type=kind or int, help="synthetic sample count")
    p.add_argument("--partition", help="uniform_random, contiguous or label_skew(alpha)")
    p.add_argument("--seed", type=kind or int)
    p.add_argument("--ring-dimension", type=kind or int)
    p.add_argument("--noise-std", type=kind or float)
    p.add_argument("--attack", help="substitute an adversarial aggregator (malicious only)")
    p.add_argument("--out", default="-", help="result table path; '-' for stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fedauc", description="Privacy-preserving federated AUC simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run one scenario")
    _scenario_args(run)
    run.add_argument("--transcript", help="write the message transcript as JSON lines")
    run.add_argument("--cost", help="write the full cost report as JSON")

    sw = sub.add_parser("sweep", help="run a grid of scenarios (comma-separated values expand)")
    _scenario_args(sw, multi=True)
    sw.add_argument("--workers", type=int, default=1)

    at = sub.add_parser("attack", help="adversarial-aggregator detection experiments")
    at.add_argument("--strategy", default="all", help="attack kind or 'all'")
    at.add_argument("--trials", type=int, default=100)
    at.add_argument("--backend", default="exact")
    at.add_argument("--parties", type=int, default=3)
    at.add_argument("--decision-points", type=int, default=100)
    at.add_argument("--splits", type=int, default=4)
    at.add_argument("--synth", type=int, default=1000)
    at.add_argument("--seed", type=int, default=0)
    at.add_argument("--out", default="-")
    at.add_argument("--format", choices=("csv", "json"), default="csv")

    dp = sub.add_parser("dp", help="Laplace baseline trials")
    dp.add_argument("--epsilon", type=float, required=True)
    dp.add_argument("--trials", type=int, default=100)
    dp.add_argument("--parties", type=int, default=15)
    dp.add_argument("--decision-points", type=int, default=100)
    src = dp.add_mutually_exclusive_group()
    src.add_argument("--data")
    src.add_argument("--synth", type=int, default=10_000)
    dp.add_argument("--seed", type=int, default=0)
    dp.add_argument("--out", default="-")
    dp.add_argument("--format", choices=("csv", "json"), default="csv")

    gen = sub.add_parser("gen", help="write a synthetic score file")
    gen.add_argument("--synth", type=int, required=True, help="sample count")
    gen.add_argument("--pos-fraction", type=float, default=0.5)
    gen.add_argument("--separation", type=float, default=0.6)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    return parser


def _check_parties(value) -> None:
    for v in str(value).split(","):
        if int(v) < 2:
            raise _UsageError(f"--parties must be >= 2, got {v}")


def _scenario_mapping(args) -> dict:
    from fedauc.sim.runner import parse_config_text

    spec: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                spec.update(parse_config_text(fh.read()))
        except OSError as exc:
            raise _UsageError(f"cannot read config: {exc}") from None
    for flag, key in _SCENARIO_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            spec[key] = [s.strip() for s in v.split(",")] if isinstance(v, str) and flag != "data" else [v]
    if "parties" in spec:
        for v in spec["parties"]:
            _check_parties(v)
    return spec


def _emit(rows, out: str, fmt: str, columns=None) -> None:
    import csv

    rows = list(rows)
    cols = list(columns or (rows[0] if rows else []))
    fh = sys.stdout if out == "-" else open(out, "w", newline="")
    try:
        if fmt == "json":
            fh.write(json.dumps(rows, indent=2) + "\n")
        else:
            w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()


def _cmd_run(args) -> int:
    from fedauc.sim.runner import RESULT_COLUMNS, expand_grid, run_scenario

    configs = expand_grid(_scenario_mapping(args))
    if len(configs) != 1:
        raise _UsageError("run takes a single scenario; use sweep for value lists")
    cfg = configs[0]
    try:
        result = run_scenario(cfg)
    except VerificationFailed as exc:
        print(f"verification FAILED: auc={exc.auc!r} auc_prime={exc.auc_prime!r}", file=sys.stderr)
        if args.transcript and getattr(exc, "transcript", None) is not None:
            exc.transcript.write(args.transcript)
        return SCENARIO_ERROR
    except FedAucError as exc:
        raise _ScenarioFailure(exc) from exc
    print(f"AUC {result.auc!r}", file=sys.stderr if args.out == "-" else sys.stdout)
    _emit([result.row()], args.out, args.format, RESULT_COLUMNS)
    if args.transcript:
        result.transcript.write(args.transcript)
    if args.cost:
        with open(args.cost, "w") as fh:
            json.dump(result.cost.to_dict(), fh, indent=2, sort_keys=True)
    return 0


def _cmd_sweep(args) -> int:
    from fedauc.sim.runner import RESULT_COLUMNS, expand_grid, sweep

    configs = expand_grid(_scenario_mapping(args))
    rows = sweep(configs, workers=args.workers)
    _emit(rows, args.out, args.format, RESULT_COLUMNS)
    failed = [r for r in rows if r["status"] != "ok"]
    for r in failed:
        print(f"{r['scenario_id']}: {r['status']}", file=sys.stderr)
    return SCENARIO_ERROR if failed else 0


def _datasets(args, M: int):
    from fedauc.io import PartitionSpec, ingest, partition, synth
    from fedauc.sim.runner import derive_seed

    data = getattr(args, "data", None)
    samples = ingest(data) if data else synth(args.synth, seed=derive_seed(args.seed, 0))
    return partition(samples, M, PartitionSpec(seed=derive_seed(args.seed, 1)))


def _cmd_attack(args) -> int:
    from fedauc.adversary import ATTACK_KINDS, AttackStrategy, run_attack_experiment
    from fedauc.he.base import HeParams, get_backend
    from fedauc.metrics import make_grid
    from fedauc.protocol.malicious import MaliciousConfig

    _check_parties(args.parties)
    kinds = ATTACK_KINDS if args.strategy == "all" else tuple(s.strip() for s in args.strategy.split(","))
    strategies = [AttackStrategy(k, seed=args.seed) for k in kinds]
    if args.trials < 1:
        raise _UsageError("--trials must be >= 1")
    datasets = _datasets(args, args.parties)
    cfg = MaliciousConfig(make_grid(args.decision_points), split_count=args.splits)
    kp = get_backend(args.backend).keygen(HeParams(), seed=args.seed)
    try:
        reports = [run_attack_experiment(s, datasets, cfg, args.trials, kp, seed=args.seed) for s in strategies]
    except FedAucError as exc:
        raise _ScenarioFailure(exc) from exc
    rows = [r.to_row() for r in reports]
    _emit(rows, args.out, args.format)
    for r in reports:
        print(f"{r.strategy.kind}: detection rate {r.detection_rate:.4f} "
              f"({r.detected}/{r.trials}), soundness violations {r.soundness_violations}", file=sys.stderr)
    return SCENARIO_ERROR if any(r.soundness_violations for r in reports) else 0


def _cmd_dp(args) -> int:
    from fedauc.dp import DpConfig, dp_trial_values
    from fedauc.metrics import local_counts, make_grid, sum_counts, trapezoid_auc

    _check_parties(args.parties)
    if args.trials < 2:
        raise _UsageError("--trials must be >= 2")
    cfg = DpConfig(args.epsilon, args.decision_points)
    datasets = _datasets(args, args.parties)
    try:
        vals = dp_trial_values(datasets, cfg, args.trials, seed=args.seed)
    except FedAucError as exc:
        raise _ScenarioFailure(exc) from exc
    clean = trapezoid_auc(sum_counts(local_counts(d, make_grid(args.decision_points)) for d in datasets))
    row = {"epsilon": args.epsilon, "M": args.parties, "N": args.decision_points,
           "samples": sum(len(d) for d in datasets), "trials": args.trials,
           "mean": repr(float(vals.mean())), "std": repr(float(vals.std(ddof=1))), "clean_auc": repr(clean)}
    _emit([row], args.out, args.format)
    return 0


def _cmd_gen(args) -> int:
    from fedauc.io import synth, write_scores

    data = synth(args.synth, args.pos_fraction, args.separation, seed=args.seed)
    write_scores(args.out, data.scores, data.labels)
    print(f"wrote {len(data)} samples to {args.out}", file=sys.stderr)
    return 0


_COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "attack": _cmd_attack, "dp": _cmd_dp, "gen": _cmd_gen}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return USAGE_ERROR
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except _ScenarioFailure as exc:
        err = exc.__cause__
        print(f"fedauc: {type(err).__name__}: {err}", file=sys.stderr)
        return SCENARIO_ERROR
    except (_UsageError, InvalidConfig) as exc:
        print(f"fedauc: usage error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (FedAucError, OSError) as exc:
        print(f"fedauc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return SCENARIO_ERROR


if __name__ == "__main__":
    sys.exit(main())
