import csv
import itertools
import json
import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import make_scores, split_parties
from fedauc.adversary import (
    ATTACK_KINDS,
    AdversarialAggregator,
    AttackStrategy,
    DetectionReport,
    detection_log2,
    detection_probability,
    multiplier_guess_probability,
    run_attack_experiment,
    slot_guess_evasion,
    write_reports,
)
from fedauc.errors import InvalidConfig
from fedauc.he import HeParams, PublicKey, get_backend
from fedauc.metrics import make_grid
from fedauc.protocol.malicious import MaliciousConfig


@pytest.fixture(scope="module")
def small_setup():
    rng = np.random.default_rng(5)
    s, y = make_scores(rng, 600)
    ds = split_parties(rng, s, y, 3)
    kp = get_backend("exact").keygen(HeParams(ring_dimension=256), seed=1)
    return ds, MaliciousConfig(make_grid(20), split_count=3), kp


# -- analytics --------------------------------------------------------------------

def test_detection_probability_reference_points():
    assert abs(detection_log2(100, 4) - -60) <= 1
    assert abs(detection_log2(100, 7) - -107) <= 1
    assert abs(math.log2(detection_probability(100, 4)) - -60) <= 1


def test_detection_probability_tiny_exact():
    assert Fraction(detection_probability(2, 2)).limit_denominator(1000) == Fraction(1, 36)


def test_detection_probability_matches_enumeration():
    # the aggregator must name the S positions of one share group, in each of two runs
    for N, S in [(2, 2), (3, 2), (2, 3)]:
        guesses = list(itertools.combinations(range(S * N), S))
        target = tuple(range(S))
        hits = sum(g == target for g in guesses)
        assert detection_probability(N, S) == pytest.approx(float(Fraction(hits, len(guesses)) ** 2), rel=1e-12)


def test_detection_probability_decreasing_in_s():
    vals = [detection_log2(100, s) for s in range(2, 11)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_detection_probability_large_is_finite():
    assert 0 < detection_probability(1000, 4) < 2.0**-80
    with pytest.raises(InvalidConfig):
        detection_probability(0, 4)


def test_multiplier_guess_examples():
    assert multiplier_guess_probability(32, 6) == 2.0**-192
    assert multiplier_guess_probability(1, 1) == 0.5
    assert multiplier_guess_probability(8, 2) == 2.0**-16
    with pytest.raises(InvalidConfig):
        multiplier_guess_probability(0, 3)


# -- strategies -------------------------------------------------------------------

def test_strategy_validation():
    with pytest.raises(InvalidConfig):
        AttackStrategy("bribe_client")
    with pytest.raises(InvalidConfig):
        AttackStrategy("scale_result", {"secret_key": 1})
    with pytest.raises(InvalidConfig):
        AttackStrategy("scale_result", {"shift": 2})
    with pytest.raises(InvalidConfig):
        AttackStrategy("cross_run_replay", runs=(1,))
    s = AttackStrategy("drop_party")
    assert s.runs == (1, 2)
    assert "drop_party" in s.describe()


def test_adversary_holds_public_key_only(small_setup):
    _, _, kp = small_setup
    adv = AdversarialAggregator(AttackStrategy("scale_result"), kp.public_key, np.random.default_rng(0))
    assert isinstance(adv.pk, PublicKey)
    assert not any(getattr(adv, k, None) is kp.private_key for k in vars(adv))


def test_identity_is_never_detected(small_setup):
    ds, cfg, kp = small_setup
    rep = run_attack_experiment(AttackStrategy.identity(), ds, cfg, 30, kp)
    assert rep.detected == 0 and rep.soundness_violations == 0 and rep.effective == 0


@pytest.mark.parametrize("kind", ATTACK_KINDS)
def test_every_attack_detected(small_setup, kind):
    ds, cfg, kp = small_setup
    rep = run_attack_experiment(AttackStrategy(kind, seed=3), ds, cfg, 40, kp, seed=1)
    assert rep.detection_rate == 1.0
    assert rep.soundness_violations == 0
    assert rep.config == (20, 3, 3)


def test_scale_result_run_one_only(small_setup):
    ds, cfg, kp = small_setup
    rep = run_attack_experiment(AttackStrategy("scale_result", {"factor": 1.01}, runs=(1,)), ds, cfg, 100, kp)
    assert rep.detected == 100


def test_drop_party_both_runs_gives_garbage(small_setup):
    ds, cfg, kp = small_setup
    rep = run_attack_experiment(AttackStrategy("drop_party", {"party": 0}), ds, cfg, 40, kp)
    assert rep.detected == 40 and rep.effective == 40


def test_attack_deterministic(small_setup):
    ds, cfg, kp = small_setup
    a = run_attack_experiment(AttackStrategy("reorder_slots", seed=2), ds, cfg, 10, kp, seed=4)
    b = run_attack_experiment(AttackStrategy("reorder_slots", seed=2), ds, cfg, 10, kp, seed=4)
    assert a.to_row() == b.to_row()


def test_report_invariant():
    with pytest.raises(ValueError):
        DetectionReport(3, 4, AttackStrategy.identity(), (2, 2, 2))
    assert DetectionReport(0, 0, AttackStrategy.identity(), (2, 2, 2)).detection_rate == 0.0


def test_slot_guess_evasion_rate():
    evaded, trials = slot_guess_evasion(3000, seed=7)
    p = detection_probability(2, 2)
    se = math.sqrt(trials * p * (1 - p))
    assert abs(evaded - trials * p) <= 3 * se


def test_write_reports(tmp_path, small_setup):
    ds, cfg, kp = small_setup
    reps = [run_attack_experiment(AttackStrategy(k), ds, cfg, 2, kp) for k in ("scale_result", "drop_party")]
    rows = list(csv.DictReader(open(write_reports(reps, tmp_path / "r.csv"))))
    assert [r["strategy"] for r in rows] == ["scale_result", "drop_party"]
    assert rows[0]["detected"] == "2"
    data = json.loads(write_reports(reps, tmp_path / "r.json", "json").read_text())
    assert data[1]["runs"] == "12"
    with pytest.raises(InvalidConfig):
        write_reports(reps, tmp_path / "r.x", "xml")
