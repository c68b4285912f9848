import numpy as np
import pytest

from fedauc.errors import DepthExhausted, ParamMismatch, UnsupportedParams
from fedauc.he import HeParams, deserialize, get_backend
from fedauc.he.ckks import CkksContext, HE_STANDARD_LOGQ

be = get_backend("ckks")
PARAMS = HeParams(ring_dimension=256, security_bits=0)


@pytest.fixture(scope="module")
def kp():
    return be.keygen(PARAMS, seed=5)


def dec(kp, ct):
    return be.decrypt(kp.private_key, ct).as_float()


def test_alias():
    assert get_backend("lattice") is be


def test_default_params_meet_128_bit_bound():
    ctx = CkksContext(HeParams())
    log_qp = sum(np.log2(ctx.primes))
    assert log_qp <= HE_STANDARD_LOGQ[128][16384]
    assert ctx.slots == 8192


def test_insecure_ring_rejected():
    with pytest.raises(UnsupportedParams):
        CkksContext(HeParams(ring_dimension=1024))


def test_round_trip(kp):
    x = np.random.default_rng(0).uniform(-50, 50, PARAMS.slot_count)
    assert np.abs(dec(kp, be.encrypt(kp.public_key, x)) - x).max() < 1e-8


def test_keygen_deterministic():
    a = be.keygen(PARAMS, seed=9)
    b = be.keygen(PARAMS, seed=9)
    assert a.public_key.key_id == b.public_key.key_id
    assert np.array_equal(a.public_key.material[0], b.public_key.material[0])


def test_homomorphic_ops(kp):
    rng = np.random.default_rng(1)
    x, y = rng.uniform(-10, 10, 128), rng.uniform(-10, 10, 128)
    ex, ey = be.encrypt(kp.public_key, x), be.encrypt(kp.public_key, y)
    assert np.abs(dec(kp, be.add_ct(ex, ey)) - (x + y)).max() < 1e-8
    prod = be.mul_ct(ex, ey)
    assert prod.level == 1
    assert np.abs(dec(kp, prod) - x * y).max() < 1e-7
    assert np.abs(dec(kp, be.mul_scalar(prod, 2)) - 2 * x * y).max() < 1e-7
    blinded = be.mul_scalar(prod, 12345.678)
    assert blinded.level == 0
    assert np.abs(dec(kp, blinded) / 12345.678 - x * y).max() < 1e-7
    plain = be.mul_plain(ex, y)
    assert np.abs(dec(kp, plain) - x * y).max() < 1e-7


def test_rotate_and_sum(kp):
    x = np.arange(PARAMS.slot_count, dtype=float)
    ct = be.encrypt(kp.public_key, x)
    assert np.abs(dec(kp, be.rotate(ct, 5)) - np.roll(x, -5)).max() < 1e-7
    for w in (1, 7, 64, 100, PARAMS.slot_count):
        got = dec(kp, be.sum_slots(ct, w))[0]
        assert got == pytest.approx(x[:w].sum(), abs=1e-6)


def test_depth_and_scale_rules(kp):
    ct = be.encrypt(kp.public_key, [1.0, 2.0])
    sq = be.mul_ct(be.mul_ct(ct, ct), ct)
    with pytest.raises(DepthExhausted):
        be.mul_ct(sq, sq)
    with pytest.raises(ParamMismatch):
        be.add_ct(ct, be.mul_ct(ct, be.mul_ct(ct, ct)))


def test_large_messages_keep_relative_precision(kp):
    x = np.full(4, 3.0e18)
    ct = be.mul_ct(be.encrypt(kp.public_key, x), be.encrypt(kp.public_key, x / 1e6))
    out = dec(kp, ct)[:4]
    np.testing.assert_allclose(out, x * x / 1e6, rtol=1e-12)


def test_serialize(kp):
    ct = be.mul_ct(be.encrypt(kp.public_key, [1.5, 2.5]), be.encrypt(kp.public_key, [2.0, 2.0]))
    blob = be.serialize(ct)
    back = deserialize(blob)
    assert np.array_equal(dec(kp, back), dec(kp, ct))
    assert ct.serialized_size == 2 * (len(CkksContext(PARAMS).base) + 2) * 256 * 8


def test_size_depends_only_on_params_and_level(kp):
    a = be.encrypt(kp.public_key, [1.0])
    b = be.encrypt(kp.public_key, np.full(PARAMS.slot_count, 1e12))
    assert a.serialized_size == b.serialized_size
    assert len(be.serialize(a)) == len(be.serialize(b))
