import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fedauc import _core
from fedauc.he.ckks import CkksContext, is_prime, ntt_primes
from fedauc.he import HeParams

IMPLS = _core.implementations()


def schoolbook_negacyclic(a, b, q):
    n = len(a)
    out = [0] * n
    for i in range(n):
        for j in range(n):
            k = i + j
            if k < n:
                out[k] += a[i] * b[j]
            else:
                out[k - n] -= a[i] * b[j]
    return [x % q for x in out]


@pytest.fixture(scope="module")
def ctx():
    return CkksContext(HeParams(ring_dimension=64, security_bits=0))


def test_compiled_extension_selected():
    # the build is expected to ship the extension; the fallback is still tested below
    assert _core.IMPLEMENTATION in ("cython", "numpy")
    assert "numpy" in IMPLS


def test_prime_search():
    ps = ntt_primes(2048, 2**31 - 1, 3, descending=True)
    assert all(is_prime(p) and p % 2048 == 1 and p < 2**31 for p in ps)
    assert not is_prime(2**31 - 1 - 2)
    assert is_prime(2**31 - 1)


@pytest.mark.parametrize("impl", sorted(IMPLS))
def test_ntt_matches_schoolbook(ctx, impl):
    mod = IMPLS[impl]
    rng = np.random.default_rng(0)
    idx = (0, 1, len(ctx.chain) - 1)
    q, psi, psis, pinv, pinvs, ninv, ninvs = ctx.stacked(idx)
    a = np.stack([rng.integers(0, int(x), ctx.n, dtype=np.uint64) for x in q])
    b = np.stack([rng.integers(0, int(x), ctx.n, dtype=np.uint64) for x in q])
    fa = mod.ntt_forward(a.copy(), q, psi, psis)
    fb = mod.ntt_forward(b.copy(), q, psi, psis)
    prod = mod.ntt_inverse(mod.mul_pointwise(fa, fb, q), q, pinv, pinvs, ninv, ninvs)
    for row, qq in enumerate(q.tolist()):
        want = schoolbook_negacyclic(a[row].tolist(), b[row].tolist(), qq)
        assert prod[row].tolist() == want


@pytest.mark.parametrize("impl", sorted(IMPLS))
def test_ntt_round_trip(ctx, impl):
    mod = IMPLS[impl]
    idx = tuple(range(len(ctx.primes)))
    q, psi, psis, pinv, pinvs, ninv, ninvs = ctx.stacked(idx)
    a = np.stack([np.random.default_rng(1).integers(0, int(x), ctx.n, dtype=np.uint64) for x in q])
    back = mod.ntt_inverse(mod.ntt_forward(a.copy(), q, psi, psis), q, pinv, pinvs, ninv, ninvs)
    assert np.array_equal(back, a)


@pytest.mark.skipif(len(IMPLS) < 2, reason="compiled kernels not built")
def test_implementations_bit_identical(ctx):
    py, cy = IMPLS["numpy"], IMPLS["cython"]
    rng = np.random.default_rng(2)
    idx = tuple(range(len(ctx.primes)))
    q, psi, psis, pinv, pinvs, ninv, ninvs = ctx.stacked(idx)
    a = np.stack([rng.integers(0, int(x), ctx.n, dtype=np.uint64) for x in q])
    b = np.stack([rng.integers(0, int(x), ctx.n, dtype=np.uint64) for x in q])
    assert np.array_equal(py.ntt_forward(a.copy(), q, psi, psis), cy.ntt_forward(a.copy(), q, psi, psis))
    assert np.array_equal(py.ntt_inverse(a.copy(), q, pinv, pinvs, ninv, ninvs),
                          cy.ntt_inverse(a.copy(), q, pinv, pinvs, ninv, ninvs))
    assert np.array_equal(py.mul_pointwise(a, b, q), cy.mul_pointwise(a, b, q))
    for g in (3, 5, 25, 2 * ctx.n - 1):
        assert np.array_equal(py.automorphism(a, g, q), cy.automorphism(a, g, q))


@pytest.mark.skipif(len(IMPLS) < 2, reason="compiled kernels not built")
@settings(max_examples=50, deadline=None)
@given(
    scores=st.lists(st.floats(0, 1), max_size=200),
    n=st.integers(2, 60),
    seed=st.integers(0, 2**31),
)
def test_histograms_bit_identical(scores, n, seed):
    labels = np.random.default_rng(seed).integers(0, 2, len(scores))
    asc = np.linspace(0, 1, n)[:-1]
    py = IMPLS["numpy"].label_histograms(np.array(scores), labels, asc)
    cy = IMPLS["cython"].label_histograms(np.array(scores), labels, asc)
    assert np.array_equal(py[0], cy[0]) and np.array_equal(py[1], cy[1])


def test_automorphism_matches_definition(ctx):
    q = ctx.moduli((0,))
    a = np.arange(ctx.n, dtype=np.uint64)[None, :]
    out = _core.automorphism(a, 5, q)
    p = int(q[0])
    for i in range(ctx.n):
        j = (5 * i) % (2 * ctx.n)
        want = i if j < ctx.n else (p - i) % p
        assert int(out[0, j % ctx.n]) == want
