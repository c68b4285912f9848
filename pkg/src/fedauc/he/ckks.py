"""RNS-CKKS lattice backend.

A leveled CKKS scheme over ``Z[X]/(X^n + 1)`` with every modulus split into
NTT-friendly primes below 2**31, so residue products fit in 64 bits and the
hot loops run in :mod:`fedauc._core`.

Modulus chain, bottom to top:

* base primes (~31 bits) sized to hold ``message_bits + scale_bits`` bits,
* one pair of ~``scale_bits/2``-bit primes per multiplicative level; a
  rescale drops one pair, dividing the scale by roughly ``2**scale_bits``,
* special primes ``P`` used only inside hybrid key switching.

Key switching splits the chain into ``dnum`` digit groups and uses
CRT-idempotent gadget vectors, which keeps the same switching keys valid at
every level.  ``dnum`` is the smallest value for which ``log2(Q*P)`` stays
within the homomorphic-encryption standard's bound for the requested
security level (``security_bits=0`` skips the check, for small test rings).

Evaluation keys (relinearization and power-of-two rotations) are stored in
a backend-side key store indexed by key id, standing in for the server-side
key upload of a deployed system.
"""

from __future__ import annotations

import logging
import math
import struct
from fractions import Fraction
from functools import lru_cache

import numpy as np

from fedauc import _core
from fedauc.errors import ParamMismatch, UnsupportedParams
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
    register,
)
from fedauc.he.exact import key_id_for

log = logging.getLogger(__name__)

ERROR_STD = 3.2

# max log2(Q*P) for ternary secrets, classical attacks
HE_STANDARD_LOGQ = {
    128: {1024: 27, 2048: 54, 4096: 109, 8192: 218, 16384: 438, 32768: 881},
    192: {1024: 19, 2048: 37, 4096: 75, 8192: 152, 16384: 305, 32768: 611},
    256: {1024: 14, 2048: 29, 4096: 58, 8192: 118, 16384: 237, 32768: 476},
}

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def ntt_primes(two_n: int, start: int, count: int, descending: bool, exclude=()) -> list[int]:
    """``count`` primes ``q = 1 (mod two_n)`` walking away from ``start``."""
    out = []
    k = (start - 1) // two_n
    if not descending and k * two_n + 1 <= start:
        k += 1
    while len(out) < count:
        q = k * two_n + 1
        if q < two_n or q >= 2**31:
            raise UnsupportedParams("ran out of NTT-friendly primes below 2**31")
        if q not in exclude and is_prime(q):
            out.append(q)
        k += -1 if descending else 1
    return out


def primitive_root_2n(q: int, two_n: int) -> int:
    n = two_n // 2
    for g in range(2, q):
        psi = pow(g, (q - 1) // two_n, q)
        if pow(psi, n, q) == q - 1:
            return psi
    raise UnsupportedParams(f"no primitive {two_n}-th root of unity mod {q}")


def _bitrev(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    out = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        out |= ((idx >> b) & 1) << (bits - 1 - b)
    return out


class _PrimeTables:
    __slots__ = ("q", "psi_rev", "psi_rev_shoup", "psi_inv_rev", "psi_inv_rev_shoup",
                 "n_inv", "n_inv_shoup")

    def __init__(self, q: int, n: int):
        psi = primitive_root_2n(q, 2 * n)
        psi_inv = pow(psi, -1, q)
        rev = _bitrev(n)
        pw = np.empty(n, dtype=np.uint64)
        pw_inv = np.empty(n, dtype=np.uint64)
        x = y = 1
        for i in range(n):
            pw[i], pw_inv[i] = x, y
            x, y = x * psi % q, y * psi_inv % q
        self.q = q
        self.psi_rev = pw[rev]
        self.psi_inv_rev = pw_inv[rev]
        self.psi_rev_shoup = np.array([(int(w) << 32) // q for w in self.psi_rev], dtype=np.uint64)
        self.psi_inv_rev_shoup = np.array([(int(w) << 32) // q for w in self.psi_inv_rev], dtype=np.uint64)
        self.n_inv = pow(n, -1, q)
        self.n_inv_shoup = (self.n_inv << 32) // q


class CkksContext:
    """Moduli, NTT tables and encoding constants for one :class:`HeParams`."""

    def __init__(self, params: HeParams):
        n = params.ring_dimension
        if n < 16:
            raise UnsupportedParams("ckks needs ring_dimension >= 16")
        self.params = params
        self.n = n
        self.slots = n // 2
        two_n = 2 * n
        half = params.scale_bits // 2
        if half < two_n.bit_length() + 3:
            raise UnsupportedParams("scale_bits too small for this ring dimension")

        base_bits = params.message_bits + params.scale_bits + 2
        base: list[int] = []
        while sum(math.log2(q) for q in base) < base_bits:
            base = ntt_primes(two_n, 2**31 - 1, len(base) + 1, descending=True)
        used = set(base)
        pairs = []
        for _ in range(params.mult_depth):
            lo = ntt_primes(two_n, 2**half, 1, descending=True, exclude=used)[0]
            used.add(lo)
            hi = ntt_primes(two_n, 2 ** (params.scale_bits - half), 1, descending=False, exclude=used)[0]
            used.add(hi)
            pairs.append((lo, hi))
        self.base = base
        self.chain = base + [q for pr in pairs for q in pr]
        self.n_chain = len(self.chain)
        self.dnum, k = self._choose_digits(two_n, used)
        self.digits = [list(range(i, min(i + k, self.n_chain))) for i in range(0, self.n_chain, k)]
        self.special = ntt_primes(two_n, min(base) - 1, k, descending=True, exclude=used)
        self.primes = self.chain + self.special
        self.sp_idx = list(range(self.n_chain, len(self.primes)))
        self.tables = [_PrimeTables(q, n) for q in self.primes]
        self.scale = float(2**params.scale_bits)

        e = np.array([pow(5, j, two_n) for j in range(self.slots)], dtype=np.int64)
        self.slot_pos = (e - 1) // 2
        self.conj_pos = (two_n - e - 1) // 2
        self.zeta_pow = np.exp(1j * np.pi * np.arange(n) / n)
        log.debug("ckks context n=%d chain=%d special=%d dnum=%d", n, self.n_chain, k, self.dnum)

    def _choose_digits(self, two_n, used):
        log_q = sum(math.log2(q) for q in self.chain)
        bound = None
        sec = self.params.security_bits
        if sec:
            table = HE_STANDARD_LOGQ.get(sec)
            if table is None or self.n not in table:
                raise UnsupportedParams(f"no security table entry for {sec} bits at n={self.n}")
            bound = table[self.n]
        for dnum in range(min(3, self.n_chain), self.n_chain + 1):
            k = math.ceil(self.n_chain / dnum)
            log_qp = log_q + 31 * k
            if bound is None or log_qp <= bound:
                return dnum, k
        raise UnsupportedParams(
            f"log2(QP) >= {log_q + 31:.0f} exceeds the {sec}-bit bound {bound} for n={self.n}")

    def limbs(self, level: int) -> int:
        return len(self.base) + 2 * level

    @lru_cache(maxsize=None)
    def stacked(self, idx: tuple) -> tuple:
        t = [self.tables[i] for i in idx]
        return (
            np.array([x.q for x in t], dtype=np.uint64),
            np.ascontiguousarray(np.stack([x.psi_rev for x in t])),
            np.ascontiguousarray(np.stack([x.psi_rev_shoup for x in t])),
            np.ascontiguousarray(np.stack([x.psi_inv_rev for x in t])),
            np.ascontiguousarray(np.stack([x.psi_inv_rev_shoup for x in t])),
            np.array([x.n_inv for x in t], dtype=np.uint64),
            np.array([x.n_inv_shoup for x in t], dtype=np.uint64),
        )

    def moduli(self, idx) -> np.ndarray:
        return self.stacked(tuple(idx))[0]

    # -- transforms ---------------------------------------------------------
    def ntt(self, a: np.ndarray, idx) -> np.ndarray:
        q, psi, psis = self.stacked(tuple(idx))[:3]
        return _core.ntt_forward(np.ascontiguousarray(a), q, psi, psis)

    def intt(self, a: np.ndarray, idx) -> np.ndarray:
        q, _, _, pinv, pinvs, ninv, ninvs = self.stacked(tuple(idx))
        return _core.ntt_inverse(np.ascontiguousarray(a), q, pinv, pinvs, ninv, ninvs)

    # -- integer <-> RNS ----------------------------------------------------
    def from_small(self, x: np.ndarray, idx) -> np.ndarray:
        """Signed int64 coefficients to RNS residues (coefficient form)."""
        q = self.moduli(idx).astype(np.int64)
        return np.mod(x[None, :], q[:, None]).astype(np.uint64)

    def from_big(self, coeffs, idx) -> np.ndarray:
        out = np.empty((len(idx), self.n), dtype=np.uint64)
        for row, i in enumerate(idx):
            q = self.primes[i]
            out[row] = np.array([c % q for c in coeffs], dtype=np.int64)
        return out

    def to_big(self, a: np.ndarray, idx) -> list[int]:
        """CRT-reconstruct centered integer coefficients."""
        qs = [self.primes[i] for i in idx]
        big_q = math.prod(qs)
        acc = np.zeros(self.n, dtype=object)
        for row, q in enumerate(qs):
            qi = big_q // q
            y = (a[row].astype(np.int64) * pow(qi, -1, q)) % q
            acc = acc + y.astype(object) * qi
        acc = acc % big_q
        half = big_q // 2
        return [int(v) - big_q if v > half else int(v) for v in acc]

    def base_convert(self, a: np.ndarray, src, dst) -> np.ndarray:
        """Approximate basis extension of coefficient-form residues."""
        src_q = [self.primes[i] for i in src]
        prod = math.prod(src_q)
        dst_q = self.moduli(dst)
        y = np.empty_like(a)
        for row, q in enumerate(src_q):
            y[row] = (a[row] * np.uint64(pow(prod // q, -1, q))) % np.uint64(q)
        acc = np.zeros((len(dst), self.n), dtype=np.uint64)
        qcol = dst_q[:, None]
        for row, q in enumerate(src_q):
            c = np.array([(prod // q) % int(t) for t in dst_q], dtype=np.uint64)[:, None]
            acc = (acc + (y[row][None, :] * c) % qcol) % qcol
        return acc

    # -- encoding -------------------------------------------------------------
    def encode(self, values, scale: float) -> list[int] | np.ndarray:
        z = np.zeros(self.slots, dtype=np.complex128)
        vals = np.array([float(v) for v in values], dtype=np.float64)
        z[: vals.size] = vals
        u = np.zeros(self.n, dtype=np.complex128)
        u[self.slot_pos] = z
        u[self.conj_pos] = np.conj(z)
        m = (np.fft.fft(u) / self.n / self.zeta_pow).real * scale
        if np.max(np.abs(m), initial=0.0) < 2**62:
            return np.rint(m).astype(np.int64)
        return [int(round(x)) for x in m]

    def decode(self, coeffs, scale: float) -> np.ndarray:
        m = np.array([float(c) for c in coeffs], dtype=np.float64) / scale
        u = self.n * np.fft.ifft(m * self.zeta_pow)
        return u[self.slot_pos].real

    def to_rns(self, coeffs, idx) -> np.ndarray:
        if isinstance(coeffs, np.ndarray):
            return self.from_small(coeffs, idx)
        return self.from_big(coeffs, idx)


@lru_cache(maxsize=8)
def context_for(params: HeParams) -> CkksContext:
    return CkksContext(params)


def _mulmod(a, b, q):
    return _core.mul_pointwise(np.ascontiguousarray(a), np.ascontiguousarray(b), q)


def _addmod(a, b, q):
    return (a + b) % q[:, None]


def _mulconst(a, consts, q):
    c = np.array([k % int(t) for k, t in zip(consts, q)], dtype=np.uint64)
    return (a * c[:, None]) % q[:, None]


def _submod(a, b, q):
    return (a + q[:, None] - b) % q[:, None]


def _signed_automorphism(s: np.ndarray, g: int) -> np.ndarray:
    n = s.size
    idx = (np.arange(n) * g) % (2 * n)
    out = np.zeros_like(s)
    wrap = idx >= n
    out[idx % n] = np.where(wrap, -s, s)
    return out


class _SwitchKey:
    """Hybrid key-switching key for target secret ``s'`` (NTT form, all primes)."""

    __slots__ = ("b", "a")

    def __init__(self, b, a):
        self.b = b
        self.a = a


class CkksBackend(Backend):
    name = "ckks"
    tag = b"CKKS"

    def __init__(self):
        self._eval_keys: dict[str, dict] = {}

    # -- keys ---------------------------------------------------------------
    def _small(self, rng, n):
        return np.rint(rng.normal(0, ERROR_STD, n)).astype(np.int64)

    def _switch_key(self, ctx: CkksContext, s_ntt, target_coeffs, rng) -> _SwitchKey:
        all_idx = list(range(len(ctx.primes)))
        q_all = ctx.moduli(all_idx)
        t_ntt = ctx.ntt(ctx.from_small(target_coeffs, all_idx), all_idx)
        p_int = math.prod(ctx.special)
        bs, as_ = [], []
        for group in ctx.digits:
            a = np.stack([rng.integers(0, q, ctx.n, dtype=np.uint64) for q in ctx.primes])
            e = ctx.ntt(ctx.from_small(self._small(rng, ctx.n), all_idx), all_idx)
            b = _submod(e, _mulmod(a, s_ntt, q_all), q_all)
            factor = [p_int if i in group else 0 for i in all_idx]
            b = _addmod(b, _mulconst(t_ntt, factor, q_all), q_all)
            bs.append(b)
            as_.append(a)
        return _SwitchKey(bs, as_)

    def keygen(self, params: HeParams, seed: int | None = None) -> KeyPair:
        ctx = context_for(params)
        rng = np.random.default_rng(seed)
        kid = key_id_for(self.name, params, seed)
        all_idx = list(range(len(ctx.primes)))
        s = rng.integers(-1, 2, ctx.n).astype(np.int64)
        s_ntt = ctx.ntt(ctx.from_small(s, all_idx), all_idx)

        top = list(range(ctx.n_chain))
        q_top = ctx.moduli(top)
        a = np.stack([rng.integers(0, q, ctx.n, dtype=np.uint64) for q in ctx.chain])
        e = ctx.ntt(ctx.from_small(self._small(rng, ctx.n), top), top)
        b = _submod(e, _mulmod(a, s_ntt[: ctx.n_chain], q_top), q_top)

        s2 = _mulmod(s_ntt, s_ntt, ctx.moduli(all_idx))
        s2_coeffs = np.array(ctx.to_big(ctx.intt(s2.copy(), all_idx), all_idx), dtype=np.int64)
        relin = self._switch_key(ctx, s_ntt, s2_coeffs, rng)
        rot = {}
        k = 1
        while k < ctx.slots:
            g = pow(5, k, 2 * ctx.n)
            rot[k] = (g, self._switch_key(ctx, s_ntt, _signed_automorphism(s, g), rng))
            k *= 2
        self._eval_keys[kid] = {"relin": relin, "rot": rot}
        pk = PublicKey(self.name, params, kid, material=(b, a))
        sk = SecretKey(self.name, params, kid, material=s_ntt)
        return KeyPair(pk, sk, params)

    def _keys(self, ct: CipherVector) -> dict:
        try:
            return self._eval_keys[ct.key_id]
        except KeyError:
            raise ParamMismatch("no evaluation keys registered for this key id") from None

    # -- ciphertext plumbing ------------------------------------------------
    def ciphertext_size(self, params: HeParams, level: int | None = None) -> int:
        ctx = context_for(params)
        lvl = params.mult_depth if level is None else level
        return 2 * ctx.limbs(lvl) * ctx.n * 8

    def _make(self, like, level, c0, c1, scale) -> CipherVector:
        return CipherVector(self.name, like.params, like.key_id, level, (c0, c1, float(scale)),
                            self.ciphertext_size(like.params, level))

    @staticmethod
    def _drop_to(ct: CipherVector, level: int, ctx: CkksContext):
        c0, c1, scale = ct.payload
        nl = ctx.limbs(level)
        return c0[:nl], c1[:nl], scale

    def _rescale_pair(self, ctx: CkksContext, polys, level):
        """Divide NTT-form polys at ``level`` by its top prime pair."""
        out = []
        for p in polys:
            x = p
            for _ in range(2):
                nl = x.shape[0]
                idx = list(range(nl - 1))
                last = ctx.intt(x[nl - 1:nl].copy(), [nl - 1])[0].astype(np.int64)
                q_last = ctx.primes[nl - 1]
                last = np.where(last > q_last // 2, last - q_last, last)
                corr = ctx.ntt(ctx.from_small(last, idx), idx)
                q = ctx.moduli(idx)
                inv = [pow(q_last, -1, int(t)) for t in q]
                x = _mulconst(_submod(x[: nl - 1], corr, q), inv, q)
            out.append(x)
        return out

    def _key_switch(self, ctx: CkksContext, c_ntt, key: _SwitchKey):
        nl = c_ntt.shape[0]
        qidx = list(range(nl))
        ext = qidx + ctx.sp_idx
        q_ext = ctx.moduli(ext)
        coef = ctx.intt(c_ntt.copy(), qidx)
        acc0 = np.zeros((len(ext), ctx.n), dtype=np.uint64)
        acc1 = np.zeros_like(acc0)
        for j, group in enumerate(ctx.digits):
            g = [i for i in group if i < nl]
            if not g:
                continue
            others = [i for i in ext if i not in g]
            ext_vals = ctx.base_convert(coef[g], g, others)
            d = np.empty((len(ext), ctx.n), dtype=np.uint64)
            pos = {i: r for r, i in enumerate(ext)}
            d[[pos[i] for i in g]] = coef[g]
            d[[pos[i] for i in others]] = ext_vals
            d = ctx.ntt(d, ext)
            acc0 = _addmod(acc0, _mulmod(d, key.b[j][ext], q_ext), q_ext)
            acc1 = _addmod(acc1, _mulmod(d, key.a[j][ext], q_ext), q_ext)
        out = []
        q = ctx.moduli(qidx)
        p_int = math.prod(ctx.special)
        p_inv = [pow(p_int, -1, int(t)) for t in q]
        for acc in (acc0, acc1):
            acc_p = ctx.intt(acc[nl:].copy(), ctx.sp_idx)
            conv = ctx.ntt(ctx.base_convert(acc_p, ctx.sp_idx, qidx), qidx)
            out.append(_mulconst(_submod(acc[:nl], conv, q), p_inv, q))
        return out

    # -- contract -----------------------------------------------------------
    def encrypt(self, pk, plain, rng=None):
        self._check_key(pk)
        arr = as_plain(plain, pk.params)
        ctx = context_for(pk.params)
        rng = rng if rng is not None else np.random.default_rng()
        top = list(range(ctx.n_chain))
        q = ctx.moduli(top)
        b, a = pk.material
        m = ctx.ntt(ctx.to_rns(ctx.encode(arr, ctx.scale), top), top)
        u = ctx.ntt(ctx.from_small(rng.integers(-1, 2, ctx.n).astype(np.int64), top), top)
        e0 = ctx.ntt(ctx.from_small(self._small(rng, ctx.n), top), top)
        e1 = ctx.ntt(ctx.from_small(self._small(rng, ctx.n), top), top)
        c0 = _addmod(_addmod(_mulmod(b, u, q), e0, q), m, q)
        c1 = _addmod(_mulmod(a, u, q), e1, q)
        return self._make(pk, pk.params.mult_depth, c0, c1, ctx.scale)

    def decrypt(self, sk, ct):
        self._check_key(sk)
        self._check_ct(ct)
        if ct.key_id != sk.key_id:
            raise ParamMismatch("ciphertext was not encrypted under this key")
        ctx = context_for(ct.params)
        c0, c1, scale = ct.payload
        idx = list(range(c0.shape[0]))
        q = ctx.moduli(idx)
        m = _addmod(c0, _mulmod(c1, sk.material[: len(idx)], q), q)
        coeffs = ctx.to_big(ctx.intt(m, idx), idx)
        return PlainVector(ctx.decode(coeffs, scale))

    def _align(self, a, b):
        ctx = context_for(a.params)
        level = min(a.level, b.level)
        return ctx, level, self._drop_to(a, level, ctx), self._drop_to(b, level, ctx)

    def add_ct(self, a, b):
        self._check_ct(a, b)
        ctx, level, (a0, a1, sa), (b0, b1, sb) = self._align(a, b)
        if not math.isclose(sa, sb, rel_tol=1e-12):
            raise ParamMismatch(f"cannot add ciphertexts with scales {sa:.6g} and {sb:.6g}")
        q = ctx.moduli(range(a0.shape[0]))
        return self._make(a, level, _addmod(a0, b0, q), _addmod(a1, b1, q), sa)

    def mul_ct(self, a, b):
        self._check_ct(a, b)
        self._need_level(a)
        self._need_level(b)
        ctx, level, (a0, a1, sa), (b0, b1, sb) = self._align(a, b)
        q = ctx.moduli(range(a0.shape[0]))
        d0 = _mulmod(a0, b0, q)
        d1 = _addmod(_mulmod(a0, b1, q), _mulmod(a1, b0, q), q)
        d2 = _mulmod(a1, b1, q)
        p0, p1 = self._key_switch(ctx, d2, self._keys(a)["relin"])
        c0, c1 = self._rescale_pair(ctx, [_addmod(d0, p0, q), _addmod(d1, p1, q)], level)
        lo, hi = ctx.chain[ctx.limbs(level) - 2], ctx.chain[ctx.limbs(level) - 1]
        return self._make(a, level - 1, c0, c1, sa * sb / lo / hi)

    def mul_scalar(self, a, s):
        self._check_ct(a)
        ctx = context_for(a.params)
        c0, c1, scale = a.payload
        nl = c0.shape[0]
        q = ctx.moduli(range(nl))
        if is_small_int(s):
            k = [int(s)] * nl
            return self._make(a, a.level, _mulconst(c0, k, q), _mulconst(c1, k, q), scale)
        self._need_level(a)
        fs = Fraction(s)
        lo, hi = ctx.chain[nl - 2], ctx.chain[nl - 1]
        k = round(fs * lo * hi)
        r0, r1 = self._rescale_pair(ctx, [_mulconst(c0, [k] * nl, q), _mulconst(c1, [k] * nl, q)], a.level)
        # fold the rounding of k into the tracked scale
        adjust = float(Fraction(k) / (fs * lo * hi)) if k else 1.0
        return self._make(a, a.level - 1, r0, r1, scale * adjust)

    def mul_plain(self, a, plain):
        self._check_ct(a)
        self._need_level(a)
        ctx = context_for(a.params)
        arr = as_plain(plain, a.params)
        c0, c1, scale = a.payload
        nl = c0.shape[0]
        idx = list(range(nl))
        q = ctx.moduli(idx)
        lo, hi = ctx.chain[nl - 2], ctx.chain[nl - 1]
        p = ctx.ntt(ctx.to_rns(ctx.encode(arr, float(lo * hi)), idx), idx)
        r0, r1 = self._rescale_pair(ctx, [_mulmod(c0, p, q), _mulmod(c1, p, q)], a.level)
        return self._make(a, a.level - 1, r0, r1, scale)

    def _rotate_pow2(self, ct, k):
        ctx = context_for(ct.params)
        g, key = self._keys(ct)["rot"][k]
        c0, c1, scale = ct.payload
        idx = list(range(c0.shape[0]))
        q = ctx.moduli(idx)
        r0 = ctx.ntt(_core.automorphism(ctx.intt(c0.copy(), idx), g, q), idx)
        r1 = ctx.ntt(_core.automorphism(ctx.intt(c1.copy(), idx), g, q), idx)
        p0, p1 = self._key_switch(ctx, r1, key)
        return self._make(ct, ct.level, _addmod(r0, p0, q), p1, scale)

    def rotate(self, a, k):
        self._check_ct(a)
        k %= a.params.slot_count
        bit = 1
        while k:
            if k & 1:
                a = self._rotate_pow2(a, bit)
            k >>= 1
            bit <<= 1
        return a

    def sum_slots(self, a, width=None):
        self._check_ct(a)
        slots = a.params.slot_count
        w = slots if width is None else min(int(width), slots)
        # prefix[j] holds sum_{i < 2**j} rot(a, i); combine the binary digits of w
        result, offset, block, span = None, 0, a, 1
        while True:
            if w & span:
                part = self.rotate(block, offset) if offset else block
                result = part if result is None else self.add_ct(result, part)
                offset += span
            if span * 2 > w:
                break
            block = self.add_ct(block, self._rotate_pow2(block, span))
            span *= 2
        return result

    # -- wire format ----------------------------------------------------------
    def _encode_payload(self, ct):
        c0, c1, scale = ct.payload
        return struct.pack(">d", scale) + c0.astype("<u8").tobytes() + c1.astype("<u8").tobytes()

    def _decode_payload(self, header, body):
        params = HeParams.from_dict(header["params"])
        ctx = context_for(params)
        nl = ctx.limbs(header["level"])
        (scale,) = struct.unpack(">d", body[:8])
        arr = np.frombuffer(body[8:], dtype="<u8").astype(np.uint64)
        if arr.size != 2 * nl * ctx.n:
            raise ParamMismatch("ciphertext body has the wrong length")
        c0 = arr[: nl * ctx.n].reshape(nl, ctx.n).copy()
        c1 = arr[nl * ctx.n:].reshape(nl, ctx.n).copy()
        return c0, c1, scale


CKKS = register(CkksBackend())
