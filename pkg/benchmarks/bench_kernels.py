"""Compare the compiled and numpy kernel sets.

Run ``python3 benchmarks/bench_kernels.py``. Prints one row per kernel with
the median wall time of each implementation and the speedup, then times a
full CKKS ciphertext multiply and rotation under each implementation by
re-running this script in a subprocess with ``FEDAUC_PURE_PYTHON`` set.
"""

import argparse
import json
import os
import statistics
import subprocess
import sys
import time

import numpy as np

from fedauc import _core
from fedauc.he import HeParams, get_backend
from fedauc.he.ckks import CkksContext


def median_ms(fn, reps):
    fn()
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1e3)
    return statistics.median(times)


def kernel_cases(n, limbs, samples):
    ctx = CkksContext(HeParams(ring_dimension=n, security_bits=0))
    idx = tuple(range(min(limbs, ctx.n_chain)))
    q, psi, psis, pinv, pinvs, ninv, ninvs = ctx.stacked(idx)
    rng = np.random.default_rng(0)
    a = (rng.integers(0, 2**62, size=(len(idx), n), dtype=np.uint64) % q.reshape(-1, 1)).astype(np.uint64)
    b = (rng.integers(0, 2**62, size=(len(idx), n), dtype=np.uint64) % q.reshape(-1, 1)).astype(np.uint64)
    scores = rng.random(samples)
    labels = (rng.random(samples) < 0.5).astype(np.int8)
    thresholds = np.linspace(0.0, 1.0, 100)
    return {
        "ntt_forward": lambda k: k.ntt_forward(a.copy(), q, psi, psis),
        "ntt_inverse": lambda k: k.ntt_inverse(a.copy(), q, pinv, pinvs, ninv, ninvs),
        "mul_pointwise": lambda k: k.mul_pointwise(a, b, q),
        "automorphism": lambda k: k.automorphism(a, 5, q),
        "label_histograms": lambda k: k.label_histograms(scores, labels, thresholds),
    }


def bench_kernels(n, limbs, samples, reps):
    impls = _core.implementations()
    cases = kernel_cases(n, limbs, samples)
    rows = []
    for name, case in cases.items():
        row = {"kernel": name}
        for label, mod in impls.items():
            row[label] = median_ms(lambda: case(mod), reps)
        rows.append(row)
    return list(impls), rows


def bench_ckks(n, reps):
    """Time one ciphertext multiply and one rotation with the active kernels."""
    be = get_backend("ckks")
    params = HeParams(ring_dimension=n, security_bits=0)
    kp = be.keygen(params, seed=0)
    rng = np.random.default_rng(1)
    x = be.encrypt(kp.public_key, rng.random(n // 2), rng)
    y = be.encrypt(kp.public_key, rng.random(n // 2), rng)
    return {
        "impl": _core.IMPLEMENTATION,
        "mul_ct": median_ms(lambda: be.mul_ct(x, y), reps),
        "rotate": median_ms(lambda: be.rotate(x, 1), reps),
    }


def ckks_under(pure, n, reps):
    env = dict(os.environ, FEDAUC_PURE_PYTHON="1" if pure else "0")
    out = subprocess.run([sys.executable, __file__, "--ckks-only", "--ring", str(n), "--reps", str(reps)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ring", type=int, default=2**14)
    ap.add_argument("--limbs", type=int, default=6)
    ap.add_argument("--samples", type=int, default=1_000_000)
    ap.add_argument("--reps", type=int, default=7)
    ap.add_argument("--ckks-ring", type=int, default=2**12)
    ap.add_argument("--ckks-only", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)

    if args.ckks_only:
        print(json.dumps(bench_ckks(args.ring, args.reps)))
        return 0

    names, rows = bench_kernels(args.ring, args.limbs, args.samples, args.reps)
    print(f"kernels: n={args.ring}, limbs={args.limbs}, histogram samples={args.samples}, median of {args.reps}")
    header = f"{'kernel':<18}" + "".join(f"{k + ' ms':>14}" for k in names)
    if "cython" in names:
        header += f"{'speedup':>10}"
    print(header)
    for r in rows:
        line = f"{r['kernel']:<18}" + "".join(f"{r[k]:>14.3f}" for k in names)
        if "cython" in names:
            line += f"{r['numpy'] / r['cython']:>9.1f}x"
        print(line)

    runs = [ckks_under(True, args.ckks_ring, args.reps)]
    if "cython" in names:
        runs.append(ckks_under(False, args.ckks_ring, args.reps))
    print(f"\nckks end to end: n={args.ckks_ring}, median of {args.reps}")
    for r in runs:
        print(f"{r['impl']:<8} mul_ct {r['mul_ct']:>9.2f} ms   rotate {r['rotate']:>9.2f} ms")
    return 0


if __name__ == "__main__":
    sys.exit(main())
