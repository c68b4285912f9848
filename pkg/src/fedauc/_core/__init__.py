"""Hot kernels: compiled Cython module with a numpy fallback.

The compiled ``_kernels`` extension is used when it was built; otherwise, or
when ``FEDAUC_PURE_PYTHON`` is set to a non-empty value other than ``0``,
the numpy implementations in ``_fallback`` are used.  Both produce
bit-identical results.
"""

import importlib
import os

from fedauc._core import _fallback


def _load_compiled():
    if os.environ.get("FEDAUC_PURE_PYTHON", "") not in ("", "0"):
        return None
    try:
        return importlib.import_module("fedauc._core._kernels")
    except ImportError:
        return None


_compiled = _load_compiled()
COMPILED = _compiled is not None
IMPLEMENTATION = "cython" if COMPILED else "numpy"
_impl = _compiled if COMPILED else _fallback

label_histograms = _impl.label_histograms
ntt_forward = _impl.ntt_forward
ntt_inverse = _impl.ntt_inverse
mul_pointwise = _impl.mul_pointwise
automorphism = _impl.automorphism


def implementations():
    """Return ``{name: module}`` for every kernel set importable here."""
    out = {"numpy": _fallback}
    mod = _compiled
    if mod is None:
        try:
            mod = importlib.import_module("fedauc._core._kernels")
        except ImportError:
            mod = None
    if mod is not None:
        out["cython"] = mod
    return out
