"""Backend selection for the hot loops.

The compiled extension is preferred; set ``CHISUP_PURE_PYTHON=1`` to force
the numpy fallback. Both backends return identical bytes for identical
generator states.
"""
from __future__ import annotations

import os
from types import ModuleType

import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

if _compiled is not None and not os.environ.get("CHISUP_PURE_PYTHON"):
    _impl: ModuleType = _compiled
    BACKEND = "cython"
else:
    _impl = _kernels_py
    BACKEND = "python"


def available_backends() -> list[str]:
    return ["python"] + (["cython"] if _compiled is not None else [])


def get_backend(name: str | None = None) -> ModuleType:
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def bm_chi_stats(rng, n_paths, incr_sd, bridge_t, b2, weights, segments, backend=None):
    impl = get_backend(backend)
    return impl.bm_chi_stats(
        rng,
        int(n_paths),
        np.ascontiguousarray(incr_sd, dtype=np.float64),
        None if bridge_t is None else np.ascontiguousarray(bridge_t, dtype=np.float64),
        np.ascontiguousarray(b2, dtype=np.float64),
        np.ascontiguousarray(weights, dtype=np.float64),
        np.ascontiguousarray(segments, dtype=np.intp),
    )


def chi_stats(values, b2, weights, segments, backend=None):
    impl = get_backend(backend)
    return impl.chi_stats(
        np.ascontiguousarray(values, dtype=np.float64),
        np.ascontiguousarray(b2, dtype=np.float64),
        np.ascontiguousarray(weights, dtype=np.float64),
        np.ascontiguousarray(segments, dtype=np.intp),
    )
