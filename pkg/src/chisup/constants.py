"""Pickands and Piterbarg constants: closed forms and Monte Carlo estimators.

The Pickands constant is estimated by default with the ratio representation
``H_alpha = E[ sup_t e^{Z(t)} / int e^{Z(t)} dt ]``, ``Z = sqrt(2) B_{alpha/2} - |t|^alpha``,
whose samples are bounded by ``1/step``; the textbook estimator
``(1/S) E exp(sup_{[0,S]} Z)`` is kept as ``method="definition"`` but its
samples have a Pareto tail of index one, so its sample mean is unreliable.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import NumericalError, ParameterError
from .paths import Grid, fbm_paths
from .streams import block_ranges, block_stream

SQRT2 = math.sqrt(2.0)
_LOG_OVERFLOW = 700.0
_STREAM_PICKANDS = 11
_STREAM_PITERBARG = 12


@dataclass(frozen=True)
class ConstantEstimate:
    value: float
    std_error: float
    params: dict = field(default_factory=dict)
    unstable: bool = False

    def __post_init__(self):
        if not self.value > 0:
            raise NumericalError("constant estimate must be positive")


def known_constant(alpha: float) -> Optional[float]:
    """Exact Pickands constant where a closed form is registered."""
    if alpha == 1.0:
        return 1.0
    if alpha == 2.0:
        return 1.0 / math.sqrt(math.pi)
    return None


def known_piterbarg(alpha: float, d: float) -> Optional[float]:
    """Exact two-sided Piterbarg constant (lambda -> infinity) for alpha in {1, 2}."""
    if not d > 0:
        raise ParameterError("d must be positive")
    if alpha == 1.0:
        return 1.0 + 2.0 / d - 1.0 / (1.0 + 2.0 * d)
    if alpha == 2.0:
        return math.sqrt((1.0 + d) / d)
    return None


def piterbarg_alpha2_quadrature(d: float, lam: float) -> float:
    """``E exp(sup_{|t|<=lam} sqrt(2) t N - (1+d) t^2)`` by 1-D quadrature over N."""
    c = 1.0 + d
    return 2.0 * _vertex_quadrature(c, lam) / math.sqrt(2.0 * math.pi)


def _vertex_quadrature(c: float, lam: float) -> float:
    """``int_0^inf exp(sup_{0<=t<=lam}(sqrt(2) t x - c t^2) - x^2/2) dx``."""
    edge = SQRT2 * c * lam
    inner = integrate.quad(lambda x: math.exp(x * x * (0.5 / c - 0.5)), 0.0, edge,
                           epsabs=0.0, epsrel=1e-13, limit=200)[0]
    outer = integrate.quad(lambda x: math.exp(SQRT2 * lam * x - c * lam * lam - 0.5 * x * x),
                           edge, np.inf, epsabs=0.0, epsrel=1e-13, limit=200)[0]
    return inner + outer


def pickands_alpha2_quadrature(S: float, method: str = "dieker-yakir") -> float:
    """Oracle for alpha = 2, where ``B_1(t) = t N``.

    The ratio estimator is exactly ``1/sqrt(pi)`` per sample in the continuum.
    The definition at horizon S is ``(1/S) E exp(sup_{[0,S]} sqrt(2) t N - t^2)``.
    """
    if method == "dieker-yakir":
        return 1.0 / math.sqrt(math.pi)
    # N <= 0 keeps the supremum at t = 0
    return (0.5 + _vertex_quadrature(1.0, S) / math.sqrt(2.0 * math.pi)) / S


def _two_sided(alpha: float, half_width: float, step: float, rng, size: int):
    """Two-sided ``B_{alpha/2}`` on the grid ``-half_width, ..., half_width``."""
    m = int(round(half_width / step))
    t = step * np.arange(-m, m + 1)
    if alpha == 2.0:
        return t, rng.standard_normal((size, 1)) * t
    g = Grid(step * np.arange(1, 2 * m + 1))
    x = fbm_paths(g, alpha / 2.0, rng, size, method="circulant")
    full = np.empty((size, 2 * m + 1))
    full[:, 0] = 0.0
    full[:, 1:] = x
    full -= full[:, m:m + 1]
    return t, full


def _one_sided(alpha: float, horizon: float, step: float, rng, size: int):
    m = int(round(horizon / step))
    t = step * np.arange(0, m + 1)
    if alpha == 2.0:
        return t, rng.standard_normal((size, 1)) * t
    g = Grid(step * np.arange(1, m + 1))
    x = fbm_paths(g, alpha / 2.0, rng, size, method="circulant")
    return t, np.concatenate((np.zeros((size, 1)), x), axis=1)


def _pickands_block(args):
    alpha, S, step, method, seed, block, size = args
    rng = block_stream(seed, block, _STREAM_PICKANDS)
    if method == "dieker-yakir":
        t, b = _two_sided(alpha, S, step, rng, size)
        z = SQRT2 * b - np.abs(t) ** alpha
        zmax = z.max(axis=1)
        return 1.0 / (step * np.exp(z - zmax[:, None]).sum(axis=1)), zmax
    t, b = _one_sided(alpha, S, step, rng, size)
    z = SQRT2 * b - t ** alpha
    zmax = z.max(axis=1)
    return np.exp(np.minimum(zmax, _LOG_OVERFLOW)) / S, zmax


def _piterbarg_block(args):
    alpha, d, lam, step, seed, block, size = args
    rng = block_stream(seed, block, _STREAM_PITERBARG)
    t, b = _two_sided(alpha, lam, step, rng, size)
    zmax = (SQRT2 * b - (1.0 + d) * np.abs(t) ** alpha).max(axis=1)
    return np.exp(np.minimum(zmax, _LOG_OVERFLOW)), zmax


def _run_blocks(fn, head: tuple, n: int, seed: int, workers: int, block_size: int):
    tasks = [head + (seed, b, hi - lo) for b, lo, hi in block_ranges(n, block_size)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(fn, tasks))
    else:
        parts = [fn(task) for task in tasks]
    vals = np.concatenate([p[0] for p in parts])
    zmax = np.concatenate([p[1] for p in parts])
    return vals, zmax


def _summarize(vals: np.ndarray, zmax: np.ndarray, params: dict) -> ConstantEstimate:
    unstable = bool(np.any(zmax >= _LOG_OVERFLOW))
    if unstable:
        warnings.warn("exp overflow in constant estimator; increase the horizon or refine the step")
    se = float(vals.std(ddof=1) / math.sqrt(vals.size))
    return ConstantEstimate(float(vals.mean()), se, params, unstable)


def _check_common(S: float, step: float, n: int) -> None:
    if not step > 0 or step > S / 64.0:
        raise ParameterError("step must lie in (0, S/64]")
    if n < 100:
        raise ParameterError("need at least 100 samples")
    m = S / step
    if abs(m - round(m)) > 1e-9 * m:
        raise ParameterError("horizon must be an integer multiple of the step")


def pickands(alpha: float, S: float = 128.0, step: float = 1.0 / 64.0, n: int = 10_000,
             seed: int = 0, method: str = "dieker-yakir", workers: int = 1,
             block_size: int = 256) -> ConstantEstimate:
    """Monte Carlo estimate of the Pickands constant ``H_alpha``.

    Parameters
    ----------
    alpha : float
        Index in (0, 2]; the underlying fBm has Hurst index ``alpha / 2``.
    S : float
        Horizon. For the ratio estimator the process lives on ``[-S, S]``; for
        ``method="definition"`` on ``[0, S]``.
    step : float
        Grid step; the estimator targets the constant of the grid ``step Z``.
    n : int
        Number of samples.
    seed : int
        Master seed; samples are generated in blocks with independent streams.
    method : {"dieker-yakir", "definition"}
    workers : int
        Process count; never changes the result.

    Returns
    -------
    ConstantEstimate
    """
    if not 0.0 < alpha <= 2.0:
        raise ParameterError("alpha must lie in (0, 2]")
    if method not in ("dieker-yakir", "definition"):
        raise ParameterError(f"unknown method {method!r}")
    _check_common(S, step, n)
    vals, zmax = _run_blocks(_pickands_block, (float(alpha), float(S), float(step), method),
                             n, seed, workers, block_size)
    params = {"alpha": alpha, "S": S, "step": step, "n": n, "seed": seed, "method": method}
    return _summarize(vals, zmax, params)


def piterbarg(alpha: float, d: float, lam: float = 32.0, step: float = 1.0 / 64.0,
              n: int = 10_000, seed: int = 0, workers: int = 1,
              block_size: int = 256) -> ConstantEstimate:
    """Monte Carlo estimate of ``E exp(sup_{[-lam, lam]} sqrt(2) B_{alpha/2}(t) - (1+d)|t|^alpha)``."""
    if not 0.0 < alpha <= 2.0:
        raise ParameterError("alpha must lie in (0, 2]")
    if not d > 0:
        raise ParameterError("d must be positive")
    _check_common(lam, step, n)
    vals, zmax = _run_blocks(_piterbarg_block, (float(alpha), float(d), float(lam), float(step)),
                             n, seed, workers, block_size)
    params = {"alpha": alpha, "d": d, "lambda": lam, "step": step, "n": n, "seed": seed}
    return _summarize(vals, zmax, params)


def pickands_value(alpha: float, supplied: Optional[float] = None) -> Optional[float]:
    """Supplied value if given, else the registered closed form (or None)."""
    return supplied if supplied is not None else known_constant(alpha)
