"""Exact-in-distribution sampling of Gaussian processes on finite grids.

Covers the Brownian bridge, fractional Brownian motion (circulant
embedding with a Cholesky fallback), their unit-variance normalizations,
and a Cholesky sampler for arbitrary correlation kernels.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, NumericalError, ParameterError

JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)
DEFAULT_DELTA = 2.0 ** -14


@dataclass(frozen=True)
class Grid:
    """Strictly increasing time points."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 1 or pts.size == 0:
            raise ParameterError("grid needs a non-empty 1-D array of points")
        if not np.all(np.isfinite(pts)):
            raise ParameterError("grid points must be finite")
        if pts.size > 1 and not np.all(np.diff(pts) > 0):
            raise ParameterError("grid points must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, t_min: float, t_max: float, n_points: int) -> "Grid":
        if n_points < 1:
            raise ParameterError("n_points must be positive")
        if n_points == 1:
            return cls(np.array([float(t_min)]))
        if not t_max > t_min:
            raise ParameterError("t_max must exceed t_min")
        return cls(np.linspace(t_min, t_max, n_points))

    @classmethod
    def unit_interval(cls, n_points: int, delta: float = DEFAULT_DELTA, closed_right: bool = False) -> "Grid":
        """Uniform grid on [delta, 1 - delta], or [delta, 1] when ``closed_right``."""
        return cls.uniform(delta, 1.0 if closed_right else 1.0 - delta, n_points)

    @property
    def t_min(self) -> float:
        return float(self.points[0])

    @property
    def t_max(self) -> float:
        return float(self.points[-1])

    @property
    def n_points(self) -> int:
        return int(self.points.size)

    @property
    def is_uniform(self) -> bool:
        if self.n_points < 3:
            return True
        d = np.diff(self.points)
        return bool(np.allclose(d, d[0], rtol=1e-9, atol=0.0))

    @property
    def step(self) -> float:
        if self.n_points < 2:
            raise ParameterError("a single-point grid has no step")
        if not self.is_uniform:
            raise ParameterError("grid is not uniform")
        return (self.t_max - self.t_min) / (self.n_points - 1)

    def refine(self) -> "Grid":
        """Grid with midpoints inserted; contains the original points."""
        mids = 0.5 * (self.points[1:] + self.points[:-1])
        pts = np.empty(2 * self.n_points - 1)
        pts[0::2] = self.points
        pts[1::2] = mids
        return Grid(pts)


@dataclass(frozen=True)
class CovarianceModel:
    """A unit-variance, locally stationary Gaussian process.

    ``corr`` broadcasts over arrays. ``C``, ``K`` and ``alpha`` describe the
    local decay ``1 - corr(t, t+h) ~ C(t) K(h)^2``; ``q`` is the inverse of
    ``K`` evaluated at ``u**-0.5``. ``L_limit`` is the limit of the slowly
    varying part of ``q`` (a positive number, ``"zero"`` or ``"infinite"``).
    """

    kind: str
    corr: Callable
    alpha: float
    C: Callable
    K: Callable
    q: Callable
    domain: tuple[float, float]
    closed_right: bool = False
    H: Optional[float] = None
    L_limit: object = 1.0
    corr_f: Optional[Callable] = None
    name: str = ""

    @property
    def model_id(self) -> str:
        return self.name or self.kind

    def check_grid(self, grid: Grid) -> None:
        lo, hi = self.domain
        if grid.t_min <= lo:
            raise DomainError(f"grid touches the left end of the domain ({lo})")
        if grid.t_max > hi or (grid.t_max == hi and not self.closed_right):
            raise DomainError(f"grid leaves the domain at the right end ({hi})")

    def corr_matrix(self, grid: Grid) -> np.ndarray:
        t = grid.points
        m = np.asarray(self.corr(t[:, None], t[None, :]), dtype=np.float64)
        return 0.5 * (m + m.T)


@dataclass
class SamplePath:
    grid: Grid
    values: np.ndarray
    model_id: str
    seed_tag: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.grid.n_points,):
            raise ParameterError("path values must align with the grid")
        if not np.all(np.isfinite(self.values)):
            raise NumericalError("path contains non-finite values")


# --- built-in models -----------------------------------------------------

def _bridge_corr(s, t):
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    lo = np.minimum(s, t)
    hi = np.maximum(s, t)
    return np.sqrt(lo * (1.0 - hi) / (hi * (1.0 - lo)))


def bridge_model() -> CovarianceModel:
    """Normalized Brownian bridge ``B(t) / sqrt(t(1-t))`` on (0, 1)."""
    return CovarianceModel(
        kind="bridge",
        corr=_bridge_corr,
        alpha=1.0,
        C=lambda t: 1.0 / (2.0 * np.asarray(t) * (1.0 - np.asarray(t))),
        K=lambda h: np.sqrt(np.abs(h)),
        q=lambda u: 1.0 / np.asarray(u, dtype=np.float64),
        domain=(0.0, 1.0),
        closed_right=False,
        # in f-coordinates the normalized bridge is a stationary OU process
        corr_f=lambda x, y: np.exp(-np.abs(np.asarray(x) - np.asarray(y))),
        name="bridge",
    )


def _lamperti_corr(H: float, gap):
    # self-similarity: corr(s, t) depends on s/t only, and s/t = exp(-2^{1/(2H)} |f(s) - f(t)|)
    r = np.exp(-(2.0 ** (0.5 / H)) * gap)
    return (1.0 + r ** (2.0 * H) - (1.0 - r) ** (2.0 * H)) / (2.0 * r ** H)


def fbm_model(H: float) -> CovarianceModel:
    """Normalized fractional Brownian motion ``B_H(t) / t**H`` on (0, 1]."""
    if not 0.0 < H < 1.0:
        raise ParameterError("Hurst index must lie in (0, 1)")
    h2 = 2.0 * H

    def corr(s, t):
        s = np.asarray(s, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64)
        return (s ** h2 + t ** h2 - np.abs(s - t) ** h2) / (2.0 * s ** H * t ** H)

    return CovarianceModel(
        kind="fbm",
        corr=corr,
        alpha=h2,
        C=lambda t: 1.0 / (2.0 * np.asarray(t) ** h2),
        K=lambda h: np.abs(h) ** H,
        q=lambda u: np.asarray(u, dtype=np.float64) ** (-1.0 / h2),
        domain=(0.0, 1.0),
        closed_right=True,
        H=float(H),
        corr_f=lambda x, y: _lamperti_corr(H, np.abs(np.asarray(x) - np.asarray(y))),
        name=f"fbm(H={H!r})",
    )


def custom_model(corr, C, K, alpha, q, domain=(0.0, 1.0), closed_right=False,
                 L_limit=1.0, corr_f=None, name="custom") -> CovarianceModel:
    """User-declared model; local-stationarity data is validated but not inferred."""
    if not 0.0 < alpha <= 2.0:
        raise ParameterError("alpha must lie in (0, 2]")
    return CovarianceModel(kind="custom", corr=corr, alpha=float(alpha), C=C, K=K, q=q,
                           domain=tuple(domain), closed_right=closed_right,
                           L_limit=L_limit, corr_f=corr_f, name=name)


def local_stationarity_ratio(model: CovarianceModel, t, h):
    """``(1 - corr(t, t+h)) / K(h)**2``; tends to ``C(t)`` as h -> 0."""
    t = np.asarray(t, dtype=np.float64)
    return (1.0 - model.corr(t, t + h)) / np.asarray(model.K(h)) ** 2


# --- Brownian bridge -------------------------------------------------------

def _check_bridge_grid(grid: Grid) -> None:
    if grid.t_min <= 0.0 or grid.t_max >= 1.0:
        raise DomainError("Brownian bridge grid must lie strictly inside (0, 1)")


def bridge_increment_sd(grid: Grid) -> np.ndarray:
    """Standard deviations of W over the grid steps, plus the final step to 1."""
    _check_bridge_grid(grid)
    return np.sqrt(np.diff(np.concatenate(([0.0], grid.points, [1.0]))))


def bridge_paths(grid: Grid, rng: np.random.Generator, size: int, normalized: bool = False) -> np.ndarray:
    """``size`` Brownian bridge paths as ``W(t) - t W(1)``; shape (size, n_points)."""
    sd = bridge_increment_sd(grid)
    n = grid.n_points
    z = rng.standard_normal((size, n + 1))
    z *= sd
    np.cumsum(z, axis=1, out=z)
    out = z[:, :n] - grid.points * z[:, n:]
    if normalized:
        out /= np.sqrt(grid.points * (1.0 - grid.points))
    return out


def sample_brownian_bridge(grid: Grid, rng: np.random.Generator, seed_tag: int = 0) -> SamplePath:
    return SamplePath(grid, bridge_paths(grid, rng, 1)[0], "bridge-raw", seed_tag)


# --- fractional Brownian motion -------------------------------------------------

def fgn_autocovariance(H: float, k) -> np.ndarray:
    """Autocovariance of unit-step fractional Gaussian noise at lags ``k``."""
    k = np.abs(np.asarray(k, dtype=np.float64))
    h2 = 2.0 * H
    return 0.5 * ((k + 1.0) ** h2 + np.abs(k - 1.0) ** h2 - 2.0 * k ** h2)


def fbm_covariance(H: float, s, t) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    h2 = 2.0 * H
    return 0.5 * (np.abs(s) ** h2 + np.abs(t) ** h2 - np.abs(s - t) ** h2)


def circulant_eigenvalues(H: float, m: int) -> np.ndarray:
    """Eigenvalues of the size-2m circulant embedding of fGn lags 0..m."""
    lags = np.arange(m + 1)
    g = fgn_autocovariance(H, lags)
    row = np.concatenate((g, g[-2:0:-1]))
    return np.fft.fft(row).real


def _offset_steps(grid: Grid) -> tuple[int, float]:
    """Grid as ``(m0 + j) * step``; returns (m0, step)."""
    if grid.n_points == 1:
        return 1, grid.t_min
    step = grid.step
    m0 = grid.t_min / step
    r = round(m0)
    if r < 1 or abs(m0 - r) > 1e-6 * max(1.0, m0):
        raise ParameterError("circulant fBm needs t_min to be a positive multiple of the grid step")
    return int(r), step


def _fgn_circulant(H: float, n_inc: int, size: int, rng: np.random.Generator) -> Optional[np.ndarray]:
    m = 1 << max(1, (n_inc - 1).bit_length())
    lam = circulant_eigenvalues(H, m)
    if lam.min() < -1e-10 * lam.max():
        return None
    sq = np.sqrt(np.clip(lam, 0.0, None) / (2 * m))
    out = np.empty((size, n_inc))
    pairs = (size + 1) // 2
    chunk = max(1, (1 << 21) // (2 * m))
    row = 0
    for start in range(0, pairs, chunk):
        c = min(chunk, pairs - start)
        z = rng.standard_normal((c, 2, 2 * m))
        y = np.fft.fft(sq * (z[:, 0] + 1j * z[:, 1]), axis=1)[:, :n_inc]
        both = np.empty((2 * c, n_inc))
        both[0::2] = y.real
        both[1::2] = y.imag
        take = min(2 * c, size - row)
        out[row:row + take] = both[:take]
        row += take
    return out


def fbm_paths(grid: Grid, H: float, rng: np.random.Generator, size: int,
              method: str = "auto", normalized: bool = False) -> np.ndarray:
    """``size`` fBm paths on the grid; shape (size, n_points).

    ``method`` is ``"circulant"`` (uniform grids only), ``"cholesky"``, or
    ``"auto"`` (circulant when possible, else Cholesky).
    """
    if not 0.0 < H < 1.0:
        raise ParameterError("Hurst index must lie in (0, 1)")
    if grid.t_min <= 0.0:
        raise DomainError("fBm grid must lie in (0, inf)")
    if method not in ("auto", "circulant", "cholesky"):
        raise ParameterError(f"unknown fBm method {method!r}")
    out = None
    if method != "cholesky":
        try:
            m0, step = _offset_steps(grid)
        except ParameterError:
            if method == "circulant":
                raise
        else:
            n_inc = m0 + grid.n_points - 1
            if H == 0.5:
                inc = rng.standard_normal((size, n_inc))
            else:
                inc = _fgn_circulant(H, n_inc, size, rng)
                if inc is None:
                    if method == "circulant":
                        raise NumericalError("circulant embedding is not nonnegative definite")
                    warnings.warn("circulant embedding not nonnegative definite; using Cholesky")
            if inc is not None:
                inc *= step ** H
                np.cumsum(inc, axis=1, out=inc)
                out = inc[:, m0 - 1:]
    if out is None:
        t = grid.points
        L = cholesky_factor(fbm_covariance(H, t[:, None], t[None, :]))
        out = rng.standard_normal((size, grid.n_points)) @ L.T
    if normalized:
        out = out / grid.points ** H
    return np.ascontiguousarray(out)


def sample_fbm(grid: Grid, H: float, rng: np.random.Generator, method: str = "auto",
               seed_tag: int = 0) -> SamplePath:
    return SamplePath(grid, fbm_paths(grid, H, rng, 1, method=method)[0], f"fbm-raw(H={H!r})", seed_tag)


# --- normalization and general covariances ----------------------------------------

def normalizer(mode: str, t, H: Optional[float] = None) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if mode == "bridge":
        return np.sqrt(t * (1.0 - t))
    if mode == "fbm":
        if H is None:
            raise ParameterError("fbm normalization needs H")
        return t ** H
    raise ParameterError(f"unknown normalization mode {mode!r}")


def normalize(path: SamplePath, mode: str, H: Optional[float] = None, floor: float = 1e-12) -> SamplePath:
    """Divide by the standard deviation function to obtain a unit-variance path."""
    sd = normalizer(mode, path.grid.points, H)
    if np.any(~(sd >= floor)):
        raise DomainError("normalizer below floor; grid too close to the boundary")
    label = "bridge" if mode == "bridge" else f"fbm(H={H!r})"
    return SamplePath(path.grid, path.values / sd, label, path.seed_tag)


def cholesky_factor(cov: np.ndarray, ladder: Sequence[float] = JITTER_LADDER) -> np.ndarray:
    """Lower Cholesky factor, retrying with diagonal jitter relative to the mean variance."""
    cov = np.asarray(cov, dtype=np.float64)
    scale = float(np.mean(np.diag(cov))) or 1.0
    eye = np.eye(cov.shape[0])
    for jitter in ladder:
        try:
            return np.linalg.cholesky(cov + jitter * scale * eye)
        except np.linalg.LinAlgError:
            continue
    lam_min = float(np.linalg.eigvalsh(cov).min())
    raise NumericalError(
        f"Cholesky failed after jitter {ladder[-1]:g}; smallest eigenvalue estimate {lam_min:.3e}"
    )


def custom_paths(model: CovarianceModel, grid: Grid, rng: np.random.Generator, size: int) -> np.ndarray:
    model.check_grid(grid)
    L = cholesky_factor(model.corr_matrix(grid))
    return rng.standard_normal((size, grid.n_points)) @ L.T


def sample_custom(model: CovarianceModel, grid: Grid, rng: np.random.Generator, seed_tag: int = 0) -> SamplePath:
    return SamplePath(grid, custom_paths(model, grid, rng, 1)[0], model.model_id, seed_tag)


def normalized_paths(model: CovarianceModel, grid: Grid, rng: np.random.Generator, size: int,
                     method: str = "auto") -> np.ndarray:
    """Unit-variance paths of a model with the dedicated sampler for built-ins."""
    model.check_grid(grid)
    if model.kind == "bridge":
        return bridge_paths(grid, rng, size, normalized=True)
    if model.kind == "fbm":
        return fbm_paths(grid, model.H, rng, size, method=method, normalized=True)
    return custom_paths(model, grid, rng, size)


def write_csv(path: SamplePath, fh) -> None:
    """Write ``t,value`` rows."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t", "value"])
    for t, v in zip(path.grid.points, path.values):
        w.writerow([repr(float(t)), repr(float(v))])
