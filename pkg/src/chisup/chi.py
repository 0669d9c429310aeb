"""Chi-square processes built from independent Gaussian paths."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, ParameterError
from .paths import Grid, SamplePath


@dataclass(frozen=True)
class BVector:
    """Coefficients ``1 = b_1 = ... = b_k > b_{k+1} >= ... >= b_n > 0``.

    ``k`` is inferred from the leading run of ones when not given.
    """

    b: tuple
    k: int = 0

    def __post_init__(self):
        b = tuple(float(x) for x in np.atleast_1d(np.asarray(self.b, dtype=np.float64)))
        if not b:
            raise ParameterError("b must be non-empty")
        if b[0] != 1.0:
            raise ParameterError("b_1 must equal 1")
        if any(not (x > 0.0) or not math.isfinite(x) for x in b):
            raise ParameterError("all b_i must be positive and finite")
        if any(b[i + 1] > b[i] for i in range(len(b) - 1)):
            raise ParameterError("b must be nonincreasing")
        k_run = next((i for i, x in enumerate(b) if x != 1.0), len(b))
        k = self.k or k_run
        if k != k_run:
            raise ParameterError(f"declared k={self.k} but b has {k_run} leading ones")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "k", k)

    @classmethod
    def ones(cls, n: int) -> "BVector":
        return cls((1.0,) * n)

    @property
    def n(self) -> int:
        return len(self.b)

    @property
    def squares(self) -> np.ndarray:
        return np.square(np.asarray(self.b))

    @property
    def log_prefactor(self) -> float:
        """``log prod_{i>k} (1 - b_i^2)^{-1/2}``; zero when k = n."""
        return -0.5 * sum(math.log1p(-x * x) for x in self.b[self.k:])

    @property
    def prefactor(self) -> float:
        return math.exp(self.log_prefactor)


@dataclass
class ChiPath:
    grid: Grid
    values: np.ndarray
    b: BVector
    seed_tags: tuple = field(default_factory=tuple)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.grid.n_points,):
            raise ParameterError("chi values must align with the grid")
        if np.any(self.values < 0):
            raise ParameterError("chi-square values must be nonnegative")


def chi_values(x: np.ndarray, b: BVector) -> np.ndarray:
    """``sum_i b_i^2 x[i]^2`` over the leading axis."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != b.n:
        raise ParameterError(f"expected {b.n} components, got {x.shape[0]}")
    b2 = b.squares
    out = b2[0] * (x[0] * x[0])
    for i in range(1, b.n):
        out += b2[i] * (x[i] * x[i])
    return out


def chi_square(paths: Sequence[SamplePath], b: BVector) -> ChiPath:
    if len(paths) != b.n:
        raise ParameterError(f"need {b.n} paths, got {len(paths)}")
    grid = paths[0].grid
    for p in paths[1:]:
        if p.grid.n_points != grid.n_points or not np.array_equal(p.grid.points, grid.points):
            raise ParameterError("paths do not share a grid")
        if p.model_id != paths[0].model_id:
            raise ParameterError("paths come from different models")
    vals = chi_values(np.stack([p.values for p in paths]), b)
    return ChiPath(grid, vals, b, tuple(p.seed_tag for p in paths))


def weight_squares(w, t: np.ndarray) -> np.ndarray:
    """Squared weights on ``t``; ``w`` is a WeightSpec, a callable w(t), or None for w = 1."""
    t = np.asarray(t, dtype=np.float64)
    if w is None:
        return np.ones_like(t)
    if hasattr(w, "w2"):
        w2 = np.asarray(w.w2(t), dtype=np.float64)
    else:
        wt = np.asarray(w(t), dtype=np.float64)
        if np.any(~(wt > 0)):
            raise DomainError("weight must be strictly positive on the grid")
        w2 = np.square(wt)
    if np.any(~(w2 > 0)):
        raise DomainError("weight must be strictly positive on the grid")
    return np.broadcast_to(w2, t.shape).astype(np.float64)


def weighted_sup(chi: ChiPath, w=None, sub: Optional[tuple[float, float]] = None) -> float:
    """Grid maximum of ``chi / w^2``, optionally restricted to ``sub``.

    The value is a grid supremum, hence a lower bound on the supremum over
    the continuous interval.
    """
    t = chi.grid.points
    mask = np.ones(t.shape, dtype=bool)
    if sub is not None:
        mask = (t >= sub[0]) & (t <= sub[1])
        if not mask.any():
            raise ParameterError("subinterval contains no grid points")
    w2 = weight_squares(w, t[mask])
    return float(np.max(chi.values[mask] / w2))


def sphere_directions(n: int, resolution: int) -> np.ndarray:
    """Unit vectors on a product grid of spherical angles, shape (n, resolution**(n-1)).

    Polar angles run over [0, pi] inclusive and the azimuth over [0, 2 pi).
    """
    if n < 1:
        raise ParameterError("n must be positive")
    if n == 1:
        return np.array([[1.0, -1.0]])
    polar = np.linspace(0.0, np.pi, resolution)
    azim = np.linspace(0.0, 2.0 * np.pi, resolution, endpoint=False)
    axes = [polar] * (n - 2) + [azim]
    mesh = np.meshgrid(*axes, indexing="ij")
    theta = [m.ravel() for m in mesh]
    v = np.empty((n, theta[0].size))
    sin_prod = np.ones(theta[0].size)
    for i in range(n - 1):
        v[i] = sin_prod * np.cos(theta[i])
        sin_prod = sin_prod * np.sin(theta[i])
    v[n - 1] = sin_prod
    return v


def spherical_sup(paths, b: BVector, t_index: int, resolution: int = 1000,
                  directions: Optional[np.ndarray] = None) -> float:
    """Maximum over angles of ``Y_b(t, theta) = sum_i b_i X_i(t) v_i(theta)``.

    By the Euclidean norm identity this approximates ``sqrt(chi_b^2(t))`` from
    below, with error at most ``(1 - cos(step / 2)) * sqrt(chi)`` per angle.
    """
    if len(paths) != b.n:
        raise ParameterError(f"need {b.n} paths, got {len(paths)}")
    x = np.array([p.values[t_index] if isinstance(p, SamplePath) else np.asarray(p)[t_index]
                  for p in paths])
    v = sphere_directions(b.n, resolution) if directions is None else directions
    return float(np.max((np.asarray(b.b) * x) @ v))
