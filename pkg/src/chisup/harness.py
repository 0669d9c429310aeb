"""Monte Carlo verification of tail asymptotics and Gaussian concentration bounds.

Every experiment reduces to per-path statistics (grid maxima of
``chi_b^2 / w^2`` over one or more index segments). Paths are produced in
fixed-size blocks, each with its own stream keyed by ``(master_seed, block)``,
and statistics are concatenated in block order, so worker count never
changes a number. Exceedance probabilities come from exact integer counts.
"""
from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import kernels
from .asymptotics import AsymptoticEvaluation, evaluate
from .chi import BVector, weight_squares
from .errors import ChisupError, ParameterError, PreconditionError
from .paths import DEFAULT_DELTA, CovarianceModel, Grid, bridge_model, fbm_model, normalized_paths
from .streams import DEFAULT_BLOCK_SIZE, block_ranges, block_stream
from .weights import WeightSpec

_STREAM_HARNESS = 21
Z95 = float(stats.norm.ppf(0.975))
MIN_PATHS = 1000


@dataclass
class ExperimentConfig:
    """One Monte Carlo experiment.

    ``weight=None`` means ``w = 1``. The grid is uniform on ``[delta, 1 - delta]``
    (``[delta, 1]`` for models closed on the right) unless ``grid`` is given.
    """

    model: CovarianceModel
    weight: Optional[WeightSpec]
    b: BVector
    u_levels: Sequence[float]
    n_paths: int = 100_000
    n_points: int = 2 ** 10
    delta: float = DEFAULT_DELTA
    master_seed: int = 0
    workers: int = 1
    block_size: int = DEFAULT_BLOCK_SIZE
    grid: Optional[Grid] = None

    def __post_init__(self):
        u = np.asarray(self.u_levels, dtype=np.float64)
        if u.ndim != 1 or u.size == 0 or np.any(np.diff(u) <= 0):
            raise ParameterError("u levels must be a non-empty increasing list")
        if not np.all(u > 0):
            raise ParameterError("u levels must be positive")
        self.u_levels = tuple(float(x) for x in u)
        if self.n_paths < MIN_PATHS:
            raise ParameterError(f"n_paths must be at least {MIN_PATHS}")
        if self.workers < 1:
            raise ParameterError("workers must be positive")
        if self.grid is None:
            self.grid = Grid.unit_interval(self.n_points, self.delta, self.model.closed_right)
        self.model.check_grid(self.grid)

    def metadata(self) -> dict:
        g = self.grid
        out = {"model": self.model.model_id,
               "weight": "one" if self.weight is None else self.weight.form,
               "b": " ".join(repr(x) for x in self.b.b),
               "grid": f"{g.n_points} points on [{g.t_min!r}, {g.t_max!r}]",
               "n_paths": self.n_paths, "seed": self.master_seed}
        if self.weight is not None:
            out.update({k: v for k, v in self.weight.config_items().items() if k != "weight"})
        return out


# --- statistics ------------------------------------------------------------------

def _segments(grid: Grid, subs: Optional[Sequence[tuple[float, float]]]) -> np.ndarray:
    t = grid.points
    if subs is None:
        return np.array([[0, t.size]], dtype=np.intp)
    out = []
    for lo, hi in subs:
        idx = np.nonzero((t >= lo) & (t <= hi))[0]
        if idx.size == 0:
            raise ParameterError(f"subinterval [{lo}, {hi}] contains no grid points")
        out.append((idx[0], idx[-1] + 1))
    return np.array(out, dtype=np.intp)


def _brownian_layout(model: CovarianceModel, grid: Grid):
    """(increment sds, bridge times, variances) when the model is Brownian-driven."""
    t = grid.points
    if model.kind == "bridge":
        sd = np.sqrt(np.diff(np.concatenate(([0.0], t, [1.0]))))
        return sd, t, t * (1.0 - t)
    if model.kind == "fbm" and model.H == 0.5:
        return np.sqrt(np.diff(np.concatenate(([0.0], t)))), None, t
    return None


def _model_token(model: CovarianceModel):
    """Picklable stand-in for the built-in models, whose kernels are closures."""
    if model.kind == "bridge":
        return ("bridge",)
    if model.kind == "fbm":
        return ("fbm", model.H)
    return model


def _from_token(token) -> CovarianceModel:
    if isinstance(token, tuple):
        return bridge_model() if token[0] == "bridge" else fbm_model(token[1])
    return token


def _stat_block(args):
    token, grid, b2, inv_w2, segments, seed, block, size = args
    model = _from_token(token)
    rng = block_stream(seed, block, _STREAM_HARNESS)
    layout = _brownian_layout(model, grid)
    if layout is not None:
        sd, bt, var = layout
        # normalize inside the weights: chi of X / sigma equals chi of X times 1 / sigma^2
        wts = np.tile(inv_w2 / var, (segments.shape[0], 1))
        return kernels.bm_chi_stats(rng, size, sd, bt, b2, wts, segments)
    vals = np.stack([normalized_paths(model, grid, rng, size) for _ in range(b2.size)])
    wts = np.tile(inv_w2, (segments.shape[0], 1))
    return kernels.chi_stats(vals, b2, wts, segments)


def sup_statistics(cfg: ExperimentConfig, subs: Optional[Sequence[tuple[float, float]]] = None,
                   weighted: bool = True) -> np.ndarray:
    """Per-path grid maxima of ``chi_b^2 / w^2``, shape (n_paths, n_segments)."""
    grid = cfg.grid
    inv_w2 = 1.0 / weight_squares(cfg.weight if weighted else None, grid.points)
    segments = _segments(grid, subs)
    head = (_model_token(cfg.model), grid, cfg.b.squares, inv_w2, segments)
    tasks = [head + (cfg.master_seed, b, hi - lo) for b, lo, hi in block_ranges(cfg.n_paths, cfg.block_size)]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            parts = list(ex.map(_stat_block, tasks))
    else:
        parts = [_stat_block(task) for task in tasks]
    return np.concatenate(parts, axis=0)


def wilson_interval(count: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0 or not 0 <= count <= n:
        raise ParameterError("need 0 <= count <= n and n > 0")
    p = count / n
    den = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if count == 0 else max(0.0, centre - half)
    hi = 1.0 if count == n else min(1.0, centre + half)
    return lo, hi


# --- tail reports --------------------------------------------------------------------

@dataclass(frozen=True)
class TailRow:
    u: float
    count: int
    p_hat: float
    wilson_ci_lo: float
    wilson_ci_hi: float
    asymptotic: float
    ratio: float
    ratio_upper_bound: bool = False


@dataclass
class TailReport:
    rows: list
    metadata: dict = field(default_factory=dict)

    COLUMNS = ("u", "count", "p_hat", "wilson_ci_lo", "wilson_ci_hi", "asymptotic", "ratio", "ratio_flag")

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def write_csv(self, fh, header: Sequence[str] = ()) -> None:
        for line in header:
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for r in self.rows:
            w.writerow([repr(r.u), r.count, repr(r.p_hat), repr(r.wilson_ci_lo), repr(r.wilson_ci_hi),
                        repr(r.asymptotic), repr(r.ratio), "upper_bound" if r.ratio_upper_bound else ""])


def _tail_rows(stat: np.ndarray, u_levels, log_asym) -> list:
    n = stat.size
    rows = []
    for u in u_levels:
        count = int(np.count_nonzero(stat > u))
        lo, hi = wilson_interval(count, n)
        asym = float(math.exp(log_asym(u))) if log_asym is not None else math.nan
        if count == 0:
            # no exceedances: the ratio is only bounded by wilson_ci_hi / asymptotic
            rows.append(TailRow(u, 0, 0.0, lo, hi, asym, math.nan, True))
        else:
            p = count / n
            rows.append(TailRow(u, count, p, lo, hi, asym, p / asym if asym > 0 else math.nan))
    return rows


def asymptotic_evaluator(cfg: ExperimentConfig, **kw) -> Optional[AsymptoticEvaluation]:
    """The leading-order evaluator for the configuration, or None when unavailable."""
    if cfg.weight is None:
        return None
    try:
        return evaluate(cfg.model, cfg.weight, cfg.b, **kw)
    except ChisupError:
        return None


def empirical_tail(cfg: ExperimentConfig, evaluator: Optional[AsymptoticEvaluation] = None) -> TailReport:
    """Exceedance frequencies of ``sup chi_b^2 / w^2`` at each u with Wilson 95% intervals."""
    t0 = time.perf_counter()
    stat = sup_statistics(cfg)[:, 0]
    ev = evaluator if evaluator is not None else asymptotic_evaluator(cfg)
    rows = _tail_rows(stat, cfg.u_levels, None if ev is None else ev.log_value)
    meta = cfg.metadata()
    meta["statistic"] = "grid supremum (a lower bound for the continuous supremum)"
    meta["scenario"] = "none" if ev is None else ev.scenario
    meta["runtime_s"] = time.perf_counter() - t0
    return TailReport(rows, meta)


@dataclass(frozen=True)
class RatioSummary:
    u: tuple
    ratios: tuple
    deviations: tuple
    nonincreasing: bool
    within: bool
    band: tuple


def ratio_report(report: TailReport, band: tuple = (0.5, 2.0)) -> RatioSummary:
    """Ratios ``p_hat / asymptotic`` and whether ``|ratio - 1|`` is nonincreasing in u."""
    rows = [r for r in report.rows if r.count > 0 and r.asymptotic > 0]
    if len(rows) < 3:
        raise PreconditionError("need at least 3 u levels with exceedances")
    ratios = tuple(r.ratio for r in rows)
    dev = tuple(abs(x - 1.0) for x in ratios)
    mono = all(b <= a for a, b in zip(dev, dev[1:]))
    within = all(band[0] <= x <= band[1] for x in ratios)
    return RatioSummary(tuple(r.u for r in rows), ratios, dev, mono, within, band)


# --- concentration bounds -------------------------------------------------------------

@dataclass(frozen=True)
class BoundRow:
    u: float
    bound: float            # nan when not applicable
    applicable: bool
    count: int
    p_hat: float
    wilson_ci_lo: float
    wilson_ci_hi: float
    floor: float = 0.0      # Wilson upper end at zero exceedances: the resolution of n paths

    @property
    def testable(self) -> bool:
        """The bound is applicable and above what n paths can resolve."""
        return self.applicable and self.bound >= self.floor

    @property
    def holds(self) -> bool:
        """CI-upper empirical exceedance below the bound; vacuous on untestable rows."""
        return (not self.testable) or self.wilson_ci_hi <= self.bound


@dataclass
class BoundReport:
    kind: str
    Q: float
    sigma2: float
    rows: list
    extra: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return all(r.holds for r in self.rows)

    COLUMNS = ("u", "bound", "applicable", "testable", "count", "p_hat", "wilson_ci_lo", "wilson_ci_hi", "holds")

    def write_csv(self, fh, header: Sequence[str] = ()) -> None:
        for line in header:
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for r in self.rows:
            w.writerow([repr(r.u), repr(r.bound), int(r.applicable), int(r.testable), r.count, repr(r.p_hat),
                        repr(r.wilson_ci_lo), repr(r.wilson_ci_hi), int(r.holds)])


def borell_curve(u, Q: float, sigma2: float):
    """``exp(-(sqrt(u) - Q)^2 / (2 sigma^2))`` for ``u > Q^2``; nan elsewhere."""
    u = np.asarray(u, dtype=np.float64)
    r = np.sqrt(u) - Q
    out = np.where(r > 0, np.exp(-np.square(np.maximum(r, 0.0)) / (2.0 * sigma2)), np.nan)
    return float(out) if out.ndim == 0 else out


def borell_bound(cfg: ExperimentConfig, u_levels: Optional[Sequence[float]] = None,
                 stat: Optional[np.ndarray] = None) -> BoundReport:
    """Borell-TIS curve for ``sup chi_b^2 / w^2`` with ``Q`` estimated from the same paths.

    The field ``Y_b(t, theta) / w(t)`` has supremum ``sqrt(sup chi_b^2 / w^2)``
    and maximal variance ``max 1 / w^2`` (since ``b_1 = 1``).
    """
    u_levels = cfg.u_levels if u_levels is None else tuple(u_levels)
    if stat is None:
        stat = sup_statistics(cfg)[:, 0]
    Q = float(np.mean(np.sqrt(stat)))
    sigma2 = float(np.max(1.0 / weight_squares(cfg.weight, cfg.grid.points)))
    rows = []
    for u in u_levels:
        bound = borell_curve(u, Q, sigma2)
        count = int(np.count_nonzero(stat > u))
        lo, hi = wilson_interval(count, stat.size)
        rows.append(BoundRow(u, bound, bool(np.isfinite(bound)), count, count / stat.size, lo, hi,
                             wilson_interval(0, stat.size)[1]))
    return BoundReport("borell", Q, sigma2, rows)


def cross_correlation_sup(model: CovarianceModel, grid: Grid, S1, S2) -> float:
    """``sup |r(s, t)|`` over grid points ``s`` in S1 and ``t`` in S2."""
    t = grid.points
    s = t[(t >= S1[0]) & (t <= S1[1])]
    r = t[(t >= S2[0]) & (t <= S2[1])]
    # subsample long segments; r is smooth off the diagonal
    s = s[:: max(1, s.size // 256)]
    r = r[:: max(1, r.size // 256)]
    return float(np.max(np.abs(model.corr(s[:, None], r[None, :]))))


def double_sup_bound(cfg: ExperimentConfig, S1: tuple = (0.2, 0.4), S2: tuple = (0.6, 0.8),
                     u_levels: Optional[Sequence[float]] = None) -> BoundReport:
    """Bound on ``P(sup_{S1} chi^2/w^2 > u, sup_{S2} chi^2/w^2 > u)``.

    The joint event forces ``sup_{S1} sqrt(chi^2)/w + sup_{S2} sqrt(chi^2)/w > 2 sqrt(u)``;
    the sum is the supremum of a Gaussian field with variance at most
    ``A^2 + B^2 + 2 eta A B`` (``A``, ``B`` the maxima of ``1/w`` on each
    interval, ``eta`` the sup cross-correlation), which is ``2 + 2 eta`` for
    ``w = 1``. Borell-TIS then gives ``exp(-(2 sqrt(u) - Q)^2 / (2 sigma^2))``.
    """
    if not (S1[1] < S2[0] or S2[1] < S1[0]):
        raise ParameterError("S1 and S2 must be disjoint")
    u_levels = cfg.u_levels if u_levels is None else tuple(u_levels)
    stat = sup_statistics(cfg, subs=[S1, S2])
    eta = cross_correlation_sup(cfg.model, cfg.grid, S1, S2)
    t = cfg.grid.points
    inv_w = 1.0 / np.sqrt(weight_squares(cfg.weight, t))
    A = float(inv_w[(t >= S1[0]) & (t <= S1[1])].max())
    B = float(inv_w[(t >= S2[0]) & (t <= S2[1])].max())
    sigma2 = A * A + B * B + 2.0 * eta * A * B
    root = np.sqrt(stat)
    Q = float(np.mean(root[:, 0] + root[:, 1]))
    rows = []
    n = stat.shape[0]
    marg = []
    for u in u_levels:
        r = 2.0 * math.sqrt(u) - Q
        bound = math.exp(-r * r / (2.0 * sigma2)) if r > 0 else math.nan
        both = (stat[:, 0] > u) & (stat[:, 1] > u)
        count = int(np.count_nonzero(both))
        lo, hi = wilson_interval(count, n)
        rows.append(BoundRow(u, bound, r > 0, count, count / n, lo, hi, wilson_interval(0, n)[1]))
        marg.append((int(np.count_nonzero(stat[:, 0] > u)), int(np.count_nonzero(stat[:, 1] > u))))
    return BoundReport("double-sup", Q, sigma2, rows, {"eta": eta, "S1": S1, "S2": S2, "marginal_counts": marg})
