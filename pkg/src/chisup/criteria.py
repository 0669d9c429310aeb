"""Numeric finiteness criteria for weighted suprema near a boundary point S.

Integrals toward ``S`` are handled in the depth variable ``v = -ln|t - S|``,
where the built-in kernels and weights have closed-form log-densities. This
keeps points like ``|t - S| = exp(-e^{10^4})`` representable, which matters
because the integrands of interest decay like powers of ``ln(1/|t - S|)``.

Decision rule
-------------
1. The truncation ladder (cutoffs ``|t - S| = 2^{-j}``, j = 4..48) is always
   evaluated; partial sums above ``1e6`` mean divergent, successive partials
   agreeing to ``1e-10`` relative mean finite.
2. Otherwise an iterated-logarithm slope test runs at two deep points. The
   local exponent ``s1 = d log g / d log v`` of the density ``g`` is compared
   to ``-1``; when it is within ``tol`` of ``-1`` the next level
   ``s2 = ln v (s1 + 1)`` (the exponent of ``ln v``) is compared, then
   ``s3 = lnln v (s2 + 1)``. Disagreement between depths, or exhausting the
   levels, is reported as inconclusive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import mpmath as mp
import numpy as np
from scipy import integrate, optimize

from .errors import DomainError, ParameterError, PreconditionError
from .paths import CovarianceModel
from .weights import FbmPlateau, RhoLogLog, WeightSpec

LADDER = tuple(range(4, 49))
DIVERGENCE_THRESHOLD = 1e6
CAUCHY_RTOL = 1e-10
SLOPE_TOL = 0.02
DEEP_Z = (1e3, 1e4)       # built-ins: test at v = e^z
C_LADDER = tuple(2.0 ** j for j in range(-10, 11))
FAR_SLOPE_MIN = 0.05      # BC: far-end log-log decay rate below this counts as a floor
LN2 = math.log(2.0)


# --- f-transform ---------------------------------------------------------

def f_transform(model: CovarianceModel, t):
    """``f(t) = int_{1/2}^t C(s)^{1/alpha} ds``."""
    t = np.asarray(t, dtype=np.float64)
    lo, hi = model.domain
    if np.any(~(t > lo)) or np.any(t > hi) or (not model.closed_right and np.any(t >= hi)):
        raise DomainError("t outside the open model domain")
    if model.kind == "bridge":
        out = 0.5 * (np.log(t) - np.log1p(-t))
    elif model.kind == "fbm":
        out = 2.0 ** (-0.5 / model.H) * np.log(2.0 * t)
    else:
        g = lambda s: float(model.C(s)) ** (1.0 / model.alpha)
        out = np.vectorize(lambda x: integrate.quad(g, 0.5, x, epsabs=0.0, epsrel=1e-12, limit=200)[0])(t)
    return float(out) if out.ndim == 0 else out


def f_inverse(model: CovarianceModel, y):
    y = np.asarray(y, dtype=np.float64)
    if model.kind == "bridge":
        out = 1.0 / (1.0 + np.exp(-2.0 * y))
    elif model.kind == "fbm":
        out = 0.5 * np.exp(y * 2.0 ** (0.5 / model.H))
        if np.any(out > 1.0):
            raise DomainError("value beyond f(1)")
    else:
        lo, hi = model.domain

        def one(target):
            a, b = 0.5, 0.5
            step = 0.25
            g = lambda t: f_transform(model, t) - target
            if target > 0:
                while g(b) < 0:
                    b = b + step * (hi - b) / 0.5
                    if hi - b < 1e-15:
                        raise DomainError("target beyond f(S)")
                return optimize.brentq(g, a, b, xtol=1e-15)
            while g(a) > 0:
                a = a - step * (a - lo) / 0.5
                if a - lo < 1e-15:
                    raise DomainError("target beyond f(S)")
            return optimize.brentq(g, a, b, xtol=1e-15)

        out = np.vectorize(one)(y)
    return float(out) if np.ndim(out) == 0 else out


def f_gap_to_boundary(model: CovarianceModel, y, S: int):
    """``|t - S|`` for ``t = f^{-1}(y)``, accurate when t is close to S."""
    y = np.asarray(y, dtype=np.float64)
    if model.kind == "bridge":
        return 1.0 / (1.0 + np.exp(2.0 * y)) if S == 1 else 1.0 / (1.0 + np.exp(-2.0 * y))
    t = f_inverse(model, y)
    return np.abs(S - t)


def f_boundary(model: CovarianceModel, S: int) -> float:
    if S not in (0, 1):
        raise ParameterError("S must be 0 or 1")
    if model.kind == "bridge":
        return math.inf if S == 1 else -math.inf
    if model.kind == "fbm":
        return -math.inf if S == 0 else 2.0 ** (-0.5 / model.H) * LN2
    # custom: watch the partial integrals of C^{1/alpha} along the ladder
    g = _float_density(model, lambda t: 1.0, S, "C")
    parts = _ladder_partials(g)
    sign = 1.0 if S == 1 else -1.0
    if parts[-1][1] > DIVERGENCE_THRESHOLD or parts[-1][1] - parts[-2][1] > CAUCHY_RTOL * parts[-1][1]:
        return sign * math.inf
    return sign * parts[-1][1]


# --- partitions ------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    j: int
    lo: float
    hi: float
    f_lo: float
    f_hi: float
    gap_lo: float
    gap_hi: float


def partition(model: CovarianceModel, d: float, S: int, j_max: int) -> list[Interval]:
    """Intervals whose f-images are ``[(j-1)d, jd]`` (S = 1) or mirrored (S = 0)."""
    if not d > 0:
        raise ParameterError("d must be positive")
    if math.isfinite(f_boundary(model, S)):
        raise PreconditionError("f(S) is finite; the partition does not reach S")
    out = []
    for j in range(1, j_max + 1):
        if S == 1:
            a, b = (j - 1) * d, j * d
        else:
            a, b = -j * d, -(j - 1) * d
        ta, tb = f_inverse(model, a), f_inverse(model, b)
        ga, gb = f_gap_to_boundary(model, a, S), f_gap_to_boundary(model, b, S)
        out.append(Interval(j, float(ta), float(tb), a, b, float(ga), float(gb)))
    return out


# --- log-densities in the depth variable ---------------------------------------

class _Density:
    """``g(v)`` with ``integral_{1/2}^S h(t) dt = integral_{ln 2}^inf g(v) dv``."""

    def __init__(self, log_g: Callable, deep: bool, v_max: float = math.inf, label: str = ""):
        self.log_g = log_g      # accepts float or mpf
        self.deep = deep        # safe to evaluate at mpf v = e^{10^4}
        self.v_max = v_max
        self.label = label


def _side_logs(v, S: int, M):
    """(log t, log(1 - t)) at distance ``exp(-v)`` from S."""
    # beyond v ~ 1e5 the correction exp(-v) is below any working precision
    near = M.log1p(-M.exp(-v)) if v < 1e5 else 0 * v
    return (near, -v) if S == 1 else (-v, near)


def _builtin_log_C(model: CovarianceModel, log_t, log_1mt):
    """``log C(t)^{1/alpha}`` for the built-in kernels."""
    if model.kind == "bridge":
        return -LN2 - log_t - log_1mt
    return -LN2 / (2.0 * model.H) - log_t


def _builtin_w2(w: WeightSpec, log_t, log_1mt, M):
    if isinstance(w, RhoLogLog):
        x = M.log(2.0 - log_t - log_1mt)
        return 2.0 * w.rho1 * x + 2.0 * w.rho2 * M.log(x)
    if isinstance(w, FbmPlateau):
        return w.rho * M.log(2.0 - min(log_t, math.log(w.eps)))
    raise TypeError


def _is_builtin(model: CovarianceModel, w: WeightSpec) -> bool:
    return model.kind in ("bridge", "fbm") and isinstance(w, (RhoLogLog, FbmPlateau))


def _builtin_density(model, w, S: int, kind: str, k: int = 1, c: float = 1.0) -> _Density:
    alpha = model.alpha

    def log_g(v):
        M = mp if isinstance(v, mp.mpf) else math
        log_t, log_1mt = _side_logs(v, S, M)
        base = _builtin_log_C(model, log_t, log_1mt) - v
        w2 = _builtin_w2(w, log_t, log_1mt, M)
        if kind == "J":
            return base - c * w2
        # built-in kernels have q(u) = u^{-1/alpha}
        return base + (0.5 * (k - 2) + 1.0 / alpha) * M.log(w2) - 0.5 * w2

    return _Density(log_g, deep=True, label=f"{kind}[{model.model_id}, {w.form}]")


def _float_density(model, weight_fn, S: int, kind: str, k: int = 1, c: float = 1.0) -> _Density:
    """Density from float evaluations in t; depth limited by double precision."""
    alpha = model.alpha
    v_max = 36.0 if S == 1 else 700.0

    def log_g(v):
        v = float(v)
        s = math.exp(-v)
        t = 1.0 - s if S == 1 else s
        if t in (0.0, 1.0):
            raise DomainError("depth beyond double precision")
        base = math.log(float(model.C(t))) / alpha - v
        if kind == "C":
            return base
        w2 = float(weight_fn(t)) ** 2
        if kind == "J":
            return base - c * w2
        return base + 0.5 * (k - 2) * math.log(w2) - math.log(float(model.q(w2))) - 0.5 * w2

    return _Density(log_g, deep=False, v_max=v_max, label=f"{kind}[{model.model_id}, float]")


def make_density(model: CovarianceModel, w: WeightSpec, S: int, kind: str, k: int = 1,
                 c: float = 1.0) -> _Density:
    if S not in (0, 1):
        raise ParameterError("S must be 0 or 1")
    if _is_builtin(model, w):
        return _builtin_density(model, w, S, kind, k, c)
    return _float_density(model, w, S, kind, k, c)


# --- verdicts --------------------------------------------------------------------

@dataclass
class Verdict:
    integral_value: float
    classification: str
    truncation_trace: list
    level: Optional[int] = None
    slopes: dict = field(default_factory=dict)
    tail: Optional[float] = None
    reason: str = ""

    def table(self) -> list[tuple]:
        return [(cut, val, self.classification) for cut, val in self.truncation_trace]


def _ladder_partials(g: _Density) -> list[tuple[float, float]]:
    """Cumulative integrals up to depth ``j ln 2``; nondecreasing by construction."""
    f = lambda v: math.exp(g.log_g(v))
    edges = [LN2] + [j * LN2 for j in LADDER]
    total = 0.0
    out = []
    for a, b, j in zip(edges[:-1], edges[1:], LADDER):
        if b > g.v_max:
            break
        piece = integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-12, limit=200)[0]
        total += max(piece, 0.0)
        out.append((2.0 ** -j, total))
    return out


def _level_slopes(g: _Density, y0) -> list:
    """Slopes s1, s2, s3 at depth ``v = exp(y0)``."""
    if g.deep:
        with mp.workdps(60):
            y0 = mp.mpf(y0)
            s1 = mp.diff(lambda y: g.log_g(mp.exp(y)), y0)
            z = y0
            s2 = z * (s1 + 1)
            s3 = mp.log(z) * (s2 + 1)
            return [float(s1), float(s2), float(s3)]
    h = 1e-3
    s1 = (g.log_g(math.exp(y0 + h)) - g.log_g(math.exp(y0 - h))) / (2.0 * h)
    s2 = y0 * (s1 + 1.0)
    s3 = math.log(y0) * (s2 + 1.0)
    return [s1, s2, s3]


def _slope_decision(slopes: list, tol: float) -> tuple[str, Optional[int]]:
    for level, s in enumerate(slopes, start=1):
        if s < -1.0 - tol:
            return "finite", level
        if s > -1.0 + tol:
            return "divergent", level
    return "inconclusive", None


_TAIL_END = (1e4, math.log(1e8), math.log(math.log(1e8)))   # deep end per level


def _level_log_integrand(g: _Density, level: int, M):
    """Log-integrand in the variable of ``level``: ``ln v``, ``lnln v`` or ``lnlnln v``."""
    if level == 1:
        return lambda z: g.log_g(M.exp(z)) + z
    if level == 2:
        return lambda y: g.log_g(M.exp(M.exp(y))) + M.exp(y) + y
    return lambda x: g.log_g(M.exp(M.exp(M.exp(x)))) + M.exp(M.exp(x)) + M.exp(x) + x


def _tail_integral(g: _Density, v0: float, level: int) -> float:
    """``int_{v0}^inf g(v) dv``: quadrature to a deep cutoff plus an exponential tail closure.

    Past the cutoff the integrand is ``exp(F)`` with ``F`` locally linear in
    the level variable, so the remainder is ``exp(F(end)) / -F'(end)``.
    """
    if not g.deep:
        F = _level_log_integrand(g, 1, math)
        a, b = math.log(v0), math.log(g.v_max)
        body = integrate.quad(lambda z: math.exp(F(z)), a, b, epsabs=0.0, epsrel=1e-10, limit=200)[0]
        h = 1e-4
        dF = (F(b) - F(b - h)) / h
        return body + (math.exp(F(b)) / -dF if dF < 0 else math.inf)
    with mp.workdps(40):
        F = _level_log_integrand(g, level, mp)
        a = mp.log(v0)
        for _ in range(level - 1):
            a = mp.log(a)
        b = mp.mpf(_TAIL_END[level - 1])
        nodes = [a] + [x for x in (a + 1, a + 10, a + 100, a + 1000) if x < b] + [b]
        body = mp.quad(lambda x: mp.exp(F(x)), nodes)
        dF = mp.diff(F, b)
        rest = mp.exp(F(b)) / -dF if dF < 0 else mp.inf
        return float(body + rest)


def integral_verdict(g: _Density, tol: float = SLOPE_TOL) -> Verdict:
    try:
        trace = _ladder_partials(g)
    except OverflowError:
        return Verdict(math.inf, "divergent", [], reason="overflow on the truncation ladder")
    last = trace[-1][1]
    if last > DIVERGENCE_THRESHOLD:
        return Verdict(math.inf, "divergent", trace, reason="partial sums exceed 1e6")
    if len(trace) > 1 and abs(last - trace[-2][1]) <= CAUCHY_RTOL * last:
        return Verdict(last, "finite", trace, reason="truncation ladder is Cauchy")
    # float densities: stay clear of v_max, where 1 - t has lost most of its digits
    depths = list(DEEP_Z) if g.deep else [math.log(g.v_max / 4.0), math.log(g.v_max / 2.0)]
    slopes = {}
    decisions = []
    for y0 in depths:
        s = _level_slopes(g, y0)
        slopes[f"ln v={y0:g}"] = s
        decisions.append(_slope_decision(s, tol))
    kinds = {d[0] for d in decisions}
    if len(kinds) != 1 or "inconclusive" in kinds:
        return Verdict(math.nan, "inconclusive", trace, slopes=slopes,
                       reason="deep slope tests disagree or are ambiguous")
    kind, level = decisions[-1]
    if kind == "divergent":
        return Verdict(math.inf, "divergent", trace, level, slopes, reason=f"slope test, level {level}")
    v0 = LADDER[len(trace) - 1] * LN2
    tail = _tail_integral(g, v0, level)
    return Verdict(last + tail, "finite", trace, level, slopes, tail, reason=f"slope test, level {level}")


def _require_boundary(model: CovarianceModel, S: int) -> None:
    if math.isfinite(f_boundary(model, S)):
        raise PreconditionError("f(S) is finite; the criterion concerns boundaries with |f(S)| = inf")


def eval_I(model: CovarianceModel, w: WeightSpec, S: int, k: int) -> Verdict:
    """Integral ``|int_{1/2}^S C^{1/alpha} w^{k-2} / q(w^2) e^{-w^2/2} dt|``."""
    if k < 1:
        raise ParameterError("k must be positive")
    _require_boundary(model, S)
    return integral_verdict(make_density(model, w, S, "I", k=k))


def eval_J(model: CovarianceModel, w: WeightSpec, S: int, c: float) -> Verdict:
    """Integral ``|int_{1/2}^S C^{1/alpha} e^{-c w^2} dt|``."""
    if not c > 0:
        raise ParameterError("c must be positive")
    _require_boundary(model, S)
    return integral_verdict(make_density(model, w, S, "J", c=c))


def check_condition_A(model: CovarianceModel, w: WeightSpec, S: int) -> None:
    """``w^2 -> inf`` at S; raises PreconditionError when the weight stays bounded."""
    if _is_builtin(model, w):
        depth = [mp.exp(mp.mpf(z)) for z in (10.0, 100.0, 1000.0)]
        vals = []
        for v in depth:
            lt, l1 = _side_logs(v, S, mp)
            vals.append(_builtin_w2(w, lt, l1, mp))
    else:
        vals = []
        for v in (8.0, 16.0, 24.0, 32.0):
            s = math.exp(-v)
            vals.append(float(w(1.0 - s if S == 1 else s)) ** 2)
    if not all(b > a * (1.0 + 1e-9) for a, b in zip(vals, vals[1:])):
        raise PreconditionError("w^2 does not escape to infinity at S (condition A fails)")


@dataclass
class FinitenessResult:
    verdict: str
    c: Optional[float]
    verdicts: list

    def __str__(self):
        return self.verdict


def finiteness_verdict(model: CovarianceModel, w: WeightSpec, S: int,
                       ladder=C_LADDER) -> FinitenessResult:
    """Search c over a geometric ladder; finite J for some c means as_finite."""
    _require_boundary(model, S)
    check_condition_A(model, w, S)
    seen = []
    for c in ladder:
        v = eval_J(model, w, S, c)
        seen.append((c, v))
        if v.classification == "finite":
            return FinitenessResult("as_finite", c, seen)
    if any(v.classification == "inconclusive" for _, v in seen):
        return FinitenessResult("inconclusive", None, seen)
    last = seen[-1][1]
    s = list(last.slopes.values())[-1] if last.slopes else None
    if s is not None and last.level is not None and abs(s[last.level - 1] + 1.0) < 10 * SLOPE_TOL:
        return FinitenessResult("inconclusive", None, seen)
    return FinitenessResult("as_infinite", None, seen)


# --- conditions B(S), C(S) --------------------------------------------------------

@dataclass
class BCReport:
    per_j: list            # (j, min ratio, max ratio)
    ratio_bounds: tuple
    decay_slope: Optional[float]
    decay_ok: bool
    flags: list


def check_conditions_BC(model: CovarianceModel, d0: float, j_range, S: int = 1,
                        n_pairs: int = 400, seed: int = 0) -> BCReport:
    """Sampled diagnostics for the local and cross-interval correlation conditions.

    Per interval, ``(1 - r(s, t)) / K^2(|f(t) - f(s)|)`` over random pairs;
    across intervals, a log-log fit of ``sup |r|`` against the index gap.
    """
    rng = np.random.default_rng(seed)
    js = list(j_range)
    sign = 1.0 if S == 1 else -1.0

    def corr_f(x, y):
        if model.corr_f is not None:
            return model.corr_f(x, y)
        return model.corr(f_inverse(model, x), f_inverse(model, y))

    per_j = []
    for j in js:
        x = sign * ((j - 1) * d0 + d0 * rng.random(n_pairs))
        y = sign * ((j - 1) * d0 + d0 * rng.random(n_pairs))
        keep = x != y
        x, y = x[keep], y[keep]
        r = np.asarray(corr_f(x, y), dtype=np.float64)
        ratio = (1.0 - r) / np.asarray(model.K(np.abs(x - y))) ** 2
        per_j.append((j, float(ratio.min()), float(ratio.max())))
    lows = [p[1] for p in per_j]
    highs = [p[2] for p in per_j]
    flags = []
    if min(lows) <= 0:
        flags.append("ratio reaches 0: local lower bound fails")
    if not np.isfinite(max(highs)):
        flags.append("ratio unbounded")
    elif len(highs) > 4 and highs[-1] > 2.0 * np.median(highs):
        flags.append("ratio upper bound trending up with j")

    # cross-interval decay: compare interval j0 with j0 + l
    j0 = js[0]
    gaps = np.arange(2, min(30, max(3, len(js))) + 1)
    sups = []
    for l in gaps:
        x = sign * ((j0 - 1) * d0 + d0 * rng.random(n_pairs))
        y = sign * ((j0 + l - 1) * d0 + d0 * rng.random(n_pairs))
        sups.append(float(np.max(np.abs(corr_f(x, y)))))
    sups = np.array(sups)
    if np.all(sups == 0):
        slope, ok = None, True
    elif np.any(sups == 0):
        slope, ok = -math.inf, True
    else:
        slope = float(np.polyfit(np.log(gaps), np.log(sups), 1)[0])
        # a floor shows up as a flat far end even when the overall fit slopes down
        half = len(gaps) // 2
        far = float(np.polyfit(np.log(gaps[half:]), np.log(sups[half:]), 1)[0])
        ok = slope < 0 and far < -FAR_SLOPE_MIN
        if not ok:
            flags.append("cross-interval correlation does not decay (slope >= 0)")
    return BCReport(per_j, (min(lows), max(highs)), slope, ok, flags)
