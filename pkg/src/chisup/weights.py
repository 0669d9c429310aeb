"""Weight functions, their F1/F2 classification and local expansion data.

Two closed-form families are built in:

* ``RhoLogLog``: ``w^2(t) = 2 rho1 lnln(e^2/(t(1-t))) + 2 rho2 lnlnln(e^2/(t(1-t)))``
  on (0, 1), whose minimizers fall into three cases according to the sign of
  ``rho2 + rho1 lnln(4e^2)``.
* ``FbmPlateau``: ``w^2(t) = rho lnln(e^2/min(t, eps))`` on (0, 1], constant on
  ``[eps, 1]``.

Near an isolated minimizer ``t_i`` a weight expands as
``w(t_i + h) = w(t_i) + a_i |h|^{beta_i} (1 + o(1))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import optimize

from .errors import ClassificationError, DomainError, ParameterError

L0 = 2.0 + math.log(4.0)        # ln(4 e^2)
X_MIN = math.log(L0)             # lnln(4 e^2), the minimum of x(t) on (0, 1)
CASE_B_RTOL = 1e-12


class WeightSpec:
    """Base class: a strictly positive weight on an interval."""

    form = "abstract"
    domain: tuple = (0.0, 1.0)
    closed_right = False

    def w2(self, t):
        raise NotImplementedError

    def w(self, t):
        return np.sqrt(self.w2(t))

    def __call__(self, t):
        return self.w(t)

    def eval(self, t):
        """Scalar ``w(t)`` with a domain check."""
        self.check_domain(t)
        return float(self.w(t))

    def check_domain(self, t) -> None:
        t = np.asarray(t, dtype=np.float64)
        lo, hi = self.domain
        bad = ~(t > lo) | (t > hi) | ((t == hi) & (not self.closed_right))
        if np.any(bad):
            raise DomainError(f"t outside the weight domain {self.domain}")

    def config_items(self) -> dict:
        return {"weight": self.form}


def _y_minus_log1p(y: float) -> float:
    if abs(y) < 1e-3:
        return y * y * (0.5 - y * (1.0 / 3.0 - y * (0.25 - y * 0.2)))
    return y - math.log1p(y)


@dataclass(frozen=True)
class RhoLogLog(WeightSpec):
    rho1: float
    rho2: float = 0.0

    form = "rho-loglog"
    domain = (0.0, 1.0)
    closed_right = False

    def __post_init__(self):
        if not self.rho1 > 0:
            raise ParameterError("rho1 must be positive")
        if not math.isfinite(self.rho2):
            raise ParameterError("rho2 must be finite")
        if -self.rho2 / self.rho1 >= math.e:
            # min w^2 = 2 rho2 (ln(-rho2/rho1) - 1) <= 0 once -rho2/rho1 >= e
            raise ParameterError("rho-loglog weight is not positive when -rho2/rho1 >= e")

    @classmethod
    def boundary(cls, rho1: float) -> "RhoLogLog":
        """The weight on the case-b boundary ``rho2 = -rho1 lnln(4e^2)``."""
        return cls(rho1, -rho1 * X_MIN)

    def w2_of_x(self, x):
        """``w^2`` as a function of ``x = lnln(e^2/(t(1-t)))``."""
        x = np.asarray(x, dtype=np.float64)
        return 2.0 * self.rho1 * x + 2.0 * self.rho2 * np.log(x)

    def w2(self, t):
        self.check_domain(t)
        t = np.asarray(t, dtype=np.float64)
        x = np.log(2.0 - np.log(t) - np.log1p(-t))
        return self.w2_of_x(x)

    def excess(self, t0: float, h) -> np.ndarray:
        """``w(t0 + h) - w(t0)`` without cancellation, elementwise in ``h``."""
        g0 = t0 * (1.0 - t0)
        L = 2.0 - math.log(g0)
        x = math.log(L)
        w0 = math.sqrt(2.0 * self.rho1 * x + 2.0 * self.rho2 * math.log(x))
        lin = 2.0 * (self.rho1 * x + self.rho2)
        out = []
        for hh in np.atleast_1d(np.asarray(h, dtype=np.float64)):
            dg = hh * (1.0 - 2.0 * t0) - hh * hh
            dL = -math.log1p(dg / g0)
            y = math.log1p(dL / L) / x
            dw2 = lin * y - 2.0 * self.rho2 * _y_minus_log1p(y)
            out.append(dw2 / (math.sqrt(w0 * w0 + dw2) + w0))
        return np.array(out)

    def config_items(self) -> dict:
        return {"weight": self.form, "rho1": self.rho1, "rho2": self.rho2}


@dataclass(frozen=True)
class FbmPlateau(WeightSpec):
    rho: float
    eps: float

    form = "fbm-plateau"
    domain = (0.0, 1.0)
    closed_right = True

    def __post_init__(self):
        if not self.rho > 0:
            raise ParameterError("rho must be positive")
        if not 0.0 < self.eps < 1.0:
            raise ParameterError("eps must lie in (0, 1)")

    @property
    def w2_min(self) -> float:
        return self.rho * math.log(2.0 - math.log(self.eps))

    def w2(self, t):
        self.check_domain(t)
        t = np.minimum(np.asarray(t, dtype=np.float64), self.eps)
        return self.rho * np.log(2.0 - np.log(t))

    def config_items(self) -> dict:
        return {"weight": self.form, "rho": self.rho, "eps": self.eps}


@dataclass(frozen=True)
class CustomWeight(WeightSpec):
    """User weight ``fn(t) > 0``.

    ``hints`` may carry ``plateaus`` (list of (c, d)) for F2 weights, or
    ``bracket`` (lo, hi) restricting the minimizer search, and ``n_scan``.
    """

    fn: Callable
    domain: tuple = (0.0, 1.0)
    closed_right: bool = False
    hints: dict = field(default_factory=dict)
    name: str = "custom"

    form = "custom"

    def w(self, t):
        self.check_domain(t)
        out = np.asarray(np.vectorize(self.fn, otypes=[float])(t), dtype=np.float64)
        if np.any(~(out > 0)):
            raise DomainError("custom weight must be strictly positive")
        return out

    def w2(self, t):
        return np.square(self.w(t))


# --- classification types ------------------------------------------------------

@dataclass(frozen=True)
class Minimizer:
    t: float
    w_min: float
    a: float
    beta: float


@dataclass(frozen=True)
class F1:
    minimizers: tuple
    kind = "F1"

    def __post_init__(self):
        ts = [m.t for m in self.minimizers]
        if not ts:
            raise ClassificationError("F1 needs at least one minimizer")
        if len(set(ts)) != len(ts):
            raise ClassificationError("F1 minimizers must be distinct")

    @property
    def w_min(self) -> float:
        return self.minimizers[0].w_min

    @property
    def beta(self) -> float:
        return max(m.beta for m in self.minimizers)

    @property
    def m(self) -> int:
        return len(self.minimizers)


@dataclass(frozen=True)
class F2:
    intervals: tuple
    w_min: float
    kind = "F2"

    def __post_init__(self):
        iv = sorted(self.intervals)
        for c, d in iv:
            if not c < d:
                raise ClassificationError("plateau intervals need c < d")
        for (c1, d1), (c2, d2) in zip(iv, iv[1:]):
            if c2 <= d1:
                raise ClassificationError("plateau intervals must be disjoint")
        object.__setattr__(self, "intervals", tuple(tuple(map(float, p)) for p in iv))


WeightClassification = Union[F1, F2]


@dataclass(frozen=True)
class Corollary34Data:
    case: str
    t_points: tuple
    A: float
    taylor_coeff: float
    beta: float
    Q_const: float
    w_min: float
    audit: dict = field(default_factory=dict)


def rho_case(rho1: float, rho2: float) -> str:
    s = rho2 + rho1 * X_MIN
    if abs(s) <= CASE_B_RTOL * rho1 * X_MIN:
        return "b"
    return "a" if s > 0 else "c"


def corollary34_constants(rho1: float, rho2: float) -> Corollary34Data:
    """Minimizers, expansion coefficients and constants of the rho-loglog weight."""
    if not rho1 > 0:
        raise ParameterError("rho1 must be positive")
    case = rho_case(rho1, rho2)
    if case in ("a", "b"):
        A1 = rho1 * X_MIN + rho2 * math.log(X_MIN)
        w = math.sqrt(2.0 * A1)
        if case == "a":
            Q1 = 16.0 / L0 * (rho1 + rho2 / X_MIN)
            return Corollary34Data("a", (0.5,), A1, Q1 / (4.0 * w), 2.0, Q1, w,
                                   {"A1": A1, "Q1": Q1, "L0": L0, "x_min": X_MIN})
        Q2 = 384.0 * rho1 / (X_MIN * L0 ** 2)
        return Corollary34Data("b", (0.5,), A1, Q2 / (48.0 * w), 4.0, Q2, w,
                               {"A1": A1, "Q2": Q2, "L0": L0, "x_min": X_MIN})
    x0 = -rho2 / rho1
    if x0 >= math.e:
        raise ParameterError("rho-loglog weight is not positive when -rho2/rho1 >= e")
    L1 = math.exp(x0)
    g1 = math.exp(2.0 - L1)
    t1 = 0.5 + math.sqrt(0.25 - g1)
    t2 = g1 / t1
    A2 = rho2 * (math.log(-rho2) - math.log(rho1) - 1.0)
    w = math.sqrt(2.0 * A2)
    Q3 = ((1.0 - 2.0 * t1) / (g1 * L1)) ** 2
    Q = L1 / (2.0 * t1 - 1.0)
    a = rho1 ** 2 * Q3 / (-2.0 * rho2 * w)
    return Corollary34Data("c", (t2, t1), A2, a, 2.0, Q, w,
                           {"A2": A2, "Q": Q, "Q3": Q3, "t1": t1, "t2": t2, "x0": x0})


# --- expansion fitting -------------------------------------------------------

def fit_power(h: np.ndarray, delta: np.ndarray) -> tuple[float, float]:
    """Least-squares fit of ``log delta = log a + beta log h``; returns (a, beta)."""
    h = np.asarray(h, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if np.any(~(delta > 0)):
        raise ClassificationError("expansion increments must be positive")
    beta, loga = np.polyfit(np.log(h), np.log(delta), 1)
    return float(math.exp(loga)), float(beta)


def symmetric_excess(excess: Callable, t0: float, h: np.ndarray) -> np.ndarray:
    """Average of the excesses at ``t0 + h`` and ``t0 - h``; cancels odd orders."""
    h = np.asarray(h, dtype=np.float64)
    return 0.5 * (excess(t0, h) + excess(t0, -h))


def taylor_fit(w: RhoLogLog, t0: float, h_lo: float = 1e-5, h_hi: float = 1e-3,
               n: int = 25) -> tuple[float, float]:
    """Fitted (a, beta) around ``t0`` from the cancellation-free excess.

    The offsets scale with the distance of ``t0`` to the nearer end of (0, 1).
    """
    scale = min(1.0, 2.0 * min(t0, 1.0 - t0))
    hs = np.geomspace(h_lo * scale, h_hi * scale, n)
    return fit_power(hs, symmetric_excess(w.excess, t0, hs))


# --- classification ---------------------------------------------------------

def classify(w: WeightSpec) -> WeightClassification:
    if isinstance(w, RhoLogLog):
        d = corollary34_constants(w.rho1, w.rho2)
        return F1(tuple(Minimizer(t, d.w_min, d.taylor_coeff, d.beta) for t in d.t_points))
    if isinstance(w, FbmPlateau):
        return F2(((w.eps, 1.0),), math.sqrt(w.w2_min))
    if isinstance(w, CustomWeight):
        return _classify_custom(w)
    raise ClassificationError(f"no classifier for weight form {w.form!r}")


def _classify_custom(w: CustomWeight) -> WeightClassification:
    hints = w.hints or {}
    if "plateaus" in hints:
        return _check_plateaus(w, hints["plateaus"])
    lo, hi = hints.get("bracket", w.domain)
    n_scan = int(hints.get("n_scan", 4001))
    f = lambda t: float(w.fn(t))
    ts = np.linspace(lo, hi, n_scan + 2)[1:-1]
    vals = np.array([f(t) for t in ts])
    if np.any(~(vals > 0)):
        raise DomainError("custom weight must be strictly positive")
    i_min = int(np.argmin(vals))
    if i_min in (0, n_scan - 1):
        raise ClassificationError("minimizer lies on the boundary; F1 requires inner points")
    # local minima of the scan that could share the global minimum
    cand = [i for i in range(1, n_scan - 1) if vals[i] <= vals[i - 1] and vals[i] <= vals[i + 1]]
    refined = []
    for i in cand:
        t_star, v = _golden(f, ts[i - 1], ts[i + 1])
        refined.append((t_star, v))
    v_min = min(v for _, v in refined)
    tol = float(hints.get("value_rtol", 1e-9)) * abs(v_min)
    mins = []
    for t_star, v in sorted(refined):
        if v - v_min > tol:
            continue
        if mins and abs(t_star - mins[-1]) < 2.0 * (ts[1] - ts[0]):
            continue
        if t_star - lo < 2.0 * (ts[1] - ts[0]) or hi - t_star < 2.0 * (ts[1] - ts[0]):
            raise ClassificationError("minimizer lies on the boundary; F1 requires inner points")
        mins.append(t_star)
    out = []
    for t_star in mins:
        t_c = _level_midpoint(f, t_star, min(t_star - lo, hi - t_star))
        v = f(t_c)
        a, beta = _fit_custom(f, t_c, v, min(t_c - lo, hi - t_c))
        out.append(Minimizer(t_c, v, a, beta))
    w_ref = min(m.w_min for m in out)
    out = [Minimizer(m.t, w_ref, m.a, m.beta) for m in out]
    return F1(tuple(out))


def _golden(f, a: float, b: float) -> tuple[float, float]:
    res = optimize.minimize_scalar(f, bracket=None, bounds=(a, b), method="bounded",
                                   options={"xatol": 1e-14})
    return float(res.x), float(res.fun)


def _level_midpoint(f, t0: float, room: float, rel: float = 1e-8) -> float:
    """Midpoint of the level set ``w = w(t0) (1 + rel)`` around ``t0``.

    Sharper than the minimizer itself when the minimum is flat (beta > 2),
    exact for locally symmetric expansions.
    """
    v0 = f(t0)
    level = v0 + rel * abs(v0)
    g = lambda t: f(t) - level

    def side(sign):
        inner, h = 0.0, 1e-9
        while h < room:
            if g(t0 + sign * h) > 0:
                a, b = sorted((t0 + sign * inner, t0 + sign * h))
                return optimize.brentq(g, a, b, xtol=1e-16, rtol=1e-15)
            inner, h = h, 10.0 * h
        return None

    r, l = side(+1), side(-1)
    if r is None or l is None:
        return t0
    return 0.5 * (r + l)


def _fit_custom(f, t0: float, v0: float, room: float) -> tuple[float, float]:
    # start the decade where the symmetric excess clears rounding noise
    floor = 1e-11 * abs(v0)
    probe = np.geomspace(1e-8, min(0.1, 0.5 * room), 64)
    ex = np.array([0.5 * (f(t0 + h) + f(t0 - h)) - v0 for h in probe])
    ok = np.nonzero(ex >= floor)[0]
    if ok.size == 0:
        raise ClassificationError("weight is flat around the minimizer; no power law found")
    h0 = probe[ok[0]]
    h1 = min(10.0 * h0, 0.5 * room)
    if h1 <= h0 * 2:
        raise ClassificationError("not enough room around the minimizer to fit an expansion")
    hs = np.geomspace(h0, h1, 21)
    ex = np.array([0.5 * (f(t0 + h) + f(t0 - h)) - v0 for h in hs])
    return fit_power(hs, ex)


def _check_plateaus(w: CustomWeight, plateaus: Sequence) -> F2:
    vals = []
    for c, d in plateaus:
        lo, hi = w.domain
        if c <= lo or d > hi or (d == hi and not w.closed_right):
            raise ClassificationError("plateau outside the weight domain")
        ts = np.linspace(c, d, 65)
        v = np.array([float(w.fn(t)) for t in ts])
        if np.ptp(v) > 1e-12 * abs(v[0]):
            raise ClassificationError(f"weight is not constant on [{c}, {d}]")
        vals.append(v[0])
    if np.ptp(vals) > 1e-12 * abs(vals[0]):
        raise ClassificationError("plateaus carry different weight values")
    return F2(tuple(plateaus), float(vals[0]))


def make_weight(form: str, **params) -> WeightSpec:
    if form == "rho-loglog":
        return RhoLogLog(float(params["rho1"]), float(params.get("rho2", 0.0)))
    if form == "fbm-plateau":
        return FbmPlateau(float(params["rho"]), float(params["eps"]))
    raise ParameterError(f"unknown weight form {form!r}")
