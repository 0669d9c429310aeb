"""Leading-order tail asymptotics of weighted chi-square suprema.

All evaluators work in log space: ``log P ~ log prefactor_b + log M(u) + log Upsilon_k(.)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special

from .chi import BVector
from .constants import known_constant, known_piterbarg
from .errors import DependencyError, DomainError, ParameterError
from .paths import CovarianceModel, bridge_model, fbm_model
from .weights import F1, F2, L0, X_MIN, FbmPlateau, RhoLogLog, classify, corollary34_constants

LN2 = math.log(2.0)


def log_upsilon(k: int, u):
    """``log Upsilon_k(u)``, ``Upsilon_k(u) = 2^{(2-k)/2} u^{k/2-1} e^{-u/2} / Gamma(k/2)``."""
    if int(k) != k or k < 1:
        raise ParameterError("k must be a positive integer")
    u = np.asarray(u, dtype=np.float64)
    if np.any(~(u > 0)):
        raise DomainError("upsilon needs u > 0")
    out = (1.0 - 0.5 * k) * LN2 - special.gammaln(0.5 * k) + (0.5 * k - 1.0) * np.log(u) - 0.5 * u
    return float(out) if out.ndim == 0 else out


def upsilon(k: int, u):
    return np.exp(log_upsilon(k, u))


def chi2_log_survival(k: int, u):
    """Exact ``log P(chi^2_k > u)`` via the regularized upper incomplete gamma.

    Accurate while the survival stays above the smallest normal double
    (u below roughly 1400).
    """
    u = np.asarray(u, dtype=np.float64)
    with np.errstate(divide="ignore"):
        out = np.log(special.gammaincc(0.5 * k, 0.5 * u))
    return float(out) if out.ndim == 0 else out


def scenario_select(alpha: float, beta: float, L_limit, tol: float = 1e-9) -> str:
    """C1, C2 or C3 from ``beta`` versus ``alpha`` and the limit of ``L(u^{-1/2})``.

    ``L_limit`` is ``"zero"``, ``"infinite"`` or a positive number.
    """
    if beta > alpha * (1.0 + tol):
        return "C1"
    if beta < alpha * (1.0 - tol):
        return "C3"
    if L_limit == "zero" or L_limit == 0:
        return "C1"
    if L_limit == "infinite" or L_limit == math.inf:
        return "C3"
    if isinstance(L_limit, (int, float)) and L_limit > 0:
        return "C2"
    raise ParameterError(f"unrecognized L limit {L_limit!r}")


@dataclass
class AsymptoticEvaluation:
    """Itemized leading-order tail ``u -> prefactor_b * M(u) * Upsilon_k(scale * u)``."""

    scenario: str
    prefactor_b: float
    log_M_fn: Callable
    argument_scale: float
    k: int
    constants_audit: dict = field(default_factory=dict)

    def M_fn(self, u):
        return np.exp(self.log_M_fn(u))

    def log_value(self, u):
        u = np.asarray(u, dtype=np.float64)
        out = math.log(self.prefactor_b) + self.log_M_fn(u) + log_upsilon(self.k, self.argument_scale * u)
        return float(out) if np.ndim(out) == 0 else out

    def value(self, u):
        return np.exp(self.log_value(u))

    __call__ = value


def _log_q(model: CovarianceModel, u):
    return np.log(np.asarray(model.q(u), dtype=np.float64))


def _need_pickands(alpha: float, supplied: Optional[float]) -> float:
    h = supplied if supplied is not None else known_constant(alpha)
    if h is None:
        raise DependencyError(f"Pickands constant H_{alpha:g} is not known; supply an estimate")
    return float(h)


def asymptotic_f1(model: CovarianceModel, cls: F1, b: BVector, pickands: Optional[float] = None,
                  piterbarg: Optional[Callable] = None, tol: float = 1e-6) -> AsymptoticEvaluation:
    """Tail evaluator for a weight with isolated minimizers.

    ``piterbarg`` maps ``d`` to the constant ``P_alpha^d`` and is only needed in
    scenario C2 when no closed form is registered. ``tol`` is the relative
    tolerance for ``beta == alpha`` and for ties among the ``beta_i``; fitted
    exponents of custom weights carry errors well above machine precision.
    """
    if not isinstance(cls, F1):
        raise ParameterError("asymptotic_f1 needs an F1 classification")
    alpha = model.alpha
    beta = cls.beta
    scen = scenario_select(alpha, beta, model.L_limit, tol)
    w1 = cls.w_min
    in_K = [m for m in cls.minimizers if abs(m.beta - beta) <= tol * beta]
    audit = {"alpha": alpha, "beta": beta, "w(t1)": w1, "m": cls.m, "#K": len(in_K),
             "t_i": [m.t for m in cls.minimizers], "a_i": [m.a for m in cls.minimizers],
             "C(t_i)": [float(model.C(m.t)) for m in cls.minimizers]}
    if scen == "C1":
        H = _need_pickands(alpha, pickands)
        terms = [-math.log(m.a) / beta + math.log(float(model.C(m.t))) / alpha for m in in_K]
        log_sum = float(special.logsumexp(terms))
        log_const = (LN2 + log_sum + (2.0 / alpha - 1.0 / beta) * math.log(w1)
                     + special.gammaln(1.0 / beta + 1.0) + math.log(H))
        audit.update({"H_alpha": H, "Gamma(1/beta+1)": math.gamma(1.0 / beta + 1.0),
                      "q": "q(u) at argument u"})

        def log_M(u):
            u = np.asarray(u, dtype=np.float64)
            return log_const - _log_q(model, u) - np.log(u) / beta
    elif scen == "C2":
        Lc = float(model.L_limit)
        total = float(cls.m - len(in_K))
        ds = []
        for m in in_K:
            d = m.a / (w1 * float(model.C(m.t))) * Lc ** alpha
            p = piterbarg(d) if piterbarg is not None else known_piterbarg(alpha, d)
            if p is None:
                raise DependencyError(f"Piterbarg constant P_{alpha:g}^{d:g} is not known; supply it")
            ds.append((d, p))
            total += p
        audit.update({"piterbarg": ds, "#K^c": cls.m - len(in_K), "L": Lc})
        log_const = math.log(total)

        def log_M(u):
            return np.zeros_like(np.asarray(u, dtype=np.float64)) + log_const
    else:
        log_const = math.log(cls.m)

        def log_M(u):
            return np.zeros_like(np.asarray(u, dtype=np.float64)) + log_const
    audit["prefactor_b"] = b.prefactor
    return AsymptoticEvaluation(scen, b.prefactor, log_M, w1 * w1, b.k, audit)


def plateau_mass(model: CovarianceModel, cls: F2) -> float:
    """``sum_j int_{c_j}^{d_j} C(t)^{1/alpha} dt``."""
    total = 0.0
    for c, d in cls.intervals:
        val, err = integrate.quad(lambda t: float(model.C(t)) ** (1.0 / model.alpha), c, d,
                                  epsabs=0.0, epsrel=1e-13, limit=200)
        total += val
    return total


def asymptotic_f2(model: CovarianceModel, cls: F2, b: BVector,
                  pickands: Optional[float] = None) -> AsymptoticEvaluation:
    if not isinstance(cls, F2):
        raise ParameterError("asymptotic_f2 needs an F2 classification")
    H = _need_pickands(model.alpha, pickands)
    mass = plateau_mass(model, cls)
    w2 = cls.w_min ** 2
    log_const = math.log(mass) + math.log(H)

    def log_M(u):
        u = np.asarray(u, dtype=np.float64)
        return log_const - _log_q(model, w2 * u)

    audit = {"alpha": model.alpha, "intervals": list(cls.intervals), "C-mass": mass,
             "H_alpha": H, "w2(c1)": w2, "prefactor_b": b.prefactor, "q": "q(w^2(c1) u)"}
    return AsymptoticEvaluation("F2", b.prefactor, log_M, w2, b.k, audit)


def tail_f1(model, cls, b, u, **kw):
    return asymptotic_f1(model, cls, b, **kw).value(u)


def tail_f2(model, cls, b, u, **kw):
    return asymptotic_f2(model, cls, b, **kw).value(u)


def evaluate(model: CovarianceModel, weight, b: BVector, **kw) -> AsymptoticEvaluation:
    """Classify ``weight`` and build the matching evaluator."""
    cls = classify(weight)
    if isinstance(cls, F1):
        return asymptotic_f1(model, cls, b, **kw)
    return asymptotic_f2(model, cls, b, pickands=kw.get("pickands"))


# --- printed closed forms --------------------------------------------------------

def corollary34_log_tail(rho1: float, rho2: float, b: BVector, u):
    """Log of the closed-form tail for the normalized bridge with the rho-loglog weight."""
    d = corollary34_constants(rho1, rho2)
    u = np.asarray(u, dtype=np.float64)
    lp = b.log_prefactor
    if d.case == "a":
        A1 = d.A
        log_M = (math.log(2.0 * A1) + 0.5 * math.log(math.pi * L0 * X_MIN / (rho1 * X_MIN + rho2))
                 + 0.5 * np.log(u))
        out = lp + log_M + log_upsilon(b.k, 2.0 * A1 * u)
    elif d.case == "b":
        A1 = d.A
        log_M = (LN2 + special.gammaln(0.25) + math.log(A1)
                 + 0.25 * math.log(X_MIN * L0 ** 2 / (8.0 * rho1)) + 0.75 * np.log(u))
        out = lp + log_M + log_upsilon(b.k, 2.0 * A1 * u)
    else:
        A2 = d.A
        Q = d.Q_const
        out = (math.log(2.0 * A2) + lp - math.log(rho1) + math.log(Q)
               + 0.5 * math.log(-2.0 * math.pi * rho2) + 0.5 * np.log(u)
               + log_upsilon(b.k, 2.0 * A2 * u))
    return float(out) if np.ndim(out) == 0 else out


def corollary34_tail(rho1: float, rho2: float, b: BVector, u):
    return np.exp(corollary34_log_tail(rho1, rho2, b, u))


def corollary35_log_tail(rho: float, eps: float, H: float, b: BVector, u,
                         pickands: Optional[float] = None):
    """Log of the closed-form tail for normalized fBm with the plateau weight."""
    if not 0.0 < H < 1.0:
        raise ParameterError("H must lie in (0, 1)")
    if not 0.0 < eps < 1.0 or not rho > 0:
        raise ParameterError("need rho > 0 and eps in (0, 1)")
    Hc = _need_pickands(2.0 * H, pickands)
    u = np.asarray(u, dtype=np.float64)
    ll = math.log(2.0 - math.log(eps))
    out = (b.log_prefactor + math.log(-math.log(eps)) + math.log(ll * rho / 2.0) / (2.0 * H)
           + math.log(Hc) + np.log(u) / (2.0 * H) + log_upsilon(b.k, rho * ll * u))
    return float(out) if np.ndim(out) == 0 else out


def corollary35_tail(rho: float, eps: float, H: float, b: BVector, u, pickands: Optional[float] = None):
    return np.exp(corollary35_log_tail(rho, eps, H, b, u, pickands))


def corollary_evaluators(corollary: str, **p):
    """(closed form, theorem chain) log-tail callables, for audits and the CLI."""
    b = p["b"]
    if corollary == "3.4":
        w = RhoLogLog(p["rho1"], p["rho2"])
        ev = evaluate(bridge_model(), w, b)
        return (lambda u: corollary34_log_tail(p["rho1"], p["rho2"], b, u)), ev
    if corollary == "3.5":
        w = FbmPlateau(p["rho"], p["eps"])
        ev = evaluate(fbm_model(p["H"]), w, b, pickands=p.get("pickands"))
        return (lambda u: corollary35_log_tail(p["rho"], p["eps"], p["H"], b, u, p.get("pickands"))), ev
    raise ParameterError(f"unknown corollary {corollary!r}")
