"""Asymptotic cost exponents and an oracle-rate parameter plan.

Given weak rates ``(alpha1, alpha2, alpha3)``, strong rates ``(beta4,
beta5)`` and the smoothness ``r``, the multilevel estimator with smoothing
and interpolation reaches RMSE ``eps`` at cost
``O(eps**-gamma * log(1/eps)**eta)``.  :func:`complexity_exponents` picks
the applicable regime; :func:`plan_parameters` returns the non-adaptive
parameters that attain it when the rates are known.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = [
    "RateAssumptions",
    "ComplexityOrder",
    "ParameterPlan",
    "complexity_exponents",
    "plan_parameters",
]

_TOL = 1e-12


@dataclass(frozen=True)
class RateAssumptions:
    """Weak error ``min(delta**-a1 M**(-l a2), M**(-l a3))``, strong error ``delta**-b4 M**(-l b5)``."""

    alpha1: float
    alpha2: float
    alpha3: float
    beta4: float
    beta5: float
    r: int = 3
    M: int = 2

    def __post_init__(self):
        if self.alpha1 < 0 or self.alpha2 <= 0 or not 0 <= self.alpha3 <= self.alpha2:
            raise ValueError("need alpha1 >= 0, alpha2 > 0 and 0 <= alpha3 <= alpha2")
        if self.beta4 < 0 or self.beta5 <= 0:
            raise ValueError("need beta4 >= 0 and beta5 > 0")
        if self.r < 0 or self.M < 2:
            raise ValueError("need r >= 0 and M >= 2")

    @property
    def q(self) -> float:
        first = (self.r + 1 + self.alpha1) / self.alpha2
        second = math.inf if self.alpha3 == 0 else (self.r + 1) / self.alpha3
        return min(first, second)

    @property
    def strong_ratio(self) -> float:
        return self.beta4 / self.beta5


@dataclass(frozen=True)
class ComplexityOrder:
    """Cost exponent ``gamma`` and log exponent ``eta`` of the attained order.

    ``case`` names the regime (``"z1"``, ``"z2"``, ``"z4"``, ``"z5"``) or is
    ``"not covered"``; ``neighbors`` lists every regime whose condition is
    met up to rounding when the input sits on a boundary.
    """

    gamma: float
    eta: int
    case: str
    neighbors: tuple = field(default=())

    @property
    def covered(self) -> bool:
        return self.case != "not covered"


def _regimes(rates: RateAssumptions, tol: float) -> dict:
    q, ratio, b5, b4, r1 = rates.q, rates.strong_ratio, rates.beta5, rates.beta4, rates.r + 1
    out = {}
    if q <= ratio + tol:
        out["z1"] = (2.0 + q / r1, 1)
    if q > ratio - tol and b5 > 1 - tol:
        out["z2"] = (2.0 + ratio / r1, 1)
    if q > ratio - tol and b5 < 1 + tol and math.isfinite(q):
        out["z4"] = (2.0 + (b4 + (1.0 - b5) * q) / r1, 1)
    if q > b4 - tol and abs(b5 - 1.0) <= tol:
        out["z5"] = (2.0 + b4 / r1, 3)
    return out


def complexity_exponents(rates: RateAssumptions) -> ComplexityOrder:
    """Order ``(gamma, eta)`` for the given rates.

    The case follows the exact conditions; when the input lies on a case
    boundary (within ``1e-12``), ``neighbors`` lists all adjacent regimes.
    """
    q, ratio, b5, b4 = rates.q, rates.strong_ratio, rates.beta5, rates.beta4
    if q <= ratio:
        case = "z1"
    elif b5 > 1:
        case = "z2"
    elif b5 < 1:
        case = "z4"
    elif q > b4:
        case = "z5"
    else:
        case = "not covered"
    nearby = _regimes(rates, _TOL)
    neighbors = tuple(sorted(nearby)) if len(nearby) > 1 else ()
    if case not in nearby:
        return ComplexityOrder(math.nan, 0, "not covered", tuple(sorted(nearby)))
    gamma, eta = nearby[case]
    return ComplexityOrder(gamma, eta, case, neighbors)


@dataclass(frozen=True)
class ParameterPlan:
    """Non-adaptive parameters for RMSE ``eps`` under known rates.

    ``counts`` maps level to replication number (ceilings); ``counts_exact``
    holds the values before rounding.
    """

    eps: float
    delta: float
    k: int
    L_star: float
    L0: int
    L1: int
    N_L0: int
    counts: dict
    counts_exact: dict
    single_level: bool

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["counts"] = {str(k): v for k, v in self.counts.items()}
        d["counts_exact"] = {str(k): v for k, v in self.counts_exact.items()}
        return d


def plan_parameters(rates: RateAssumptions, eps: float) -> ParameterPlan:
    """Oracle-rate parameter set for accuracy ``eps`` in ``(0, 1)``.

    ``delta = eps**(1/(r+1))``, ``k = eps**(-1/(r+1))``, finest level
    ``q L*`` with ``L* = log_M(1/eps) / (r+1)``, coarsest level
    ``(beta4 / beta5) L*`` and Lagrange-optimal replications for the levels
    in between; all logarithms are to base ``M``.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    M, r1 = rates.M, rates.r + 1
    log_inv = math.log(1.0 / eps, M)
    delta = eps ** (1.0 / r1)
    k = math.ceil(eps ** (-1.0 / r1) - 1e-9)
    L_star = log_inv / r1
    q = rates.q
    L1 = max(0, math.ceil(q * L_star - 1e-9)) if math.isfinite(q) else 0
    n_base_exact = eps**-2 * log_inv
    n_base = math.ceil(n_base_exact - 1e-9)
    single = q <= rates.strong_ratio
    if single:
        return ParameterPlan(eps, delta, k, L_star, L1, L1, n_base, {L1: n_base},
                             {L1: n_base_exact}, True)
    L0 = min(L1, max(0, math.ceil(rates.strong_ratio * L_star - 1e-9)))
    levels = range(L0 + 1, L1 + 1)
    v = {l: min(M ** (L_star * rates.beta4) * M ** (-l * rates.beta5), 1.0) for l in levels}
    G = sum(math.sqrt(v[l] * M**l) for l in levels)
    exact = {L0: n_base_exact}
    exact.update({l: n_base_exact * G * math.sqrt(v[l] * M**-l) for l in levels})
    counts = {l: math.ceil(n - 1e-9) for l, n in exact.items()}
    return ParameterPlan(eps, delta, k, L_star, L0, L1, n_base, counts, exact, L0 == L1)
