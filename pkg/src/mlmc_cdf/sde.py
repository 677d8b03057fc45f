"""Geometric Brownian motion benchmarks with coupled Milstein samplers.

Three functionals of ``dX = mu X dt + sigma X dW, X_0 = 1`` are provided,
each with a closed-form distribution function:

* ``terminal``: ``Y = X_T`` (lognormal),
* ``max``: ``Y = max_{[0,T]} X_t``,
* ``exit``: ``Y = min(inf{t : X_t <= b}, T)`` (inverse Gaussian below ``T``).

Level ``l`` uses ``M**l`` equidistant Milstein steps; the coarse member of
a pair is driven by sums of the fine Brownian increments.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import erfc, ndtr, ndtri

from .engine import CoupledSampler
from .rng import CounterRNG

__all__ = [
    "GbmParams",
    "FunctionalKind",
    "Model",
    "MODELS",
    "GbmSampler",
    "ExactLawSampler",
    "milstein_pair",
    "bridge_exit_pair",
    "bridge_minimum",
    "exact_cdf",
    "lognormal_pdf_derivative",
]


@dataclass(frozen=True)
class GbmParams:
    mu: float
    sigma: float
    T: float
    x0: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0 or self.T <= 0:
            raise ValueError("sigma and T must be positive")

    @property
    def drift_log(self) -> float:
        """Drift of ``log X``: ``mu - sigma**2 / 2``."""
        return self.mu - 0.5 * self.sigma**2


class FunctionalKind(str, enum.Enum):
    TERMINAL = "terminal"
    RUNNING_MAX = "max"
    EXIT_TIME = "exit"


def _milstein_step(x, mu, sigma, h, dw):
    return x * (1.0 + mu * h + sigma * dw + 0.5 * sigma**2 * (dw * dw - h))


def bridge_minimum(a, b, vol, h, u):
    """Sample the minimum of a Brownian bridge from ``a`` to ``b`` over time ``h``.

    ``vol`` is the (frozen) diffusion coefficient and ``u`` a uniform variate.
    """
    return 0.5 * (a + b - np.sqrt((b - a) ** 2 - 2.0 * vol * vol * h * np.log(u)))


def milstein_pair(params: GbmParams, kind: FunctionalKind, normals: np.ndarray,
                  refinement: int = 2, coupled: bool = True):
    """Fine and coarse functional values from a ``(count, steps)`` block of N(0,1) draws.

    ``steps = M**l``; with ``coupled=False`` (level 0) the coarse value is ``None``.
    """
    kind = FunctionalKind(kind)
    if kind is FunctionalKind.EXIT_TIME:
        raise ValueError("exit times need bridge minima; use bridge_exit_pair")
    count, steps = normals.shape
    mu, sigma, M = params.mu, params.sigma, refinement
    h = params.T / steps
    H = h * M
    sqh = math.sqrt(h)
    x = np.full(count, params.x0)
    xmax = x.copy()
    xc = x.copy() if coupled else None
    xcmax = x.copy() if coupled else None
    dwc = np.zeros(count) if coupled else None
    for i in range(steps):
        dw = sqh * normals[:, i]
        x = _milstein_step(x, mu, sigma, h, dw)
        if kind is FunctionalKind.RUNNING_MAX:
            np.maximum(xmax, x, out=xmax)
        if coupled:
            dwc += dw
            if (i + 1) % M == 0:
                xc = _milstein_step(xc, mu, sigma, H, dwc)
                if kind is FunctionalKind.RUNNING_MAX:
                    np.maximum(xcmax, xc, out=xcmax)
                dwc[:] = 0.0
    if kind is FunctionalKind.TERMINAL:
        return x, xc
    return xmax, xcmax


def bridge_exit_pair(params: GbmParams, barrier: float, normals: np.ndarray, uniforms: np.ndarray,
                     refinement: int = 2, coupled: bool = True):
    """Fine and coarse exit times with Brownian-bridge minimum checks.

    An exit is declared at the first step whose sampled bridge minimum is
    at or below ``barrier``; the exit time is that step's right endpoint,
    and paths that never exit return ``T``.  Within each coarse step the
    path is interpolated at the fine times by a Brownian bridge driven by
    the fine increments, and the sub-step minima reuse the fine uniforms.
    """
    if not 0 < barrier < params.x0:
        raise ValueError("barrier must lie strictly between 0 and x0")
    count, steps = normals.shape
    mu, sigma, M, T = params.mu, params.sigma, refinement, params.T
    h = T / steps
    H = h * M
    sqh = math.sqrt(h)
    dw_all = sqh * normals

    x = np.full(count, params.x0)
    tau = np.full(count, T)
    alive = np.ones(count, dtype=bool)
    for i in range(steps):
        xn = _milstein_step(x, mu, sigma, h, dw_all[:, i])
        low = bridge_minimum(x, xn, sigma * x, h, uniforms[:, i])
        hit = alive & (low <= barrier)
        tau[hit] = (i + 1) * h
        alive &= ~hit
        x = xn
    if not coupled:
        return tau, None

    xc = np.full(count, params.x0)
    tauc = np.full(count, T)
    alive = np.ones(count, dtype=bool)
    frac = np.arange(M + 1) / M
    for n in range(steps // M):
        dws = dw_all[:, n * M:(n + 1) * M]
        partial = np.concatenate([np.zeros((count, 1)), np.cumsum(dws, axis=1)], axis=1)
        total = partial[:, -1]
        xn = _milstein_step(xc, mu, sigma, H, total)
        vol = sigma * xc
        # bridge interpolation of the coarse step at the fine times
        knots = (xc[:, None] + frac[None, :] * (xn - xc)[:, None]
                 + vol[:, None] * (partial - frac[None, :] * total[:, None]))
        knots[:, 0] = xc
        knots[:, -1] = xn
        low = bridge_minimum(knots[:, :-1], knots[:, 1:], vol[:, None], h,
                             uniforms[:, n * M:(n + 1) * M]).min(axis=1)
        hit = alive & (low <= barrier)
        tauc[hit] = (n + 1) * H
        alive &= ~hit
        xc = xn
    return tau, tauc


def exact_cdf(params: GbmParams, kind: FunctionalKind, s, barrier: Optional[float] = None):
    """Closed-form distribution function of the functional at ``s``."""
    kind = FunctionalKind(kind)
    s_arr = np.asarray(s, dtype=float)
    nu, sig, T = params.drift_log, params.sigma, params.T
    if params.x0 != 1.0:
        raise ValueError("closed forms are implemented for x0 = 1")
    if kind is FunctionalKind.TERMINAL:
        if np.any(s_arr < 0):
            raise ValueError("terminal value is supported on [0, inf)")
        with np.errstate(divide="ignore"):
            z = (np.log(s_arr) - nu * T) / (sig * math.sqrt(T))
        out = ndtr(z)
    elif kind is FunctionalKind.RUNNING_MAX:
        if np.any(s_arr < params.x0):
            raise ValueError("running maximum is supported on [x0, inf)")
        ls = np.log(s_arr)
        d1 = (ls - nu * T) / (sig * math.sqrt(2 * T))
        d2 = (ls + nu * T) / (sig * math.sqrt(2 * T))
        out = 1.0 - 0.5 * erfc(d1) - 0.5 * erfc(d2) * s_arr ** (2 * params.mu / sig**2 - 1)
    else:
        if barrier is None or not 0 < barrier < params.x0:
            raise ValueError("exit time needs a barrier in (0, x0)")
        if np.any(s_arr < 0):
            raise ValueError("exit time is supported on [0, T]")
        a = math.log(barrier)
        t = np.maximum(s_arr, 1e-300)
        sq = sig * np.sqrt(t)
        out = ndtr((a - nu * t) / sq) + math.exp(2 * nu * a / sig**2) * ndtr((a + nu * t) / sq)
        out = np.where(s_arr >= T, 1.0, np.where(s_arr <= 0, 0.0, out))
    return float(out) if np.ndim(out) == 0 else out


def lognormal_pdf_derivative(x, order: int, m: float, s: float):
    """``order``-th derivative of the lognormal density with log-mean ``m``, log-sd ``s``.

    Uses ``rho = C exp(q(log x))`` and the recursion
    ``P_{n+1} = P_n' + (q' - n) P_n`` for ``rho^(n) = C exp(q - n log x) P_n``.
    """
    x = np.asarray(x, dtype=float)
    u = np.log(x)
    dq = np.polynomial.Polynomial([m / s**2 - 1.0, -1.0 / s**2])
    p = np.polynomial.Polynomial([1.0])
    for n in range(order):
        p = p.deriv() + (dq - n) * p
    q = -((u - m) ** 2) / (2 * s * s) - u
    return np.exp(q - order * u) * p(u) / (s * math.sqrt(2 * math.pi))


class GbmSampler(CoupledSampler):
    """Coupled Milstein sampler for one GBM functional."""

    def __init__(self, params: GbmParams, kind: FunctionalKind, barrier: Optional[float] = None,
                 refinement: int = 2):
        self.params = params
        self.kind = FunctionalKind(kind)
        self.barrier = barrier
        self.refinement = int(refinement)
        if self.kind is FunctionalKind.EXIT_TIME and barrier is None:
            raise ValueError("exit-time sampler needs a barrier")

    def sample(self, level: int, rng: CounterRNG, start: int, count: int):
        steps = self.refinement**level
        if self.kind is FunctionalKind.EXIT_TIME:
            u = rng.uniforms(level, start, count, 2 * steps)
            return bridge_exit_pair(self.params, self.barrier, ndtri(u[:, :steps]), u[:, steps:],
                                    self.refinement, coupled=level > 0)
        z = rng.normals(level, start, count, steps)
        return milstein_pair(self.params, self.kind, z, self.refinement, coupled=level > 0)


class ExactLawSampler(CoupledSampler):
    """``Y^(l) = Y + shift * M**-l`` with ``Y = ppf(U)`` simulated exactly.

    ``shift = 0`` gives a bias-free hierarchy; the level differences are
    then identically zero.
    """

    def __init__(self, ppf: Callable, shift: float = 0.0, refinement: int = 2):
        self.ppf = ppf
        self.shift = float(shift)
        self.refinement = int(refinement)

    def sample(self, level: int, rng: CounterRNG, start: int, count: int):
        y = self.ppf(rng.uniforms(level, start, count, 1)[:, 0])
        fine = y + self.shift * float(self.refinement) ** -level
        if level == 0:
            return fine, None
        return fine, y + self.shift * float(self.refinement) ** -(level - 1)


@dataclass(frozen=True)
class Model:
    """A benchmark: GBM parameters, functional, and approximation interval."""

    kind: FunctionalKind
    params: GbmParams
    s0: float
    s1: float
    barrier: Optional[float] = None

    def sampler(self, refinement: int = 2) -> GbmSampler:
        return GbmSampler(self.params, self.kind, self.barrier, refinement)

    def cdf(self, s):
        return exact_cdf(self.params, self.kind, s, self.barrier)

    def replace(self, **changes) -> "Model":
        params = {f: changes.pop(f) for f in ("mu", "sigma", "T") if changes.get(f) is not None}
        changes = {k: v for k, v in changes.items() if v is not None}
        new_params = GbmParams(**{**self.params.__dict__, **params})
        return Model(**{**self.__dict__, "params": new_params, **changes})


MODELS = {
    "terminal": Model(FunctionalKind.TERMINAL, GbmParams(0.05, 0.2, 1.0), 0.5, 1.5),
    "max": Model(FunctionalKind.RUNNING_MAX, GbmParams(0.5, 0.2, 1.0), 1.05, 2.05),
    "exit": Model(FunctionalKind.EXIT_TIME, GbmParams(0.01, 0.2, 2.0), 0.25, 1.25, barrier=0.95),
}
