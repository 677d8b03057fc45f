"""Vector-valued multilevel Monte Carlo estimator for distribution functions.

Level ``0`` stores samples of ``Y^(0)``; level ``l >= 1`` stores coupled
pairs ``(Y^(l), Y^(l-1))``.  Only the scalar functional values are kept,
so every statistic can be recomputed for a new knot grid or smoothing
width without resimulating paths.
"""

from __future__ import annotations

import csv
import io
import math
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .interpolation import KnotGrid, MonotoneCdf, monotone_cdf
from .kernel import (
    SmoothedIndicatorGrid,
    SmoothingPolynomial,
    accumulate_weighted,
    eval_matrix,
)
from .rng import CounterRNG

__all__ = [
    "CoupledSampler",
    "LevelState",
    "CostLedger",
    "extend_level",
    "estimate_mean",
    "estimate_variance",
    "type2_constant",
    "variance_bound",
    "optimal_replications",
    "assemble_vector",
    "assemble_estimate",
    "compute_cost",
    "level_stats_csv",
    "MIN_REPLICATIONS",
]

MIN_REPLICATIONS = 100

# draws per chunk when generating samples; bounds scratch memory
_CHUNK_DRAWS = 1 << 20


class CoupledSampler(ABC):
    """Generator of ``Y^(0)`` samples and coupled ``(Y^(l), Y^(l-1))`` pairs.

    Subclasses implement :meth:`sample`, which must be a pure function of
    ``(rng, level, start, count)`` row by row: sample ``start + i`` always
    sees the same random numbers.
    """

    refinement: int = 2

    def cost(self, level: int) -> float:
        return float(self.refinement) ** level

    @abstractmethod
    def sample(self, level: int, rng: CounterRNG, start: int, count: int):
        """Return ``(fine, coarse)`` arrays; ``coarse`` is ``None`` at level 0."""

    def sample_base(self, rng: CounterRNG, index: int = 0) -> float:
        fine, _ = self.sample(0, rng, index, 1)
        return float(fine[0])

    def sample_pair(self, level: int, rng: CounterRNG, index: int = 0) -> tuple[float, float]:
        if level < 1:
            raise ValueError("coupled pairs exist for level >= 1 only")
        fine, coarse = self.sample(level, rng, index, 1)
        return float(fine[0]), float(coarse[0])


@dataclass
class CostLedger:
    """Cost units spent, by category, with unit constant."""

    path: float = 0.0
    functional: float = 0.0
    variance: float = 0.0
    reevaluation: float = 0.0

    @property
    def total(self) -> float:
        return self.path + self.functional + self.variance + self.reevaluation

    def as_dict(self) -> dict:
        return {
            "path": self.path,
            "functional": self.functional,
            "variance": self.variance,
            "reevaluation": self.reevaluation,
            "total": self.total,
        }


@dataclass
class LevelState:
    level: int
    fine: np.ndarray = field(default_factory=lambda: np.empty(0))
    coarse: Optional[np.ndarray] = None
    b_hat: Optional[np.ndarray] = None
    v_hat: Optional[float] = None
    n_prime: int = 0
    # running sum of g-differences for the grid it was computed on
    _sum: Optional[np.ndarray] = field(default=None, repr=False)
    _sum_key: Optional[tuple] = field(default=None, repr=False)
    _sum_count: int = field(default=0, repr=False)
    # (grid, N, N') of the stored v_hat
    _var_key: Optional[tuple] = field(default=None, repr=False)

    def __post_init__(self):
        if self.level > 0 and self.coarse is None:
            self.coarse = np.empty(0)

    @property
    def N(self) -> int:
        return int(self.fine.size)

    @property
    def bhat_maxnorm(self) -> float:
        return float(np.max(np.abs(self.b_hat))) if self.b_hat is not None else float("nan")


def _grid_key(grid: SmoothedIndicatorGrid) -> tuple:
    return (grid.k, float(grid.knots[0]), float(grid.knots[-1]), float(grid.delta))


def extend_level(
    state: LevelState,
    sampler: CoupledSampler,
    count: int,
    rng: CounterRNG,
    ledger: Optional[CostLedger] = None,
    workers: int = 1,
) -> LevelState:
    """Append ``count`` fresh samples to ``state``; charges ``count * M**level``."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    if count == 0:
        return state
    start = state.N
    per = max(1, _CHUNK_DRAWS // max(1, int(sampler.cost(state.level))))
    bounds = [(b, min(per, start + count - b)) for b in range(start, start + count, per)]

    def run(args):
        return sampler.sample(state.level, rng, *args)

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, bounds))
    else:
        parts = [run(b) for b in bounds]
    state.fine = np.concatenate([state.fine] + [p[0] for p in parts])
    if state.level > 0:
        state.coarse = np.concatenate([state.coarse] + [p[1] for p in parts])
    if ledger is not None:
        ledger.path += count * sampler.cost(state.level)
    return state


def _weighted_points(state: LevelState, lo: int, hi: int):
    f = state.fine[lo:hi]
    if state.level == 0:
        return np.ones_like(f), f
    c = state.coarse[lo:hi]
    return np.concatenate([np.ones_like(f), -np.ones_like(c)]), np.concatenate([f, c])


def estimate_mean(
    state: LevelState,
    grid: SmoothedIndicatorGrid,
    kernel: SmoothingPolynomial,
    ledger: Optional[CostLedger] = None,
) -> np.ndarray:
    """Sample mean of ``g(Y^(l)) - g(Y^(l-1))`` (of ``g(Y^(0))`` at level 0).

    Sums are cached per grid, so after :func:`extend_level` only the new
    samples are evaluated.  New samples cost ``k * delta`` each (category
    ``functional``); a change of grid re-evaluates all samples at
    ``max(k * delta, 1)`` each (category ``reevaluation``).
    """
    if state.N == 0:
        raise ValueError(f"level {state.level} has no samples")
    key = _grid_key(grid)
    kd = grid.k * grid.delta
    if state._sum_key == key and state._sum_count <= state.N:
        lo = state._sum_count
        if lo < state.N:
            w, t = _weighted_points(state, lo, state.N)
            state._sum = state._sum + accumulate_weighted(grid, kernel, w, t)
            if ledger is not None:
                ledger.functional += (state.N - lo) * kd
    else:
        fresh = state._sum_key is None
        w, t = _weighted_points(state, 0, state.N)
        state._sum = accumulate_weighted(grid, kernel, w, t)
        if ledger is not None:
            if fresh:
                ledger.functional += state.N * kd
            else:
                ledger.reevaluation += state.N * max(kd, 1.0)
        state._sum_key = key
    state._sum_count = state.N
    state.b_hat = state._sum / state.N
    return state.b_hat


def sample_differences(state: LevelState, grid, kernel, count: Optional[int] = None) -> np.ndarray:
    """Dense ``(count, k)`` matrix of per-sample g-differences (first ``count`` samples)."""
    count = state.N if count is None else count
    d = eval_matrix(grid, kernel, state.fine[:count])
    if state.level > 0:
        d = d - eval_matrix(grid, kernel, state.coarse[:count])
    return d


def variance_subsample_size(N: int, level_cost: float, k: int, zeta: Optional[float]) -> int:
    if zeta is None:
        return N
    n_prime = min(N, max(zeta, N * level_cost) / k)
    return int(min(N, max(1, math.floor(n_prime))))


def estimate_variance(
    state: LevelState,
    grid: SmoothedIndicatorGrid,
    kernel: SmoothingPolynomial,
    zeta: Optional[float] = None,
    refinement: int = 2,
    ledger: Optional[CostLedger] = None,
) -> tuple[float, int]:
    """Max-norm sample variance over the first ``N'`` stored samples.

    ``N' = min(N, max(zeta, N M**l) / k)``, rounded down and clamped to
    ``[1, N]``; ``zeta=None`` uses every sample.  Requires ``b_hat`` from
    :func:`estimate_mean` on the same grid.  A repeated call with the same
    grid, ``N`` and ``N'`` returns the stored value at no cost.
    """
    if state.b_hat is None:
        raise ValueError("estimate_mean must run before estimate_variance")
    n_prime = variance_subsample_size(state.N, float(refinement) ** state.level, grid.k, zeta)
    key = (_grid_key(grid), state.N, n_prime)
    if state._var_key == key and state.v_hat is not None:
        return state.v_hat, n_prime
    total = 0.0
    step = max(1, (1 << 20) // grid.k)
    for lo in range(0, n_prime, step):
        hi = min(n_prime, lo + step)
        d = eval_matrix(grid, kernel, state.fine[lo:hi])
        if state.level > 0:
            d -= eval_matrix(grid, kernel, state.coarse[lo:hi])
        total += float(np.sum(np.max(np.abs(d - state.b_hat), axis=1) ** 2))
    state.v_hat = total / n_prime
    state.n_prime = n_prime
    state._var_key = key
    if ledger is not None:
        ledger.variance += n_prime * grid.k
    return state.v_hat, n_prime


@lru_cache(maxsize=None)
def _gamma_sq(k: int) -> float:
    j = np.arange(2, k + 2, dtype=float)
    tail = float(np.sum(1.0 / (np.sqrt(np.log(j)) * j * j)))
    return math.log(k + 1) + math.sqrt(8.0 / math.pi) * tail


def type2_constant(k: int) -> float:
    """``c(k) = sqrt(2 pi) * gamma(k)``, the max-norm Bienayme factor in R^k."""
    if k < 1:
        raise ValueError("dimension must be positive")
    return math.sqrt(2.0 * math.pi) * math.sqrt(_gamma_sq(int(k)))


def variance_bound(v_hats: Sequence[float], counts: Sequence[float], k: int) -> float:
    """Empirical bound ``c(k) * sum_l v_l / n_l`` on the estimator variance."""
    v = np.asarray(v_hats, dtype=float)
    n = np.asarray(counts, dtype=float)
    return type2_constant(k) * float(np.sum(v / n))


def optimal_replications(
    v_hats: Sequence[float],
    k: int,
    delta: float,
    refinement: int,
    eps_star: float,
    minimum: int = MIN_REPLICATIONS,
    rounded: bool = True,
) -> np.ndarray:
    """Replication numbers minimising cost subject to the variance target.

    Minimises ``sum n_l (M**l + k delta)`` under
    ``c(k) sum v_l / n_l <= 256 eps_star**2``; rounded up and floored at
    ``minimum`` unless ``rounded`` is false.
    """
    if eps_star <= 0:
        raise ValueError("eps_star must be positive")
    v = np.maximum(np.asarray(v_hats, dtype=float), 0.0)
    unit = float(refinement) ** np.arange(v.size) + k * delta
    scale = np.sum(np.sqrt(v * unit)) * type2_constant(k) / (256.0 * eps_star**2)
    n = np.sqrt(v / unit) * scale
    if not rounded:
        return n
    return np.maximum(np.ceil(n), minimum).astype(np.int64)


def compute_cost(k: int, delta: float, counts: Sequence[int], refinement: int = 2) -> float:
    """Cost bound ``k + sum_l N_l (M**l + k delta)`` with unit constant."""
    n = np.asarray(counts, dtype=float)
    return float(k + np.sum(n * (float(refinement) ** np.arange(n.size) + k * delta)))


def assemble_vector(levels: Sequence[LevelState], grid: SmoothedIndicatorGrid,
                    kernel: SmoothingPolynomial) -> np.ndarray:
    """The multilevel estimate at the knots, by one weighted accumulation.

    All stored values of all levels are concatenated with weights
    ``+-1/N_l`` and pushed through a single prefix-sum pass.
    """
    weights, points = [], []
    for st in levels:
        w, t = _weighted_points(st, 0, st.N)
        weights.append(w / st.N)
        points.append(t)
    return accumulate_weighted(grid, kernel, np.concatenate(weights), np.concatenate(points))


def assemble_estimate(levels: Sequence[LevelState], grid: KnotGrid, kernel: SmoothingPolynomial,
                      delta: float) -> tuple[np.ndarray, MonotoneCdf]:
    """Multilevel knot vector and the monotone distribution function built from it."""
    vec = assemble_vector(levels, SmoothedIndicatorGrid(grid.knots, delta), kernel)
    return vec, monotone_cdf(grid, vec)


def level_stats_csv(levels: Sequence[LevelState], refinement: int, k: int, delta: float) -> str:
    """CSV with columns ``level, N, Nprime, bhat_maxnorm, vhat, cost``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["level", "N", "Nprime", "bhat_maxnorm", "vhat", "cost"])
    for st in levels:
        cost = st.N * (float(refinement) ** st.level + k * delta)
        vhat = "" if st.v_hat is None else repr(float(st.v_hat))
        w.writerow([st.level, st.N, st.n_prime, repr(st.bhat_maxnorm), vhat, repr(cost)])
    return buf.getvalue()
