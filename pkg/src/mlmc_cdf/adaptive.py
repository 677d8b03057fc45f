"""Adaptive selection of knots, smoothing width, finest level and replications.

Four nested loops refine, from the outside in, the number of interpolation
knots ``k_n``, the smoothing width ``delta_m = (S1 - S0) / 2**m``, the
finest level ``L`` and the replication numbers ``N_l``.  Each loop stops as
soon as a computable surrogate of its error term falls below its share of
the accuracy budget.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .engine import (
    MIN_REPLICATIONS,
    CostLedger,
    CoupledSampler,
    LevelState,
    compute_cost,
    estimate_mean,
    estimate_variance,
    extend_level,
    optimal_replications,
    variance_bound,
)
from .interpolation import (
    LEBESGUE_CUBIC,
    KnotGrid,
    MonotoneCdf,
    lebesgue_constant,
    make_grid,
    monotone_cdf,
    sup_distance,
)
from .kernel import SmoothedIndicatorGrid, SmoothingPolynomial, accumulate_weighted, build_kernel
from .rng import CounterRNG

__all__ = [
    "AccuracyBudget",
    "AdaptiveState",
    "RunReport",
    "AdaptiveAbort",
    "regress_alpha",
    "bias_bound",
    "bias_check",
    "smoothing_check",
    "interpolation_check",
    "run",
    "ALPHA_FLOOR",
    "REGRESSION_THRESHOLD",
    "MAX_LEVEL",
    "MAX_ITERATIONS",
]

ALPHA_FLOOR = 0.1
REGRESSION_THRESHOLD = 10**4
MAX_LEVEL = 25
MAX_ITERATIONS = 30


@dataclass(frozen=True)
class AccuracyBudget:
    """Split of the target RMSE ``eps`` over the four error sources.

    With ``eps_star = eps / (37 Q)`` the targets are: interpolation
    ``Q eps_star``, smoothing ``4 eps_star``, bias ``16 eps_star`` and
    variance ``256 eps_star**2``.
    """

    eps: float
    q_norm: Optional[float] = None
    r: int = 3
    eps_star: float = field(init=False)

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.q_norm is None:
            object.__setattr__(self, "q_norm", LEBESGUE_CUBIC if max(self.r, 1) == 3
                               else lebesgue_constant(self.r))
        if not self.q_norm > 0:
            raise ValueError("q_norm must be positive")
        object.__setattr__(self, "eps_star", self.eps / (37.0 * self.q_norm))
        if abs(self.recombined() - self.eps) > 1e-12 * self.eps:
            raise ArithmeticError("accuracy budget does not recombine to eps")

    def recombined(self) -> float:
        """Error bound implied by the four targets; equals ``eps``."""
        stat = math.sqrt(2.0) * math.sqrt(self.bias_target**2 + self.variance_target)
        return self.interpolation_target + self.q_norm * (self.smoothing_target + stat)

    @property
    def interpolation_target(self) -> float:
        return self.q_norm * self.eps_star

    @property
    def smoothing_target(self) -> float:
        return 4.0 * self.eps_star

    @property
    def bias_target(self) -> float:
        return 16.0 * self.eps_star

    @property
    def variance_target(self) -> float:
        return 256.0 * self.eps_star**2

    @property
    def c_r(self) -> float:
        return 2.0 ** (self.r + 1)

    def bias_threshold(self, alpha: float, refinement: int = 2) -> float:
        return 16.0 * (float(refinement) ** alpha - 1.0) * self.eps_star

    @property
    def smoothing_threshold(self) -> float:
        return 4.0 * (self.c_r - 1.0) * self.eps_star

    @property
    def interpolation_threshold(self) -> float:
        return self.q_norm * (self.c_r - 1.0) * self.eps_star


@dataclass
class AdaptiveState:
    """Mutable controller state; ``levels[l]`` holds the samples of level ``l``."""

    s0: float
    s1: float
    r: int
    refinement: int
    n: int = 1
    m: int = 2
    levels: list = field(default_factory=list)
    alpha: float = 1.0
    ledger: CostLedger = field(default_factory=CostLedger)

    @property
    def L(self) -> int:
        return len(self.levels) - 1

    @property
    def delta(self) -> float:
        return (self.s1 - self.s0) / 2.0**self.m

    @property
    def grid(self) -> KnotGrid:
        return make_grid(self.n, self.r, self.s0, self.s1)

    @property
    def counts(self) -> list[int]:
        return [st.N for st in self.levels]


@dataclass
class RunReport:
    """Final parameters, error surrogates and cost of one adaptive run."""

    eps: float
    eps_star: float
    q_norm: float
    r: int
    refinement: int
    n: int
    k: int
    m: int
    delta: float
    L: int
    counts: list
    alpha: float
    cost: dict
    bias_estimate: float
    bias_threshold: float
    smoothing_estimate: float
    smoothing_threshold: float
    interpolation_estimate: float
    interpolation_threshold: float
    variance_estimate: float
    variance_threshold: float
    checks: dict
    level_stats: list
    iterations: dict
    aborted: Optional[str] = None
    cdf: Optional[MonotoneCdf] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return _finite_or_none({k: v for k, v in self.__dict__.items() if k != "cdf"})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _finite_or_none(obj):
    if isinstance(obj, dict):
        return {k: _finite_or_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_or_none(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


class AdaptiveAbort(RuntimeError):
    """Raised when a loop cap is exceeded or statistics become non-finite."""

    def __init__(self, message: str, report: RunReport):
        super().__init__(message)
        self.report = report


def regress_alpha(levels: Sequence[LevelState], refinement: int = 2,
                  threshold: int = REGRESSION_THRESHOLD, floor: float = ALPHA_FLOOR) -> float:
    """Least-squares weak rate from ``log |b_l| ~ log c - l alpha log M``.

    Uses levels ``l >= 1`` with ``N_l >= threshold``; if fewer than two
    qualify, every level ``l >= 1`` with a nonzero mean; failing that,
    ``1``.  Zero means are skipped and the result is floored at ``floor``.
    """
    usable = [st for st in levels
              if st.level >= 1 and st.b_hat is not None and st.bhat_maxnorm > 0]
    pts = [st for st in usable if st.N >= threshold]
    if len(pts) < 2:
        pts = usable
    if len(pts) < 2:
        return 1.0
    ell = np.array([st.level for st in pts], dtype=float)
    logb = np.log([st.bhat_maxnorm for st in pts])
    slope = np.polyfit(ell * math.log(refinement), logb, 1)[0]
    return max(float(-slope), floor)


def bias_bound(levels: Sequence[LevelState], alpha: float, refinement: int = 2) -> float:
    """``max(|b_L|, |b_{L-1}| / M**a, |b_{L-2}| / M**(2a))``; two terms when ``L = 2``."""
    L = len(levels) - 1
    if L < 2:
        raise ValueError("bias estimate needs L >= 2")
    scale = float(refinement) ** alpha
    terms = [levels[L].bhat_maxnorm, levels[L - 1].bhat_maxnorm / scale]
    if L >= 3:
        terms.append(levels[L - 2].bhat_maxnorm / scale**2)
    return float(max(terms))


def bias_check(b_bound: float, alpha: float, budget: AccuracyBudget, refinement: int = 2) -> bool:
    return b_bound <= budget.bias_threshold(alpha, refinement)


def _level_mean(samples: np.ndarray, knots: np.ndarray, delta: float,
                kernel: SmoothingPolynomial) -> np.ndarray:
    grid = SmoothedIndicatorGrid(knots, delta)
    return accumulate_weighted(grid, kernel, np.full(samples.size, 1.0 / samples.size), samples)


def smoothing_check(finest: LevelState, grid: KnotGrid, m: int, kernel: SmoothingPolynomial,
                    budget: AccuracyBudget, ledger: Optional[CostLedger] = None) -> tuple[float, bool]:
    """Sup-norm of the mean change of ``g`` at level ``L`` when ``delta_m`` replaces ``delta_{m-1}``."""
    if m < 2:
        raise ValueError("smoothing check needs m >= 2")
    width = grid.s1 - grid.s0
    d_new, d_old = width / 2.0**m, width / 2.0 ** (m - 1)
    y = finest.fine
    s_hat = float(np.max(np.abs(_level_mean(y, grid.knots, d_new, kernel)
                                - _level_mean(y, grid.knots, d_old, kernel))))
    if ledger is not None:
        ledger.reevaluation += grid.k + y.size * max(grid.k * d_old, 1.0)
    return s_hat, s_hat <= budget.smoothing_threshold


def interpolation_check(finest: LevelState, grid: KnotGrid, coarse_grid: KnotGrid, delta: float,
                        kernel: SmoothingPolynomial, budget: AccuracyBudget,
                        ledger: Optional[CostLedger] = None) -> tuple[float, bool]:
    """Sup-distance of the repaired interpolants built on ``k_n`` and ``k_{n-1}`` knots."""
    y = finest.fine
    fine_cdf = monotone_cdf(grid, _level_mean(y, grid.knots, delta, kernel))
    coarse_cdf = monotone_cdf(coarse_grid, _level_mean(y, coarse_grid.knots, delta, kernel))
    i_hat = sup_distance(fine_cdf, coarse_cdf, grid, extra_points=coarse_grid.knots)
    if ledger is not None:
        ledger.reevaluation += coarse_grid.k + y.size * max(coarse_grid.k * delta, 1.0)
    return i_hat, i_hat <= budget.interpolation_threshold


class _Controller:
    def __init__(self, eps, sampler, r, interval, rng, q_norm, workers):
        s0, s1 = map(float, interval)
        if not s0 < s1:
            raise ValueError(f"need s0 < s1, got {interval}")
        self.budget = AccuracyBudget(eps, q_norm, r)
        self.kernel = build_kernel(r)
        self.sampler = sampler
        self.rng = rng if rng is not None else CounterRNG(0)
        self.workers = workers
        self.state = AdaptiveState(s0, s1, r, int(sampler.refinement))
        self.grid_key = None
        self.iterations = {"interpolation": 0, "smoothing": 0, "bias": 0, "variance": 0}
        self.b_hat = float("nan")
        self.s_hat = float("nan")
        self.i_hat = float("nan")
        self.v_bound = float("nan")
        self.checks = {"variance": False, "bias": False, "smoothing": False, "interpolation": False}

    # -- bookkeeping ---------------------------------------------------------

    def report(self, aborted: Optional[str] = None, cdf: Optional[MonotoneCdf] = None) -> RunReport:
        st, b = self.state, self.budget
        stats = [{"level": lv.level, "N": lv.N, "Nprime": lv.n_prime,
                  "bhat_maxnorm": lv.bhat_maxnorm if lv.b_hat is not None else None,
                  "vhat": lv.v_hat} for lv in st.levels]
        return RunReport(
            eps=b.eps, eps_star=b.eps_star, q_norm=b.q_norm, r=st.r, refinement=st.refinement,
            n=st.n, k=st.grid.k, m=st.m, delta=st.delta, L=st.L, counts=st.counts,
            alpha=st.alpha, cost=st.ledger.as_dict(),
            bias_estimate=self.b_hat, bias_threshold=b.bias_threshold(st.alpha, st.refinement),
            smoothing_estimate=self.s_hat, smoothing_threshold=b.smoothing_threshold,
            interpolation_estimate=self.i_hat, interpolation_threshold=b.interpolation_threshold,
            variance_estimate=self.v_bound, variance_threshold=b.variance_target,
            checks=dict(self.checks), level_stats=stats, iterations=dict(self.iterations),
            aborted=aborted, cdf=cdf,
        )

    def abort(self, message: str):
        raise AdaptiveAbort(message, self.report(aborted=message))

    def tick(self, loop: str, count: int):
        self.iterations[loop] += 1
        if count > MAX_ITERATIONS:
            self.abort(f"{loop} loop exceeded {MAX_ITERATIONS} iterations")

    def extend(self, level: LevelState, count: int):
        extend_level(level, self.sampler, count, self.rng, self.state.ledger, self.workers)

    # -- statistics ----------------------------------------------------------

    def smoothed_grid(self) -> SmoothedIndicatorGrid:
        st = self.state
        key = (st.n, st.m)
        if key != self.grid_key:
            # one setup of the knot vector per (n, m)
            if self.grid_key is None:
                st.ledger.functional += st.grid.k
            else:
                st.ledger.reevaluation += st.grid.k
            self.grid_key = key
        return SmoothedIndicatorGrid(st.grid.knots, st.delta)

    def means(self, levels=None):
        grid = self.smoothed_grid()
        for lv in self.state.levels if levels is None else levels:
            estimate_mean(lv, grid, self.kernel, self.state.ledger)
            if not np.all(np.isfinite(lv.b_hat)):
                self.abort("non-finite level statistics")

    def statistics(self, levels=None):
        """Means and max-norm variances on the current grid (all levels by default)."""
        st = self.state
        levels = st.levels if levels is None else levels
        self.means(levels)
        grid = self.smoothed_grid()
        zeta = compute_cost(grid.k, st.delta, st.counts, st.refinement) / st.L
        for lv in levels:
            estimate_variance(lv, grid, self.kernel, zeta, st.refinement, st.ledger)
            if not math.isfinite(lv.v_hat):
                self.abort("non-finite level statistics")

    # -- loops ---------------------------------------------------------------

    def variance_loop(self):
        st, b = self.state, self.budget
        for it in range(1, MAX_ITERATIONS + 2):
            self.tick("variance", it)
            target = optimal_replications([lv.v_hat for lv in st.levels], st.grid.k, st.delta,
                                          st.refinement, b.eps_star, MIN_REPLICATIONS)
            for lv, want in zip(st.levels, target):
                if want > lv.N:
                    self.extend(lv, int(want) - lv.N)
            self.statistics()
            self.v_bound = variance_bound([lv.v_hat for lv in st.levels], st.counts, st.grid.k)
            if self.v_bound <= b.variance_target:
                self.checks["variance"] = True
                return

    def bias_loop(self):
        st, b = self.state, self.budget
        new_level = False
        for it in range(1, MAX_ITERATIONS + 2):
            self.tick("bias", it)
            if new_level:
                if st.L + 1 > MAX_LEVEL:
                    self.abort(f"level cap L <= {MAX_LEVEL} exceeded")
                lv = LevelState(st.L + 1)
                st.levels.append(lv)
                self.extend(lv, MIN_REPLICATIONS)
                self.statistics([lv])
            self.checks["variance"] = False
            self.variance_loop()
            st.alpha = regress_alpha(st.levels, st.refinement)
            self.b_hat = bias_bound(st.levels, st.alpha, st.refinement)
            new_level = True
            if bias_check(self.b_hat, st.alpha, b, st.refinement):
                self.checks["bias"] = True
                return

    def smoothing_loop(self):
        st, b = self.state, self.budget
        st.m -= 1
        for it in range(1, MAX_ITERATIONS + 2):
            self.tick("smoothing", it)
            st.m += 1
            # means follow the new width; variances are refreshed by the variance loop
            self.means()
            self.checks["bias"] = False
            self.bias_loop()
            self.s_hat, ok = smoothing_check(st.levels[-1], st.grid, st.m, self.kernel, b, st.ledger)
            if ok:
                self.checks["smoothing"] = True
                return

    def interpolation_loop(self):
        st, b = self.state, self.budget
        for it in range(1, MAX_ITERATIONS + 2):
            self.tick("interpolation", it)
            st.n += 1
            self.checks["smoothing"] = False
            self.smoothing_loop()
            self.i_hat, ok = interpolation_check(
                st.levels[-1], st.grid, make_grid(st.n - 1, st.r, st.s0, st.s1), st.delta,
                self.kernel, b, st.ledger)
            if ok:
                self.checks["interpolation"] = True
                return

    def execute(self) -> tuple[MonotoneCdf, RunReport]:
        st = self.state
        st.levels = [LevelState(l) for l in range(3)]
        for lv in st.levels:
            self.extend(lv, MIN_REPLICATIONS)
        self.statistics()
        self.interpolation_loop()
        # the level means on the final grid are current; their sum is the estimate
        vec = np.sum([lv.b_hat for lv in st.levels], axis=0)
        cdf = monotone_cdf(st.grid, vec)
        return cdf, self.report(cdf=cdf)


def run(eps: float, sampler: CoupledSampler, r: int = 3, interval: Sequence[float] = (0.0, 1.0),
        rng: Optional[CounterRNG] = None, q_norm: Optional[float] = None,
        workers: int = 1) -> tuple[MonotoneCdf, RunReport]:
    """Adaptive multilevel estimate of the distribution function on ``interval``.

    Starts from ``n = 1``, ``m = 2``, ``L = 2`` with 100 samples per level
    and returns the repaired interpolant together with a :class:`RunReport`.
    Raises :class:`AdaptiveAbort` (carrying a partial report) when a loop
    cap is hit or statistics become non-finite.
    """
    return _Controller(eps, sampler, r, interval, rng, q_norm, workers).execute()
