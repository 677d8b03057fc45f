"""Experiment drivers: level-decay studies, repeated adaptive runs and the
single-level comparison, with deterministic CSV/JSON writers."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .adaptive import AdaptiveAbort, RunReport, run
from .engine import LevelState, estimate_mean, extend_level
from .interpolation import LEBESGUE_CUBIC
from .kernel import SmoothedIndicatorGrid, build_kernel, eval_matrix
from .rng import CounterRNG
from .sde import MODELS, Model

__all__ = [
    "ExperimentConfig",
    "DecayResult",
    "RunOutcome",
    "GainRecord",
    "decay_study",
    "fit_slope",
    "adaptive_study",
    "single_level_cost",
    "gain_records",
    "write_csv",
    "eps_label",
    "DESK_EPS",
    "PAPER_EPS",
]

DESK_EPS = tuple(2.0**-i for i in range(3, 7))
PAPER_EPS = tuple(2.0**-i for i in range(3, 10))

# spawn-key roots keeping the streams of different studies apart
_DECAY_STREAM = 0
_ADAPTIVE_STREAM = 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a study needs; ``deltas`` are decay widths (0 is always added)."""

    model: Model = MODELS["terminal"]
    eps: tuple = DESK_EPS
    reps: int = 20
    seed: int = 0
    samples: int = 10**5
    levels: tuple = tuple(range(8))
    fit_levels: tuple = (2, 7)
    deltas: Optional[tuple] = None
    knots: int = 7
    r: int = 3
    q_norm: float = LEBESGUE_CUBIC
    rmse_points: int = 10**4
    jobs: int = 1
    threads: int = 1

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if any(not 0 < e < 1 for e in self.eps):
            raise ValueError("eps values must lie in (0, 1)")
        if self.samples < 2:
            raise ValueError("decay studies need at least 2 samples per level")

    @property
    def decay_deltas(self) -> tuple:
        width = self.model.s1 - self.model.s0
        base = self.deltas if self.deltas is not None else tuple(width / 2.0**m for m in (2, 3, 4))
        return tuple(sorted({float(d) for d in base} | {0.0}, reverse=True))


def eps_label(eps: float) -> str:
    return f"{eps:.10g}"


# -- decay study --------------------------------------------------------------

@dataclass
class DecayResult:
    """Per-level max-norm means and variances, keyed by ``(level, delta)``."""

    rows: list  # (level, delta, mean, var)
    fit_levels: tuple

    def series(self, delta: float, column: str) -> tuple[np.ndarray, np.ndarray]:
        col = {"mean": 2, "var": 3}[column]
        pts = [(row[0], row[col]) for row in self.rows if row[1] == delta]
        lv, val = zip(*pts)
        return np.array(lv, dtype=float), np.array(val, dtype=float)

    def slope(self, delta: float, column: str, fit_levels: Optional[tuple] = None) -> float:
        lv, val = self.series(delta, column)
        lo, hi = fit_levels or self.fit_levels
        sel = (lv >= lo) & (lv <= hi)
        return fit_slope(lv[sel], val[sel])

    @property
    def deltas(self) -> list:
        return sorted({row[1] for row in self.rows}, reverse=True)

    def csv_rows(self) -> list:
        lo, hi = self.fit_levels
        out = [list(r) for r in self.rows]
        for d in self.deltas:
            out.append([f"slope[{lo}-{hi}]", d, self.slope(d, "mean"), self.slope(d, "var")])
        return out


def fit_slope(levels, values, refinement: int = 2) -> float:
    """Decay rate ``a`` of ``values ~ c M**(-a l)`` by least squares; zeros are skipped."""
    lv = np.asarray(levels, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = v > 0
    if keep.sum() < 2:
        return float("nan")
    return float(-np.polyfit(lv[keep], np.log(v[keep]) / math.log(refinement), 1)[0])


def decay_study(config: ExperimentConfig) -> DecayResult:
    """``|b_l|_inf`` and max-norm variance of the level differences per level and width.

    Each level is simulated once with ``config.samples`` pairs; all widths
    reuse the same samples on ``config.knots`` equidistant knots.
    """
    model = config.model
    sampler = model.sampler()
    kernel = build_kernel(config.r)
    knots = np.linspace(model.s0, model.s1, config.knots)
    rng = CounterRNG(config.seed).spawn(_DECAY_STREAM)
    rows = []
    for level in config.levels:
        state = LevelState(level)
        extend_level(state, sampler, config.samples, rng, workers=config.threads)
        for delta in config.decay_deltas:
            grid = SmoothedIndicatorGrid(knots, delta)
            b = estimate_mean(state, grid, kernel)
            d = eval_matrix(grid, kernel, state.fine)
            if level > 0:
                d -= eval_matrix(grid, kernel, state.coarse)
            var = float(np.mean(np.max(np.abs(d - b), axis=1) ** 2))
            rows.append((level, delta, float(np.max(np.abs(b))), var))
    return DecayResult(rows, tuple(config.fit_levels))


# -- adaptive study -----------------------------------------------------------

@dataclass
class RunOutcome:
    eps: float
    rep: int
    error: float
    report: RunReport


def _one_run(args) -> RunOutcome:
    config, i_eps, rep = args
    model, eps = config.model, config.eps[i_eps]
    rng = CounterRNG(config.seed).spawn(_ADAPTIVE_STREAM, i_eps, rep)
    try:
        cdf, report = run(eps, model.sampler(), config.r, (model.s0, model.s1), rng,
                          config.q_norm, config.threads)
    except AdaptiveAbort as exc:
        return RunOutcome(eps, rep, float("nan"), exc.report)
    x = np.linspace(model.s0, model.s1, config.rmse_points)
    err = float(np.max(np.abs(cdf(x) - model.cdf(x))))
    report.cdf = cdf
    return RunOutcome(eps, rep, err, report)


def adaptive_study(config: ExperimentConfig) -> list[list[RunOutcome]]:
    """``config.reps`` independent adaptive runs per ``eps``; outcomes in (eps, rep) order."""
    tasks = [(config, i, rep) for i in range(len(config.eps)) for rep in range(config.reps)]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            flat = list(pool.map(_one_run, tasks, chunksize=1))
    else:
        flat = [_one_run(t) for t in tasks]
    return [flat[i * config.reps:(i + 1) * config.reps] for i in range(len(config.eps))]


@dataclass(frozen=True)
class GainRecord:
    """Empirical RMSE and mean cost of the adaptive method against the baseline."""

    eps: float
    rmse: float
    cost_ml: float
    cost_sl: float
    kn_mean: float
    inv_delta_mean: float
    failures: int = 0

    @property
    def gain(self) -> float:
        return self.cost_sl / self.cost_ml


def single_level_cost(eps: float, alpha: float, q_norm: float = LEBESGUE_CUBIC) -> float:
    """Cost of plain Monte Carlo with indicators on ``k_n`` knots at one level.

    ``eps_* = eps / (33 Q)``, ``k_n = (Q eps_*)**(-1/4)`` and
    ``log2(k_n) / (256 eps_*^2)`` replications, each of cost
    ``k_n + (16 eps_*)**(-1/alpha)``; ``k_n`` and the replication count are
    rounded to the nearest integer.
    """
    if not eps > 0 or not alpha > 0:
        raise ValueError("eps and alpha must be positive")
    es = eps / (33.0 * q_norm)
    k = max(2, round((q_norm * es) ** -0.25))
    reps = round(math.log2(k) / (256.0 * es * es))
    return float(reps * (k + (16.0 * es) ** (-1.0 / alpha)))


def gain_records(outcomes: Sequence[Sequence[RunOutcome]], alpha: float,
                 q_norm: float = LEBESGUE_CUBIC) -> list[GainRecord]:
    out = []
    for runs in outcomes:
        ok = [o for o in runs if math.isfinite(o.error)]
        eps = runs[0].eps
        if not ok:
            out.append(GainRecord(eps, math.nan, math.nan, single_level_cost(eps, alpha, q_norm),
                                  math.nan, math.nan, len(runs)))
            continue
        out.append(GainRecord(
            eps=eps,
            rmse=float(np.sqrt(np.mean([o.error**2 for o in ok]))),
            cost_ml=float(np.mean([o.report.cost["total"] for o in ok])),
            cost_sl=single_level_cost(eps, alpha, q_norm),
            kn_mean=float(np.mean([o.report.k for o in ok])),
            inv_delta_mean=float(np.mean([1.0 / o.report.delta for o in ok])),
            failures=len(runs) - len(ok),
        ))
    return out


# -- writers ------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header: Sequence[str], rows) -> str:
    """Write a comma-separated file with ``repr`` floats; returns the text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="ascii") as fh:
            fh.write(text)
    return text
