"""Multilevel Monte Carlo approximation of distribution functions."""

from .adaptive import AccuracyBudget, AdaptiveAbort, RunReport, run
from .engine import CostLedger, CoupledSampler, LevelState
from .interpolation import LEBESGUE_CUBIC, MonotoneCdf, make_grid, monotone_cdf
from .kernel import SmoothedIndicatorGrid, accumulate_weighted, build_kernel
from .rng import CounterRNG
from .sde import MODELS, ExactLawSampler, FunctionalKind, GbmParams, GbmSampler, Model

__all__ = [
    "AccuracyBudget",
    "AdaptiveAbort",
    "RunReport",
    "run",
    "CostLedger",
    "CoupledSampler",
    "LevelState",
    "LEBESGUE_CUBIC",
    "MonotoneCdf",
    "make_grid",
    "monotone_cdf",
    "SmoothedIndicatorGrid",
    "accumulate_weighted",
    "build_kernel",
    "CounterRNG",
    "MODELS",
    "ExactLawSampler",
    "FunctionalKind",
    "GbmParams",
    "GbmSampler",
    "Model",
]
