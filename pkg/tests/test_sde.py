import math

import numpy as np
import pytest
from scipy import stats

from mlmc_cdf.bench import fit_slope
from mlmc_cdf.rng import CounterRNG
from mlmc_cdf.sde import (
    MODELS,
    FunctionalKind,
    GbmParams,
    GbmSampler,
    bridge_exit_pair,
    bridge_minimum,
    exact_cdf,
    lognormal_pdf_derivative,
    milstein_pair,
)

TERMINAL, RUNMAX, EXIT = MODELS["terminal"], MODELS["max"], MODELS["exit"]


def test_params_validation():
    with pytest.raises(ValueError):
        GbmParams(0.1, 0.0, 1.0)
    with pytest.raises(ValueError):
        GbmParams(0.1, 0.2, -1.0)
    with pytest.raises(ValueError):
        GbmSampler(GbmParams(0.1, 0.2, 1.0), FunctionalKind.EXIT_TIME)
    with pytest.raises(ValueError):
        milstein_pair(GbmParams(0.1, 0.2, 1.0), "exit", np.zeros((1, 2)))


def test_exact_cdf_values():
    assert TERMINAL.cdf(1.0) == pytest.approx(stats.norm.cdf(-0.15), abs=1e-14)
    assert TERMINAL.cdf(1.0) == pytest.approx(0.44038, abs=1e-5)
    assert RUNMAX.cdf(1.0 + 1e-12) == pytest.approx(0.0, abs=1e-5)
    assert RUNMAX.cdf(50.0) == pytest.approx(1.0, abs=1e-12)
    assert EXIT.cdf(3.0) == 1.0 and EXIT.cdf(0.0) == 0.0
    with pytest.raises(ValueError):
        TERMINAL.cdf(-1.0)
    with pytest.raises(ValueError):
        RUNMAX.cdf(0.5)
    with pytest.raises(ValueError):
        exact_cdf(EXIT.params, "exit", 0.5)


def test_inverse_gaussian_form():
    # first passage of a Brownian motion with drift nu to level a < 0
    p, b = EXIT.params, EXIT.barrier
    nu, sig, a = p.drift_log, p.sigma, math.log(b)
    s = np.linspace(0.3, 1.2, 10)
    dens = -a / (sig * np.sqrt(2 * np.pi * s**3)) * np.exp(-((a - nu * s) ** 2) / (2 * sig**2 * s))
    num = np.array([EXIT.cdf(x + 1e-6) - EXIT.cdf(x - 1e-6) for x in s]) / 2e-6
    assert np.allclose(num, dens, rtol=1e-5)


def test_running_max_density_positive():
    s = np.linspace(1.0001, 3, 500)
    assert np.all(np.diff(RUNMAX.cdf(s)) > 0)


def test_lognormal_pdf_derivative():
    m, s = TERMINAL.params.drift_log, TERMINAL.params.sigma
    x = np.linspace(0.4, 1.8, 9)
    pdf = stats.lognorm(s, scale=math.exp(m)).pdf
    assert np.allclose(lognormal_pdf_derivative(x, 0, m, s), pdf(x), rtol=1e-12)
    h = 1e-5
    d2 = lambda y: lognormal_pdf_derivative(y, 2, m, s)
    d3 = (d2(x + h) - d2(x - h)) / (2 * h)
    assert np.allclose(lognormal_pdf_derivative(x, 3, m, s), d3, rtol=1e-6, atol=1e-6)


def test_zero_noise_limit():
    p = GbmParams(0.3, 1e-12, 1.0)
    out = []
    for level in (2, 6, 10):
        f, c = milstein_pair(p, "terminal", np.zeros((1, 2**level)))
        assert abs(f[0] - math.exp(0.3)) <= 0.3**2 / 2**level
        out.append(abs(f[0] - c[0]))
    assert out[0] > out[1] > out[2]


def test_terminal_mean_level6():
    s = TERMINAL.sampler()
    fine, coarse = s.sample(6, CounterRNG(0), 0, 20000)
    p = TERMINAL.params
    se = fine.std() / math.sqrt(fine.size)
    assert abs(fine.mean() - math.exp(p.mu * p.T)) <= 3 * se
    assert coarse.shape == fine.shape


def test_terminal_strong_order():
    s = TERMINAL.sampler()
    levels = np.arange(2, 8)
    msd = [np.mean(np.subtract(*s.sample(l, CounterRNG(1), 0, 4000)) ** 2) for l in levels]
    assert fit_slope(levels, msd) == pytest.approx(2.0, abs=0.3)


@pytest.mark.parametrize("model", [TERMINAL, RUNMAX, EXIT])
def test_coarse_marginal_matches_previous_level(model):
    s, level, n = model.sampler(), 4, 20000
    _, coarse = s.sample(level, CounterRNG(2), 0, n)
    fine, _ = s.sample(level - 1, CounterRNG(3), 0, n)
    for q in np.linspace(model.s0, model.s1, 5):
        a, b = np.mean(coarse <= q), np.mean(fine <= q)
        se = math.sqrt(max(a * (1 - a) + b * (1 - b), 1e-12) / n)
        assert abs(a - b) <= 3.5 * se


def test_bridge_minimum_law():
    # Brownian bridge minimum from 0 to 0 over unit time: P(min <= -y) = exp(-2 y^2)
    u = CounterRNG(4).uniforms(0, 0, 40000, 1)[:, 0]
    m = bridge_minimum(0.0, 0.0, 1.0, 1.0, u)
    for y in (0.2, 0.5, 1.0):
        p = math.exp(-2 * y * y)
        assert abs(np.mean(m <= -y) - p) <= 3 * math.sqrt(p * (1 - p) / u.size)
    assert np.all(m <= 0)


def test_exit_direct_crossing():
    p = GbmParams(0.0, 0.2, 1.0)
    normals = np.array([[-5.0, 0.0, 0.0, 0.0]])
    tau, _ = bridge_exit_pair(p, 0.95, normals, np.full((1, 4), 0.5), coupled=False)
    assert tau[0] == 0.25
    with pytest.raises(ValueError):
        bridge_exit_pair(p, 1.5, normals, np.full((1, 4), 0.5))


def test_exit_marginal_level8():
    n = 20000
    tau, _ = EXIT.sampler().sample(8, CounterRNG(5), 0, n)
    p = EXIT.cdf(EXIT.params.T - 1e-12)
    est = np.mean(tau < EXIT.params.T)
    # right-endpoint exit times carry an O(h) bias on top of sampling noise
    assert abs(est - p) <= 3 * math.sqrt(p * (1 - p) / n) + 2.0**-8


def test_exit_brute_force_reduced():
    # F(S1) against a fine-grid simulation (level 11, 4e4 paths)
    n = 40000
    tau, _ = EXIT.sampler().sample(11, CounterRNG(6), 0, n)
    p = EXIT.cdf(EXIT.s1)
    est = np.mean(tau <= EXIT.s1)
    assert abs(est - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_replace_overrides():
    m = EXIT.replace(mu=0.02, barrier=0.9, s1=None)
    assert m.params.mu == 0.02 and m.barrier == 0.9 and m.s1 == EXIT.s1
    assert m.params.sigma == EXIT.params.sigma
