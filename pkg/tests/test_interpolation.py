import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlmc_cdf.interpolation import (
    LEBESGUE_CUBIC,
    KnotGrid,
    PiecewisePolynomial,
    interpolate,
    lebesgue_constant,
    make_grid,
    monotone_cdf,
    monotone_correct_function,
    monotone_correct_values,
    sup_distance,
)
from mlmc_cdf.sde import MODELS

TERMINAL = MODELS["terminal"]


def _dense(grid, per=200):
    frac = np.arange(per) / per
    x = (grid.knots[:-1, None] + np.diff(grid.knots)[:, None] * frac).ravel()
    return np.append(x, grid.knots[-1])


def test_make_grid_examples():
    g = make_grid(2, 3, 0.5, 1.5)
    assert g.k == 7
    assert np.allclose(g.knots, np.linspace(0.5, 1.5, 7))
    assert g.knots[0] == 0.5 and g.knots[-1] == 1.5
    assert make_grid(3, 3, 0, 1).k == 10
    assert make_grid(2, 1, 0, 1).k == 5
    assert g.block_width == pytest.approx(0.5)


@pytest.mark.parametrize("args", [(0, 3, 0, 1), (2, 3, 1, 1), (2, 0, 0, 1)])
def test_make_grid_rejects(args):
    with pytest.raises(ValueError):
        make_grid(*args)


def test_interpolate_reproduces_cubics():
    g = make_grid(4, 3, 0.5, 1.5)
    assert np.allclose(interpolate(g, np.full(g.k, 0.7))(_dense(g)), 0.7, atol=1e-14)
    x = _dense(g)
    assert np.max(np.abs(interpolate(g, g.knots)(x) - x)) <= 1e-12
    cubic = lambda s: 1 - 2 * s + 0.3 * s**2 - s**3
    assert np.max(np.abs(interpolate(g, cubic(g.knots))(x) - cubic(x))) <= 1e-11


def test_interpolate_length_mismatch():
    with pytest.raises(ValueError):
        interpolate(make_grid(2, 3, 0, 1), np.zeros(3))


def test_interpolant_continuous():
    g = make_grid(4, 3, 0, 1)
    p = interpolate(g, np.random.default_rng(0).normal(size=g.k))
    h = p.breakpoints[1:-1]
    for i, b in enumerate(h):
        left = np.polynomial.polynomial.polyval(b - p.breakpoints[i], p.coeffs[i])
        assert left == pytest.approx(p(b), abs=1e-10)


def test_lebesgue_constants():
    assert LEBESGUE_CUBIC == pytest.approx(1.6311303094, abs=1e-9)
    assert lebesgue_constant(1) == pytest.approx(1.0, abs=1e-9)
    assert lebesgue_constant(2) == pytest.approx(1.25, abs=1e-6)


def test_interpolation_lipschitz_random():
    rng = np.random.default_rng(11)
    g = make_grid(4, 3, 0, 1)
    x = _dense(g, 400)
    worst = 0.0
    for _ in range(300):
        d = rng.uniform(-1, 1, g.k)
        worst = max(worst, np.max(np.abs(interpolate(g, d)(x))) / np.max(np.abs(d)))
    assert worst <= LEBESGUE_CUBIC + 1e-9
    # sign pattern of the Lagrange basis at the peak of the Lebesgue function
    u = np.linspace(0, 3, 300001)
    basis = [np.prod([(u - j) / (i - j) for j in range(4) if j != i], axis=0) for i in range(4)]
    peak = np.argmax(np.sum(np.abs(basis), axis=0))
    d = np.zeros(g.k)
    d[:4] = [np.sign(b[peak]) for b in basis]
    assert np.max(np.abs(interpolate(g, d)(_dense(g, 3000)))) == pytest.approx(LEBESGUE_CUBIC, abs=1e-5)


def test_correct_values_examples():
    assert np.allclose(monotone_correct_values([0.5, 0.3]), [0.4, 0.4])
    assert np.allclose(monotone_correct_values([-0.2, 1.4]), [0.0, 1.0])
    y = np.array([0.0, 0.1, 0.5, 0.9])
    assert np.array_equal(monotone_correct_values(y), y)


@given(st.lists(st.floats(-2, 3, allow_nan=False), min_size=1, max_size=40))
def test_correct_values_properties(y):
    out = monotone_correct_values(y)
    assert np.all(np.diff(out) >= 0)
    assert np.all((out >= 0) & (out <= 1))


@settings(max_examples=50)
@given(st.lists(st.floats(-2, 3, allow_nan=False), min_size=2, max_size=20), st.integers(0, 10**6))
def test_correct_values_lipschitz_one(y, seed):
    y = np.array(y)
    z = y + np.random.default_rng(seed).uniform(-0.1, 0.1, y.size)
    lhs = np.max(np.abs(monotone_correct_values(y) - monotone_correct_values(z)))
    assert lhs <= np.max(np.abs(y - z)) + 1e-15


def _running_oracle(phi, grid, per=10**4):
    """Dense running max/min oracle of (f + h) / 2 on each knot interval."""
    xs, vals = [], []
    for a, b in zip(grid.knots[:-1], grid.knots[1:]):
        x = np.linspace(a, b, per)
        p = phi(x)
        f = np.minimum(np.maximum.accumulate(p), p[-1])
        h = np.maximum(np.minimum.accumulate(p[::-1])[::-1], p[0])
        xs.append(x)
        vals.append(0.5 * (f + h))
    return np.concatenate(xs), np.concatenate(vals)


def test_function_correction_against_oracle():
    g = KnotGrid(0.0, 1.0, 1, 3, 4, np.linspace(0, 1, 4))
    phi = interpolate(g, np.array([0.0, 0.5, 0.5, 1.0]))
    out = monotone_correct_function(phi, g)
    x, ref = _running_oracle(phi, g)
    assert np.max(np.abs(out(x) - ref)) <= 1e-8
    assert np.all(np.diff(out(x)) >= -1e-14)
    assert np.allclose(out(g.knots), [0.0, 0.5, 0.5, 1.0], atol=1e-14)


def test_function_correction_caps_overshoot():
    g = KnotGrid(0.0, 1.0, 1, 3, 4, np.linspace(0, 1, 4))
    phi = interpolate(g, np.array([0.0, 0.05, 0.95, 1.0]))
    x, ref = _running_oracle(phi, g)
    assert phi(x).max() > 1.1 and phi(x).min() < -0.1
    out = monotone_correct_function(phi, g)
    assert np.max(np.abs(out(x) - ref)) <= 1e-8
    assert out(x).max() <= 1.0 + 1e-12 and out(x).min() >= -1e-12
    assert np.all(np.diff(out(x)) >= -1e-12)


def test_function_correction_identity_on_monotone():
    g = make_grid(3, 3, 0, 1)
    phi = interpolate(g, g.knots**2)
    out = monotone_correct_function(phi, g)
    x = _dense(g)
    assert np.max(np.abs(out(x) - phi(x))) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_monotone_cdf_valid(seed):
    rng = np.random.default_rng(seed)
    g = make_grid(int(rng.integers(1, 5)), 3, 0, 1)
    y = rng.uniform(-0.5, 1.5, g.k)
    cdf = monotone_cdf(g, y)
    x = _dense(g, 300)
    v = cdf(x)
    assert np.all(np.diff(v) >= -1e-12)
    assert np.all((v >= -1e-12) & (v <= 1 + 1e-12))
    assert np.allclose(cdf(g.knots), monotone_correct_values(y), atol=1e-12)


def test_monotone_cdf_exact_for_cdf_values():
    g = make_grid(3, 3, TERMINAL.s0, TERMINAL.s1)
    y = TERMINAL.cdf(g.knots)
    assert np.array_equal(monotone_correct_values(y), y)


def test_sup_distance_examples():
    g = make_grid(2, 3, 0, 1)
    f = lambda x: np.asarray(x) * 0.3
    assert sup_distance(f, f, g) == 0.0
    assert sup_distance(lambda x: np.zeros_like(x), lambda x: np.ones_like(x), g) == 1.0


def test_sup_distance_mesh_refinement():
    knots = np.linspace(TERMINAL.s0, TERMINAL.s1, 13)
    g = KnotGrid(TERMINAL.s0, TERMINAL.s1, 0, 3, 13, knots)
    phi = interpolate(g, TERMINAL.cdf(knots))
    coarse = sup_distance(TERMINAL.cdf, phi, g)
    fine = sup_distance(TERMINAL.cdf, phi, g, per_interval=640)
    assert coarse <= fine
    assert coarse >= 0.95 * fine


def test_to_csv_roundtrip():
    g = make_grid(2, 3, 0, 1)
    cdf = monotone_cdf(g, g.knots)
    text = cdf.to_csv()
    lines = text.strip().split("\n")
    assert lines[0].startswith("left,right,c0")
    assert len(lines) == 1 + len(cdf.coeffs)
    buf = io.StringIO()
    cdf.to_csv(buf)
    assert buf.getvalue() == text
    row = [float(v) for v in lines[1].split(",")]
    assert row[0] == 0.0 and math.isclose(row[1], cdf.breakpoints[1])


def test_piecewise_evaluation_clamps():
    p = PiecewisePolynomial(np.array([0.0, 1.0]), np.array([[0.0, 1.0]]))
    assert p(-1.0) == 0.0 and p(2.0) == 1.0
