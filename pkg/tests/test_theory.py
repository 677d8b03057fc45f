import math

import pytest

from mlmc_cdf.theory import RateAssumptions, complexity_exponents, plan_parameters


def example_rates(beta, r, tiny=1e-9):
    return RateAssumptions(tiny, beta / 2, beta / 2 - tiny, 2.0, beta, r)


@pytest.mark.parametrize("beta", [1.25, 1.5, 2.0, 3.0, 4.0])
@pytest.mark.parametrize("r", [1, 3])
def test_example_gamma(beta, r):
    order = complexity_exponents(example_rates(beta, r))
    assert order.case == "z2" and order.eta == 1
    assert order.gamma == pytest.approx(2 + 2 / (beta * (r + 1)), abs=1e-9)


def test_validation():
    for bad in [(-1, 1, 1, 1, 1), (0, 0, 0, 1, 1), (0, 1, 2, 1, 1), (0, 1, 1, -1, 1), (0, 1, 1, 1, 0)]:
        with pytest.raises(ValueError):
            RateAssumptions(*bad)
    with pytest.raises(ValueError):
        RateAssumptions(0, 1, 1, 1, 1, r=-1)
    with pytest.raises(ValueError):
        RateAssumptions(0, 1, 1, 1, 1, M=1)


def test_q_definition():
    assert RateAssumptions(1, 2, 1, 1, 1, r=3).q == pytest.approx(min(5 / 2, 4 / 1))
    assert RateAssumptions(0, 1, 0, 1, 1, r=3).q == 4.0


def test_cases():
    z1 = complexity_exponents(RateAssumptions(0, 1, 1, 8, 1.5))
    assert (z1.case, z1.eta) == ("z1", 1) and z1.gamma == pytest.approx(2 + 4 / 4)
    z2 = complexity_exponents(RateAssumptions(0, 1, 1, 2, 2))
    assert z2.case == "z2" and z2.gamma == pytest.approx(2 + 1 / 4)
    z4 = complexity_exponents(RateAssumptions(0, 1, 1, 1, 0.5))
    assert z4.case == "z4" and z4.gamma == pytest.approx(2 + (1 + 0.5 * 4) / 4)
    z5 = complexity_exponents(RateAssumptions(0, 1, 1, 1, 1))
    assert (z5.case, z5.eta) == ("z5", 3) and z5.gamma == pytest.approx(2 + 1 / 4)
    assert all(o.covered for o in (z1, z2, z4, z5))


def test_boundaries_report_neighbors():
    # q == beta4 / beta5 with beta5 > 1: z1 and z2 meet and agree
    o = complexity_exponents(RateAssumptions(0, 1, 1, 8, 2))
    assert o.case == "z1" and o.neighbors == ("z1", "z2")
    # beta5 == 1 with q <= beta4 falls into z1
    o = complexity_exponents(RateAssumptions(0, 1, 1, 5, 1))
    assert o.case == "z1" and o.neighbors == ()
    # q == beta4 == beta4 / beta5: every regime touches
    o = complexity_exponents(RateAssumptions(0, 1, 1, 4, 1))
    assert o.case == "z1" and o.neighbors == ("z1", "z2", "z4", "z5")
    assert o.gamma == pytest.approx(2 + 4 / 4)
    o = complexity_exponents(RateAssumptions(0, 1, 1, 2, 1.0 + 1e-14))
    assert o.case == "z2" and set(o.neighbors) >= {"z2", "z4", "z5"}
    assert complexity_exponents(RateAssumptions(0, 1, 1, 2, 2)).neighbors == ()


@pytest.mark.parametrize("beta5", [0.5, 1.0, 1.5, 2.0])
def test_large_r_limit(beta5):
    alpha2 = 1.3
    o = complexity_exponents(RateAssumptions(0.0, alpha2, alpha2, 2.0, beta5, r=1000))
    assert o.gamma == pytest.approx(2 + max(1 - beta5, 0) / alpha2, abs=1e-2)


def test_monotone_in_strong_rates():
    grid = [0.25 * i for i in range(1, 17)]
    for b4 in (0.5, 1.0, 2.0):
        g = [complexity_exponents(RateAssumptions(0.5, 1, 1, b4, b5)).gamma for b5 in grid]
        assert all(a >= b - 1e-12 for a, b in zip(g, g[1:]))
    for b5 in (0.5, 1.0, 2.0):
        g = [complexity_exponents(RateAssumptions(0.5, 1, 1, b4, b5)).gamma for b4 in grid]
        assert all(a <= b + 1e-12 for a, b in zip(g, g[1:]))


def test_z2_independent_of_q():
    gs = {complexity_exponents(RateAssumptions(a1, 1, 1, 1, 2)).gamma for a1 in (0, 0.5, 3)}
    assert len(gs) == 1


def test_plan_example():
    plan = plan_parameters(RateAssumptions(0, 2, 2, 2, 2), 2.0**-8)
    assert plan.L_star == pytest.approx(2.0)
    assert plan.k == 4 and plan.delta == pytest.approx(0.25)
    assert plan.N_L0 == math.ceil(2.0**16 * 8)


def test_plan_single_level():
    rates = RateAssumptions(0, 1, 1, 8, 1.5)
    plan = plan_parameters(rates, 2.0**-8)
    assert plan.single_level and plan.L0 == plan.L1 == math.ceil(4 * 2)
    assert list(plan.counts) == [plan.L1]


def test_plan_lagrange_constraint():
    rates = RateAssumptions(0, 1, 1, 2, 2)
    eps = 2.0**-10
    plan = plan_parameters(rates, eps)
    assert not plan.single_level and plan.L0 < plan.L1
    log_inv = math.log(1 / eps, 2)
    v = {l: min(2 ** (plan.L_star * 2) * 2.0 ** (-2 * l), 1.0)
         for l in range(plan.L0 + 1, plan.L1 + 1)}
    total = sum(v[l] / plan.counts_exact[l] for l in v)
    assert total == pytest.approx(eps**2 / log_inv, rel=1e-12)
    assert all(plan.counts[l] >= plan.counts_exact[l] for l in plan.counts)
    d = plan.to_dict()
    assert set(d["counts"]) == {str(l) for l in plan.counts}
    with pytest.raises(ValueError):
        plan_parameters(rates, 1.5)
