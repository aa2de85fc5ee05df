import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from graphon_ldp import downward as dn
from graphon_ldp import graphon as gc
from graphon_ldp.spectral import laplacian_norm
from graphon_ldp.upward import degree_rate

RANK1 = gc.rank1([0.3, 0.4])
HALF = gc.constant(0.5)
R04 = 0.020135513550688863


def f(x):
    return 0.3 + 0.4 * x


def exact_R(a, b):
    return a * math.log(a / b) + (1 - a) * math.log((1 - a) / (1 - b))


# ----------------------------------------------------------------- exceedance set

def test_exceedance_examples():
    s = dn.exceedance_set(HALF, 0.4)
    assert s.intervals == [(0.0, 1.0)] or s.intervals == [[0.0, 1.0]]
    assert s.measure == pytest.approx(1.0)
    s = dn.exceedance_set(RANK1, 0.3)
    assert len(s.intervals) == 1
    a, b = s.intervals[0]
    assert a == pytest.approx(0.75, abs=1e-12) and b == 1.0
    assert s.measure == pytest.approx(0.25, abs=1e-12)
    assert dn.exceedance_set(RANK1, 0.36).measure == 0.0
    assert dn.exceedance_set(HALF, 0.6).intervals == []


def test_exceedance_on_grid_reference_is_blockwise():
    r = gc.grid([[0.2, 0.6], [0.6, 0.6]])  # degrees 0.4 and 0.6
    s = dn.exceedance_set(r, 0.5)
    assert s.measure == pytest.approx(0.5)
    assert s.contains(0.75) and not s.contains(0.25)


@given(st.floats(0.15, 0.35))
def test_exceedance_matches_closed_form(beta):
    s = dn.exceedance_set(RANK1, beta)
    x_beta = max((beta / 0.5 - 0.3) / 0.4, 0.0)
    assert s.measure == pytest.approx(1 - x_beta, abs=1e-10)


# ----------------------------------------------------------------- constants

def test_c_r0_examples():
    assert dn.c_r0(HALF) == pytest.approx(math.log(2), abs=1e-14)
    assert dn.c_r0(gc.constant(0.2)) == pytest.approx(math.log(1.25), abs=1e-14)
    oracle = integrate.dblquad(lambda y, x: -math.log(1 - f(x) * f(y)), 0, 1, 0, 1, epsabs=1e-13)[0]
    assert oracle == pytest.approx(0.2940841611243807, abs=1e-10)
    assert dn.c_r0(RANK1) == pytest.approx(oracle, abs=1e-8)
    assert dn.c_r0(RANK1) == pytest.approx(gc.rate_I(gc.BlockGraphon.zero(1), RANK1), abs=1e-8)


def test_c_r0_rejects_reference_touching_one():
    with pytest.raises(ValueError):
        dn.c_r0(gc.grid([[1.0, 0.5], [0.5, 0.5]]))


# ----------------------------------------------------------------- lower bound / scaling integral

def test_lower_bound_examples():
    assert dn.lower_bound(HALF, 0.4) == pytest.approx(R04, abs=1e-12)
    assert dn.lower_bound(HALF, 0.5) == pytest.approx(0.0, abs=1e-15)
    assert dn.lower_bound(RANK1, 0.35) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("beta,frozen", [(0.3, 0.00048825625323223977), (0.34, 3.795251714858012e-06)])
def test_lower_bound_rank1_quadrature_oracle(beta, frozen):
    x_beta = (beta / 0.5 - 0.3) / 0.4
    oracle = integrate.quad(lambda x: degree_rate(RANK1, x, beta), x_beta, 1, epsabs=1e-15)[0]
    assert oracle == pytest.approx(frozen, rel=1e-8)
    assert dn.lower_bound(RANK1, beta) == pytest.approx(oracle, rel=1e-8)


def test_scaling_integral_examples():
    assert dn.scaling_integral(HALF, 0.4) == pytest.approx(0.04, abs=1e-14)
    assert dn.scaling_integral(HALF, 0.5) == 0.0
    assert dn.scaling_integral(RANK1, 0.35) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("beta,frozen", [(0.3, 0.0009583779767404359), (0.34, 7.565501991985966e-06)])
def test_scaling_integral_rank1_oracle(beta, frozen):
    x_beta = (beta / 0.5 - 0.3) / 0.4

    def integrand(x):
        d = 0.5 * f(x)
        v = integrate.quad(lambda y: f(x) * f(y) * (1 - f(x) * f(y)), 0, 1, epsabs=1e-15)[0]
        return (d - beta) ** 2 / v

    oracle = integrate.quad(integrand, x_beta, 1, epsabs=1e-16)[0]
    assert oracle == pytest.approx(frozen, rel=1e-8)
    assert dn.scaling_integral(RANK1, beta) == pytest.approx(oracle, rel=1e-8)


# ----------------------------------------------------------------- candidate / upper bound

def test_candidate_constant():
    h = dn.candidate_graphon(HALF, 0.4, 8)
    np.testing.assert_allclose(h.values, 0.4, atol=1e-14)
    v, ok, norm = dn.upper_bound(HALF, 0.4, 8)
    assert v == pytest.approx(R04, abs=1e-12)
    assert ok and norm == pytest.approx(0.4, abs=1e-12)


def test_candidate_at_c_r_is_block_average():
    h = dn.candidate_graphon(RANK1, 0.35, 16)
    avg = gc.block_average(RANK1, 16)
    np.testing.assert_allclose(h.values, avg.values, atol=1e-9)
    # the continuum value is 0; on 16 blocks what remains is the averaging error of r itself
    assert dn.upper_bound(RANK1, 0.35, 16)[0] == pytest.approx(gc.rate_I(avg, RANK1), abs=1e-8)
    assert dn.upper_bound(HALF, 0.5, 16)[0] == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("beta", [0.3, 0.32, 0.34])
def test_candidate_rank1_feasible_and_bracketed(beta):
    h = dn.candidate_graphon(RANK1, beta, 32)
    assert np.all(h.degrees <= beta + 1e-9)
    assert laplacian_norm(h) <= beta + 1e-9
    ub, ok, _ = dn.upper_bound(RANK1, beta, 32)
    lb = dn.lower_bound(RANK1, beta)
    assert ok
    assert lb <= ub
    # factor-two chain, up to the cost of replacing r by its block average
    assert ub <= 2 * lb + gc.rate_I(gc.block_average(RANK1, 32), RANK1)


# ----------------------------------------------------------------- solver

def test_solve_boundary_branches():
    s = dn.solve_psi(HALF, 0.0, n_blocks=4)
    assert s.value == pytest.approx(math.log(2), abs=1e-8)
    assert s.minimiser == gc.BlockGraphon.zero(4)
    s = dn.solve_psi(HALF, 0.5, n_blocks=4)
    assert s.value == pytest.approx(0.0, abs=1e-8)
    np.testing.assert_allclose(s.minimiser.values, 0.5)
    s = dn.solve_psi(RANK1, 0.35, n_blocks=8)
    assert s.value == 0.0
    assert s.minimiser == gc.block_average(RANK1, 8)


def test_solve_rejects_bad_input():
    with pytest.raises(ValueError):
        dn.solve_psi(HALF, 0.6)
    with pytest.raises(ValueError):
        dn.solve_psi(HALF, 0.3, n_blocks=1)


def test_solve_constant_example():
    s = dn.solve_psi(HALF, 0.4, n_blocks=8, restarts=3)
    assert R04 - 1e-12 <= s.value <= 1.05 * R04
    assert s.feasibility_gap <= 1e-8
    assert s.lower_bound == pytest.approx(R04, abs=1e-12)
    assert s.upper_bound == pytest.approx(R04, abs=1e-12)
    assert set(s.to_dict()) >= {"beta", "value", "minimiser", "feasibility_gap", "iterations"}


@pytest.mark.parametrize("frac", np.round(np.linspace(0.35, 0.9, 6), 3))
def test_homogeneous_exactness(frac):
    p = 0.5
    beta = frac * p
    s = dn.solve_psi(gc.constant(p), beta, n_blocks=6, restarts=2)
    target = exact_R(beta, p)
    assert abs(s.value - target) <= 0.05 * target
    assert laplacian_norm(s.minimiser) <= beta + 1e-8


@pytest.mark.slow
def test_rank1_sandwich_and_feasible_minimiser():
    for beta in (0.3, 0.34):
        s = dn.solve_psi(RANK1, beta, n_blocks=16, restarts=3)
        assert laplacian_norm(s.minimiser) <= beta + 1e-8
        assert s.feasibility_gap <= 1e-8
        assert s.lower_bound <= s.value + 1e-9
        assert s.value <= s.upper_bound + 1e-6


@pytest.mark.slow
def test_solver_monotone_in_beta():
    vals = [dn.solve_psi(RANK1, b, n_blocks=8, restarts=2).value for b in (0.2, 0.25, 0.3, 0.33)]
    assert all(b < a + 1e-6 for a, b in zip(vals, vals[1:]))


def test_closed_set_probe():
    beta = 0.4
    a = dn.solve_psi(HALF, beta, n_blocks=6, restarts=2).value
    b = dn.solve_psi(HALF, beta * (1 - 1e-6), n_blocks=6, restarts=2).value
    assert abs(a - b) <= 1e-5


def test_solver_deterministic():
    a = dn.solve_psi(RANK1, 0.3, n_blocks=6, restarts=3, seed=5)
    b = dn.solve_psi(RANK1, 0.3, n_blocks=6, restarts=3, seed=5)
    assert a.value == b.value
    assert a.minimiser == b.minimiser


def test_discretisation_floor():
    assert dn.discretisation_floor(HALF, 4) == pytest.approx(0.0, abs=1e-15)
    assert dn.discretisation_floor(gc.grid([[0.2, 0.6], [0.6, 0.6]]), 4) == pytest.approx(0.0, abs=1e-14)
    assert dn.discretisation_floor(RANK1, 4) > dn.discretisation_floor(RANK1, 16) > 0


def test_penalty_gradient_matches_finite_differences():
    prob = dn._Problem(RANK1, 0.2, 4)
    rng = np.random.default_rng(0)
    z = rng.normal(scale=0.5, size=len(prob.iu[0]))
    mu = 50.0
    f0, g0 = prob.fun_grad(z, mu)
    eps = 1e-6
    for k in range(len(z)):
        e = np.zeros_like(z)
        e[k] = eps
        fd = (prob.fun_grad(z + e, mu)[0] - prob.fun_grad(z - e, mu)[0]) / (2 * eps)
        assert fd == pytest.approx(g0[k], rel=1e-4, abs=1e-6)
