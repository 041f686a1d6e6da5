import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cshiggs.core import PhysicalParams, RadialGrid, l4_norm_4
from cshiggs.neutral import (NeutralMethod, neutral_coupling_inequality, neutral_residual,
                             solve_neutral_fd, solve_neutral_green)
from cshiggs.neutral import green_screened, neutral_fd_array

from conftest import bumps

# int N_u u^2 dx for u = e^{-r^2/2}, m = omega = kappa = q = 1, on the whole plane;
# frozen from the Green-kernel double integral in gaussian_coupling_oracle (dps 30)
GAUSS_COUPLING = -1.08727847359904896


def gaussian_coupling_oracle(dps=15):
    """-q c' 2 pi int int G(r,s) s e^{-s^2} r e^{-r^2}, G = I0(r<) K0(r>), by symmetry
    twice the r > s half."""
    mp.mp.dps = dps
    u2 = lambda r: mp.e ** (-r * r)
    inner = lambda r: mp.quad(lambda s: s * mp.besseli(0, s) * u2(s), [0, r])
    val = mp.quad(lambda r: r * u2(r) * mp.besselk(0, r) * inner(r), [0, 1, 2, 4, 8])
    return float(-1.5 * 2 * mp.pi * 2 * val)


def test_oracle_reproduces_frozen_value():
    assert abs(gaussian_coupling_oracle() / GAUSS_COUPLING - 1) < 1e-12


def test_gaussian_coupling(gauss, unit):
    fd = solve_neutral_fd(gauss, unit)
    gr = solve_neutral_green(gauss, unit)
    assert fd.method is NeutralMethod.finite_difference
    assert gr.method is NeutralMethod.green_oracle
    assert abs(fd.coupling / gr.coupling - 1) < 1e-5
    assert abs(fd.coupling / GAUSS_COUPLING - 1) < 1e-7
    assert abs(gr.coupling / GAUSS_COUPLING - 1) < 1e-7


def test_zero_source(grid, unit):
    for solver in (solve_neutral_fd, solve_neutral_green):
        rep = solver(grid.zeros(), unit)
        assert not np.any(rep.n_field.values) and rep.coupling == 0.0
    assert neutral_coupling_inequality(grid.zeros(), unit) == (0.0, 0.0, True)


def test_deterministic(gauss, unit):
    a = solve_neutral_fd(gauss, unit).n_field.values
    b = solve_neutral_fd(gauss, unit).n_field.values
    assert np.array_equal(a, b)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_sign_identity_and_agreement(seed):
    g = RadialGrid(20.0, 2048)
    p = PhysicalParams()
    u = bumps(g, seed)
    fd, gr = solve_neutral_fd(u, p), solve_neutral_green(u, p)
    N = fd.n_field.values
    m = np.max(np.abs(N))
    assert np.max(N) <= 1e-10 * m and np.max(gr.n_field.values) <= 1e-10 * m
    assert fd.coupling <= 0
    assert np.max(np.abs(N - gr.n_field.values)) < 1e-4 * m
    assert fd.energy_identity_error(p) < 1e-6
    assert gr.energy_identity_error(p) < 1e-6


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), t=st.sampled_from([0.5, 2.0, 3.0, -1.5]))
def test_quadratic_scaling(seed, t):
    g = RadialGrid(20.0, 1024)
    p = PhysicalParams()
    u = bumps(g, seed)
    N = solve_neutral_fd(u, p).n_field.values
    Nt = solve_neutral_fd(t * u, p).n_field.values
    assert np.max(np.abs(Nt - t * t * N)) <= 1e-10 * np.max(np.abs(t * t * N))


@settings(max_examples=20, deadline=None)
@given(a=st.integers(0, 2 ** 32 - 1), b=st.integers(0, 2 ** 32 - 1))
def test_sources_add(a, b):
    g = RadialGrid(20.0, 1024)
    fa, fb = bumps(g, a).values ** 2, bumps(g, b).values ** 2
    Na, Nb = neutral_fd_array(g, 1.0, fa), neutral_fd_array(g, 1.0, fb)
    Nab = neutral_fd_array(g, 1.0, fa + fb)
    assert np.max(np.abs(Nab - Na - Nb)) <= 1e-12 * np.max(np.abs(Nab))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), t=st.floats(0.2, 5.0))
def test_coupling_inequality(seed, t):
    g = RadialGrid(20.0, 1024)
    p = PhysicalParams()
    u = bumps(g, seed)
    lhs, rhs, holds = neutral_coupling_inequality(u, p)
    assert holds and lhs >= 0
    assert math.isclose(rhs, p.c_prime / (p.kappa ** 2 * p.q) * l4_norm_4(u), rel_tol=1e-15)
    lt, rt, _ = neutral_coupling_inequality(t * u, p)
    assert math.isclose(lt / rt, lhs / rhs, rel_tol=1e-10)


@pytest.mark.parametrize("kappa,q,m", [(1.0, 1.0, 1.0), (2.0, 1.5, 0.7), (0.8, 3.0, 2.0)])
def test_other_parameters(grid, kappa, q, m):
    p = PhysicalParams(kappa=kappa, q=q, m=m)
    u = bumps(grid, 7)
    fd, gr = solve_neutral_fd(u, p), solve_neutral_green(u, p)
    N = fd.n_field.values
    assert np.max(np.abs(N - gr.n_field.values)) < 1e-4 * np.max(np.abs(N))
    assert fd.energy_identity_error(p) < 1e-6
    assert neutral_coupling_inequality(u, p, fd)[2]


def test_residual_of_own_solution(gauss, unit):
    rep = solve_neutral_fd(gauss, unit)
    src = unit.q * unit.c_prime * np.max(gauss.values ** 2)
    assert neutral_residual(gauss, rep.n_field, unit) < 1e-6 * src
    assert neutral_residual(gauss, gauss.grid.zeros(), unit) > 0.1 * src


def test_green_fourth_order_convergence(unit):
    # Green route alone, measured against the frozen coupling
    errs = []
    for n in (257, 513, 1025):
        g = RadialGrid(20.0, n)
        u = g.sample(lambda r: np.exp(-r ** 2 / 2))
        errs.append(abs(solve_neutral_green(u, unit).coupling - GAUSS_COUPLING))
    assert errs[0] / errs[1] > 6 and errs[1] / errs[2] > 6


def test_bessel_range_error():
    g = RadialGrid(20.0, 64)
    with pytest.raises(ValueError, match="argument out of Bessel range"):
        green_screened(g, 40.0, np.ones(g.n))
