import math

import numpy as np
import pytest

from cshiggs.core import PhysicalParams, RadialGrid, h1_norm_sq
from cshiggs.functional import CutoffSpec, energy, fiber_map, k_t
from cshiggs.mountainpass import (SolverConfig, SolverError, SweepRow, auto_cutoff,
                                  find_endpoint, find_negative_direction, mp_solve,
                                  negative_direction_ratio, negative_direction_threshold,
                                  solve, sweep_coupling)
from cshiggs.verify import residual_system

RHO = 0.1
ALPHA = 0.002     # lower bound of J_{e,T} on the rho-sphere, see test_functional


def test_threshold_unit(unit):
    assert negative_direction_threshold(unit) == 6.0


def test_negative_direction_unit(grid, unit):
    u, lam, sigma, ratio = find_negative_direction(unit, grid)
    # first hit of the (lambda outer, sigma inner) scan over 2^-4 .. 2^6
    assert (lam, sigma) == (0.0625, 0.5)
    assert ratio < 0.99 * negative_direction_threshold(unit)
    assert abs(ratio - 2.899208776988228) < 1e-9
    for t in (0.1, 3.0, 40.0):
        assert math.isclose(negative_direction_ratio(t * u, unit), ratio, rel_tol=1e-10)


@pytest.mark.parametrize("kappa,q,m", [(2.0, 1.0, 1.0), (1.0, 3.0, 0.5), (0.7, 0.9, 2.0)])
def test_negative_direction_other_params(grid, kappa, q, m):
    p = PhysicalParams(kappa=kappa, q=q, m=m)
    u, _, _, ratio = find_negative_direction(p, grid)
    assert ratio < 0.99 * negative_direction_threshold(p)
    a2, a4 = fiber_map(u, p, None, [1.0])[0].a2, fiber_map(u, p, None, [1.0])[0].a4
    assert a2 > 0 and a4 < 0


def test_endpoint(grid, unit):
    u, *_ = find_negative_direction(unit, grid)
    c = auto_cutoff(u, unit)
    ubar, t = find_endpoint(u, unit, c)
    assert energy(ubar, unit, c).total < 0
    assert math.sqrt(h1_norm_sq(ubar)) > RHO
    assert t == 128.0 and abs(c.T - 158.53309169230982) < 1e-6


def test_endpoint_without_chern_simons(grid):
    # e -> 0: the endpoint is the first doubling past sqrt(-a2/a4)
    p = PhysicalParams(e=1e-12)
    u, *_ = find_negative_direction(p, grid)
    s = fiber_map(u, p, None, [1.0])[0]
    root = math.sqrt(-s.a2 / s.a4)
    _, t = find_endpoint(u, p, None)
    assert t > root and t / 2 <= root


def test_endpoint_diverges_without_negative_quartic(grid, unit):
    # a narrow profile sees little neutral attraction: positive quartic coefficient
    u = grid.sample(lambda r: np.exp(-r ** 2 / (2 * 0.0625 ** 2)))
    s = fiber_map(u, unit, None, [1.0])[0]
    assert s.a4 > 0
    with pytest.raises(SolverError, match="endpoint search diverged"):
        find_endpoint(u, unit, CutoffSpec(10.0), t_cap=2.0 ** 20)


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(path_points=2)
    with pytest.raises(ValueError):
        SolverConfig(final_tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(max_iters=0)


# -- the default existence run ---------------------------------------------

def test_solution_residuals(solution, unit):
    b, info = solution
    assert b.converged and b.message == "converged"
    assert b.residual_u < 1e-8 and b.residual_n < 1e-8
    ru, rn = residual_system(b.u, b.n_field, unit)
    assert ru == b.residual_u and rn == b.residual_n


def test_solution_nontrivial_and_untruncated(solution):
    b, _ = solution
    assert b.h1_norm >= RHO and b.energy.total >= ALPHA
    assert b.k_t_at_solution == 1.0 and b.untruncated
    assert abs(b.residual_u_untruncated - b.residual_u) < 1e-12
    assert b.h1_norm < b.T


def test_solution_regression_anchors(solution):
    b, _ = solution
    assert abs(b.energy.total - 4.29808728388) < 2e-9
    assert abs(b.h1_norm - 4.6551552701) < 1e-8


def test_level_bracketing(solution):
    b, _ = solution
    assert ALPHA <= b.mp_level_estimate <= b.initial_path_max
    hist = b.diagnostics["path_max_history"]
    assert hist and all(y <= x for x, y in zip(hist, hist[1:]))
    assert hist[0] <= b.initial_path_max


def test_solution_fields(solution, unit):
    b, _ = solution
    assert b.u.values[-1] == 0.0
    assert np.max(b.n_field.values) <= 0.0
    assert np.all(np.diff(b.h.values) >= 0)
    # positive, radially decreasing profile (ground-state shape)
    u = b.u.values
    assert np.all(u[:-1] > 0) and np.all(np.diff(u[: u.size // 2]) <= 0)


def test_mp_solve_rejects_positive_endpoint(grid, unit):
    u, *_ = find_negative_direction(unit, grid)
    with pytest.raises(SolverError, match="endpoint energy is not negative"):
        mp_solve(unit, CutoffSpec(100.0), SolverConfig(), u)


def test_path_invariants_coarse():
    """Endpoints pinned and monotone path maximum on a quick coarse run."""
    g = RadialGrid(20.0, 512)
    p = PhysicalParams()
    b, _ = solve(p, g, SolverConfig())
    assert b.converged
    hist = b.diagnostics["path_max_history"]
    assert all(y <= x for x, y in zip(hist, hist[1:]))
    # the coarse grid lands on the same solution to discretization accuracy
    assert abs(b.energy.total - 4.2980873) < 1e-4


def test_large_coupling_reports_not_converged():
    g = RadialGrid(20.0, 512)
    with pytest.raises(SolverError) as ei:
        solve(PhysicalParams(e=10.0), g, SolverConfig(max_iters=200))
    assert "nonexist" not in str(ei.value).lower()


# -- sweep -----------------------------------------------------------------

def test_sweep_small():
    g = RadialGrid(20.0, 512)
    p = PhysicalParams()
    rows = sweep_coupling(p, [0.02, 0.02, 0.2, 10.0], g, SolverConfig())
    assert [r.e for r in rows] == [0.02, 0.02, 0.2, 10.0]
    assert rows[0] == rows[1]
    assert rows[0].converged and rows[2].converged and not rows[3].converged
    for r in rows[:3]:
        assert r.k_t == 1.0 and r.norm_over_T < 0.5
    assert rows[0].cs_share < rows[2].cs_share
    assert SweepRow.COLUMNS[0] == "e" and len(SweepRow.COLUMNS) == 9


def test_sweep_validation(grid, unit):
    with pytest.raises(ValueError):
        sweep_coupling(unit, [0.2, 0.1], grid, SolverConfig())
    with pytest.raises(ValueError):
        sweep_coupling(unit, [0.0, 0.1], grid, SolverConfig())
