"""The neutral field N_u: solution of -Delta N + mu^2 N + q c' u^2 = 0.

Here mu = kappa q and c' = 1 + kappa q / 2m.  Two independent routes:

* ``solve_neutral_fd``: one tridiagonal solve of a compact fourth-order
  difference scheme for N'' + N'/r - mu^2 N = q c' u^2 with N'(0) = 0 and
  N(R) = 0.
* ``solve_neutral_green``: quadrature of the radial Green kernel
  I0(mu r_<) K0(mu r_>), with end corrections for the kernel's kink at
  s = r and its logarithmic singularity at s = 0.
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.linalg import solve_banded

from .bessel import BESSEL_MAX_ARG, bessel_i0, bessel_i1, bessel_k0, bessel_k1
from .core import PhysicalParams, RadialField, _ops, grad_norm_sq, l2_norm_sq, l4_norm_4

__all__ = [
    "NeutralMethod",
    "NeutralSolveReport",
    "solve_neutral_fd",
    "solve_neutral_green",
    "neutral_coupling_inequality",
    "neutral_residual",
    "bessel_i0",
    "bessel_k0",
]

_EULER_GAMMA = 0.5772156649015329
_ZETA_M1 = -1.0 / 12.0                    # zeta(-1)
_DZETA_M1 = -0.16542114370045092          # zeta'(-1)


class NeutralMethod(str, Enum):
    finite_difference = "finite_difference"
    green_oracle = "green_oracle"


@dataclass(frozen=True)
class NeutralSolveReport:
    n_field: RadialField
    coupling: float        # int N u^2 dx
    energy_lhs: float      # ||grad N||^2 + mu^2 ||N||^2
    method: NeutralMethod

    def energy_identity_error(self, p: PhysicalParams) -> float:
        """Relative defect of ||grad N||^2 + mu^2||N||^2 = -q c' int N u^2."""
        rhs = -p.q * p.c_prime * self.coupling
        scale = max(abs(self.energy_lhs), abs(rhs))
        return 0.0 if scale == 0.0 else abs(self.energy_lhs - rhs) / scale


# ---------------------------------------------------------------------------
# compact finite differences


@lru_cache(maxsize=32)
def _hoc_system(R: float, n: int, mu: float):
    """Banded matrix M and the three-diagonal source operator P of the scheme.

    Interior rows discretize N'' + N'/r - mu^2 N = f to fourth order:
        [d2 + (1/r + h^2/6r^3) d0] N - mu^2 (1 + h^2/12 B) N = (1 + h^2/12 B) f,
    with B = d2 + d0/r + 1/r^2 (d2, d0 the three-point second and first
    differences).
    The origin row is 4(N1 - N0)/h^2 - (g1 - g0)/4 = g0 with g = mu^2 N + f,
    a fourth-order version of Delta N(0) = 2 N''(0).
    """
    o = _ops(R, n)
    h, r = o.h, o.r
    ri = r[1:-1]
    a = 1.0 / ri + h * h / (6.0 * ri ** 3)
    b = 1.0 / ri
    Lm = 1.0 / h ** 2 - a / (2 * h)
    L0 = np.full(ri.size, -2.0 / h ** 2)
    Lp = 1.0 / h ** 2 + a / (2 * h)
    Pm = h * h / 12.0 * (1.0 / h ** 2 - b / (2 * h))
    P0 = 1.0 + h * h / 12.0 * (-2.0 / h ** 2 + 1.0 / ri ** 2)
    Pp = h * h / 12.0 * (1.0 / h ** 2 + b / (2 * h))
    mu2 = mu * mu
    lo = np.zeros(n)
    di = np.zeros(n)
    up = np.zeros(n)
    Plo = np.zeros(n)
    Pdi = np.zeros(n)
    Pup = np.zeros(n)
    lo[1:-1], di[1:-1], up[1:-1] = Lm - mu2 * Pm, L0 - mu2 * P0, Lp - mu2 * Pp
    Plo[1:-1], Pdi[1:-1], Pup[1:-1] = Pm, P0, Pp
    di[0] = -4.0 / h ** 2 + mu2 / 4.0 - mu2
    up[0] = 4.0 / h ** 2 - mu2 / 4.0
    Pdi[0], Pup[0] = 0.75, 0.25
    di[-1] = 1.0                            # N(R) = 0
    ab = np.zeros((3, n))
    ab[0, 1:] = up[:-1]
    ab[1] = di
    ab[2, :-1] = lo[1:]
    for arr in (ab, lo, di, up, Plo, Pdi, Pup):
        arr.flags.writeable = False
    return ab, (lo, di, up), (Plo, Pdi, Pup)


def _tri_apply(diags, x):
    lo, di, up = diags
    y = di * x
    y[1:] += lo[1:] * x[:-1]
    y[:-1] += up[:-1] * x[1:]
    return y


def neutral_fd_array(grid, mu: float, f: np.ndarray) -> np.ndarray:
    """Solve Delta N - mu^2 N = f, N'(0) = 0, N(R) = 0 on ``grid``."""
    ab, _, P = _hoc_system(grid.R, grid.n, mu)
    rhs = _tri_apply(P, f)
    rhs[-1] = 0.0
    try:
        N = solve_banded((1, 1), ab, rhs, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise RuntimeError("neutral solve failed") from exc
    if not np.all(np.isfinite(N)):
        raise RuntimeError("neutral solve failed")
    return N


def neutral_residual_array(grid, mu: float, N: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Row residuals of -Delta N + mu^2 N + f in the compact scheme (last row dropped)."""
    _, M, P = _hoc_system(grid.R, grid.n, mu)
    res = _tri_apply(P, f) - _tri_apply(M, N)
    return res[:-1]


def _report(u, p, N, method):
    Nf = RadialField(u.grid, N)
    coupling = float(u.grid.planar_weights @ (N * u.values ** 2))
    lhs = grad_norm_sq(Nf) + p.mu ** 2 * l2_norm_sq(Nf)
    return NeutralSolveReport(Nf, coupling, lhs, method)


def solve_neutral_fd(u: RadialField, p: PhysicalParams) -> NeutralSolveReport:
    """N_u by the compact finite-difference scheme (one tridiagonal solve)."""
    f = p.q * p.c_prime * u.values ** 2
    N = neutral_fd_array(u.grid, p.mu, f)
    return _report(u, p, N, NeutralMethod.finite_difference)


def neutral_residual(u: RadialField, n_field: RadialField, p: PhysicalParams) -> float:
    """max |-Delta N + mu^2 N + q c' u^2| over nodes r < R, compact scheme."""
    f = p.q * p.c_prime * u.values ** 2
    return float(np.max(np.abs(neutral_residual_array(u.grid, p.mu, n_field.values, f))))


# ---------------------------------------------------------------------------
# Green-kernel oracle


def green_screened(grid, mu: float, f: np.ndarray) -> np.ndarray:
    """int_0^R I0(mu r_<) K0(mu r_>) s f(s) ds at every node.

    Split at s = r: the inner part int_0^r s I0(mu s) f ds and the outer
    part int_r^R s K0(mu s) f ds are cumulative sums with Euler-Maclaurin
    end corrections, so the whole field costs O(n).  At r = 0 the outer
    integrand behaves like s log s, handled by the generalized
    Euler-Maclaurin term with zeta(-1) and zeta'(-1).
    """
    n, h = grid.n, grid.h
    s = grid.nodes
    if mu * grid.R > BESSEL_MAX_ARG:
        raise ValueError("argument out of Bessel range")
    f = np.asarray(f, dtype=float)
    fp = np.empty(n)
    fp[0] = 0.0
    fp[1:-1] = (f[2:] - f[:-2]) / (2 * h)
    fp[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * h)

    I0 = bessel_i0(mu * s)
    I1 = bessel_i1(mu * s)
    K0 = np.zeros(n)
    K1 = np.zeros(n)
    K0[1:] = bessel_k0(mu * s[1:])
    K1[1:] = bessel_k1(mu * s[1:])

    # inner: g = s I0(mu s) f, with exact g'(0) = f(0); g' from the product rule
    g = s * I0 * f
    dg = I0 * f + mu * s * I1 * f + s * I0 * fp
    T = np.zeros(n)
    np.cumsum(0.5 * h * (g[:-1] + g[1:]), out=T[1:])
    inner = T - h * h / 12.0 * (dg - dg[0])

    # outer: g = s K0(mu s) f on [r, R]
    g = s * K0 * f
    dg = np.zeros(n)
    dg[1:] = K0[1:] * f[1:] - mu * s[1:] * K1[1:] * f[1:] + s[1:] * K0[1:] * fp[1:]
    seg = 0.5 * h * (g[:-1] + g[1:])
    Trev = np.zeros(n)
    Trev[:-1] = np.cumsum(seg[::-1])[::-1]
    outer = Trev - h * h / 12.0 * (dg[-1] - dg)
    # r = 0: g ~ -s log(s) f(0) near 0, so g'(0) is infinite
    outer[0] = (Trev[0] + h * h * (_ZETA_M1 * np.log(h) - _DZETA_M1) * f[0]
                - h * h / 12.0 * (dg[-1] + (np.log(mu / 2.0) + _EULER_GAMMA) * f[0]))
    return K0 * inner + I0 * outer


def solve_neutral_green(u: RadialField, p: PhysicalParams) -> NeutralSolveReport:
    """N_u = -q c' int G(r, s) s u(s)^2 ds with G = I0(mu r_<) K0(mu r_>)."""
    N = -p.q * p.c_prime * green_screened(u.grid, p.mu, u.values ** 2)
    return _report(u, p, N, NeutralMethod.green_oracle)


def neutral_coupling_inequality(u: RadialField, p: PhysicalParams, report=None):
    """(lhs, rhs, holds) for -int N_u u^2 <= (1/kappa^2 q) c' ||u||_4^4."""
    rep = report if report is not None else solve_neutral_fd(u, p)
    lhs = -rep.coupling
    rhs = p.c_prime / (p.kappa ** 2 * p.q) * l4_norm_4(u)
    return lhs, rhs, bool(lhs <= rhs * (1.0 + 1e-8))
