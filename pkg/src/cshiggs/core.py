"""Parameters, radial grids, fields, quadrature and norms.

Everything downstream works on uniform grids ``0 = r_0 < ... < r_{n-1} = R``
and represents a radially symmetric function on the plane by its nodal
samples.  Planar integrals use an end-corrected trapezoid rule for the
measure ``2 pi r dr`` (fourth order for smooth even integrands), and the
Dirichlet form ``||grad u||^2`` uses a staggered fourth-order difference
evaluated on cell faces.  The two are tied together so that

    -(W^{-1} A) u  ~  u'' + u'/r

is a consistent discrete Laplacian, where ``W`` holds the planar node
weights and ``A`` is the stiffness matrix of the face derivative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp

__all__ = [
    "PhysicalParams",
    "RadialGrid",
    "RadialField",
    "planar_integral",
    "l2_norm_sq",
    "l4_norm_4",
    "grad_norm_sq",
    "h1_norm_sq",
    "h1_inner",
    "radial_derivative",
    "cumulative_moment",
    "cumulative_moment_adjoint",
]


@dataclass(frozen=True)
class PhysicalParams:
    """The five positive constants of the system: m, omega, e, kappa, q."""

    m: float = 1.0
    omega: float = 1.0
    e: float = 0.05
    kappa: float = 1.0
    q: float = 1.0

    def __post_init__(self):
        for name in ("m", "omega", "e", "kappa", "q"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"parameter {name} must be positive and finite, got {v!r}")
            object.__setattr__(self, name, float(v))

    @property
    def c_prime(self) -> float:
        """Neutral coupling factor 1 + kappa q / 2m."""
        return 1.0 + self.kappa * self.q / (2.0 * self.m)

    @property
    def mu(self) -> float:
        """Screening mass kappa q of the neutral field."""
        return self.kappa * self.q

    @property
    def cs_prefactor(self) -> float:
        """e^4 / (4 m kappa^2), the weight of the Chern-Simons energy."""
        return self.e ** 4 / (4.0 * self.m * self.kappa ** 2)

    @property
    def a0_prefactor(self) -> float:
        """e^3 / (m kappa^2), the weight of the electric potential."""
        return self.e ** 3 / (self.m * self.kappa ** 2)

    def replace(self, **kw) -> "PhysicalParams":
        d = dict(m=self.m, omega=self.omega, e=self.e, kappa=self.kappa, q=self.q)
        d.update(kw)
        return PhysicalParams(**d)


@dataclass(frozen=True)
class RadialGrid:
    """Uniform grid on [0, R] with ``n`` nodes.

    ``weights`` integrate over the line, ``int_0^R f dr``.  ``planar_weights``
    integrate over the disk, ``int f dx = 2 pi int_0^R f r dr``; they carry a
    nonzero weight at the origin (the rule uses f(0), not f(0) * r_0).
    """

    R: float = 20.0
    n: int = 2048

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 16):
            raise ValueError("grid too coarse: n must be an integer >= 16")
        if not (math.isfinite(self.R) and self.R > 0):
            raise ValueError("grid radius R must be positive and finite")
        object.__setattr__(self, "R", float(self.R))
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return self.R / (self.n - 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        r = np.arange(self.n) * self.h
        r[-1] = self.R
        r.flags.writeable = False
        return r

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.full(self.n, self.h)
        w[0] = w[-1] = 0.5 * self.h
        w.flags.writeable = False
        return w

    @cached_property
    def planar_weights(self) -> np.ndarray:
        return _ops(self.R, self.n).W

    def __eq__(self, other):
        return isinstance(other, RadialGrid) and self.R == other.R and self.n == other.n

    def __hash__(self):
        return hash((self.R, self.n))

    def field(self, values) -> "RadialField":
        return RadialField(self, values)

    def sample(self, fn) -> "RadialField":
        """Field with values ``fn(r)`` at the nodes."""
        return RadialField(self, fn(self.nodes))

    def zeros(self) -> "RadialField":
        return RadialField(self, np.zeros(self.n))


@dataclass(frozen=True, eq=False)
class RadialField:
    """Samples of a radial function at the nodes of ``grid``."""

    grid: RadialGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"field has {v.size} values, grid has {self.grid.n} nodes")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite field")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def with_values(self, values) -> "RadialField":
        return RadialField(self.grid, values)

    def __mul__(self, t):
        return RadialField(self.grid, float(t) * self.values)

    __rmul__ = __mul__

    def __add__(self, other):
        _same_grid(self, other)
        return RadialField(self.grid, self.values + other.values)

    def __sub__(self, other):
        _same_grid(self, other)
        return RadialField(self.grid, self.values - other.values)

    def __neg__(self):
        return RadialField(self.grid, -self.values)


def _same_grid(*fields):
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise ValueError("grid mismatch")
    return g


# ---------------------------------------------------------------------------
# discrete operators shared by all modules


class _Operators:
    """Array-level operators for one grid; built once and cached."""

    def __init__(self, R: float, n: int):
        h = R / (n - 1)
        r = np.arange(n) * h
        r[-1] = R
        self.n, self.h, self.r = n, h, r
        self.W = self._planar_weights()
        self.rf = (np.arange(n - 1) + 0.5) * h
        self.cf = 2.0 * np.pi * self.rf * h    # face weights
        self.D = self._face_matrix()
        A = (self.D.T @ sp.diags(self.cf) @ self.D).tocsr()
        self.A = A
        self.A_banded = _to_banded(A, 3)

    def _planar_weights(self):
        n, h, r = self.n, self.h, self.r
        # trapezoid for g = r f plus the Euler-Maclaurin h^2/12 end terms;
        # g'(0) = f(0) exactly, g'(R) by a one-sided second-order difference
        b = h * r.copy()
        b[-1] *= 0.5
        b[0] += h * h / 12.0
        b[-1] -= h * r[-1] / 8.0
        b[-2] += h * r[-2] / 6.0
        b[-3] -= h * r[-3] / 24.0
        # shift between nodes 0 and 1 makes -W^{-1}A consistent at the two
        # origin rows; the mirrored shift at the far end keeps f = r exact
        s = h * h / 96.0
        b[0] += s
        b[1] -= s
        b[-1] += s
        b[-2] -= s
        W = 2.0 * np.pi * b
        W.flags.writeable = False
        return W

    def _face_matrix(self):
        n, h = self.n, self.h
        c = 1.0 / (24.0 * h)
        rows, cols, vals = [], [], []
        j = np.arange(n - 2)                   # faces 1/2 .. n-5/2 (j = n-3 is the last)
        # (u_{j-1} - 27 u_j + 27 u_{j+1} - u_{j+2}) / 24h, mirror u_{-1} = u_1
        jm = np.where(j == 0, 1, j - 1)
        jp2 = j + 2
        for cc, vv in ((jm, c), (j, -27 * c), (j + 1, 27 * c), (jp2, -c)):
            rows.append(j)
            cols.append(cc)
            vals.append(np.full(j.size, vv))
        # last face falls back to the two-point difference
        rows.append(np.array([n - 2, n - 2]))
        cols.append(np.array([n - 2, n - 1]))
        vals.append(np.array([-1.0 / h, 1.0 / h]))
        rows, cols, vals = (np.concatenate(a) for a in (rows, cols, vals))
        D = sp.csr_matrix((vals, (rows, cols)), shape=(n - 1, n))
        return D

    def face_derivative(self, u):
        return self.D @ u

    def stiffness(self, u):
        """A u, the gradient of 1/2 ||grad u||^2 in the W-pairing times W."""
        return self.A @ u

    def laplacian(self, u):
        return -(self.A @ u) / self.W

    # cumulative integral C_k ~ int_0^{r_k} s f(s) ds (no 2 pi)
    def cumulative(self, f):
        n, h, r = self.n, self.h, self.r
        g = r * f
        T = np.empty(n)
        T[0] = 0.0
        np.cumsum(0.5 * h * (g[:-1] + g[1:]), out=T[1:])
        dg = np.empty(n)
        dg[0] = f[0]
        dg[1:-1] = (g[2:] - g[:-2]) / (2 * h)
        dg[-1] = (3 * g[-1] - 4 * g[-2] + g[-3]) / (2 * h)
        s = h * h / 96.0
        C = T - (h * h / 12.0) * (dg - f[0]) + s * (f[0] - f[1])
        C[0] = 0.0
        C[-1] += s * (f[-1] - f[-2])
        return C

    def cumulative_adjoint(self, psi):
        """P^T psi, where C = P f is the cumulative rule above."""
        n, h, r = self.n, self.h, self.r
        psi = np.asarray(psi, dtype=float)
        out = np.zeros(n)
        p = psi.copy()
        p[0] = 0.0                              # row C_0 is identically zero
        # trapezoid part: C_k = sum_{j<k} h (g_j + g_{j+1})/2
        S = np.cumsum(p[::-1])[::-1]            # S_j = sum_{k>=j} p_k
        tg = np.zeros(n)
        tg[:-1] += 0.5 * h * S[1:]              # g_j appears in intervals j..j+1 for k > j
        tg[1:] += 0.5 * h * S[1:]               # g_{j} as right end for k >= j
        # derivative correction -(h^2/12) dg_k
        c = h * h / 12.0
        tdg = -c * p
        tg_from_dg = np.zeros(n)
        tdf0 = tdg[0]                           # dg_0 = f_0 (p_0 is zero anyway)
        inner = tdg[1:-1] / (2 * h)
        tg_from_dg[2:] += inner
        tg_from_dg[:-2] -= inner
        tg_from_dg[-1] += 3 * tdg[-1] / (2 * h)
        tg_from_dg[-2] -= 4 * tdg[-1] / (2 * h)
        tg_from_dg[-3] += tdg[-1] / (2 * h)
        out += (tg + tg_from_dg) * r
        # + (h^2/12) f_0 and the origin shift s (f_0 - f_1) on every row k >= 1
        s = h * h / 96.0
        tot = p.sum()
        out[0] += (c + s) * tot + tdf0
        out[1] -= s * tot
        out[-1] += s * p[-1]
        out[-2] -= s * p[-1]
        return out

    def banded_solve_sym(self, diag_add, rhs, dirichlet_last=True, scale=1.0):
        """Solve (scale * A + diag(diag_add)) x = rhs, optionally with x[-1] = 0."""
        from scipy.linalg import solveh_banded
        ab = scale * self.A_banded.copy()
        ab[-1] += diag_add
        b = np.array(rhs, dtype=float)
        if dirichlet_last:
            # zero the last row and column, unit diagonal
            for k in range(1, ab.shape[0]):
                ab[-1 - k, -1] = 0.0
            ab[-1, -1] = 1.0
            b[-1] = 0.0
        return solveh_banded(ab, b)


def _to_banded(A, bw):
    """Upper banded storage of a symmetric sparse matrix for solveh_banded."""
    n = A.shape[0]
    ab = np.zeros((bw + 1, n))
    A = A.todia() if not sp.isspmatrix_dia(A) else A
    for k in range(bw + 1):
        d = A.diagonal(k)
        ab[bw - k, k:] = d
    return ab


@lru_cache(maxsize=16)
def _ops(R: float, n: int) -> _Operators:
    return _Operators(float(R), int(n))


def ops(grid: RadialGrid) -> _Operators:
    return _ops(grid.R, grid.n)


# ---------------------------------------------------------------------------
# public operations


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, RadialField) else np.asarray(f, dtype=float)


def planar_integral(f: RadialField) -> float:
    """int f dx over the disk of radius R, for radial f."""
    v = f.values
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite field")
    return float(f.grid.planar_weights @ v)


def _check_derivable(u: RadialField):
    if u.grid.n < 3:
        raise ValueError("grid too coarse for derivative")


def l2_norm_sq(u: RadialField) -> float:
    return float(u.grid.planar_weights @ (u.values * u.values))


def l4_norm_4(u: RadialField) -> float:
    return float(u.grid.planar_weights @ (u.values ** 4))


def grad_norm_sq(u: RadialField) -> float:
    _check_derivable(u)
    o = ops(u.grid)
    d = o.face_derivative(u.values)
    return float(o.cf @ (d * d))


def h1_norm_sq(u: RadialField) -> float:
    return grad_norm_sq(u) + l2_norm_sq(u)


def h1_inner(u: RadialField, v: RadialField) -> float:
    """<u, v> in H^1, bilinear form of h1_norm_sq."""
    _same_grid(u, v)
    o = ops(u.grid)
    return float(o.cf @ (o.face_derivative(u.values) * o.face_derivative(v.values))
                 + o.W @ (u.values * v.values))


def radial_derivative(u: RadialField) -> RadialField:
    """u'(r): central differences inside, second-order one-sided at the ends."""
    _check_derivable(u)
    v, h = u.values, u.grid.h
    d = np.empty_like(v)
    d[1:-1] = (v[2:] - v[:-2]) / (2 * h)
    d[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
    d[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
    return RadialField(u.grid, d)


def cumulative_moment(f: RadialField) -> RadialField:
    """C(r_k) ~ int_0^{r_k} s f(s) ds, consistent with the planar weights.

    ``2 pi C(R)`` equals ``planar_integral(f)`` exactly.
    """
    return RadialField(f.grid, ops(f.grid).cumulative(f.values))


def cumulative_moment_adjoint(f: RadialField, psi: np.ndarray) -> np.ndarray:
    """Transpose of the cumulative rule applied to ``psi``."""
    return ops(f.grid).cumulative_adjoint(psi)
