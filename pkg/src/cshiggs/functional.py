"""Reduced energy J_e, its truncation J_{e,T}, gradients and the fibering map.

With c' = 1 + kappa q / 2m and N_u the neutral field of u,

    J_e(u) = 1/4m ||grad u||^2 + omega/2 ||u||^2 + e^4/4m kappa^2 cs(u)
             + c'/4 int N_u u^2 + q/16m^2 ||u||_4^4,

and J_{e,T} multiplies the cs term by K_T(u) = chi(||u||_{H^1}^2 / T^2).
The L^2 representative of J'(u) is the left side of the first field
equation,

    -1/2m Delta u + omega u + e^4/2m kappa^2 (h^2/r^2) u + e A0 u
    + c' N_u u + q/4m^2 u^3,

plus, when truncated, the chain-rule term of K_T.  Discretely the
Laplacian is the variational one, -W^{-1} A, so the representative pairs
with test fields exactly as the first variation does.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import PhysicalParams, RadialField, _same_grid, ops
from .gauge import _h_over_r2, _tail
from .neutral import neutral_fd_array

__all__ = [
    "CutoffSpec",
    "EnergyBreakdown",
    "FiberSample",
    "chi",
    "chi_prime",
    "k_t",
    "energy",
    "first_variation",
    "gradient_field",
    "fiber_map",
    "Functional",
]


# ---------------------------------------------------------------------------
# cutoff


def _chi_parts(s):
    """chi(s) and 1 - chi(s), both without cancellation."""
    s = np.asarray(s, dtype=float)
    inside = (s > 1.0) & (s < 2.0)
    si = np.where(inside, s, 1.5)
    # f(s-1)/f(2-s) = exp(1/(2-s) - 1/(s-1))
    z = np.exp(np.clip(1.0 / (2.0 - si) - 1.0 / (si - 1.0), -700.0, 700.0))
    c = np.where(inside, 1.0 / (1.0 + z), np.where(s <= 1.0, 1.0, 0.0))
    oc = np.where(inside, z / (1.0 + z), np.where(s <= 1.0, 0.0, 1.0))
    return c, oc, inside, si


def chi(s):
    """Smooth cutoff: 1 on [0, 1], 0 on [2, inf), exponential partition between."""
    c, _, _, _ = _chi_parts(s)
    return float(c) if np.ndim(c) == 0 else c


def chi_prime(s):
    """Analytic derivative of chi; its sup norm is 2, attained at s = 3/2."""
    c, oc, inside, si = _chi_parts(s)
    d = -c * oc * (1.0 / (2.0 - si) ** 2 + 1.0 / (si - 1.0) ** 2)
    d = np.where(inside, d, 0.0)
    return float(d) if np.ndim(d) == 0 else d


@dataclass(frozen=True)
class CutoffSpec:
    """Truncation level T (in H^1 norm units) of K_T(u) = chi(||u||^2/T^2)."""

    T: float

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0):
            raise ValueError("cutoff T must be positive and finite")
        object.__setattr__(self, "T", float(self.T))


def k_t(u: RadialField, c: CutoffSpec) -> float:
    from .core import h1_norm_sq
    return chi(h1_norm_sq(u) / c.T ** 2)


# ---------------------------------------------------------------------------
# energy and gradient


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    mass: float
    cs: float
    neutral: float
    quartic: float
    total: float

    def as_dict(self):
        return dict(kinetic=self.kinetic, mass=self.mass, cs=self.cs,
                    neutral=self.neutral, quartic=self.quartic, total=self.total)


@dataclass(frozen=True)
class _State:
    """Everything one evaluation at u produces."""
    u: np.ndarray
    N: np.ndarray
    h: np.ndarray
    hr2: np.ndarray
    Au: np.ndarray
    grad2: float
    l2: float
    l4: float
    cs_raw: float
    coupling: float
    kt: float
    dkt: float          # chi'(s) / T^2, zero when untruncated


class Functional:
    """J_e (``cutoff=None``) or J_{e,T} on a fixed grid.

    Keeps a one-entry memo of the last neutral solve, so repeated energy
    and gradient calls at the same u solve for N_u once.  An instance
    belongs to one solver run; do not share it between threads.
    """

    def __init__(self, grid, p: PhysicalParams, cutoff: Optional[CutoffSpec] = None):
        self.grid = grid
        self.p = p
        self.cutoff = cutoff
        self.o = ops(grid)
        self._memo_key = None
        self._memo_N = None

    # -- array level -------------------------------------------------------

    def neutral(self, u: np.ndarray) -> np.ndarray:
        key = u.tobytes()
        if key != self._memo_key:
            p = self.p
            self._memo_N = neutral_fd_array(self.grid, p.mu, p.q * p.c_prime * u * u)
            self._memo_key = key
        return self._memo_N

    def state(self, u: np.ndarray, N: Optional[np.ndarray] = None) -> _State:
        o = self.o
        u = np.asarray(u, dtype=float)
        if N is None:
            N = self.neutral(u)
        u2 = u * u
        h = o.cumulative(u2)
        hr2 = _h_over_r2(o.r, h)
        Au = o.A @ u
        du = o.D @ u
        grad2 = float(o.cf @ (du * du))      # u.Au without its cancellation
        l2 = float(o.W @ u2)
        if self.cutoff is None:
            kt, dkt = 1.0, 0.0
        else:
            s = (grad2 + l2) / self.cutoff.T ** 2
            kt, dkt = chi(s), chi_prime(s) / self.cutoff.T ** 2
        return _State(u=u, N=N, h=h, hr2=hr2, Au=Au, grad2=grad2, l2=l2,
                      l4=float(o.W @ (u2 * u2)), cs_raw=float(o.W @ (u2 * h * hr2)),
                      coupling=float(o.W @ (N * u2)), kt=kt, dkt=dkt)

    def breakdown(self, st: _State) -> EnergyBreakdown:
        p = self.p
        kin = st.grad2 / (4.0 * p.m)
        mass = 0.5 * p.omega * st.l2
        cs = p.cs_prefactor * st.kt * st.cs_raw
        neu = 0.25 * p.c_prime * st.coupling
        qua = p.q / (16.0 * p.m ** 2) * st.l4
        return EnergyBreakdown(kin, mass, cs, neu, qua, kin + mass + cs + neu + qua)

    def gradient(self, st: _State) -> np.ndarray:
        """L^2 representative g with J'(u)[phi] = sum_i W_i g_i phi_i."""
        p, o, u = self.p, self.o, st.u
        W = o.W
        g = st.Au / (2.0 * p.m * W) + p.omega * u + p.q / (4.0 * p.m ** 2) * u ** 3
        g += p.c_prime * st.N * u
        if p.cs_prefactor * st.kt != 0.0:
            tail = _tail(o, u, st.hr2)
            g += p.cs_prefactor * st.kt * (2.0 * u * st.h * st.hr2 + 4.0 * u * tail)
        if st.dkt != 0.0:
            g += p.cs_prefactor * st.cs_raw * st.dkt * 2.0 * (st.Au / W + u)
        return g

    def energy_value(self, u: np.ndarray) -> float:
        return self.breakdown(self.state(u)).total

    def energy_and_gradient(self, u: np.ndarray):
        st = self.state(u)
        return self.breakdown(st).total, self.gradient(st)


def _functional(u: RadialField, p, c) -> Functional:
    return Functional(u.grid, p, c)


def energy(u: RadialField, p: PhysicalParams, c: Optional[CutoffSpec] = None) -> EnergyBreakdown:
    """Term-by-term J_e(u), or J_{e,T}(u) when a cutoff is given."""
    F = _functional(u, p, c)
    return F.breakdown(F.state(u.values))


def gradient_field(u: RadialField, p: PhysicalParams, c: Optional[CutoffSpec] = None,
                   n_field: Optional[RadialField] = None) -> RadialField:
    """Discrete Riesz representative of J'(u) in the planar-weight pairing.

    ``n_field`` replaces N_u by a given field, which turns the result into
    the left side of the first field equation for an arbitrary pair (u, N).
    """
    F = _functional(u, p, c)
    N = None if n_field is None else n_field.values
    if n_field is not None:
        _same_grid(u, n_field)
    return RadialField(u.grid, F.gradient(F.state(u.values, N)))


def first_variation(u: RadialField, phi: RadialField, p: PhysicalParams,
                    c: Optional[CutoffSpec] = None) -> float:
    """J'(u)[phi] (or J'_{e,T}(u)[phi])."""
    _same_grid(u, phi)
    g = gradient_field(u, p, c)
    return float(u.grid.planar_weights @ (g.values * phi.values))


# ---------------------------------------------------------------------------
# fibering


@dataclass(frozen=True)
class FiberSample:
    """J(tu) = t^2 a2 + t^4 a4 + t^6 a6, with a6 already carrying K_T(tu)."""
    t: float
    value: float
    a2: float
    a4: float
    a6: float

    @property
    def terms(self):
        t2 = self.t * self.t
        return t2 * self.a2, t2 * t2 * self.a4, t2 * t2 * t2 * self.a6

    def as_tuple(self):
        return (self.t, self.value, self.a2, self.a4, self.a6)


def fiber_coefficients(u: RadialField, p: PhysicalParams):
    """(a2, a4, cs_raw(u), ||u||_{H^1}^2) for the fibering map of u."""
    F = _functional(u, p, None)
    st = F.state(u.values)
    a2 = st.grad2 / (4.0 * p.m) + 0.5 * p.omega * st.l2
    a4 = p.q / (16.0 * p.m ** 2) * st.l4 + 0.25 * p.c_prime * st.coupling
    return a2, a4, st.cs_raw, st.grad2 + st.l2


def fiber_map(u: RadialField, p: PhysicalParams, c: Optional[CutoffSpec],
              t_samples: Sequence[float]) -> list:
    """Fibering map t -> J_{e,T}(t u) from one neutral solve (N_{tu} = t^2 N_u)."""
    if not np.any(u.values):
        raise ValueError("fibering map needs u != 0")
    a2, a4, cs_raw, n2 = fiber_coefficients(u, p)
    out = []
    for t in t_samples:
        t = float(t)
        kt = 1.0 if c is None else chi(t * t * n2 / c.T ** 2)
        a6 = p.cs_prefactor * kt * cs_raw
        t2 = t * t
        out.append(FiberSample(t, t2 * a2 + t2 * t2 * a4 + t2 * t2 * t2 * a6, a2, a4, a6))
    return out
