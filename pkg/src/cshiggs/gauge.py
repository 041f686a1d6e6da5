"""Chern-Simons nonlocal quantities of a radial field u.

    h_u(r)  = int_0^r s u(s)^2 ds                 (enclosed flux)
    A0(r)   = e^3/(m kappa^2) int_r^inf u^2 h_u / s ds   (electric potential)
    cs(u)   = int u^2 h_u^2 / |x|^2 dx             (Chern-Simons energy, raw)
    A(x)    = (e/kappa) h_u(|x|) (x2, -x1) / |x|^2 (tangential magnetic potential)

The potential is computed as the exact transpose of the cumulative rule
used for h_u.  This makes ``e A0 u`` the exact discrete derivative of the
quartic-in-h part of ``cs``, so gradients and energies agree to rounding.
The price is that A0(R) is zero only up to terms of size u(R)^2.

``h/r^2`` is stored with its value 0 at the origin; every product that
uses it also carries a factor h or a vanishing origin weight.
"""

from dataclasses import dataclass

import numpy as np

from .core import PhysicalParams, RadialField, ops

__all__ = ["GaugeSnapshot", "compute_h", "compute_a0", "cs_energy_raw", "gauge_vector", "gauge_snapshot"]


@dataclass(frozen=True)
class GaugeSnapshot:
    h: RadialField
    a0: RadialField
    cs_energy_raw: float


def _h_over_r2(r, h):
    out = np.zeros_like(h)
    out[1:] = h[1:] / (r[1:] * r[1:])
    return out


def _tail(o, u, hr2):
    """int_r^R u^2 h / s ds as the transpose of the cumulative rule.

    The transpose never sees the origin sample of u^2 h / r^2 (h vanishes
    there), so that node, with its limit u(0)^4 / 2, is added to the value
    at r = 0 to keep it fourth-order accurate.
    """
    u2 = u * u
    tail = o.cumulative_adjoint(o.W * u2 * hr2) / o.W
    tail[0] += o.W[0] * u2[0] * u2[0] / (4.0 * np.pi)
    return tail


def _nonlocal_arrays(o, u):
    """h, h/r^2 and the tail integral int_r^R u^2 h / s ds on the grid."""
    h = o.cumulative(u * u)
    hr2 = _h_over_r2(o.r, h)
    return h, hr2, _tail(o, u, hr2)


def compute_h(u: RadialField) -> RadialField:
    """Enclosed flux h_u, zero at the origin; 2 pi h_u(R) = ||u||_2^2."""
    o = ops(u.grid)
    return RadialField(u.grid, o.cumulative(u.values ** 2))


def compute_a0(u: RadialField, p: PhysicalParams) -> RadialField:
    """Electric potential A0, vanishing at infinity (tail beyond R dropped)."""
    _, _, tail = _nonlocal_arrays(ops(u.grid), u.values)
    return RadialField(u.grid, p.a0_prefactor * tail)


def cs_energy_raw(u: RadialField) -> float:
    """int u^2 h_u^2 / |x|^2 dx, with the integrand's limit 0 at the origin."""
    o = ops(u.grid)
    v = u.values
    h = o.cumulative(v * v)
    return float(o.W @ (v * v * h * _h_over_r2(o.r, h)))


def gauge_snapshot(u: RadialField, p: PhysicalParams) -> GaugeSnapshot:
    o = ops(u.grid)
    v = u.values
    h, hr2, tail = _nonlocal_arrays(o, v)
    return GaugeSnapshot(
        h=RadialField(u.grid, h),
        a0=RadialField(u.grid, p.a0_prefactor * tail),
        cs_energy_raw=float(o.W @ (v * v * h * hr2)),
    )


def gauge_vector(u: RadialField, p: PhysicalParams, x) -> tuple:
    """(A1, A2) at the planar point x, with h_u linearly interpolated.

    Beyond R, h_u is continued by its value at R (all flux is enclosed).
    """
    x1, x2 = float(x[0]), float(x[1])
    rho2 = x1 * x1 + x2 * x2
    if rho2 == 0.0:
        raise ValueError("gauge vector undefined at origin")
    h = ops(u.grid).cumulative(u.values ** 2)
    hr = float(np.interp(np.sqrt(rho2), u.grid.nodes, h))
    c = p.e / p.kappa * hr / rho2
    return c * x2, -c * x1
