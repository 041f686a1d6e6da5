"""Mountain-pass construction for the truncated functional J_{e,T}.

Steps:

1. ``find_negative_direction``: a Gaussian u with
   q/4m^2 ||u||_4^4 < c' int |N_u| u^2, so the quartic fibering
   coefficient is negative.
2. ``find_endpoint``: double t until J_{e,T}(t u) < 0.
3. ``mp_solve``: deform a discrete path 0 -> endpoint by descending its
   highest point (Sobolev-preconditioned steepest descent with
   backtracking, H^1-arclength resampling), then polish that point with
   Newton-Krylov on the discrete first field equation.

The descent direction is the Riesz representative of J' in the inner
product of L = -1/2m Delta + omega, i.e. the gradient preconditioned by
the bounded invertible linear part of J'.  Plain L^2 steps would have to
shrink like h^2 to decrease the energy.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded, solveh_banded
from scipy.sparse.linalg import LinearOperator, gmres

from .core import PhysicalParams, RadialField, RadialGrid, h1_norm_sq, ops
from .functional import CutoffSpec, EnergyBreakdown, Functional, chi, fiber_coefficients
from .gauge import gauge_snapshot
from .neutral import neutral_fd_array, neutral_residual

log = logging.getLogger(__name__)

__all__ = [
    "SolverConfig",
    "PathState",
    "SolutionBundle",
    "SolverError",
    "find_negative_direction",
    "negative_direction_ratio",
    "find_endpoint",
    "auto_cutoff",
    "mp_solve",
    "solve",
    "sweep_coupling",
    "SweepRow",
]

SEARCH_EXPONENTS = tuple(range(-4, 7))      # lambda, sigma in 2^-4 .. 2^6


class SolverError(RuntimeError):
    """Raised when a stage fails; ``kind`` is a short machine-readable tag."""

    def __init__(self, kind: str, message: str, bundle=None):
        super().__init__(message)
        self.kind = kind
        self.bundle = bundle


@dataclass(frozen=True)
class SolverConfig:
    path_points: int = 64
    path_tol: float = 1e-3
    final_tol: float = 1e-8
    max_iters: int = 2000
    delta0: float = 0.1

    def __post_init__(self):
        if int(self.path_points) < 3:
            raise ValueError("path_points must be >= 3")
        for name in ("path_tol", "final_tol", "delta0"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive")
        if int(self.max_iters) < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class PathState:
    points: list
    energies: list
    argmax_index: int


@dataclass
class SolutionBundle:
    u: RadialField
    n_field: RadialField
    h: RadialField
    a0: RadialField
    energy: EnergyBreakdown
    residual_u: float
    residual_n: float
    mp_level_estimate: float
    k_t_at_solution: float
    h1_norm: float
    iterations: int
    converged: bool = False
    untruncated: bool = False
    residual_u_untruncated: float = float("nan")
    T: float = float("nan")
    initial_path_max: float = float("nan")
    path_sweeps: int = 0
    newton_steps: int = 0
    message: str = ""
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# negative direction and endpoint


def _gaussian(grid, lam, sigma):
    return grid.sample(lambda r: lam * np.exp(-r * r / (2.0 * sigma * sigma)))


def negative_direction_ratio(u: RadialField, p: PhysicalParams) -> float:
    """||u||_4^4 / int |N_u| u^2; the quartic coefficient is negative iff
    this is below 4 m^2 c' / q."""
    F = Functional(u.grid, p, None)
    st = F.state(u.values)
    return st.l4 / (-st.coupling)


def negative_direction_threshold(p: PhysicalParams) -> float:
    return 4.0 * p.m ** 2 * p.c_prime / p.q


def find_negative_direction(p: PhysicalParams, grid: Optional[RadialGrid] = None,
                            margin: float = 0.01):
    """First u = lam exp(-r^2 / 2 sigma^2) on the 2^k grid whose ratio clears
    the threshold by ``margin`` (relative).  Returns (u, lam, sigma, ratio)."""
    grid = grid or RadialGrid()
    thr = negative_direction_threshold(p)
    for a in SEARCH_EXPONENTS:
        for b in SEARCH_EXPONENTS:
            lam, sigma = 2.0 ** a, 2.0 ** b
            u = _gaussian(grid, lam, sigma)
            if not np.any(u.values):
                continue
            ratio = negative_direction_ratio(u, p)
            if ratio < (1.0 - margin) * thr:
                return u, lam, sigma, ratio
    raise SolverError("no_direction", "no negative direction found; enlarge search family")


def find_endpoint(u_dir: RadialField, p: PhysicalParams, c: Optional[CutoffSpec],
                  t_cap: float = 2.0 ** 60):
    """Double t from 1 until J_{e,T}(t u_dir) < 0; returns (t u_dir, t)."""
    a2, a4, cs_raw, n2 = fiber_coefficients(u_dir, p)
    t = 1.0
    while t <= t_cap:
        t2 = t * t
        kt = 1.0 if c is None else chi(t2 * n2 / c.T ** 2)
        val = t2 * a2 + t2 * t2 * a4 + t2 * t2 * t2 * p.cs_prefactor * kt * cs_raw
        if val < 0.0:
            ubar = t * u_dir
            # confirm with a direct evaluation (fresh neutral solve)
            if Functional(u_dir.grid, p, c).energy_value(ubar.values) < 0.0:
                return ubar, t
        t *= 2.0
    raise SolverError("endpoint", "endpoint search diverged")


def auto_cutoff(u_dir: RadialField, p: PhysicalParams, factor: float = 10.0):
    """T = factor * ||ubar|| for the endpoint ubar of the untruncated fiber.

    If the untruncated fibering map has no negative value (large e), the
    endpoint of its e-free part t^2 a2 + t^4 a4 is used for the scale.
    """
    try:
        ubar, _ = find_endpoint(u_dir, p, None)
    except SolverError:
        a2, a4, _, _ = fiber_coefficients(u_dir, p)
        if a4 >= 0:
            raise SolverError("endpoint", "endpoint search diverged")
        t = 1.0
        while t * t * a2 + t ** 4 * a4 >= 0.0:
            t *= 2.0
        ubar = t * u_dir
    return CutoffSpec(factor * math.sqrt(h1_norm_sq(ubar)))


# ---------------------------------------------------------------------------
# discrete machinery


class _Problem:
    """Arrays and linear algebra for one (grid, params, cutoff)."""

    def __init__(self, grid, p: PhysicalParams, c: Optional[CutoffSpec]):
        self.grid, self.p, self.c = grid, p, c
        self.F = Functional(grid, p, c)
        self.o = ops(grid)
        o = self.o
        # L = 1/2m A + omega W, Dirichlet at R, upper banded storage
        ab = o.A_banded / (2.0 * p.m)
        ab[-1] = ab[-1] + p.omega * o.W
        self._L_banded = _dirichlet_banded_sym(ab)

    def energy(self, u):
        return self.F.energy_value(u)

    def state(self, u):
        return self.F.state(u)

    def sobolev_direction(self, g):
        """Solve L s = W g with s(R) = 0."""
        b = self.o.W * g
        b[-1] = 0.0
        return solveh_banded(self._L_banded, b)

    def h1_dist(self, a, b):
        d = a - b
        Dd = self.o.D @ d
        return math.sqrt(max(float(self.o.cf @ (Dd * Dd) + self.o.W @ (d * d)), 0.0))

    def residual(self, g):
        return float(np.max(np.abs(g[:-1])))


def _dirichlet_banded_sym(ab):
    ab = ab.copy()
    bw = ab.shape[0] - 1
    for k in range(1, bw + 1):
        ab[bw - k, -1] = 0.0
    ab[bw, -1] = 1.0
    return ab


# ---------------------------------------------------------------------------
# path phase


def _resample(prob, pts):
    """Re-spread the interior points at equal H^1 arclength."""
    k = len(pts)
    seg = np.array([prob.h1_dist(pts[i + 1], pts[i]) for i in range(k - 1)])
    s = np.concatenate(([0.0], np.cumsum(seg)))
    if s[-1] == 0.0:
        return pts
    target = np.linspace(0.0, s[-1], k)
    out = [pts[0]]
    j = 0
    for t in target[1:-1]:
        while j < k - 2 and s[j + 1] < t:
            j += 1
        w = 0.0 if seg[j] == 0.0 else (t - s[j]) / seg[j]
        out.append((1.0 - w) * pts[j] + w * pts[j + 1])
    out.append(pts[-1])
    return out


def _path_state(prob, pts):
    en = [0.0] + [prob.energy(x) for x in pts[1:]]
    # lowest index among ties
    i = int(np.argmax(en))
    return PathState(points=pts, energies=en, argmax_index=i)


def _step_ladder(delta0, last, levels: int = 30):
    """delta0 * 2^-j for j = 0 .. levels, starting near 2 * last."""
    ladder = [delta0 * 2.0 ** -j for j in range(levels + 1)]
    start = next((j for j, d in enumerate(ladder) if d <= 2.0 * last * (1 + 1e-12)), 0)
    return ladder[start:] + ladder[:start]


def _band_step(prob, st, top, cfg, band: float = 0.1):
    """Descend every interior node whose energy lies within ``band`` of the
    top (relative to the path's energy range), each by its own backtracked
    Sobolev step; accept the resampled path if its maximum drops."""
    E = np.asarray(st.energies)
    span = max(top - float(np.min(E)), 1e-300)
    idx = [j for j in range(1, len(E) - 1) if E[j] >= top - band * span]
    pts = list(st.points)
    moved = False
    for j in idx:
        u = pts[j]
        e0, g = prob.F.energy_and_gradient(u)
        s = prob.sobolev_direction(g)
        delta = cfg.delta0
        while delta >= cfg.delta0 * 2.0 ** -30:
            trial = u - delta * s
            if prob.energy(trial) < e0:
                pts[j] = trial
                moved = True
                break
            delta *= 0.5
    if not moved:
        return None
    cand = _path_state(prob, _resample(prob, pts))
    return cand if cand.energies[cand.argmax_index] < top else None


def _path_phase(prob, ubar, cfg: SolverConfig, path=None, stall_limit: int = 100,
                trace=None):
    """Deform the path by descending its highest point.

    Returns (state, initial_max, sweeps, exit_reason) with exit_reason
    "tolerance" (top gradient below path_tol) or "stagnation" (the path
    maximum stopped decreasing for ``stall_limit`` sweeps).  The line
    search acts on the resampled path, so its maximum is nonincreasing
    from sweep to sweep.  ``trace``, if given, receives the path maximum
    after every sweep.
    """
    k = int(cfg.path_points)
    if path is None:
        pts = [t * ubar for t in np.linspace(0.0, 1.0, k)]
    else:
        pts = list(path)
    st = _path_state(prob, pts)
    initial_max = st.energies[st.argmax_index]
    top = initial_max
    stall = 0
    sweeps = 0
    last_delta = cfg.delta0
    while True:
        i = st.argmax_index
        if i == 0 or i == len(st.points) - 1:
            raise SolverError("path", "path maximum left the interior")
        u = st.points[i]
        e0, g = prob.F.energy_and_gradient(u)
        gnorm = prob.residual(g)
        if gnorm < cfg.path_tol:
            return st, initial_max, sweeps, "tolerance"
        if stall >= stall_limit:
            return st, initial_max, sweeps, "stagnation"
        if sweeps >= cfg.max_iters:
            raise SolverError("path", f"path phase hit max_iters (|g| = {gnorm:.3e})")
        s = prob.sobolev_direction(g)
        # backtrack on the resampled path: the step counts only if the
        # maximum of the re-spread path drops below the current one.  The
        # search starts at twice the last accepted step; the larger steps
        # up to delta0 are tried only if that fails.
        new = None
        for delta in _step_ladder(cfg.delta0, last_delta):
            trial = u - delta * s
            if prob.energy(trial) < e0:
                pts = list(st.points)
                pts[i] = trial
                cand = _path_state(prob, _resample(prob, pts))
                if cand.energies[cand.argmax_index] < top:
                    new = cand
                    last_delta = delta
                    break
        if new is None:
            # several nodes share the top: lower all of them together
            new = _band_step(prob, st, top, cfg)
            log.debug("band step at sweep %d: |g| %.3e top %.6g ok=%s", sweeps, gnorm, top, new is not None)
        sweeps += 1
        if new is None:
            # the state is unchanged, so every later sweep would fail the
            # same way: the stall count is reached at once
            return st, initial_max, sweeps, "stagnation"
        new_top = new.energies[new.argmax_index]
        stall = stall + 1 if top - new_top < 1e-14 else 0
        st, top = new, new_top
        if trace is not None:
            trace.append(top)
        log.debug("sweep %d: max J %.12g at %d, |g| %.3e, delta %.3g", sweeps, new_top,
                  new.argmax_index, gnorm, last_delta)


# ---------------------------------------------------------------------------
# Newton-Krylov refinement


def _jacobian_operator(prob, u, st):
    """Jacobian of the gradient representative G at u (unknowns u[:-1])."""
    p, o, F = prob.p, prob.o, prob.F
    W = o.W
    n = u.size
    local = p.omega + 3.0 * p.q / (4.0 * p.m ** 2) * u * u + p.c_prime * st.N
    cq = p.q * p.c_prime
    has_cs = p.cs_prefactor != 0.0 and (st.kt != 0.0 or st.dkt != 0.0)

    def G_cs(x):
        s2 = F.state(x, N=st.N)               # N is irrelevant for the cs part
        return F.gradient(s2) - _noncs_gradient(prob, s2)

    g_cs0 = None
    scale_u = max(1.0, float(np.max(np.abs(u))))

    def matvec(v_in):
        v = np.zeros(n)
        v[:-1] = v_in
        out = (o.A @ v) / (2.0 * p.m * W) + local * v
        dN = neutral_fd_array(prob.grid, p.mu, 2.0 * cq * u * v)
        out += p.c_prime * dN * u
        if has_cs:
            vmax = float(np.max(np.abs(v)))
            if vmax > 0:
                eps = 1e-6 * scale_u / vmax
                out += (G_cs(u + eps * v) - G_cs(u - eps * v)) / (2.0 * eps)
        return out[:-1]

    A = LinearOperator((n - 1, n - 1), matvec=matvec, dtype=float)

    # preconditioner: banded (1/2m A + W diag(local)), scaled back by W
    bw = o.A_banded.shape[0] - 1
    full = np.zeros((2 * bw + 1, n))
    up = o.A_banded / (2.0 * p.m)
    for k in range(bw + 1):
        d = up[bw - k, k:]
        full[bw - k, k:] = d                 # super-diagonal k
        full[bw + k, :n - k] = d             # sub-diagonal k
    full[bw] += W * local
    full = full[:, :-1]
    full = full.copy()
    # drop couplings to the pinned last node
    sub = np.zeros((2 * bw + 1, n - 1))
    sub[:] = full
    M_ab = sub

    def psolve(y):
        return solve_banded((bw, bw), M_ab, W[:-1] * y)

    M = LinearOperator((n - 1, n - 1), matvec=psolve, dtype=float)
    return A, M


def _noncs_gradient(prob, st):
    p, o = prob.p, prob.o
    u = st.u
    return (st.Au / (2.0 * p.m * o.W) + p.omega * u + p.q / (4.0 * p.m ** 2) * u ** 3
            + p.c_prime * st.N * u)


def _newton(prob, u0, cfg: SolverConfig, max_steps: int = 50):
    """Damped Newton-Krylov on G(u) = 0 with u(R) = 0."""
    u = np.array(u0, dtype=float)
    u[-1] = 0.0
    st = prob.state(u)
    g = prob.F.gradient(st)
    res = prob.residual(g)
    steps = 0
    history = [res]
    # aim two decades below final_tol so the reported residual has margin;
    # once below final_tol, a step that does not help ends the iteration
    target = 0.01 * cfg.final_tol
    while res >= target and steps < max_steps:
        A, M = _jacobian_operator(prob, u, st)
        rtol = min(1e-3, max(1e-10, 0.1 * target / max(res, 1e-300)))
        du, info = gmres(A, -g[:-1], M=M, rtol=rtol, atol=0.0, restart=60, maxiter=20)
        step = np.zeros_like(u)
        step[:-1] = du
        lam = 1.0
        while True:
            v = u + lam * step
            sv = prob.state(v)
            gv = prob.F.gradient(sv)
            rv = prob.residual(gv)
            if rv < res or lam < 1e-3:
                break
            lam *= 0.5
        if rv >= res and res < cfg.final_tol:
            break
        u, st, g, res = v, sv, gv, rv
        steps += 1
        history.append(res)
        log.debug("newton %d: residual %.3e (lambda %.3g, gmres info %d)", steps, res, lam, info)
    return u, st, g, res, steps, history


# ---------------------------------------------------------------------------
# driver


def _bundle(prob, u, st, g, path_max, initial_max, sweeps, newton_steps, converged, message):
    p, grid, c = prob.p, prob.grid, prob.c
    uf = RadialField(grid, u)
    Nf = RadialField(grid, st.N)
    snap = gauge_snapshot(uf, p)
    br = prob.F.breakdown(st)
    res_u = prob.residual(g)
    res_n = neutral_residual(uf, Nf, p)
    unt = Functional(grid, p, None)
    g_unt = unt.gradient(unt.state(u, N=st.N))
    res_unt = float(np.max(np.abs(g_unt[:-1])))
    kt = st.kt
    ok = converged and res_u < float("inf")
    return SolutionBundle(
        u=uf, n_field=Nf, h=snap.h, a0=snap.a0, energy=br,
        residual_u=res_u, residual_n=res_n, mp_level_estimate=br.total,
        k_t_at_solution=kt, h1_norm=math.sqrt(st.grad2 + st.l2),
        iterations=sweeps + newton_steps, converged=ok,
        untruncated=bool(ok and kt == 1.0), residual_u_untruncated=res_unt,
        T=float("nan") if c is None else c.T, initial_path_max=initial_max,
        path_sweeps=sweeps, newton_steps=newton_steps, message=message,
        diagnostics={"path_max": path_max},
    )


def mp_solve(p: PhysicalParams, c: CutoffSpec, cfg: SolverConfig, ubar: RadialField,
             path: Optional[Sequence[np.ndarray]] = None) -> SolutionBundle:
    """Mountain-pass critical point of J_{e,T} between 0 and ``ubar``."""
    prob = _Problem(ubar.grid, p, c)
    ub = np.array(ubar.values)
    if prob.energy(ub) >= 0.0:
        raise SolverError("endpoint", "endpoint energy is not negative")
    trace = []
    st_path, initial_max, sweeps, exit_reason = _path_phase(prob, ub, cfg, path, trace=trace)
    top = st_path.points[st_path.argmax_index]
    path_max = st_path.energies[st_path.argmax_index]
    u, st, g, res, steps, hist = _newton(prob, top, cfg, max_steps=max(1, min(cfg.max_iters, 100)))
    uf = RadialField(ubar.grid, u)
    res_n = neutral_residual(uf, RadialField(ubar.grid, st.N), p)
    converged = res < cfg.final_tol and res_n < cfg.final_tol
    trivial = not np.any(np.abs(u) > 1e-6)
    if trivial:
        converged = False
        msg = "refinement collapsed to the trivial solution"
    elif converged:
        msg = "converged"
    else:
        msg = "stagnation" if exit_reason == "stagnation" else "residual not met"
    b = _bundle(prob, u, st, g, path_max, initial_max, sweeps, steps, converged, msg)
    b.diagnostics["newton_history"] = hist
    b.diagnostics["path_exit"] = exit_reason
    b.diagnostics["path_max_history"] = trace
    if not converged:
        raise SolverError("residual" if msg != "stagnation" else "stagnation", msg, bundle=b)
    return b


def solve(p: PhysicalParams, grid: RadialGrid, cfg: SolverConfig,
          T: Optional[float] = None):
    """negative direction -> endpoint -> mountain pass.  Returns (bundle, info)."""
    t0 = time.perf_counter()
    u_dir, lam, sigma, ratio = find_negative_direction(p, grid)
    c = auto_cutoff(u_dir, p) if T is None else CutoffSpec(T)
    ubar, t_end = find_endpoint(u_dir, p, c)
    info = {"lambda": lam, "sigma": sigma, "ratio": ratio, "T": c.T, "t_endpoint": t_end,
            "endpoint_h1_norm": math.sqrt(h1_norm_sq(ubar))}
    try:
        b = mp_solve(p, c, cfg, ubar)
    except SolverError as exc:
        info["seconds"] = time.perf_counter() - t0
        exc.info = info
        raise
    info["seconds"] = time.perf_counter() - t0
    b.diagnostics.update(info)
    return b, info


# ---------------------------------------------------------------------------
# coupling sweep


@dataclass(frozen=True)
class SweepRow:
    e: float
    converged: bool
    h1_norm: float
    norm_over_T: float
    k_t: float
    energy: float
    residual_u: float
    residual_n: float
    iterations: int
    cs_share: float = float("nan")
    message: str = ""

    COLUMNS = ("e", "converged", "h1_norm", "norm_over_T", "k_t", "energy",
               "residual_u", "residual_n", "iterations")


def sweep_coupling(p_base: PhysicalParams, e_values: Sequence[float], grid: RadialGrid,
                   cfg: SolverConfig, T: Optional[float] = None) -> list:
    """One mp_solve per e; failures become non-converged rows."""
    e_values = [float(e) for e in e_values]
    if any(e <= 0 for e in e_values) or any(b < a for a, b in zip(e_values, e_values[1:])):
        raise ValueError("e values must be positive and ascending")
    rows = []
    for e in e_values:
        p = p_base.replace(e=e)
        try:
            b, _ = solve(p, grid, cfg, T)
        except SolverError as exc:
            b = exc.bundle
            if b is None:
                rows.append(SweepRow(e, False, *([float("nan")] * 6), 0, message=str(exc)))
                continue
        except (RuntimeError, ValueError, FloatingPointError) as exc:
            rows.append(SweepRow(e, False, *([float("nan")] * 6), 0, message=str(exc)))
            continue
        share = b.energy.cs / b.energy.total if b.energy.total else float("nan")
        rows.append(SweepRow(e, bool(b.converged), b.h1_norm, b.h1_norm / b.T,
                             b.k_t_at_solution, b.energy.total, b.residual_u, b.residual_n,
                             b.iterations, share, b.message))
    return rows
