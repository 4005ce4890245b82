"""Eulerian-Lagrangian Runge-Kutta and IMEX integrators.

Every step anchors one family of straight characteristics at ``t + dt``.  The
stage ending at ``t + c_l dt`` uses that family shifted in time so its
terminal slice is the Eulerian mesh; its slice at stage time ``t + c_m dt``
is therefore the canonical mesh traced by ``(c_m - c_l) dt``.  Explicit
stages use only convection (and lagged diffusion) contributions on moving
slices; a nonzero diagonal of the implicit tableau adds one Helmholtz solve
on the Eulerian mesh.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .geometry import GridSpec
from .operators import (GL3, EdgeQuadrature, convection_from_remap, diffusion_operator,
                        laplacian_averages)
from .remap import remap_field, slice_geometry
from .velocity import (NonConvexUpstreamCell, VelocityProvider, compute_dt, nodal_velocity,
                       trace_offset)
from .weno import WenoParams, reconstruct_field


class SolverNonConvergence(RuntimeError):
    pass


class NumericalFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class ButcherPair:
    label: str
    A: np.ndarray      # implicit
    b: np.ndarray
    Ahat: np.ndarray   # explicit
    bhat: np.ndarray
    c: np.ndarray
    order: int

    def __post_init__(self):
        s = len(self.c)
        for M in (self.A, self.Ahat):
            if M.shape != (s, s):
                raise ValueError("tableau shape mismatch")
        if np.any(np.triu(self.Ahat) != 0) or np.any(np.triu(self.A, 1) != 0):
            raise ValueError("explicit part must be strictly lower and implicit part lower triangular")
        if np.any(self.A[:, 0] != 0):
            raise ValueError("implicit tableau must have a zero first column")
        if self.c[0] != 0:
            raise ValueError("first abscissa must be zero")
        tol = 1e-14
        if np.max(np.abs(self.A.sum(1) - self.c)) > tol and np.any(self.A):
            raise ValueError("implicit row sums differ from abscissae")
        if np.max(np.abs(self.Ahat.sum(1) - self.c)) > tol:
            raise ValueError("explicit row sums differ from abscissae")
        if abs(self.bhat.sum() - 1) > tol or (np.any(self.b) and abs(self.b.sum() - 1) > tol):
            raise ValueError("weights must sum to one")

    @property
    def stages(self) -> int:
        return len(self.c)

    @property
    def implicit(self) -> bool:
        return bool(np.any(self.A))

    def slice_offsets(self) -> tuple:
        """Offsets (units of dt, from the anchor) of every slice a step touches."""
        c = list(self.c) + [1.0]
        out = set()
        for l in range(1, len(c)):
            for m in range(l):
                out.add(c[m] - c[l])
        out.discard(0.0)
        return tuple(sorted(out))


IMEX233_GAMMA = (3.0 + math.sqrt(3.0)) / 6.0


class Scheme(str, Enum):
    IMEX111 = "IMEX111"
    IMEX122 = "IMEX122"
    IMEX233 = "IMEX233"
    RK3 = "ExplicitRK3"


def tableau(label) -> ButcherPair:
    lab = Scheme(label) if not isinstance(label, Scheme) else label
    a = np.array
    if lab is Scheme.IMEX111:
        return ButcherPair("IMEX111", a([[0, 0], [0, 1.0]]), a([0, 1.0]),
                           a([[0, 0], [1.0, 0]]), a([1.0, 0]), a([0, 1.0]), 1)
    if lab is Scheme.IMEX122:
        return ButcherPair("IMEX122", a([[0, 0], [0, 0.5]]), a([0, 1.0]),
                           a([[0, 0], [0.5, 0]]), a([0, 1.0]), a([0, 0.5]), 2)
    if lab is Scheme.IMEX233:
        g = IMEX233_GAMMA
        return ButcherPair("IMEX233",
                           a([[0, 0, 0], [0, g, 0], [0, 1 - 2 * g, g]]), a([0, 0.5, 0.5]),
                           a([[0, 0, 0], [g, 0, 0], [g - 1, 2 * (1 - g), 0]]), a([0, 0.5, 0.5]),
                           a([0, g, 1 - g]), 3)
    return ButcherPair("ExplicitRK3", np.zeros((3, 3)), np.zeros(3),
                       a([[0, 0, 0], [0.5, 0, 0], [-1.0, 2.0, 0]]), a([1 / 6, 2 / 3, 1 / 6]),
                       a([0, 0.5, 1.0]), 3)


# ---------------------------------------------------------------------------
# implicit solves


class SolverMode(str, Enum):
    SPECTRAL = "spectral"
    CG = "cg"


@dataclass(frozen=True)
class ImplicitSolver:
    mode: Optional[SolverMode] = None   # None: spectral on fully periodic grids, else CG
    tol: float = 1e-12
    maxiter: int = 2000


def laplacian_symbol(g: GridSpec):
    """Eigenvalues of the averaged-Laplacian stencil on the periodic FFT grid."""
    tx = 2 * np.pi * np.fft.fftfreq(g.nx)
    ty = 2 * np.pi * np.fft.rfftfreq(g.ny)
    lx = (-2.5 + 8.0 / 3 * np.cos(tx) - np.cos(2 * tx) / 6) / g.dx ** 2
    ly = (-2.5 + 8.0 / 3 * np.cos(ty) - np.cos(2 * ty) / 6) / g.dy ** 2
    return lx[:, None] + ly[None, :]


def implicit_solve(rhs, coeff: float, g: GridSpec, solver: ImplicitSolver = ImplicitSolver()):
    """Solve ``(I - coeff * D) x = rhs`` with D the averaged-Laplacian matrix."""
    rhs = np.asarray(rhs, dtype=float)
    if coeff < 0:
        raise ValueError("coeff must be non-negative")
    if coeff == 0:
        return rhs.copy()
    mode = solver.mode or (SolverMode.SPECTRAL if all(g.periodic) else SolverMode.CG)
    if mode is SolverMode.SPECTRAL:
        if not all(g.periodic):
            raise ValueError("spectral solve needs a periodic grid")
        return np.fft.irfft2(np.fft.rfft2(rhs) / (1.0 - coeff * laplacian_symbol(g)), s=rhs.shape)
    shape = rhs.shape
    n = rhs.size

    def matvec(v):
        v = v.reshape(shape)
        return (v - coeff * laplacian_averages(v, g)).ravel()

    diag = 1.0 + coeff * 2.5 * (1 / g.dx ** 2 + 1 / g.dy ** 2)
    A = LinearOperator((n, n), matvec=matvec, dtype=float)
    M = LinearOperator((n, n), matvec=lambda v: v / diag, dtype=float)
    x, info = cg(A, rhs.ravel(), x0=rhs.ravel() / diag, rtol=solver.tol, atol=0.0,
                 maxiter=solver.maxiter, M=M)
    res = np.max(np.abs(matvec(x) - rhs.ravel()))
    scale = np.max(np.abs(rhs))
    if info != 0 and res > 10 * solver.tol * max(scale, 1e-300):
        raise SolverNonConvergence(f"CG did not converge: residual {res:.3e} after {solver.maxiter} iterations")
    return x.reshape(shape)


# ---------------------------------------------------------------------------
# one step


@dataclass
class _StepCache:
    nv: object
    dt: float
    check: bool
    meshes: dict = field(default_factory=dict)
    geoms: dict = field(default_factory=dict)
    remaps: dict = field(default_factory=dict)

    def mesh(self, off):
        if off not in self.meshes:
            self.meshes[off] = trace_offset(self.nv, off * self.dt, check=self.check)
        return self.meshes[off]

    def geom(self, off):
        if off not in self.geoms:
            self.geoms[off] = slice_geometry(self.mesh(off))
        return self.geoms[off]


def el_step(u, t: float, dt: float, g: GridSpec, pair: ButcherPair, provider: VelocityProvider,
            eps: float = 0.0, solver: ImplicitSolver = ImplicitSolver(),
            weno: WenoParams = WenoParams(), quad: EdgeQuadrature = GL3, check: bool = True):
    """Advance cell averages ``u`` from ``t`` to ``t + dt``."""
    u = np.asarray(u, dtype=float)
    area = g.cell_area
    c = pair.c
    s = pair.stages
    # anchor velocity: exact field at t + dt, or the current solution's field
    st0 = provider.state(u, t, g)
    st_anchor = st0 if provider.nonlinear else provider.state(u, t + dt, g)
    nv = nodal_velocity(provider, t + dt, g, state=st_anchor)
    cache = _StepCache(nv, dt, check)
    U = [u]
    recon = [reconstruct_field(u, g, weno)]
    states = [st0]

    def remap(m, off):
        key = (m, off)
        if key not in cache.remaps:
            mesh = cache.mesh(off)
            geom = None if off == 0.0 else cache.geom(off)
            cache.remaps[key] = remap_field(recon[m], mesh, geom)
        return cache.remaps[key]

    conv = {}

    def F(m, off):
        if (m, off) not in conv:
            conv[(m, off)] = convection_from_remap(remap(m, off), nv, states[m], quad)
        return conv[(m, off)]

    def G(m, off):
        mesh = cache.mesh(off)
        return diffusion_operator(U[m], mesh, eps, None if off == 0.0 else cache.geom(off))

    def combine(cl, arow_hat, arow):
        off0 = 0.0 - cl
        mass = remap(0, off0).mass.copy()
        for m in range(len(arow_hat)):
            off = c[m] - cl
            if arow_hat[m] != 0:
                mass += dt * arow_hat[m] * F(m, off)
            if eps != 0 and arow[m] != 0:
                mass += dt * arow[m] * G(m, off)
        return mass

    for l in range(1, s):
        mass = combine(c[l], pair.Ahat[l, :l], pair.A[l, :l])
        rhs = mass / area
        ul = implicit_solve(rhs, pair.A[l, l] * dt * eps, g, solver) if eps != 0 and pair.A[l, l] else rhs
        U.append(ul)
        recon.append(reconstruct_field(ul, g, weno))
        states.append(provider.state(ul, t + c[l] * dt, g))
    mass = combine(1.0, pair.bhat, pair.b)
    return mass / area


def el_rk3_step(u, t: float, dt: float, g: GridSpec, provider: VelocityProvider, **kw):
    return el_step(u, t, dt, g, tableau(Scheme.RK3), provider, 0.0, **kw)


def el_imex_step(u, t: float, dt: float, g: GridSpec, pair: ButcherPair,
                 provider: VelocityProvider, eps: float, solver: ImplicitSolver = ImplicitSolver(),
                 **kw):
    return el_step(u, t, dt, g, pair, provider, eps, solver, **kw)


__all__ = ["ButcherPair", "ImplicitSolver", "SolverMode", "SolverNonConvergence", "tableau",
           "implicit_solve", "el_step"]


# ---------------------------------------------------------------------------
# time loop


def step_offsets(pair: ButcherPair) -> tuple:
    return pair.slice_offsets()


def run(problem, g: GridSpec, cfl: float, t_end: float, scheme: str | None = None,
        u0=None, solver: ImplicitSolver = ImplicitSolver(), weno: WenoParams = WenoParams(),
        diagnostics: bool = True, callback: Callable | None = None):
    """Integrate ``problem`` on ``g`` to ``t_end``; returns (u, DiagnosticsSeries)."""
    from .problems import DiagnosticsSeries, diagnostics as diag

    pair = tableau(scheme or problem.scheme)
    provider = problem.velocity()
    eps = problem.eps
    u = problem.initial_averages(g) if u0 is None else np.array(u0, dtype=float)
    series = DiagnosticsSeries()
    if diagnostics:
        series.append(0.0, diag(u, problem, g))
    t = 0.0
    n = 0
    offsets = pair.slice_offsets()
    while t_end - t > 1e-12 * max(1.0, abs(t_end)):
        dt = compute_dt(provider, u, g, cfl, t, offsets)
        # nominal CFL step, clamped to land on t_end
        if t + dt >= t_end or t_end - (t + dt) < 1e-12 * max(1.0, abs(t_end)):
            dt = t_end - t
        u = el_step(u, t, dt, g, pair, provider, eps, solver, weno)
        n += 1
        t = t_end if dt == t_end - t else t + dt
        if not np.all(np.isfinite(u)):
            raise NumericalFailure(f"non-finite solution at step {n} (t={t:.6g})")
        if diagnostics:
            series.append(t, diag(u, problem, g))
        if callback is not None:
            callback(n, t, u)
    return u, series


__all__ += ["NumericalFailure", "Scheme", "el_imex_step", "el_rk3_step", "run", "IMEX233_GAMMA",
            "laplacian_symbol"]
