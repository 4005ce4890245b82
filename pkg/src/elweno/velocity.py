"""Modified velocity field, straight-characteristic tracing and time steps.

The modified field is the Q1 interpolant of nodal velocities sampled at the
anchor time t^{n+1}.  It is constant along each straight characteristic, so a
traced mesh at time t is the anchor mesh displaced by ``(t - t_anchor) *
(alpha, beta)`` node by node.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numba import njit

from .geometry import BC, TAU_GEO, GridSpec
from .weno import PiecewisePoly, WenoParams, eval_basis, reconstruct_field


class NonConvexUpstreamCell(RuntimeError):
    def __init__(self, i, j, t=None):
        self.cell = (int(i), int(j))
        self.t = t
        super().__init__(f"upstream cell ({i}, {j}) is not a convex quadrilateral"
                         + ("" if t is None else f" at t={t:.6g}") + "; reduce the time step")


def _sync_periodic_nodes(A, g: GridSpec):
    if g.periodic[0]:
        A[-1, :] = A[0, :]
    if g.periodic[1]:
        A[:, -1] = A[:, 0]
    return A


class VelocityState:
    """Velocity of one solution snapshot: nodal samples plus point evaluation."""

    def nodes(self):
        raise NotImplementedError

    def at(self, x, y):
        raise NotImplementedError


class VelocityProvider:
    # optional (max|a|, max|b|) envelope used by compute_dt
    speed_bound: Optional[tuple] = None
    nonlinear = False

    def state(self, u, t: float, g: GridSpec) -> VelocityState:
        raise NotImplementedError


class _AnalyticState(VelocityState):
    def __init__(self, prov, t, g):
        self.prov, self.t, self.g = prov, t, g

    def nodes(self):
        X, Y = self.g.nodes()
        A = np.broadcast_to(self.prov.a(X, Y, self.t), X.shape).astype(float)
        B = np.broadcast_to(self.prov.b(X, Y, self.t), X.shape).astype(float)
        return _sync_periodic_nodes(A.copy(), self.g), _sync_periodic_nodes(B.copy(), self.g)

    def at(self, x, y):
        a = np.broadcast_to(self.prov.a(x, y, self.t), np.shape(x))
        b = np.broadcast_to(self.prov.b(x, y, self.t), np.shape(x))
        return np.asarray(a, dtype=float), np.asarray(b, dtype=float)


@dataclass
class AnalyticVelocity(VelocityProvider):
    """Prescribed velocity ``a(x, y, t), b(x, y, t)`` (vectorised callables)."""

    a: Callable
    b: Callable
    speed_bound: Optional[tuple] = None

    def state(self, u, t, g):
        return _AnalyticState(self, t, g)


class _FluxDerivativeState(VelocityState):
    def __init__(self, prov, recon: PiecewisePoly):
        self.prov, self.recon = prov, recon

    def nodes(self):
        g = self.recon.grid
        i = np.arange(g.nx + 1) - 1
        j = np.arange(g.ny + 1) - 1
        # owner of node (i, j) is the cell to its lower left
        i = i % g.nx if g.periodic[0] else np.clip(i, 0, g.nx - 1)
        j = j % g.ny if g.periodic[1] else np.clip(j, 0, g.ny - 1)
        I, J = np.meshgrid(i, j, indexing="ij")
        X, Y = g.nodes()
        mu = (X - (g.x_lo + (I + 0.5) * g.dx)) / g.dx
        nu = (Y - (g.y_lo + (J + 0.5) * g.dy)) / g.dy
        if g.periodic[0]:
            mu[0, :] = 0.5
        if g.periodic[1]:
            nu[:, 0] = 0.5
        u = eval_basis(self.recon.coef[I, J], mu, nu)
        A = np.asarray(self.prov.df1(u), dtype=float) * np.ones_like(u)
        B = np.asarray(self.prov.df2(u), dtype=float) * np.ones_like(u)
        return _sync_periodic_nodes(A, g), _sync_periodic_nodes(B, g)

    def at(self, x, y):
        u = self.recon(x, y)
        return (np.asarray(self.prov.df1(u), dtype=float) * np.ones_like(u),
                np.asarray(self.prov.df2(u), dtype=float) * np.ones_like(u))


@dataclass
class FluxDerivativeVelocity(VelocityProvider):
    """Velocity ``(f1'(u), f2'(u))`` of a nonlinear flux, from the WENO field."""

    df1: Callable
    df2: Callable
    weno: WenoParams = WenoParams()
    nonlinear = True

    def state(self, u, t, g):
        return _FluxDerivativeState(self, reconstruct_field(u, g, self.weno))


@njit(cache=True)
def _cubic_interp_kernel(V, xi, eta, out):
    nx, ny = V.shape
    wx = np.empty(4)
    wy = np.empty(4)
    for n in range(xi.size):
        fx = np.floor(xi[n])
        fy = np.floor(eta[n])
        tx = xi[n] - fx
        ty = eta[n] - fy
        ix = int(fx)
        iy = int(fy)
        wx[0] = -tx * (tx - 1) * (tx - 2) / 6
        wx[1] = (tx + 1) * (tx - 1) * (tx - 2) / 2
        wx[2] = -(tx + 1) * tx * (tx - 2) / 2
        wx[3] = (tx + 1) * tx * (tx - 1) / 6
        wy[0] = -ty * (ty - 1) * (ty - 2) / 6
        wy[1] = (ty + 1) * (ty - 1) * (ty - 2) / 2
        wy[2] = -(ty + 1) * ty * (ty - 2) / 2
        wy[3] = (ty + 1) * ty * (ty - 1) / 6
        acc = 0.0
        for a in range(4):
            ia = (ix + a - 1) % nx
            row = 0.0
            for b in range(4):
                row += wy[b] * V[ia, (iy + b - 1) % ny]
            acc += wx[a] * row
        out[n] = acc


def periodic_cubic_interp(V, xi, eta):
    """Tensor cubic Lagrange interpolation of periodic nodal data.

    ``V`` has shape (nx, ny) with node (k, l) at index coordinates (k, l).
    """
    xi, eta = np.broadcast_arrays(np.asarray(xi, dtype=float), np.asarray(eta, dtype=float))
    out = np.empty(xi.shape)
    _cubic_interp_kernel(np.ascontiguousarray(V, dtype=float), np.ascontiguousarray(xi).ravel(),
                         np.ascontiguousarray(eta).ravel(), out.reshape(-1))
    return out


class _SolvedState(VelocityState):
    def __init__(self, g, A, B):
        self.g, self.A, self.B = g, A, B

    def nodes(self):
        return self.A, self.B

    def at(self, x, y):
        xi, eta = self.g.to_index(x, y)
        return (periodic_cubic_interp(self.A[:-1, :-1], xi, eta),
                periodic_cubic_interp(self.B[:-1, :-1], xi, eta))


@dataclass
class SolvedVelocity(VelocityProvider):
    """Velocity from a field solve: ``solve(u, g) -> (A, B)`` at the nodes.

    Point values away from nodes use periodic tensor-cubic interpolation.
    """

    solve: Callable
    nonlinear = True

    def state(self, u, t, g):
        if not all(g.periodic):
            raise ValueError("solved velocity fields need a periodic grid")
        A, B = self.solve(u, g)
        return _SolvedState(g, _sync_periodic_nodes(np.array(A, dtype=float), g),
                            _sync_periodic_nodes(np.array(B, dtype=float), g))


@dataclass(frozen=True)
class NodeVelocity:
    grid: GridSpec
    alpha: np.ndarray
    beta: np.ndarray
    t_anchor: float


def nodal_velocity(provider: VelocityProvider, t_anchor: float, g: GridSpec, u=None,
                   state: VelocityState | None = None) -> NodeVelocity:
    """Nodal (alpha, beta) at the anchor time.

    Nonlinear providers sample the velocity of ``u`` (the solution at t^n).
    """
    st = state if state is not None else provider.state(u, t_anchor, g)
    A, B = st.nodes()
    return NodeVelocity(g, np.asarray(A, dtype=float), np.asarray(B, dtype=float), float(t_anchor))


def quad_cross_products(X, Y):
    """Corner cross products (nx, ny, 4) of the quads spanned by node arrays."""
    P = [(X[:-1, :-1], Y[:-1, :-1]), (X[1:, :-1], Y[1:, :-1]),
         (X[1:, 1:], Y[1:, 1:]), (X[:-1, 1:], Y[:-1, 1:])]
    out = np.empty(X[:-1, :-1].shape + (4,))
    for k in range(4):
        x0, y0 = P[k]
        x1, y1 = P[(k + 1) % 4]
        x2, y2 = P[(k + 2) % 4]
        ex, ey = x1 - x0, y1 - y0
        fx, fy = x2 - x1, y2 - y1
        out[..., k] = ex * fy - ey * fx
    return out


@dataclass(frozen=True)
class UpstreamMesh:
    """Traced node positions at time ``t``; quads share nodes (conforming)."""

    nv: NodeVelocity
    t: float
    X: np.ndarray
    Y: np.ndarray

    @property
    def grid(self) -> GridSpec:
        return self.nv.grid

    @property
    def offset(self) -> float:
        return self.t - self.nv.t_anchor

    def quad(self, i, j) -> np.ndarray:
        X, Y = self.X, self.Y
        return np.array([[X[i, j], Y[i, j]], [X[i + 1, j], Y[i + 1, j]],
                         [X[i + 1, j + 1], Y[i + 1, j + 1]], [X[i, j + 1], Y[i, j + 1]]])

    def areas(self) -> np.ndarray:
        X, Y = self.X, self.Y
        x = [X[:-1, :-1], X[1:, :-1], X[1:, 1:], X[:-1, 1:]]
        y = [Y[:-1, :-1], Y[1:, :-1], Y[1:, 1:], Y[:-1, 1:]]
        s = sum(x[k] * y[(k + 1) % 4] - x[(k + 1) % 4] * y[k] for k in range(4))
        return 0.5 * s

    def boundary_polygon(self) -> np.ndarray:
        X, Y = self.X, self.Y
        pts = ([(X[i, 0], Y[i, 0]) for i in range(X.shape[0] - 1)]
               + [(X[-1, j], Y[-1, j]) for j in range(X.shape[1] - 1)]
               + [(X[i, -1], Y[i, -1]) for i in range(X.shape[0] - 1, 0, -1)]
               + [(X[0, j], Y[0, j]) for j in range(X.shape[1] - 1, 0, -1)])
        return np.array(pts)

    def nonconvex_cells(self, tol: float = TAU_GEO) -> np.ndarray:
        g = self.grid
        cross = quad_cross_products(self.X, self.Y)
        bad = np.any(cross <= tol * g.dx * g.dy, axis=-1)
        return np.argwhere(bad)


def trace_offset(nv: NodeVelocity, s: float, check: bool = True) -> UpstreamMesh:
    """Mesh traced along the straight characteristics by time offset ``s``."""
    X0, Y0 = nv.grid.nodes()
    if s == 0.0:
        return UpstreamMesh(nv, nv.t_anchor, X0, Y0)
    mesh = UpstreamMesh(nv, nv.t_anchor + s, X0 + s * nv.alpha, Y0 + s * nv.beta)
    if check:
        bad = mesh.nonconvex_cells()
        if len(bad):
            raise NonConvexUpstreamCell(*bad[0], t=mesh.t)
    return mesh


def trace_to(nv: NodeVelocity, t: float, check: bool = True) -> UpstreamMesh:
    return trace_offset(nv, t - nv.t_anchor, check)


def modified_velocity_at(nv: NodeVelocity, label_x, label_y):
    """(alpha, beta) carried by the characteristic with anchor-time label.

    The value is the Q1 interpolant of the nodal samples at the label point and
    does not depend on the time at which the characteristic is queried.
    """
    g = nv.grid
    xi, eta = g.to_index(label_x, label_y)
    i = np.clip(np.floor(xi).astype(np.int64), 0, g.nx - 1)
    j = np.clip(np.floor(eta).astype(np.int64), 0, g.ny - 1)
    s = xi - i
    r = eta - j

    def q1(V):
        return ((1 - s) * (1 - r) * V[i, j] + s * (1 - r) * V[i + 1, j]
                + s * r * V[i + 1, j + 1] + (1 - s) * r * V[i, j + 1])

    return q1(nv.alpha), q1(nv.beta)


def max_speeds(provider: VelocityProvider, u, t: float, g: GridSpec, state=None):
    if provider.speed_bound is not None:
        return tuple(float(v) for v in provider.speed_bound)
    st = state if state is not None else provider.state(u, t, g)
    A, B = st.nodes()
    amax, bmax = float(np.max(np.abs(A))), float(np.max(np.abs(B)))
    if isinstance(provider, AnalyticVelocity):
        Xc, Yc = g.centers()
        for ox in (-1.0 / 3, 0.0, 1.0 / 3):
            for oy in (-1.0 / 3, 0.0, 1.0 / 3):
                a, b = st.at(Xc + ox * g.dx, Yc + oy * g.dy)
                amax = max(amax, float(np.max(np.abs(a))))
                bmax = max(bmax, float(np.max(np.abs(b))))
    return amax, bmax


def compute_dt(provider: VelocityProvider, u, g: GridSpec, cfl: float, t: float = 0.0,
               offsets=(-1.0,), max_halvings: int = 10) -> float:
    """CFL time step, halved until every traced slice of the step is convex.

    ``offsets`` lists the slice offsets used by a step in units of the step,
    e.g. ``(-0.5, -1.0)`` for the explicit RK3 update.
    """
    if cfl <= 0:
        raise ValueError("cfl must be positive")
    state = None if provider.speed_bound is not None and not provider.nonlinear else provider.state(u, t, g)
    amax, bmax = max_speeds(provider, u, t, g, state)
    rate = amax / g.dx + bmax / g.dy
    dt = cfl / rate if rate > 0 else cfl * min(g.dx, g.dy)
    anchor_state = state if provider.nonlinear else None
    err = None
    for _ in range(max_halvings + 1):
        st = anchor_state if anchor_state is not None else provider.state(u, t + dt, g)
        nv = nodal_velocity(provider, t + dt, g, state=st)
        try:
            for o in offsets:
                trace_offset(nv, o * dt)
            return dt
        except NonConvexUpstreamCell as exc:
            err = exc
            dt *= 0.5
    raise err
