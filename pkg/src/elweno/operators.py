"""Semi-discrete right-hand sides on a traced slice.

``convection_operator`` returns the upwind edge-flux term (units of u times
area per time) and ``diffusion_operator`` the integral of the reconstructed
Laplacian over each upstream quad.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .geometry import GL3_NODES, GL3_WEIGHTS, GridSpec
from .remap import RemappedField, SliceGeometry, remap_field, upstream_masses
from .velocity import NodeVelocity, UpstreamMesh, VelocityProvider, VelocityState, trace_to
from .weno import WenoParams, padded, reconstruct_field, reconstruct_q0_field

LAPLACIAN_STENCIL = np.array([-1.0 / 12, 4.0 / 3, -5.0 / 2, 4.0 / 3, -1.0 / 12])


@dataclass(frozen=True)
class EdgeQuadrature:
    nodes: np.ndarray = GL3_NODES
    weights: np.ndarray = GL3_WEIGHTS

    def __post_init__(self):
        if len(self.nodes) != len(self.weights) or abs(np.sum(self.weights) - 1.0) > 1e-14:
            raise ValueError("weights on [0, 1] must sum to 1")


GL3 = EdgeQuadrature()


@njit(cache=True)
def _eval_donor(coef, donor, shift, ic, jc, xi, eta, per_x, per_y):
    nx, ny = coef.shape[0], coef.shape[1]
    p = donor[ic, jc, 0]
    q = donor[ic, jc, 1]
    mu = xi - p - 0.5
    nu = eta - q - 0.5
    val = shift[ic, jc]
    if per_x:
        p = p % nx
    elif p < 0 or p >= nx:
        return val
    if per_y:
        q = q % ny
    elif q < 0 or q >= ny:
        return val
    a = coef[p, q]
    return val + (a[0] + a[1] * mu + a[2] * nu + a[3] * (mu * mu - 1.0 / 12)
                  + a[4] * mu * nu + a[5] * (nu * nu - 1.0 / 12))


@njit(cache=True)
def _upwind_flux(xi, eta, W, w, donor, shift, coef, vertical, per_x, per_y, out):
    """Quadrature of W times the upwind remapped value along each edge.

    Edge (i, j) separates a low cell (i-1, j) or (i, j-1) from the high cell
    (i, j); a missing neighbour across a zero-ghost boundary contributes 0 and
    across a periodic seam it is the wrapped cell in its own chart.
    """
    nx, ny = coef.shape[0], coef.shape[1]
    nq = W.shape[0]
    for i in range(W.shape[1]):
        for j in range(W.shape[2]):
            if vertical:
                li, lj, hi, hj = i - 1, j, i, j
                n, per, pos = nx, per_x, i
            else:
                li, lj, hi, hj = i, j - 1, i, j
                n, per, pos = ny, per_y, j
            lo_ok = pos >= 1 or per
            hi_ok = pos < n or per
            sh_lo = 0.0
            sh_hi = 0.0
            if per and pos == 0:
                sh_lo = n
                if vertical:
                    li = n - 1
                else:
                    lj = n - 1
            if per and pos == n:
                sh_hi = -n
                if vertical:
                    hi = 0
                else:
                    hj = 0
            acc = 0.0
            for k in range(nq):
                wk = W[k, i, j]
                x = xi[k, i, j]
                y = eta[k, i, j]
                if wk > 0:
                    if not lo_ok:
                        continue
                    if vertical:
                        x += sh_lo
                    else:
                        y += sh_lo
                    v = _eval_donor(coef, donor, shift, li, lj, x, y, per_x, per_y)
                else:
                    if not hi_ok:
                        continue
                    if vertical:
                        x += sh_hi
                    else:
                        y += sh_hi
                    v = _eval_donor(coef, donor, shift, hi, hj, x, y, per_x, per_y)
                acc += w[k] * wk * v
            out[i, j] = acc


def _edge_flux_family(rf: RemappedField, nv: NodeVelocity, state: VelocityState,
                      vertical: bool, quad: EdgeQuadrature):
    """Integrated upwind flux through every vertical (or horizontal) edge.

    Vertical edges run from node (i, j) to (i, j+1) and the result has shape
    (nx+1, ny); positive values move mass from cell (i-1, j) to (i, j).
    Horizontal edges run from (i, j) to (i+1, j), shape (nx, ny+1), positive
    from (i, j-1) to (i, j).  On a periodic axis the last row repeats the first.
    """
    g = nv.grid
    X, Y = rf.mesh.X, rf.mesh.Y
    A, B = nv.alpha, nv.beta
    if vertical:
        P0 = (slice(None), slice(0, -1))
        P1 = (slice(None), slice(1, None))
    else:
        P0 = (slice(0, -1), slice(None))
        P1 = (slice(1, None), slice(None))
    x0, y0, a0, b0 = X[P0], Y[P0], A[P0], B[P0]
    ex, ey = X[P1] - x0, Y[P1] - y0
    da, db = A[P1] - a0, B[P1] - b0
    lam = np.asarray(quad.nodes)[:, None, None]
    px = x0 + lam * ex
    py = y0 + lam * ey
    alpha = a0 + lam * da
    beta = b0 + lam * db
    a, b = state.at(px, py)
    if vertical:
        W = (a - alpha) * ey - (b - beta) * ex
    else:
        W = -(a - alpha) * ey + (b - beta) * ex

    xi, eta = g.to_index(px, py)
    flux = np.empty(W.shape[1:])
    _upwind_flux(np.ascontiguousarray(xi), np.ascontiguousarray(eta), np.ascontiguousarray(W),
                 np.asarray(quad.weights, dtype=float), rf.donor, rf.shift, rf.src.coef,
                 vertical, g.periodic[0], g.periodic[1], flux)
    per = g.periodic[0] if vertical else g.periodic[1]
    if per:
        # the seam edge is computed once and shared by both ends
        if vertical:
            flux[-1] = flux[0]
        else:
            flux[:, -1] = flux[:, 0]
    return flux


def edge_fluxes(rf: RemappedField, nv: NodeVelocity, state: VelocityState,
                quad: EdgeQuadrature = GL3):
    """(vertical, horizontal) integrated edge fluxes on the slice of ``rf``."""
    return (_edge_flux_family(rf, nv, state, True, quad),
            _edge_flux_family(rf, nv, state, False, quad))


def edge_flux(rf: RemappedField, nv: NodeVelocity, state: VelocityState, edge,
              quad: EdgeQuadrature = GL3) -> float:
    """Flux through one edge given as ('v' | 'h', i, j).

    ``('v', i, j)`` joins nodes (i, j), (i, j+1); ``('h', i, j)`` joins (i, j), (i+1, j).
    """
    kind, i, j = edge
    fv, fh = edge_fluxes(rf, nv, state, quad)
    return float(fv[i, j] if kind == "v" else fh[i, j])


def flux_divergence(fv: np.ndarray, fh: np.ndarray) -> np.ndarray:
    """Cell sums of signed edge fluxes (minus the outward boundary integral)."""
    return (fv[:-1, :] - fv[1:, :]) + (fh[:, :-1] - fh[:, 1:])


def convection_from_remap(rf: RemappedField, nv: NodeVelocity, state: VelocityState,
                          quad: EdgeQuadrature = GL3) -> np.ndarray:
    fv, fh = edge_fluxes(rf, nv, state, quad)
    return flux_divergence(fv, fh)


def convection_operator(u, nv: NodeVelocity, t: float, provider: VelocityProvider,
                        weno: WenoParams = WenoParams(), quad: EdgeQuadrature = GL3,
                        state: VelocityState | None = None) -> np.ndarray:
    """Convection term of ``u`` on the slice of ``nv``'s family at time ``t``.

    The velocity is the provider's at time ``t`` (built from ``u`` for
    nonlinear providers unless ``state`` is given).
    """
    g = nv.grid
    mesh = trace_to(nv, t)
    rf = remap_field(reconstruct_field(u, g, weno), mesh)
    st = state if state is not None else provider.state(u, t, g)
    return convection_from_remap(rf, nv, st, quad)


def laplacian_averages(u, g: GridSpec) -> np.ndarray:
    """Fourth-order cell averages of the Laplacian (5-point stencil per axis)."""
    up = padded(np.asarray(u, dtype=float), g, 2)
    nx, ny = g.nx, g.ny
    lx = sum(c * up[k:k + nx, 2:2 + ny] for k, c in enumerate(LAPLACIAN_STENCIL))
    ly = sum(c * up[2:2 + nx, k:k + ny] for k, c in enumerate(LAPLACIAN_STENCIL))
    return lx / g.dx ** 2 + ly / g.dy ** 2


def diffusion_operator(u, mesh: UpstreamMesh, eps: float,
                       geom: SliceGeometry | None = None) -> np.ndarray:
    """``eps`` times the integral of the reconstructed Laplacian over each quad."""
    g = mesh.grid
    if eps == 0.0:
        return np.zeros(g.shape)
    lap = reconstruct_q0_field(laplacian_averages(u, g), g)
    return eps * upstream_masses(lap, mesh, geom)
