"""Uniform structured mesh, convex-quad clipping and exact polygon integration.

Polygons are ``(n, 2)`` float arrays of counter-clockwise vertices.  Quads are
``(4, 2)`` arrays ordered LB, RB, RT, LT.  The low-level kernels work in *index
coordinates* ``xi = (x - x_lo)/dx``, ``eta = (y - y_lo)/dy`` in which cell
``(p, q)`` is the unit square ``[p, p+1] x [q, q+1]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numba import njit

TAU_GEO = 1e-12
DEDUP_TOL = 1e-14
# largest polygon produced by clipping a quad against a strip and then a row
MAX_VERTS = 16

# 3-point Gauss-Legendre on [0, 1]
GL3_NODES = 0.5 + 0.5 * np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
GL3_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 18.0


class BC(str, Enum):
    PERIODIC = "periodic"
    ZERO_GHOST = "zero"


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float
    nx: int
    ny: int
    bc_x: BC = BC.PERIODIC
    bc_y: BC = BC.PERIODIC
    dx: float = field(init=False)
    dy: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "bc_x", BC(self.bc_x))
        object.__setattr__(self, "bc_y", BC(self.bc_y))
        object.__setattr__(self, "dx", (self.x_hi - self.x_lo) / self.nx)
        object.__setattr__(self, "dy", (self.y_hi - self.y_lo) / self.ny)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def periodic(self) -> tuple[bool, bool]:
        return (self.bc_x is BC.PERIODIC, self.bc_y is BC.PERIODIC)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def area(self) -> float:
        return (self.x_hi - self.x_lo) * (self.y_hi - self.y_lo)

    def centers(self):
        """Cell-center coordinate arrays of shape (nx, ny), 'ij' indexing."""
        xc = self.x_lo + (np.arange(self.nx) + 0.5) * self.dx
        yc = self.y_lo + (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(xc, yc, indexing="ij")

    def nodes(self):
        """Node coordinate arrays of shape (nx+1, ny+1)."""
        xn = self.x_lo + np.arange(self.nx + 1) * self.dx
        yn = self.y_lo + np.arange(self.ny + 1) * self.dy
        return np.meshgrid(xn, yn, indexing="ij")

    def cell_quad(self, i: int, j: int) -> np.ndarray:
        x0 = self.x_lo + i * self.dx
        y0 = self.y_lo + j * self.dy
        x1 = self.x_lo + (i + 1) * self.dx
        y1 = self.y_lo + (j + 1) * self.dy
        return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])

    def to_index(self, x, y):
        return (np.asarray(x) - self.x_lo) / self.dx, (np.asarray(y) - self.y_lo) / self.dy

    def to_physical(self, xi, eta):
        return self.x_lo + np.asarray(xi) * self.dx, self.y_lo + np.asarray(eta) * self.dy


def make_grid(bounds, nx: int, ny: int, bcs=(BC.PERIODIC, BC.PERIODIC)) -> GridSpec:
    """Build a uniform grid on ``bounds = (x_lo, x_hi, y_lo, y_hi)``."""
    x_lo, x_hi, y_lo, y_hi = (float(b) for b in bounds)
    if int(nx) != nx or int(ny) != ny:
        raise ValueError("cell counts must be integers")
    if nx < 5 or ny < 5:
        raise ValueError(f"need at least 5 cells per axis, got {nx}x{ny}")
    if not (x_hi > x_lo and y_hi > y_lo):
        raise ValueError(f"inverted or empty bounds {bounds}")
    if isinstance(bcs, (str, BC)):
        bcs = (bcs, bcs)
    return GridSpec(x_lo, x_hi, y_lo, y_hi, int(nx), int(ny), BC(bcs[0]), BC(bcs[1]))


def polygon_area(p) -> float:
    """Signed shoelace area; positive for counter-clockwise vertices."""
    p = np.asarray(p, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def check_convex(q, tol: float | None = None, scale: float | None = None) -> bool:
    """True iff all four consecutive edge cross products exceed ``tol * scale``.

    ``scale`` defaults to the quad's bounding-box area, which makes the test
    invariant under uniform scaling and rotation.  Pass ``scale=dx*dy`` to use
    a fixed grid-based threshold.
    """
    q = np.asarray(q, dtype=float)
    tol = TAU_GEO if tol is None else tol
    if scale is None:
        ext = q.max(axis=0) - q.min(axis=0)
        scale = float(max(ext[0], ext[1]) ** 2)
    e = np.roll(q, -1, axis=0) - q
    en = np.roll(e, -1, axis=0)
    cross = e[:, 0] * en[:, 1] - e[:, 1] * en[:, 0]
    return bool(np.all(cross > tol * scale))


# ---------------------------------------------------------------------------
# numba kernels (index coordinates)


@njit(cache=True)
def _clip_axis(xs, ys, n, axis, c, keep_ge, ox, oy):
    """Sutherland-Hodgman clip against the axis-aligned line coord == c."""
    m = 0
    if n == 0:
        return 0
    for k in range(n):
        k1 = k + 1 if k + 1 < n else 0
        pa = xs[k] if axis == 0 else ys[k]
        pb = xs[k1] if axis == 0 else ys[k1]
        da = pa - c if keep_ge else c - pa
        db = pb - c if keep_ge else c - pb
        if da >= 0.0:
            ox[m] = xs[k]
            oy[m] = ys[k]
            m += 1
        if (da >= 0.0) != (db >= 0.0):
            t = da / (da - db)
            if axis == 0:
                ox[m] = c
                oy[m] = ys[k] + t * (ys[k1] - ys[k])
            else:
                ox[m] = xs[k] + t * (xs[k1] - xs[k])
                oy[m] = c
            m += 1
    return _dedup(ox, oy, m)


@njit(cache=True)
def _dedup(xs, ys, n):
    m = 0
    for k in range(n):
        if m > 0 and abs(xs[k] - xs[m - 1]) <= DEDUP_TOL and abs(ys[k] - ys[m - 1]) <= DEDUP_TOL:
            continue
        xs[m] = xs[k]
        ys[m] = ys[k]
        m += 1
    while m > 1 and abs(xs[m - 1] - xs[0]) <= DEDUP_TOL and abs(ys[m - 1] - ys[0]) <= DEDUP_TOL:
        m -= 1
    return m


@njit(cache=True)
def _moments(xs, ys, n, cx, cy, out):
    """Exact moments int x^a y^b, a+b<=2, about (cx, cy) via edge line integrals.

    Order in ``out``: m00, m10, m01, m20, m11, m02.
    """
    for k in range(6):
        out[k] = 0.0
    for k in range(n):
        k1 = k + 1 if k + 1 < n else 0
        x0 = xs[k] - cx
        y0 = ys[k] - cy
        x1 = xs[k1] - cx
        y1 = ys[k1] - cy
        w = x0 * y1 - x1 * y0
        out[0] += w
        out[1] += w * (x0 + x1)
        out[2] += w * (y0 + y1)
        out[3] += w * (x0 * x0 + x0 * x1 + x1 * x1)
        out[4] += w * (x0 * y1 + 2.0 * x0 * y0 + 2.0 * x1 * y1 + x1 * y0)
        out[5] += w * (y0 * y0 + y0 * y1 + y1 * y1)
    out[0] /= 2.0
    out[1] /= 6.0
    out[2] /= 6.0
    out[3] /= 12.0
    out[4] /= 24.0
    out[5] /= 12.0


@njit(cache=True)
def _basis_integrals(m, out):
    """Integrals of P1..P6 from moments about the cell center (unit cell)."""
    out[0] = m[0]
    out[1] = m[1]
    out[2] = m[2]
    out[3] = m[3] - m[0] / 12.0
    out[4] = m[4]
    out[5] = m[5] - m[0] / 12.0


@njit(cache=True)
def _clip_quad_pieces(qx, qy, px_out, py_out, pn_out, pidx_out, max_pieces):
    """Clip one quad (index coords) against the unit grid.

    Writes each piece's vertices into rows of ``px_out/py_out``, the vertex
    count into ``pn_out`` and the unwrapped cell index into ``pidx_out``.
    Returns the number of pieces, or -1 on overflow.
    """
    sx = np.empty(MAX_VERTS)
    sy = np.empty(MAX_VERTS)
    tx = np.empty(MAX_VERTS)
    ty = np.empty(MAX_VERTS)
    ux = np.empty(MAX_VERTS)
    uy = np.empty(MAX_VERTS)
    rx = np.empty(MAX_VERTS)
    ry = np.empty(MAX_VERTS)
    return _clip_quad_pieces_ws(qx, qy, px_out, py_out, pn_out, pidx_out, max_pieces,
                                sx, sy, tx, ty, ux, uy, rx, ry)


@njit(cache=True)
def _split_axis(xs, ys, n, axis, c, lx, ly, hx, hy):
    """Split a convex polygon by the line coord == c into low and high parts.

    Returns (n_low, n_high).  Vertices on the line go to both parts.
    """
    nl = 0
    nh = 0
    for k in range(n):
        k1 = k + 1 if k + 1 < n else 0
        pa = xs[k] if axis == 0 else ys[k]
        pb = xs[k1] if axis == 0 else ys[k1]
        da = pa - c
        db = pb - c
        if da <= 0.0:
            lx[nl] = xs[k]
            ly[nl] = ys[k]
            nl += 1
        if da >= 0.0:
            hx[nh] = xs[k]
            hy[nh] = ys[k]
            nh += 1
        if (da < 0.0 and db > 0.0) or (da > 0.0 and db < 0.0):
            t = da / (da - db)
            if axis == 0:
                ix = c
                iy = ys[k] + t * (ys[k1] - ys[k])
            else:
                ix = xs[k] + t * (xs[k1] - xs[k])
                iy = c
            lx[nl] = ix
            ly[nl] = iy
            nl += 1
            hx[nh] = ix
            hy[nh] = iy
            nh += 1
    return _dedup(lx, ly, nl), _dedup(hx, hy, nh)


@njit(cache=True)
def _clip_quad_pieces_ws(qx, qy, px_out, py_out, pn_out, pidx_out, max_pieces,
                         sx, sy, tx, ty, ux, uy, rx, ry):
    """Cut a quad into grid pieces by sweeping split lines, columns then rows.

    ``sx..ry`` are scratch buffers of length MAX_VERTS (sx/sy hold the part
    still to the right, tx/ty the current column, ux/uy the row remainder).
    """
    xmin = min(min(qx[0], qx[1]), min(qx[2], qx[3]))
    xmax = max(max(qx[0], qx[1]), max(qx[2], qx[3]))
    ymin = min(min(qy[0], qy[1]), min(qy[2], qy[3]))
    ymax = max(max(qy[0], qy[1]), max(qy[2], qy[3]))
    p0 = int(np.floor(xmin))
    p1 = int(np.floor(xmax))
    if p1 > p0 and xmax == p1:
        p1 -= 1
    q0 = int(np.floor(ymin))
    q1 = int(np.floor(ymax))
    if q1 > q0 and ymax == q1:
        q1 -= 1
    for k in range(4):
        sx[k] = qx[k]
        sy[k] = qy[k]
    n = 4
    npc = 0
    for p in range(p0, p1 + 1):
        if n < 3:
            break
        if p < p1:
            nc, nr = _split_axis(sx, sy, n, 0, float(p + 1), tx, ty, rx, ry)
        else:
            nc = n
            nr = 0
            for k in range(n):
                tx[k] = sx[k]
                ty[k] = sy[k]
        if nc >= 3:
            m = nc
            for q in range(q0, q1 + 1):
                if m < 3:
                    break
                if q < q1:
                    nb, nt = _split_axis(tx, ty, m, 1, float(q + 1), ux, uy, sx, sy)
                else:
                    nb = m
                    nt = 0
                    for k in range(m):
                        ux[k] = tx[k]
                        uy[k] = ty[k]
                if nb >= 3:
                    if npc >= max_pieces:
                        return -1
                    for k in range(nb):
                        px_out[npc, k] = ux[k]
                        py_out[npc, k] = uy[k]
                    pn_out[npc] = nb
                    pidx_out[npc, 0] = p
                    pidx_out[npc, 1] = q
                    npc += 1
                for k in range(nt):
                    tx[k] = sx[k]
                    ty[k] = sy[k]
                m = nt
        for k in range(nr):
            sx[k] = rx[k]
            sy[k] = ry[k]
        n = nr
    return npc


def clip_quad_to_grid(q, g: GridSpec, max_pieces: int = 256, area_tol: float = 1e-14):
    """Clip a convex CCW quad against the Eulerian grid.

    Returns a list of ``((p, q), polygon)`` with polygons in physical
    coordinates.  Periodic axes report indices modulo the cell count; on
    zero-ghost axes indices outside the domain name ghost cells.  Pieces
    with area below ``area_tol * dx * dy`` are dropped.
    """
    q = np.asarray(q, dtype=float)
    if not check_convex(q, scale=g.dx * g.dy):
        raise GeometryError("clip_quad_to_grid needs a convex counter-clockwise quad")
    xi, eta = g.to_index(q[:, 0], q[:, 1])
    px = np.empty((max_pieces, MAX_VERTS))
    py = np.empty((max_pieces, MAX_VERTS))
    pn = np.empty(max_pieces, dtype=np.int64)
    pidx = np.empty((max_pieces, 2), dtype=np.int64)
    npc = _clip_quad_pieces(np.ascontiguousarray(xi), np.ascontiguousarray(eta),
                            px, py, pn, pidx, max_pieces)
    if npc < 0:
        raise GeometryError("quad spans too many cells")
    out = []
    for k in range(npc):
        m = pn[k]
        vx, vy = g.to_physical(px[k, :m], py[k, :m])
        poly = np.column_stack([vx, vy])
        if polygon_area(poly) <= area_tol * g.dx * g.dy:
            continue
        p, qq = int(pidx[k, 0]), int(pidx[k, 1])
        if g.periodic[0]:
            p %= g.nx
        if g.periodic[1]:
            qq %= g.ny
        out.append(((p, qq), poly))
    return out


def integrate_poly_over_polygon(coeffs, host, p, g: GridSpec) -> float:
    """Exact integral of a host-cell quadratic over polygon ``p``.

    ``coeffs`` are the six coefficients in the host cell's basis
    ``1, mu, nu, mu^2-1/12, mu*nu, nu^2-1/12``.  Green's theorem turns the
    area integral into edge integrals of an x-antiderivative, evaluated with
    3-point Gauss-Legendre per edge (exact for the cubic edge integrands).
    """
    p = np.asarray(p, dtype=float)
    if len(p) < 3 or polygon_area(p) == 0.0:
        return 0.0
    a = np.asarray(coeffs, dtype=float)
    i, j = host
    xc = g.x_lo + (i + 0.5) * g.dx
    yc = g.y_lo + (j + 0.5) * g.dy
    mu = (p[:, 0] - xc) / g.dx
    nu = (p[:, 1] - yc) / g.dy
    mu1, nu1 = np.roll(mu, -1), np.roll(nu, -1)
    total = 0.0
    for s, w in zip(GL3_NODES, GL3_WEIGHTS):
        m = mu + s * (mu1 - mu)
        n = nu + s * (nu1 - nu)
        # x-antiderivative of the polynomial in (mu, nu)
        F = (a[0] * m + a[1] * m**2 / 2 + a[2] * m * n + a[3] * (m**3 / 3 - m / 12)
             + a[4] * m**2 * n / 2 + a[5] * m * (n**2 - 1.0 / 12))
        total += w * float(np.sum(F * (nu1 - nu)))
    return total * g.dx * g.dy
