"""Conservative transfer of the Eulerian WENO field onto an upstream mesh.

For every upstream quad the exact mass of the piecewise polynomial is computed
by clipping against the Eulerian grid.  The quad then borrows the polynomial
of the donor cell whose own integral over the quad is closest to that mass,
shifted by a constant so the mass is reproduced exactly.

Geometry (clipping and moments) depends only on the traced mesh and is kept in
a :class:`SliceGeometry`, so several fields can be remapped onto one slice
without clipping twice.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .geometry import (MAX_VERTS, GeometryError, GridSpec, _basis_integrals,
                       _clip_quad_pieces_ws, _moments, check_convex,
                       clip_quad_to_grid, integrate_poly_over_polygon)
from .velocity import UpstreamMesh
from .weno import PiecewisePoly, eval_basis

AREA_TOL = 1e-14
# candidate masses closer than this (relative) to the best count as ties
DONOR_TIE_TOL = 1e-13


@njit(cache=True)
def _bbox_counts(XI, ETA):
    nx = XI.shape[0] - 1
    ny = XI.shape[1] - 1
    cnt = np.empty(nx * ny, dtype=np.int64)
    for i in range(nx):
        for j in range(ny):
            xmin = min(min(XI[i, j], XI[i + 1, j]), min(XI[i + 1, j + 1], XI[i, j + 1]))
            xmax = max(max(XI[i, j], XI[i + 1, j]), max(XI[i + 1, j + 1], XI[i, j + 1]))
            ymin = min(min(ETA[i, j], ETA[i + 1, j]), min(ETA[i + 1, j + 1], ETA[i, j + 1]))
            ymax = max(max(ETA[i, j], ETA[i + 1, j]), max(ETA[i + 1, j + 1], ETA[i, j + 1]))
            cnt[i * ny + j] = ((int(np.floor(xmax)) - int(np.floor(xmin)) + 1)
                               * (int(np.floor(ymax)) - int(np.floor(ymin)) + 1))
    return cnt


@njit(cache=True)
def _slice_geometry(XI, ETA, ptr, count, pidx, pint, qref, qmom, qarea, area_tol):
    nx = XI.shape[0] - 1
    ny = XI.shape[1] - 1
    maxp = 0
    for c in range(nx * ny):
        maxp = max(maxp, ptr[c + 1] - ptr[c])
    px = np.empty((maxp, MAX_VERTS))
    py = np.empty((maxp, MAX_VERTS))
    pn = np.empty(maxp, dtype=np.int64)
    pid = np.empty((maxp, 2), dtype=np.int64)
    sx = np.empty(MAX_VERTS)
    sy = np.empty(MAX_VERTS)
    tx = np.empty(MAX_VERTS)
    ty = np.empty(MAX_VERTS)
    ux = np.empty(MAX_VERTS)
    uy = np.empty(MAX_VERTS)
    rx = np.empty(MAX_VERTS)
    ry = np.empty(MAX_VERTS)
    qx = np.empty(4)
    qy = np.empty(4)
    mom = np.empty(6)
    for i in range(nx):
        for j in range(ny):
            c = i * ny + j
            qx[0] = XI[i, j]
            qy[0] = ETA[i, j]
            qx[1] = XI[i + 1, j]
            qy[1] = ETA[i + 1, j]
            qx[2] = XI[i + 1, j + 1]
            qy[2] = ETA[i + 1, j + 1]
            qx[3] = XI[i, j + 1]
            qy[3] = ETA[i, j + 1]
            npc = _clip_quad_pieces_ws(qx, qy, px, py, pn, pid, maxp, sx, sy, tx, ty, ux, uy, rx, ry)
            base = ptr[c]
            k = 0
            for r in range(npc):
                p = pid[r, 0]
                q = pid[r, 1]
                _moments(px[r], py[r], pn[r], p + 0.5, q + 0.5, mom)
                if mom[0] <= area_tol:
                    continue
                pidx[base + k, 0] = p
                pidx[base + k, 1] = q
                _basis_integrals(mom, pint[base + k])
                k += 1
            count[c] = k
            rp = int(np.floor(min(min(qx[0], qx[1]), min(qx[2], qx[3]))))
            rq = int(np.floor(min(min(qy[0], qy[1]), min(qy[2], qy[3]))))
            qref[c, 0] = rp
            qref[c, 1] = rq
            _moments(qx, qy, 4, rp + 0.5, rq + 0.5, qmom[c])
            qarea[c] = qmom[c, 0]


@njit(cache=True)
def _poly_index(p, q, nx, ny, per_x, per_y):
    if per_x:
        p = p % nx
    elif p < 0 or p >= nx:
        return -1, -1
    if per_y:
        q = q % ny
    elif q < 0 or q >= ny:
        return -1, -1
    return p, q


@njit(cache=True)
def _dot6(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3] + a[4] * b[4] + a[5] * b[5]


@njit(cache=True)
def _contract(coef, per_x, per_y, ptr, count, pidx, pint, qref, qmom, want_donor,
              mass, donor, donor_mass):
    nx = coef.shape[0]
    ny = coef.shape[1]
    bint = np.empty(6)
    sm = np.empty(6)
    maxn = 0
    for c in range(nx * ny):
        maxn = max(maxn, count[c])
    cmass = np.empty(max(maxn, 1))
    for c in range(nx * ny):
        base = ptr[c]
        n = count[c]
        tot = 0.0
        for k in range(n):
            a, b = _poly_index(pidx[base + k, 0], pidx[base + k, 1], nx, ny, per_x, per_y)
            if a >= 0:
                tot += _dot6(coef[a, b], pint[base + k])
        mass[c] = tot
        if not want_donor:
            continue
        m = qmom[c]
        best = np.inf
        for k in range(n):
            p = pidx[base + k, 0]
            q = pidx[base + k, 1]
            dx = p - qref[c, 0]
            dy = q - qref[c, 1]
            sm[0] = m[0]
            sm[1] = m[1] - dx * m[0]
            sm[2] = m[2] - dy * m[0]
            sm[3] = m[3] - 2.0 * dx * m[1] + dx * dx * m[0]
            sm[4] = m[4] - dy * m[1] - dx * m[2] + dx * dy * m[0]
            sm[5] = m[5] - 2.0 * dy * m[2] + dy * dy * m[0]
            _basis_integrals(sm, bint)
            a, b = _poly_index(p, q, nx, ny, per_x, per_y)
            cand = _dot6(coef[a, b], bint) if a >= 0 else 0.0
            cmass[k] = cand
            best = min(best, abs(cand - tot))
        # first (lexicographically smallest) candidate within roundoff of the best
        tol = best + DONOR_TIE_TOL * abs(tot)
        for k in range(n):
            if abs(cmass[k] - tot) <= tol:
                donor[c, 0] = pidx[base + k, 0]
                donor[c, 1] = pidx[base + k, 1]
                donor_mass[c] = cmass[k]
                break


@dataclass(frozen=True)
class SliceGeometry:
    """Clipped pieces of every upstream quad of one traced mesh (index units)."""

    grid: GridSpec
    ptr: np.ndarray
    count: np.ndarray
    pidx: np.ndarray
    pint: np.ndarray
    qref: np.ndarray
    qmom: np.ndarray
    qarea: np.ndarray


def slice_geometry(mesh: UpstreamMesh, area_tol: float = AREA_TOL) -> SliceGeometry:
    g = mesh.grid
    XI, ETA = g.to_index(mesh.X, mesh.Y)
    XI = np.ascontiguousarray(XI)
    ETA = np.ascontiguousarray(ETA)
    cnt = _bbox_counts(XI, ETA)
    ptr = np.zeros(cnt.size + 1, dtype=np.int64)
    np.cumsum(cnt, out=ptr[1:])
    total = int(ptr[-1])
    ncell = g.nx * g.ny
    count = np.empty(ncell, dtype=np.int64)
    pidx = np.empty((total, 2), dtype=np.int64)
    pint = np.empty((total, 6))
    qref = np.empty((ncell, 2), dtype=np.int64)
    qmom = np.empty((ncell, 6))
    qarea = np.empty(ncell)
    _slice_geometry(XI, ETA, ptr, count, pidx, pint, qref, qmom, qarea, area_tol)
    return SliceGeometry(g, ptr, count, pidx, pint, qref, qmom, qarea)


@dataclass(frozen=True)
class RemappedField:
    """Donor polynomial plus constant shift for every upstream quad.

    ``mass`` and ``area`` are physical; ``donor`` holds unwrapped cell indices
    so evaluation uses the donor's own chart even across periodic seams.
    """

    src: PiecewisePoly
    mesh: UpstreamMesh
    mass: np.ndarray
    donor: np.ndarray
    donor_mass: np.ndarray
    area: np.ndarray
    shift: np.ndarray

    def eval_index(self, ic, jc, xi, eta):
        """Evaluate the remapped polynomial of cells (ic, jc) at index coords."""
        g = self.src.grid
        p = self.donor[ic, jc, 0]
        q = self.donor[ic, jc, 1]
        mu = xi - p - 0.5
        nu = eta - q - 0.5
        valid = np.ones(np.shape(p), dtype=bool)
        if g.periodic[0]:
            p = p % g.nx
        else:
            valid &= (p >= 0) & (p < g.nx)
            p = np.clip(p, 0, g.nx - 1)
        if g.periodic[1]:
            q = q % g.ny
        else:
            valid &= (q >= 0) & (q < g.ny)
            q = np.clip(q, 0, g.ny - 1)
        base = np.where(valid, eval_basis(self.src.coef[p, q], mu, nu), 0.0)
        return base + self.shift[ic, jc]

    def __call__(self, i, j, x, y):
        g = self.src.grid
        xi, eta = g.to_index(x, y)
        return self.eval_index(i, j, xi, eta)


def remap_field(src: PiecewisePoly, mesh: UpstreamMesh, geom: SliceGeometry | None = None,
                want_donor: bool = True) -> RemappedField:
    g = src.grid
    shape = g.shape
    if mesh.offset == 0.0:
        # the slice is the Eulerian mesh: every cell is its own donor
        I, J = np.meshgrid(np.arange(g.nx), np.arange(g.ny), indexing="ij")
        mass = src.coef[..., 0] * g.cell_area
        area = np.full(shape, g.cell_area)
        return RemappedField(src, mesh, mass, np.stack([I, J], axis=-1), mass.copy(), area,
                             np.zeros(shape))
    if geom is None:
        geom = slice_geometry(mesh)
    n = g.nx * g.ny
    mass = np.empty(n)
    donor = np.zeros((n, 2), dtype=np.int64)
    donor_mass = np.zeros(n)
    _contract(np.ascontiguousarray(src.coef), g.periodic[0], g.periodic[1], geom.ptr,
              geom.count, geom.pidx, geom.pint, geom.qref, geom.qmom, want_donor,
              mass, donor, donor_mass)
    ca = g.cell_area
    area = geom.qarea.reshape(shape) * ca
    mass = mass.reshape(shape)
    if want_donor:
        donor_mass = donor_mass.reshape(shape)
        shift = (mass - donor_mass) / geom.qarea.reshape(shape)
    else:
        donor_mass = np.full(shape, np.nan)
        shift = np.zeros(shape)
    return RemappedField(src, mesh, mass * ca, donor.reshape(shape + (2,)),
                         donor_mass * ca, area, shift)


def upstream_masses(src: PiecewisePoly, mesh: UpstreamMesh, geom: SliceGeometry | None = None):
    """Exact masses of ``src`` over every quad of ``mesh`` (no donor search)."""
    if mesh.offset == 0.0:
        return src.coef[..., 0] * src.grid.cell_area
    return remap_field(src, mesh, geom, want_donor=False).mass


# ---------------------------------------------------------------------------
# single-quad reference API


def _poly_of(src: PiecewisePoly, p, q):
    g = src.grid
    if g.periodic[0]:
        p %= g.nx
    elif not 0 <= p < g.nx:
        return None
    if g.periodic[1]:
        q %= g.ny
    elif not 0 <= q < g.ny:
        return None
    return (p, q)


def _unwrapped_pieces(quad, g: GridSpec):
    """Pieces with unwrapped cell indices (clip_quad_to_grid wraps them)."""
    from .geometry import _clip_quad_pieces

    xi, eta = g.to_index(quad[:, 0], quad[:, 1])
    maxp = 256
    px = np.empty((maxp, MAX_VERTS))
    py = np.empty((maxp, MAX_VERTS))
    pn = np.empty(maxp, dtype=np.int64)
    pid = np.empty((maxp, 2), dtype=np.int64)
    npc = _clip_quad_pieces(np.ascontiguousarray(xi), np.ascontiguousarray(eta), px, py, pn, pid, maxp)
    if npc < 0:
        raise GeometryError("quad spans too many cells")
    out = []
    for k in range(npc):
        vx, vy = g.to_physical(px[k, :pn[k]], py[k, :pn[k]])
        out.append(((int(pid[k, 0]), int(pid[k, 1])), np.column_stack([vx, vy])))
    return out


def upstream_mass(src: PiecewisePoly, cellquad) -> float:
    """Mass of the piecewise polynomial over one convex quad."""
    g = src.grid
    quad = np.asarray(cellquad, dtype=float)
    if not check_convex(quad, scale=g.dx * g.dy):
        raise GeometryError("upstream quad is not convex")
    total = 0.0
    for (p, q), poly in _unwrapped_pieces(quad, g):
        host = _poly_of(src, p, q)
        if host is None:
            continue
        total += integrate_poly_over_polygon(src.coef[host], (p, q), poly, g)
    return total


def candidate_masses(src: PiecewisePoly, cellquad) -> dict:
    """Integral over the quad of each intersecting cell's own polynomial."""
    g = src.grid
    quad = np.asarray(cellquad, dtype=float)
    out = {}
    for (p, q), poly in _unwrapped_pieces(quad, g):
        area = 0.5 * float(np.sum(poly[:, 0] * np.roll(poly[:, 1], -1)
                                  - np.roll(poly[:, 0], -1) * poly[:, 1]))
        if area <= AREA_TOL * g.dx * g.dy:
            continue
        host = _poly_of(src, p, q)
        coeffs = np.zeros(6) if host is None else src.coef[host]
        out[(p, q)] = integrate_poly_over_polygon(coeffs, (p, q), quad, g)
    return out


def select_donor(masses: dict, target: float):
    """Index minimising |mass - target|; ties go to the smallest index."""
    if not masses:
        raise ValueError("empty candidate set")
    best = min(abs(m - target) for m in masses.values())
    tol = best + DONOR_TIE_TOL * abs(target)
    return next(k for k in sorted(masses) if abs(masses[k] - target) <= tol)


__all__ = ["RemappedField", "SliceGeometry", "candidate_masses", "clip_quad_to_grid",
           "remap_field", "select_donor", "slice_geometry", "upstream_mass", "upstream_masses"]
