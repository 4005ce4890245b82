"""Independent reference computations used across the test suite."""
import numpy as np
from hypothesis import strategies as st
from shapely.geometry import Polygon, box

_GX, _GW = np.polynomial.legendre.leggauss(5)
GX5 = 0.5 * (_GX + 1)
GW5 = 0.5 * _GW


def triangle_gauss(f, a, b, c):
    """Collapsed 5x5 tensor Gauss rule on a triangle (exact to degree 8)."""
    a, b, c = (np.asarray(p, dtype=float) for p in (a, b, c))
    total = 0.0
    jac = abs((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    for s, ws in zip(GX5, GW5):
        for r, wr in zip(GX5, GW5):
            # Duffy map of the unit square onto the reference triangle
            u, v = s, (1 - s) * r
            p = a + u * (b - a) + v * (c - a)
            total += ws * wr * (1 - s) * f(p[0], p[1])
    return total * jac


def polygon_gauss(f, poly):
    poly = np.asarray(poly, dtype=float)
    return sum(triangle_gauss(f, poly[0], poly[k], poly[k + 1]) for k in range(1, len(poly) - 1))


def cell_poly_function(coeffs, host, g):
    """The host cell's quadratic as a global function of (x, y)."""
    i, j = host
    xc = g.x_lo + (i + 0.5) * g.dx
    yc = g.y_lo + (j + 0.5) * g.dy
    a = np.asarray(coeffs, dtype=float)

    def f(x, y):
        mu = (x - xc) / g.dx
        nu = (y - yc) / g.dy
        return (a[0] + a[1] * mu + a[2] * nu + a[3] * (mu * mu - 1 / 12) + a[4] * mu * nu
                + a[5] * (nu * nu - 1 / 12))

    return f


def shapely_cell_areas(quad, g, n_ext=3):
    """{(p, q): area} of quad intersected with each (unwrapped) grid cell."""
    P = Polygon(quad)
    out = {}
    xmin, ymin, xmax, ymax = P.bounds
    p0 = int(np.floor((xmin - g.x_lo) / g.dx)) - 1
    p1 = int(np.floor((xmax - g.x_lo) / g.dx)) + 1
    q0 = int(np.floor((ymin - g.y_lo) / g.dy)) - 1
    q1 = int(np.floor((ymax - g.y_lo) / g.dy)) + 1
    for p in range(p0, p1 + 1):
        for q in range(q0, q1 + 1):
            x0 = g.x_lo + p * g.dx
            y0 = g.y_lo + q * g.dy
            a = P.intersection(box(x0, y0, x0 + g.dx, y0 + g.dy)).area
            if a > 1e-14 * g.dx * g.dy:
                out[(p, q)] = a
    return out


def convex_quad(center, radius, angles, aspect=1.0, rot=0.0):
    """CCW convex quad with vertices on an ellipse at increasing angles."""
    th = np.sort(np.asarray(angles) % (2 * np.pi))
    pts = np.column_stack([radius * np.cos(th), aspect * radius * np.sin(th)])
    c, s = np.cos(rot), np.sin(rot)
    pts = pts @ np.array([[c, s], [-s, c]])
    return pts + np.asarray(center)


def _well_spread(th):
    th = np.sort(np.asarray(th) % (2 * np.pi))
    gaps = np.diff(np.concatenate([th, [th[0] + 2 * np.pi]]))
    return gaps.min() > 0.3 and gaps.max() < np.pi - 0.3


@st.composite
def convex_quads(draw, scale=1.0, spread=3.0):
    """Random well-shaped convex quads of size ~``scale`` near the origin."""
    fl = st.floats
    th = draw(st.lists(fl(0, 2 * np.pi), min_size=4, max_size=4).filter(_well_spread))
    r = draw(fl(0.3, 1.0)) * scale
    aspect = draw(fl(0.4, 1.0))
    rot = draw(fl(0, np.pi))
    cx = draw(fl(-spread, spread)) * scale
    cy = draw(fl(-spread, spread)) * scale
    return convex_quad((cx, cy), r, th, aspect, rot)


def random_convex_node_field(g, rng, amp=0.2, drift=(0.0, 0.0)):
    """Random node velocities whose unit-time trace keeps every quad convex.

    Each node moves by ``drift`` cells plus a jitter of at most ``amp`` cells
    per axis; ``amp <= 0.2`` guarantees positive corner cross products.
    """
    from elweno.velocity import NodeVelocity, _sync_periodic_nodes

    shape = (g.nx + 1, g.ny + 1)
    A = _sync_periodic_nodes((drift[0] + rng.uniform(-amp, amp, shape)) * g.dx, g)
    B = _sync_periodic_nodes((drift[1] + rng.uniform(-amp, amp, shape)) * g.dy, g)
    return NodeVelocity(g, A, B, 0.0)


def log_slope(h, e):
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])


def _eval_cell_basis(a, mu, nu):
    return (a[..., 0] + a[..., 1] * mu + a[..., 2] * nu + a[..., 3] * (mu * mu - 1 / 12)
            + a[..., 4] * mu * nu + a[..., 5] * (nu * nu - 1 / 12))


def quad_mesh_integrals(coef, host_p, host_q, X, Y, g):
    """Integral over every quad of a mesh of the polynomial of cell (host_p, host_q).

    ``coef`` is (nx, ny, 6) per-quad coefficients; hosts may be unwrapped
    indices and only fix the polynomial's centre.  Vectorised collapsed Gauss
    on the two triangles of each quad.
    """
    xc = g.x_lo + (host_p + 0.5) * g.dx
    yc = g.y_lo + (host_q + 0.5) * g.dy
    P = [(X[:-1, :-1], Y[:-1, :-1]), (X[1:, :-1], Y[1:, :-1]), (X[1:, 1:], Y[1:, 1:]),
         (X[:-1, 1:], Y[:-1, 1:])]
    total = np.zeros(coef.shape[:2])
    for a, b, c in ((0, 1, 2), (0, 2, 3)):
        (ax, ay), (bx, by), (cx, cy) = P[a], P[b], P[c]
        jac = np.abs((bx - ax) * (cy - ay) - (cx - ax) * (by - ay))
        for s, ws in zip(GX5, GW5):
            for r, wr in zip(GX5, GW5):
                u, v = s, (1 - s) * r
                x = ax + u * (bx - ax) + v * (cx - ax)
                y = ay + u * (by - ay) + v * (cy - ay)
                total += ws * wr * (1 - s) * jac * _eval_cell_basis(coef, (x - xc) / g.dx, (y - yc) / g.dy)
    return total
