"""Fast invariant checks run by ``elweno selftest``."""
from __future__ import annotations

import numpy as np

from .geometry import BC, make_grid
from .problems import get_problem
from .remap import remap_field, slice_geometry
from .timestepping import IMEX233_GAMMA, implicit_solve, laplacian_symbol, run, tableau
from .velocity import NodeVelocity, _sync_periodic_nodes, trace_offset
from .weno import WenoParams, nonlinear_weights, reconstruct_field


def random_node_velocity(g, rng, amp=0.3):
    """Node velocities whose unit-offset trace moves nodes by at most ``amp`` cells."""
    A = _sync_periodic_nodes(rng.uniform(-amp, amp, (g.nx + 1, g.ny + 1)) * g.dx, g)
    B = _sync_periodic_nodes(rng.uniform(-amp, amp, (g.nx + 1, g.ny + 1)) * g.dy, g)
    return NodeVelocity(g, A, B, 0.0)


def _weno_exactness():
    g = make_grid((0, 1, 0, 1), 12, 12)
    X, Y = g.centers()
    u = 1.0 + 0.0 * X
    pp = reconstruct_field(u, g)
    err = np.max(np.abs(pp.coef - np.array([1, 0, 0, 0, 0, 0])))
    beta = np.full(9, 0.37)
    w = nonlinear_weights(beta[None], WenoParams())[0]
    err = max(err, np.max(np.abs(w - np.asarray(WenoParams().gammas))))
    return err < 1e-13, f"max_err={err:.2e}"


def _remap_conservation():
    rng = np.random.default_rng(7)
    g = make_grid((0, 1, 0, 1), 16, 16)
    X, Y = g.centers()
    u = np.sin(2 * np.pi * X) * np.cos(2 * np.pi * Y) + 2
    src = reconstruct_field(u, g)
    worst = 0.0
    for _ in range(5):
        mesh = trace_offset(random_node_velocity(g, rng), -1.0)
        geom = slice_geometry(mesh)
        rf = remap_field(src, mesh, geom)
        worst = max(worst, abs(rf.mass.sum() - u.sum() * g.cell_area) / abs(u.sum() * g.cell_area))
        worst = max(worst, abs(geom.qarea.sum() - g.nx * g.ny) / (g.nx * g.ny))
    return worst < 1e-13, f"rel_dev={worst:.2e}"


def _implicit_mode():
    g = make_grid((0, 2 * np.pi, 0, 2 * np.pi), 16, 16)
    X, Y = g.centers()
    kx, ky, coeff = 3, 2, 0.01
    u = np.cos(kx * X + ky * Y)
    lam = laplacian_symbol(g)[kx, ky]
    x = implicit_solve(u, coeff, g)
    err = np.max(np.abs(x - u / (1 - coeff * lam)))
    return err < 1e-12, f"max_err={err:.2e}"


def _imex233_recurrence():
    pair = tableau("IMEX233")
    assert abs(pair.A[1, 1] - IMEX233_GAMMA) < 1e-15
    z = -0.7
    s = pair.stages
    U = np.zeros(s)
    U[0] = 1.0
    for l in range(1, s):
        U[l] = (1 + z * pair.A[l, :l] @ U[:l]) / (1 - z * pair.A[l, l])
    R = 1 + z * pair.b @ U
    # closed form: R(z) = 1 + z b^T (I - zA)^{-1} 1 restricted to the implicit part
    M = np.eye(s) - z * pair.A
    R2 = 1 + z * pair.b @ np.linalg.solve(M, np.ones(s))
    err = abs(R - R2)
    return err < 1e-14, f"err={err:.2e}"


def _sdf_mass():
    prob = get_problem("sdf", "smooth")
    g = prob.grid(20)
    u, series = run(prob, g, 5.0, 0.3)
    dev = np.max(np.abs(series.relative_deviation("mass")))
    return bool(dev < 1e-11 and np.all(np.isfinite(u))), f"mass_dev={dev:.2e}"


def _lbfp_zero_ghost():
    g = make_grid((-1, 1, -1, 1), 8, 8, BC.ZERO_GHOST)
    u = np.ones(g.shape)
    x = implicit_solve(u, 0.0, g)
    return bool(np.array_equal(x, u)), "identity at coeff 0"


CHECKS = [
    ("weno_exactness", _weno_exactness),
    ("remap_conservation", _remap_conservation),
    ("implicit_fourier_mode", _implicit_mode),
    ("imex233_recurrence", _imex233_recurrence),
    ("zero_coefficient_solve", _lbfp_zero_ghost),
    ("sdf_mass_conservation", _sdf_mass),
]


def run_selftest():
    """List of (name, passed, detail)."""
    out = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:   # report rather than abort the suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))
    return out
