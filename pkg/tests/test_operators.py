import dataclasses

import numpy as np
import pytest

from elweno.geometry import BC, GL3_NODES, GL3_WEIGHTS, make_grid
from elweno.operators import (GL3, EdgeQuadrature, convection_from_remap, convection_operator,
                              diffusion_operator, edge_flux, edge_fluxes, flux_divergence,
                              laplacian_averages)
from elweno.problems import cell_averages, get_problem, restrict, sdf_a, sdf_b
from elweno.remap import remap_field
from elweno.timestepping import run
from elweno.velocity import (AnalyticVelocity, NodeVelocity, VelocityState,
                             modified_velocity_at, nodal_velocity, trace_offset)
from elweno.weno import reconstruct_field
from oracles import log_slope

PI = np.pi


def smooth(x, y):
    return np.exp(np.sin(x) * np.cos(y))


class ShiftedState(VelocityState):
    """Uniform node velocity with a - alpha equal to a constant vector c."""

    def __init__(self, nv, c):
        self.nv, self.c = nv, c

    def nodes(self):
        return self.nv.alpha, self.nv.beta

    def at(self, x, y):
        a0, b0 = self.nv.alpha[0, 0], self.nv.beta[0, 0]
        return a0 + self.c[0] + 0 * x, b0 + self.c[1] + 0 * y


def test_edge_quadrature_validation():
    assert np.allclose(GL3.nodes, GL3_NODES)
    with pytest.raises(ValueError):
        EdgeQuadrature(np.array([0.5]), np.array([0.9]))


def test_constant_velocity_gives_zero_flux():
    g = make_grid((0, 2 * PI, 0, 2 * PI), 16, 16)
    u = cell_averages(smooth, g)
    prov = AnalyticVelocity(lambda x, y, t: 0.7 + 0 * x, lambda x, y, t: -0.3 + 0 * x)
    nv = nodal_velocity(prov, 1.0, g)
    F = convection_operator(u, nv, 0.9, prov)
    assert np.all(F == 0)


def test_zero_solution_gives_zero_flux():
    g = make_grid((-PI, PI, -PI, PI), 16, 16)
    prov = AnalyticVelocity(sdf_a, sdf_b)
    nv = nodal_velocity(prov, 0.1, g)
    assert np.all(convection_operator(np.zeros(g.shape), nv, 0.05, prov) == 0)


def test_relative_velocity_is_second_order_at_anchor():
    out = []
    for n in (20, 40, 80):
        g = make_grid((-PI, PI, -PI, PI), n, n)
        prov = AnalyticVelocity(sdf_a, sdf_b)
        nv = nodal_velocity(prov, 0.2, g)
        X, Y = g.nodes()
        lam = GL3_NODES[:, None, None]
        px = X[:, :-1] + 0 * lam
        py = Y[:, :-1] + lam * g.dy
        a, _ = prov.state(None, 0.2, g).at(px, py)
        al, _ = modified_velocity_at(nv, px, py)
        out.append(np.max(np.abs(a - al)))
    assert log_slope([1 / 20, 1 / 40, 1 / 80], out) == pytest.approx(2.0, abs=0.1)


def test_periodic_sum_vanishes_and_seam_is_shared():
    g = make_grid((-PI, PI, -PI, PI), 24, 24)
    prov = AnalyticVelocity(sdf_a, sdf_b)
    u = cell_averages(smooth, g)
    nv = nodal_velocity(prov, 0.2, g)
    rf = remap_field(reconstruct_field(u, g), trace_offset(nv, -0.1))
    st = prov.state(u, 0.1, g)
    fv, fh = edge_fluxes(rf, nv, st)
    assert np.array_equal(fv[0], fv[-1]) and np.array_equal(fh[:, 0], fh[:, -1])
    F = flux_divergence(fv, fh)
    scale = np.abs(fv).sum() + np.abs(fh).sum()
    assert abs(F.sum()) <= 1e-12 * scale
    assert np.array_equal(F, convection_from_remap(rf, nv, st))
    # a single edge enters its two cells with opposite signs
    assert edge_flux(rf, nv, st, ("v", 5, 7)) == fv[5, 7]
    assert edge_flux(rf, nv, st, ("h", 5, 7)) == fh[5, 7]


def test_constant_relative_velocity_with_constant_solution():
    g = make_grid((0, 1, 0, 1), 12, 12)
    nv = NodeVelocity(g, np.full((13, 13), 0.23 * g.dx), np.full((13, 13), -0.41 * g.dy), 0.0)
    u = np.full(g.shape, 1.7)
    rf = remap_field(reconstruct_field(u, g), trace_offset(nv, -1.0))
    F = convection_from_remap(rf, nv, ShiftedState(nv, (0.4, -0.9)))
    fv, _ = edge_fluxes(rf, nv, ShiftedState(nv, (0.4, -0.9)))
    assert np.max(np.abs(fv)) > 0.1 * g.dy
    assert np.max(np.abs(F)) < 1e-13


def test_edge_flux_against_high_order_quadrature():
    # cubic velocity, quadratic donors: the integrand is degree 5 along each edge
    g = make_grid((-1, 1, -1, 1), 12, 12, BC.ZERO_GHOST)
    a = lambda x, y, t: 0.4 + 0.3 * x ** 3 - 0.2 * x * y
    b = lambda x, y, t: -0.3 + 0.25 * y ** 3 + 0.1 * x * x
    prov = AnalyticVelocity(a, b)
    u = cell_averages(lambda x, y: np.exp(-4 * (x * x + y * y)), g)
    nv = nodal_velocity(prov, 0.0, g)
    mesh = trace_offset(nv, -0.05)
    rf = remap_field(reconstruct_field(u, g), mesh)
    st = prov.state(u, -0.05, g)
    fv, fh = edge_fluxes(rf, nv, st)
    lam, w = np.polynomial.legendre.leggauss(10)
    lam, w = 0.5 * (lam + 1), 0.5 * w
    X0, Y0 = g.nodes()
    checked = 0
    for kind, i, j in [("v", i, j) for i in range(1, 12) for j in range(12)] + \
                      [("h", i, j) for i in range(12) for j in range(1, 12)]:
        i1, j1 = (i, j + 1) if kind == "v" else (i + 1, j)
        ex, ey = mesh.X[i1, j1] - mesh.X[i, j], mesh.Y[i1, j1] - mesh.Y[i, j]
        px, py = mesh.X[i, j] + lam * ex, mesh.Y[i, j] + lam * ey
        lx = X0[i, j] + lam * (X0[i1, j1] - X0[i, j])
        ly = Y0[i, j] + lam * (Y0[i1, j1] - Y0[i, j])
        al, be = modified_velocity_at(nv, lx, ly)
        da, db = a(px, py, 0) - al, b(px, py, 0) - be
        W = da * ey - db * ex if kind == "v" else -da * ey + db * ex
        if not (np.all(W > 0) or np.all(W < 0)):
            continue
        lo = (i - 1, j) if kind == "v" else (i, j - 1)
        cell = lo if W[0] > 0 else (i, j)
        val = rf(cell[0], cell[1], px, py)
        ref = float(np.sum(w * W * val))
        got = fv[i, j] if kind == "v" else fh[i, j]
        assert got == pytest.approx(ref, rel=1e-11, abs=1e-15)
        checked += 1
    assert checked > 100


def test_laplacian_examples():
    g = make_grid((0, 1, 0, 1), 10, 10)
    assert np.allclose(laplacian_averages(np.full(g.shape, 3.0), g), 0, atol=1e-10)
    gz = make_grid((0, 1, 0, 1), 10, 10, BC.ZERO_GHOST)
    u = cell_averages(lambda x, y: x * x, gz)
    lap = laplacian_averages(u, gz)
    assert np.allclose(lap[2:-2, 2:-2], 2.0, rtol=1e-10)
    # zero extension at the boundary: cell 0 sees two zero ghosts
    assert not np.isclose(lap[0, 5], 2.0)


def test_laplacian_fourier_eigenvalue_and_row_sums():
    n, k = 32, 3
    g = make_grid((0, 2 * PI, 0, 2 * PI), n, n)
    Xc, _ = g.centers()
    u = np.cos(k * Xc)
    lam = (2 / g.dx ** 2) * (4 * np.cos(k * g.dx) / 3 - np.cos(2 * k * g.dx) / 12 - 5 / 4)
    assert np.allclose(laplacian_averages(u, g), lam * u, atol=1e-10)
    rng = np.random.default_rng(1)
    v = rng.normal(size=g.shape)
    L = laplacian_averages(v, g)
    assert abs(L.sum()) <= 1e-12 * np.abs(L).sum()


def test_laplacian_fourth_order():
    errs = []
    for n in (32, 64, 128):
        g = make_grid((0, 2 * PI, 0, 2 * PI), n, n)
        u = cell_averages(smooth, g)
        lap_exact = cell_averages(lambda x, y: smooth(x, y) * (
            (np.cos(x) * np.cos(y)) ** 2 - np.sin(x) * np.cos(y)
            + (np.sin(x) * np.sin(y)) ** 2 - np.sin(x) * np.cos(y)), g)
        errs.append(np.max(np.abs(laplacian_averages(u, g) - lap_exact)))
    assert log_slope([1 / 32, 1 / 64, 1 / 128], errs) > 3.7


def test_diffusion_operator_examples():
    g = make_grid((0, 2 * PI, 0, 2 * PI), 16, 16)
    nv = NodeVelocity(g, np.zeros((17, 17)), np.zeros((17, 17)), 0.0)
    mesh = trace_offset(nv, 0.0)
    u = cell_averages(smooth, g)
    assert np.all(diffusion_operator(u, mesh, 0.0) == 0)
    assert np.allclose(diffusion_operator(np.full(g.shape, 2.0), mesh, 0.3), 0, atol=1e-10)
    errs = []
    for n in (16, 32, 64):
        g = make_grid((0, 2 * PI, 0, 2 * PI), n, n)
        nv = NodeVelocity(g, np.zeros((n + 1, n + 1)), np.zeros((n + 1, n + 1)), 0.0)
        u = cell_averages(lambda x, y: np.sin(x) * np.sin(y), g)
        G = diffusion_operator(u, trace_offset(nv, 0.0), 0.5)
        errs.append(np.max(np.abs(G / (0.5 * g.cell_area) + 2 * u)))
    assert log_slope([1 / 16, 1 / 32, 1 / 64], errs) > 2.7


def test_diffusion_on_moving_slice_conserves_mass():
    g = make_grid((0, 2 * PI, 0, 2 * PI), 20, 20)
    prov = AnalyticVelocity(lambda x, y, t: np.sin(y), lambda x, y, t: np.cos(x))
    nv = nodal_velocity(prov, 0.0, g)
    u = cell_averages(smooth, g)
    G = diffusion_operator(u, trace_offset(nv, -0.2), 0.1)
    assert abs(G.sum()) <= 1e-12 * np.abs(G).sum()


def test_semi_discretisation_self_convergence():
    # SDF flow on a smooth periodic field to t = 0.3, against a finer run
    prob = dataclasses.replace(get_problem("sdf", "smooth"), initial=smooth, exact=None)
    T, ref_n = 0.3, 160
    uref, _ = run(prob, prob.grid(ref_n), 1.0, T, diagnostics=False)
    ns = [20, 40, 80]
    errs = []
    for n in ns:
        u, _ = run(prob, prob.grid(n), 1.0, T, diagnostics=False)
        errs.append(np.mean(np.abs(u - restrict(uref, ref_n // n))))
    assert log_slope(1 / np.array(ns), errs) >= 2.7
