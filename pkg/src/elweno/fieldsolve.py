"""Periodic spectral Poisson solves that turn a cell field into nodal velocity.

Cell averages are first converted to point values at the cell centres by
dividing each Fourier mode by its averaging factor; derivatives are then taken
spectrally and evaluated at the grid nodes through a half-cell phase shift.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import GridSpec
from .velocity import SolvedVelocity


def _sinc(z):
    return np.sinc(z / np.pi)


@dataclass(frozen=True)
class SpectralWorkspace:
    grid: GridSpec
    kx: np.ndarray
    ky: np.ndarray

    @classmethod
    def for_grid(cls, g: GridSpec) -> "SpectralWorkspace":
        if not all(g.periodic):
            raise ValueError("spectral field solves need a periodic grid")
        kx = 2 * np.pi * np.fft.fftfreq(g.nx, d=g.dx)
        ky = 2 * np.pi * np.fft.fftfreq(g.ny, d=g.dy)
        return cls(g, kx[:, None], ky[None, :])

    @property
    def k2(self):
        return self.kx ** 2 + self.ky ** 2

    def point_spectrum(self, avg):
        """Fourier coefficients of the centre point values of a cell-average field."""
        g = self.grid
        fac = _sinc(self.kx * g.dx / 2) * _sinc(self.ky * g.dy / 2)
        return np.fft.fft2(np.asarray(avg, dtype=float)) / fac

    def to_nodes(self, spec):
        """Nodal values (nx+1, ny+1), node (i, j) sitting half a cell below centre (i, j)."""
        g = self.grid
        shift = np.exp(-0.5j * (self.kx * g.dx + self.ky * g.dy))
        vals = np.fft.ifft2(spec * shift).real
        out = np.empty((g.nx + 1, g.ny + 1))
        out[:-1, :-1] = vals
        out[-1, :-1] = vals[0]
        out[:, -1] = out[:, 0]
        return out

    def to_centers(self, spec):
        return np.fft.ifft2(spec).real

    def inverse_laplacian(self, spec):
        """Solve ``lap(phi) = f`` spectrally with zero mean (mean of ``f`` dropped)."""
        k2 = self.k2
        out = np.zeros_like(spec)
        nz = k2 > 0
        out[nz] = -spec[nz] / k2[nz]
        return out


_WS_CACHE: dict = {}


def workspace(g: GridSpec) -> SpectralWorkspace:
    ws = _WS_CACHE.get(g)
    if ws is None:
        ws = _WS_CACHE[g] = SpectralWorkspace.for_grid(g)
    return ws


def _drop_nyquist(spec, g):
    # the Nyquist mode has no consistent half-cell shift; remove it
    if g.nx % 2 == 0:
        spec[g.nx // 2, :] = 0
    if g.ny % 2 == 0:
        spec[:, g.ny // 2] = 0
    return spec


def solve_guiding_center(rho, g: GridSpec, at: str = "nodes"):
    """E-perp = (-Phi_y, Phi_x) with -lap(Phi) = rho - mean(rho).

    Returned at the nodes, shape (nx+1, ny+1), or at the cell centres.
    """
    ws = workspace(g)
    phi = -ws.inverse_laplacian(_drop_nyquist(ws.point_spectrum(rho), g))
    out = ws.to_nodes if at == "nodes" else ws.to_centers
    return out(-1j * ws.ky * phi), out(1j * ws.kx * phi)


def solve_streamfunction(omega, g: GridSpec, at: str = "nodes"):
    """Velocity (psi_y, -psi_x) with lap(psi) = omega - mean(omega)."""
    ws = workspace(g)
    psi = ws.inverse_laplacian(_drop_nyquist(ws.point_spectrum(omega), g))
    out = ws.to_nodes if at == "nodes" else ws.to_centers
    return out(1j * ws.ky * psi), out(-1j * ws.kx * psi)


def guiding_center_velocity() -> SolvedVelocity:
    return SolvedVelocity(solve_guiding_center)


def streamfunction_velocity() -> SolvedVelocity:
    return SolvedVelocity(solve_streamfunction)
