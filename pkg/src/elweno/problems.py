"""Benchmark problems, error norms and physics diagnostics."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .fieldsolve import guiding_center_velocity, solve_guiding_center, streamfunction_velocity
from .geometry import BC, GridSpec, make_grid
from .velocity import AnalyticVelocity, VelocityProvider

PI = np.pi


class Coupling(str, Enum):
    ANALYTIC = "analytic"
    FLUX_DERIVATIVE = "flux_derivative"
    GUIDING_CENTER = "guiding_center"
    STREAMFUNCTION = "streamfunction"


@dataclass(frozen=True)
class ProblemDef:
    name: str
    bounds: tuple
    bcs: tuple
    coupling: Coupling
    eps: float
    initial: Callable                       # u0(x, y)
    velocity: Callable[[], VelocityProvider]
    scheme: str = "ExplicitRK3"
    exact: Optional[Callable] = None        # u(x, y, t)
    params: dict = field(default_factory=dict)

    def grid(self, nx: int, ny: int | None = None) -> GridSpec:
        return make_grid(self.bounds, nx, nx if ny is None else ny, self.bcs)

    def initial_averages(self, g: GridSpec) -> np.ndarray:
        return cell_averages(self.initial, g)

    def exact_averages(self, g: GridSpec, t: float) -> np.ndarray:
        if self.exact is None:
            raise ValueError(f"{self.name} has no exact solution")
        return cell_averages(lambda x, y: self.exact(x, y, t), g)


_GX, _GW = np.polynomial.legendre.leggauss(4)


def cell_averages(f: Callable, g: GridSpec) -> np.ndarray:
    """Cell averages by a 4x4 tensor Gauss rule."""
    Xc, Yc = g.centers()
    out = np.zeros(g.shape)
    for a, wa in zip(_GX, _GW):
        for b, wb in zip(_GX, _GW):
            out += 0.25 * wa * wb * f(Xc + 0.5 * a * g.dx, Yc + 0.5 * b * g.dy)
    return out


# ---------------------------------------------------------------------------
# swirling deformation


SDF_PERIOD = 1.5
SDF_R0 = 0.3 * PI


class SDFKind(str, Enum):
    SMOOTH = "smooth"
    DISCONTINUOUS = "discontinuous"


def sdf_g(t):
    return np.cos(PI * t / SDF_PERIOD)


def sdf_a(x, y, t):
    return -2 * PI * np.cos(x / 2) ** 2 * np.sin(y) * sdf_g(t)


def sdf_b(x, y, t):
    return 2 * PI * np.sin(x) * np.cos(y / 2) ** 2 * sdf_g(t)


def cosine_bell(x, y):
    r = np.hypot(x - 0.3 * PI, y)
    return np.where(r < SDF_R0, SDF_R0 * np.cos(r * PI / (2 * SDF_R0)) ** 6, 0.0)


def sdf_discontinuous(x, y):
    r0 = SDF_R0
    out = np.zeros(np.broadcast(x, y).shape)
    # slotted cylinder
    cx, cy = 0.0, 0.5 * PI
    r = np.hypot(x - cx, y - cy)
    slot = (np.abs(x - cx) < 0.05 * PI) & (y < cy + 0.1 * PI)
    out = np.where((r < r0) & ~slot, 1.0, out)
    # cone
    r = np.hypot(x + 0.45 * PI, y + 0.25 * PI)
    out = np.where(r < r0, 1.0 - r / r0, out)
    # bell
    r = np.hypot(x - 0.45 * PI, y + 0.25 * PI)
    out = np.where(r < r0, 0.25 * (1 + np.cos(PI * r / r0)), out)
    return out


def swirling_deformation(kind=SDFKind.SMOOTH) -> ProblemDef:
    kind = SDFKind(kind)
    ic = cosine_bell if kind is SDFKind.SMOOTH else sdf_discontinuous

    def exact(x, y, t):
        # the flow reverses and returns every period
        if abs(t / SDF_PERIOD - round(t / SDF_PERIOD)) > 1e-12:
            raise ValueError("exact solution known only at multiples of the period")
        return ic(x, y)

    def velocity():
        # |a|, |b| <= 2 pi with equality at g = 1: fixed envelope keeps dt constant
        return AnalyticVelocity(sdf_a, sdf_b, speed_bound=(2 * PI, 2 * PI))

    return ProblemDef(f"sdf-{kind.value}", (-PI, PI, -PI, PI), (BC.PERIODIC, BC.PERIODIC),
                      Coupling.ANALYTIC, 0.0, ic, velocity, "ExplicitRK3", exact,
                      {"kind": kind.value})


# ---------------------------------------------------------------------------
# linearised Fokker-Planck


class LBFPInitial(str, Enum):
    MAXWELLIAN = "maxwellian"
    TWO_MAXWELLIANS = "two_maxwellians"


LBFP_R = 1.0 / 6
LBFP_T = 3.0
LBFP_N = PI
LBFP_EPS_C = 1.0
LBFP_MAXWELLIANS = (
    # n, vx, vy, T
    (1.990964530353041, 0.4979792385268875, 0.0, 2.46518981703837),
    (1.150628123236752, -0.8616676237412346, 0.0, 0.4107062104302872),
)


def maxwellian(vx, vy, n, ux, uy, T, R=LBFP_R):
    return n / (2 * PI * R * T) * np.exp(-((vx - ux) ** 2 + (vy - uy) ** 2) / (2 * R * T))


def lbfp_problem(ic=LBFPInitial.MAXWELLIAN) -> ProblemDef:
    ic = LBFPInitial(ic)
    if ic is LBFPInitial.MAXWELLIAN:
        bulk = (1.0, 1.0)

        def u0(x, y):
            return maxwellian(x, y, LBFP_N, 1.0, 1.0, LBFP_T)

        def exact(x, y, t):
            return u0(x, y)
    else:
        # the mixture carries n = pi, zero bulk velocity and T = 3
        bulk = (0.0, 0.0)

        def u0(x, y):
            return sum(maxwellian(x, y, n, ux, uy, T) for n, ux, uy, T in LBFP_MAXWELLIANS)

        exact = None
    D = LBFP_R * LBFP_T
    L = 2 * PI

    def velocity():
        ux, uy = bulk
        bound = ((L + abs(ux)) / LBFP_EPS_C, (L + abs(uy)) / LBFP_EPS_C)
        return AnalyticVelocity(lambda x, y, t: -(x - ux) / LBFP_EPS_C + 0 * y,
                                lambda x, y, t: -(y - uy) / LBFP_EPS_C + 0 * x,
                                speed_bound=bound)

    return ProblemDef(f"lbfp-{ic.value}", (-L, L, -L, L), (BC.ZERO_GHOST, BC.ZERO_GHOST),
                      Coupling.ANALYTIC, D / LBFP_EPS_C, u0, velocity, "IMEX233", exact,
                      {"R": LBFP_R, "bulk": bulk, "ic": ic.value})


# ---------------------------------------------------------------------------
# guiding centre Kelvin-Helmholtz


def kh_initial(x, y):
    return np.sin(y) + 0.015 * np.cos(0.5 * x)


def guiding_center_kh() -> ProblemDef:
    return ProblemDef("kh", (0.0, 4 * PI, 0.0, 2 * PI), (BC.PERIODIC, BC.PERIODIC),
                      Coupling.GUIDING_CENTER, 0.0, kh_initial, guiding_center_velocity,
                      "ExplicitRK3", None)


# ---------------------------------------------------------------------------
# incompressible Navier-Stokes (vorticity form)


class INSKind(str, Enum):
    SMOOTH = "smooth"
    VORTEX_PATCH = "vortex_patch"


INS_NU = 1.0 / 100


def vortex_patch(x, y):
    inx = (x >= PI / 2) & (x <= 1.5 * PI)
    low = inx & (y >= PI / 4) & (y <= 0.75 * PI)
    high = inx & (y >= 1.25 * PI) & (y <= 1.75 * PI)
    return np.where(low, -1.0, 0.0) + np.where(high, 1.0, 0.0)


def ins_problem(kind=INSKind.SMOOTH) -> ProblemDef:
    kind = INSKind(kind)
    if kind is INSKind.SMOOTH:
        def exact(x, y, t):
            return -2 * np.sin(x) * np.sin(y) * np.exp(-2 * t * INS_NU)

        def ic(x, y):
            return exact(x, y, 0.0)
    else:
        ic, exact = vortex_patch, None
    return ProblemDef(f"ins-{kind.value}", (0.0, 2 * PI, 0.0, 2 * PI), (BC.PERIODIC, BC.PERIODIC),
                      Coupling.STREAMFUNCTION, INS_NU, ic, streamfunction_velocity, "IMEX233",
                      exact, {"kind": kind.value})


REGISTRY = {
    "sdf": swirling_deformation,
    "lbfp": lbfp_problem,
    "kh": lambda variant=None: guiding_center_kh(),
    "ins": ins_problem,
}


def get_problem(name: str, variant: str | None = None) -> ProblemDef:
    if name not in REGISTRY:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(REGISTRY)}")
    f = REGISTRY[name]
    return f(variant) if variant else f()


# ---------------------------------------------------------------------------
# norms and diagnostics


def error_norms(u, exact, g: GridSpec):
    """Domain-averaged L1 and L2 errors and the max error of cell averages.

    ``exact`` is either an array of exact averages or a callable ``f(x, y)``.
    L1 and L2 are normalised by the domain area so they are mean errors.
    """
    ref = exact if isinstance(exact, np.ndarray) else cell_averages(exact, g)
    e = np.asarray(u) - ref
    n = e.size
    return (float(np.sum(np.abs(e)) / n), float(np.sqrt(np.sum(e * e) / n)),
            float(np.max(np.abs(e))))


def observed_orders(errors, ratio: float = 2.0):
    errors = np.asarray(errors, dtype=float)
    return np.log(errors[:-1] / errors[1:]) / np.log(ratio)


def restrict(u, factor: int):
    """Average a fine cell field onto a grid ``factor`` times coarser."""
    nx, ny = u.shape
    return u.reshape(nx // factor, factor, ny // factor, factor).mean(axis=(1, 3))


def diagnostics(u, problem: ProblemDef, g: GridSpec) -> dict:
    u = np.asarray(u)
    area = g.cell_area
    rec = {"mass": float(np.sum(u) * area)}
    name = problem.name
    Xc, Yc = g.centers()
    if name.startswith("lbfp"):
        n = rec["mass"]
        if n <= 0:
            raise ValueError("non-positive number density; moments undefined")
        vx = float(np.sum(Xc * u) * area / n)
        vy = float(np.sum(Yc * u) * area / n)
        T = float(np.sum(((Xc - vx) ** 2 + (Yc - vy) ** 2) * u) * area / (2 * n * problem.params["R"]))
        rec.update(n=n, vx=vx, vy=vy, T=T)
    elif name == "kh":
        Ac, Bc = solve_guiding_center(u, g, at="centers")
        rec.update(energy=float(np.sum(Ac ** 2 + Bc ** 2) * area),
                   entropy=float(np.sum(u ** 2) * area))
    return rec


@dataclass
class DiagnosticsSeries:
    t: list = field(default_factory=list)
    records: list = field(default_factory=list)

    def append(self, t: float, rec: dict):
        self.t.append(float(t))
        self.records.append(dict(rec))

    def column(self, key: str) -> np.ndarray:
        return np.array([r[key] for r in self.records])

    def keys(self):
        return list(self.records[0]) if self.records else []

    def relative_deviation(self, key: str, scale: float | None = None) -> np.ndarray:
        """(Q(t) - Q(0)) / |Q(0)|, or divided by ``scale`` when Q(0) is near zero."""
        q = self.column(key)
        return (q - q[0]) / (abs(q[0]) if scale is None else scale)

    def __len__(self):
        return len(self.t)
