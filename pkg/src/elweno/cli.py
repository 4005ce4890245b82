"""Benchmark harness: ``elweno {run,converge,cflsweep,selftest}``.

Configuration is a flat ``key=value`` file (``#`` starts a comment); every key
can also be given on the command line as ``--key value``.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from .problems import (REGISTRY, diagnostics, error_norms, get_problem, observed_orders,
                       restrict)
from .timestepping import (ImplicitSolver, NumericalFailure, Scheme, SolverNonConvergence,
                           run)
from .velocity import NonConvexUpstreamCell
from .weno import WenoParams

log = logging.getLogger("elweno")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_SOLVER = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


def _floats(s):
    if isinstance(s, (list, tuple)):
        return [float(v) for v in s]
    return [float(v) for v in str(s).replace(";", ",").split(",") if v.strip()]


def _ints(s):
    return [int(v) for v in _floats(s)]


@dataclass
class RunConfig:
    problem: str = "sdf"
    variant: str = ""
    nx: int = 40
    ny: int = 0            # 0: same as nx
    cfl: float = 1.0
    t_end: float = 1.5
    scheme: str = ""       # empty: the problem's default
    weno_gamma0: float = 0.6
    weno_eps: float = 1e-10
    cg_tol: float = 1e-12
    cg_maxiter: int = 2000
    snapshot_times: list = field(default_factory=list)
    levels: list = field(default_factory=list)
    reference: int = 0     # converge: reference mesh when no exact solution exists
    cfls: list = field(default_factory=list)
    out: str = "."

    _CASTS = {
        "nx": int, "ny": int, "cfl": float, "t_end": float, "weno_gamma0": float,
        "weno_eps": float, "cg_tol": float, "cg_maxiter": int, "reference": int,
        "snapshot_times": _floats, "levels": _ints, "cfls": _floats,
    }

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]

    def update(self, pairs: dict):
        for k, v in pairs.items():
            k = k.replace("-", "_")
            if k not in self.keys():
                raise ConfigError(f"unknown config key {k!r}")
            try:
                setattr(self, k, self._CASTS.get(k, str)(v))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {k}: {v!r} ({exc})") from None
        return self

    def validate(self):
        if self.problem not in REGISTRY:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {sorted(REGISTRY)}")
        try:
            self.problem_def()
        except ValueError as exc:
            raise ConfigError(f"bad variant {self.variant!r} for {self.problem}: {exc}") from None
        if self.scheme:
            try:
                Scheme(self.scheme)
            except ValueError:
                raise ConfigError(f"unknown scheme {self.scheme!r}; choose from "
                                  f"{[s.value for s in Scheme]}") from None
        if self.nx < 5 or (self.ny and self.ny < 5):
            raise ConfigError("nx and ny must be at least 5")
        if any(n < 5 for n in self.levels):
            raise ConfigError("every level must have at least 5 cells")
        if self.cfl <= 0 or any(c <= 0 for c in self.cfls):
            raise ConfigError("CFL numbers must be positive")
        if self.t_end < 0:
            raise ConfigError("t_end must be non-negative")
        if not 0 < self.weno_gamma0 < 1 or self.weno_eps < 0:
            raise ConfigError("need 0 < weno_gamma0 < 1 and weno_eps >= 0")
        return self

    def problem_def(self):
        return get_problem(self.problem, self.variant or None)

    def weno(self) -> WenoParams:
        g0 = self.weno_gamma0
        return WenoParams((g0,) + ((1 - g0) / 8,) * 8, self.weno_eps)

    def solver(self) -> ImplicitSolver:
        return ImplicitSolver(tol=self.cg_tol, maxiter=self.cg_maxiter)


def read_config(path) -> dict:
    pairs = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            pairs[k.strip()] = v.strip()
    return pairs


# ---------------------------------------------------------------------------
# output


def fmt(x: float) -> str:
    return f"{x:.16e}"


def write_snapshot(path, u, g, t):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"nx {g.nx}\n")
        fh.write(f"ny {g.ny}\n")
        fh.write(f"bounds {fmt(g.x_lo)} {fmt(g.x_hi)} {fmt(g.y_lo)} {fmt(g.y_hi)}\n")
        fh.write(f"time {fmt(t)}\n")
        for i in range(g.nx):
            fh.write(" ".join(fmt(v) for v in u[i]) + "\n")


def read_snapshot(path):
    with open(path, encoding="utf-8") as fh:
        nx = int(fh.readline().split()[1])
        ny = int(fh.readline().split()[1])
        bounds = tuple(float(v) for v in fh.readline().split()[1:])
        t = float(fh.readline().split()[1])
        u = np.loadtxt(fh, ndmin=2)
    if u.shape != (nx, ny):
        raise ValueError(f"snapshot body has shape {u.shape}, header says {(nx, ny)}")
    return u, bounds, t


def write_diagnostics(path, series):
    keys = [k for k in series.keys()]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + keys)
        for t, rec in zip(series.t, series.records):
            w.writerow([fmt(t)] + [fmt(rec[k]) for k in keys])


def _order_cells(errors):
    orders = observed_orders(errors) if len(errors) > 1 else []
    return ["---"] + [fmt(o) for o in orders]


def write_errors(path, meshes, rows):
    """rows: list of (L1, L2, Linf) per mesh."""
    cols = list(zip(*rows)) if rows else [[], [], []]
    ords = [_order_cells(list(c)) for c in cols]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["mesh", "L1", "order", "L2", "order", "Linf", "order"])
        for k, m in enumerate(meshes):
            w.writerow([m, fmt(rows[k][0]), ords[0][k], fmt(rows[k][1]), ords[1][k],
                        fmt(rows[k][2]), ords[2][k]])


# ---------------------------------------------------------------------------
# commands


def _run_one(cfg: RunConfig, nx, ny=None, cfl=None, snapshots=(), out=None):
    prob = cfg.problem_def()
    g = prob.grid(nx, ny or None)
    marks = sorted(t for t in snapshots if 0 <= t <= cfg.t_end)
    u = prob.initial_averages(g)
    t0 = 0.0
    series = None
    # integrate piecewise so snapshot times are hit exactly
    for tm in marks + [cfg.t_end]:
        if tm > t0:
            u, part = run(prob, g, cfl or cfg.cfl, tm - t0, cfg.scheme or None, u0=u,
                          solver=cfg.solver(), weno=cfg.weno())
            part.t = [t0 + s for s in part.t]
            if series is None:
                series = part
            else:
                series.t += part.t[1:]
                series.records += part.records[1:]
            t0 = tm
        if out is not None and tm in marks:
            write_snapshot(os.path.join(out, f"snapshot_t{tm:.6g}.txt"), u, g, tm)
    if series is None:
        from .problems import DiagnosticsSeries
        series = DiagnosticsSeries()
        series.append(0.0, diagnostics(u, prob, g))
    return prob, g, u, series


def cmd_run(cfg: RunConfig):
    os.makedirs(cfg.out, exist_ok=True)
    prob, g, u, series = _run_one(cfg, cfg.nx, cfg.ny, snapshots=cfg.snapshot_times, out=cfg.out)
    write_snapshot(os.path.join(cfg.out, "snapshot_final.txt"), u, g, cfg.t_end)
    write_diagnostics(os.path.join(cfg.out, "diagnostics.csv"), series)
    if prob.exact is not None:
        try:
            e = error_norms(u, prob.exact_averages(g, cfg.t_end), g)
        except ValueError:
            e = None
        if e is not None:
            write_errors(os.path.join(cfg.out, "errors.csv"), [f"{g.nx}x{g.ny}"], [e])
    log.info("run finished: %s %dx%d t=%g", prob.name, g.nx, g.ny, cfg.t_end)
    return u


def cmd_converge(cfg: RunConfig):
    os.makedirs(cfg.out, exist_ok=True)
    levels = cfg.levels or [cfg.nx]
    prob = cfg.problem_def()
    sols = {}
    for n in levels:
        _, g, u, _ = _run_one(cfg, n)
        sols[n] = (g, u)
        log.info("level %d done", n)
    rows = []
    if prob.exact is not None and not cfg.reference:
        for n in levels:
            g, u = sols[n]
            rows.append(error_norms(u, prob.exact_averages(g, cfg.t_end), g))
    else:
        ref_n = cfg.reference or max(levels)
        if ref_n in sols:
            gr, ur = sols[ref_n]
        else:
            _, gr, ur, _ = _run_one(cfg, ref_n)
        levels = [n for n in levels if n != ref_n]
        for n in levels:
            g, u = sols[n]
            if ref_n % n:
                raise ConfigError(f"reference {ref_n} is not a multiple of level {n}")
            rows.append(error_norms(u, restrict(ur, ref_n // n), g))
    write_errors(os.path.join(cfg.out, "errors.csv"), [f"{n}x{n}" for n in levels], rows)
    return rows


def cmd_cflsweep(cfg: RunConfig):
    os.makedirs(cfg.out, exist_ok=True)
    prob = cfg.problem_def()
    cfls = cfg.cfls or [cfg.cfl]
    g = prob.grid(cfg.nx, cfg.ny or None)
    u0 = prob.initial_averages(g)
    rng = float(u0.max() - u0.min()) or 1.0
    ref = None
    if prob.exact is not None:
        try:
            ref = prob.exact_averages(g, cfg.t_end)
        except ValueError:
            ref = None
    out = []
    for c in cfls:
        try:
            _, _, u, _ = _run_one(cfg, cfg.nx, cfg.ny, cfl=c)
            stable = bool(np.all(np.isfinite(u)) and np.max(np.abs(u)) < 10 * rng)
        except (NumericalFailure, FloatingPointError):
            u, stable = None, False
        l2 = error_norms(u, ref, g)[1] if (stable and ref is not None) else float("nan")
        out.append((c, l2, stable))
        log.info("cfl %g: L2 %s stable %s", c, l2, stable)
    with open(os.path.join(cfg.out, "cflsweep.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["cfl", "L2", "stable"])
        for c, l2, s in out:
            w.writerow([fmt(c), fmt(l2), int(s)])
    return out


def cmd_selftest(cfg: RunConfig):
    from .selftest import run_selftest

    failures = run_selftest()
    for name, ok, detail in failures:
        print(f"{'PASS' if ok else 'FAIL'} {name} {detail}")
    if not all(ok for _, ok, _ in failures):
        raise NumericalFailure("selftest failed")
    return failures


COMMANDS = {"run": cmd_run, "converge": cmd_converge, "cflsweep": cmd_cflsweep,
            "selftest": cmd_selftest}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="elweno", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="key=value configuration file")
    ap.add_argument("--threads", type=int, default=0, help="worker threads (default: all cores)")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _parse_overrides(rest):
    pairs = {}
    k = 0
    while k < len(rest):
        tok = rest[k]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            k += 1
        else:
            if k + 1 >= len(rest):
                raise ConfigError(f"missing value for --{key}")
            val = rest[k + 1]
            k += 2
        pairs[key] = val
    return pairs


def _fail(code, kind, msg):
    print(f"ERROR code={code} kind={kind} message={msg}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    ap = build_parser()
    args, rest = ap.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = RunConfig()
        if args.config:
            cfg.update(read_config(args.config))
        cfg.update(_parse_overrides(rest))
        if args.out:
            cfg.out = args.out
        cfg.validate()
    except (ConfigError, OSError) as exc:
        return _fail(EXIT_CONFIG, "config", exc)
    if args.threads:
        try:
            import numba
            numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
        except (ImportError, ValueError):
            pass
    try:
        COMMANDS[args.command](cfg)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", exc)
    except SolverNonConvergence as exc:
        return _fail(EXIT_SOLVER, "solver", exc)
    except (NumericalFailure, NonConvexUpstreamCell) as exc:
        return _fail(EXIT_NUMERICAL, "numerical", exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
