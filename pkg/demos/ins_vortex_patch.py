"""Incompressible Navier-Stokes in vorticity form.

First the smooth Taylor-Green-type vortex, whose exact solution only decays,
checks the combined convection/diffusion accuracy.  Then the two-box vortex
patch shows how discontinuous vorticity is wound up without overshoots
growing, while total vorticity stays at round-off.

    python demos/ins_vortex_patch.py
"""
import numpy as np

from elweno.problems import error_norms, get_problem, observed_orders
from elweno.timestepping import run

smooth = get_problem("ins", "smooth")
errs = []
for n in (16, 32, 64):
    g = smooth.grid(n)
    u, _ = run(smooth, g, 1.0, 0.5, diagnostics=False)
    errs.append(error_norms(u, smooth.exact_averages(g, 0.5), g)[0])
print("smooth vortex L1 errors:", ", ".join(f"{e:.2e}" for e in errs))
print("observed orders:        ", ", ".join(f"{o:.2f}" for o in observed_orders(errs)))

patch = get_problem("ins", "vortex_patch")
g = patch.grid(64)
w, series = run(patch, g, 5.0, 5.0)
print(f"\nvortex patch at t = 5 on 64x64, {len(series) - 1} steps of CFL 5")
print(f"  vorticity range [{w.min():+.3f}, {w.max():+.3f}] (initially [-1, 1])")
print(f"  total vorticity {series.column('mass')[-1]:+.1e}")
