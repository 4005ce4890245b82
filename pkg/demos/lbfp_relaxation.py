"""Two drifting Maxwellians relax to one under the linearised Fokker-Planck operator.

Drift pulls every velocity toward the mean, diffusion spreads it, and the
IMEX(2,3,3) scheme treats the stiff diffusion implicitly.  Number density,
bulk velocity and temperature are conserved or relax to their equilibrium
values; the distribution itself stops changing once equilibrium is reached.

    python demos/lbfp_relaxation.py
"""
import numpy as np

from elweno.problems import diagnostics, get_problem, maxwellian
from elweno.timestepping import run

prob = get_problem("lbfp", "two_maxwellians")
g = prob.grid(64)
u0 = prob.initial_averages(g)

u, series = run(prob, g, 3.0, 3.0)
t = np.array(series.t)
n_dev = np.max(np.abs(series.relative_deviation("n")))
print(f"{len(t) - 1} steps to t = 3, max relative change of n: {n_dev:.1e}")
for key in ("vx", "vy", "T"):
    col = series.column(key)
    print(f"  {key:2s}: {col[0]: .6f} -> {col[-1]: .6f}")

# The equilibrium is the Maxwellian carrying the same moments.
rec = diagnostics(u, prob, g)
Xc, Yc = g.centers()
eq = maxwellian(Xc, Yc, rec["n"], rec["vx"], rec["vy"], rec["T"])
print(f"L1 distance to the matching Maxwellian: {np.sum(np.abs(u - eq)) * g.cell_area:.2e}")
print(f"L1 distance from the initial mixture:    {np.sum(np.abs(u - u0)) * g.cell_area:.2e}")
