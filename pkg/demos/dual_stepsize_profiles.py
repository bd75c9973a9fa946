"""How the dual step-size changes iteration counts.

Runs ADMM at three values of ``tau`` and PALM on a small grid of penalties and
weights, then prints the performance profile on iteration counts: the share
of problems each solver finishes within a factor ``nu`` of the fastest one.
"""

import numpy as np

from ncxadmm import bench
from ncxadmm.regularizers import PenaltySpec

scenes = [("noisy", bench.moving_box_scene(12, 16, 30, box=(4, 4), noise_sigma=0.02, seed=0)),
          ("blurred", bench.moving_box_scene(12, 16, 30, box=(4, 4), noise_sigma=0.02, seed=2))]
penalties = [PenaltySpec("bridge", 1.0, p=0.5), PenaltySpec("fraction", 1.0, alpha=1.0)]

cells = [bench.Cell(f"scene_{sc}", scene, sc, pen.with_mu(mu), tuple(bench.default_solvers(sc)))
         for sc, scene in scenes for pen in penalties for mu in (0.1, 0.05, 0.01)]
rows = bench.run_sweep(cells)

iters, names = bench.profile_table(rows, "iter")
fvals, _ = bench.profile_table(rows, "objective")
nu = np.array([1.0, 1.25, 1.5, 2.0, 4.0])
prof = bench.performance_profile(bench.performance_ratios(iters), nu)

print("nu     " + "  ".join(f"{n:>12s}" for n in names))
for v, row in zip(nu, prof):
    print(f"{v:<6g} " + "  ".join(f"{x:12.2f}" for x in row))
print("mean final objective:",
      ", ".join(f"{n}={f:.4f}" for n, f in zip(names, fvals.mean(axis=0))))
