"""
Leaving the line
================

Collinear formations stay collinear forever, but the line set repels.
Nudging a collinear equilibrium off the line by eps along its normal sends
the robots to the target; smaller nudges only take longer.

A second experiment shows the repulsion acting on round-off: a collinear
start on an oblique line is collinear only up to rounding, and that tiny
area grows until the formation escapes. On a horizontal line the area is
exactly zero and stays zero.
"""

import numpy as np

from triformation import FormationSpec, integrate, links_from_positions
from triformation.algebra import oriented_area2
from triformation.experiments import near_collinear_escape_study

spec = FormationSpec(1.0, 1.0, 1.0)
rep = near_collinear_escape_study(spec, offsets=(1e-2, 1e-4, 1e-8, 1e-12, 0.0))
for t in rep.trials:
    if t.equilibrium == rep.trials[-1].equilibrium:
        print(f"eps = {t.eps:7.0e}: {t.classification:22s} t = {t.final_time:8.3f}"
              f"  min distance to collinear equilibria {t.min_distance:.2e}")

rng = np.random.default_rng(7)
pts = rng.standard_normal(3)
angle = 0.6
u = np.array([np.cos(angle), np.sin(angle)])
z_oblique = np.concatenate([p * u for p in pts])
z_flat = np.concatenate([[p, 0.0] for p in pts])
for name, z in (("oblique", z_oblique), ("horizontal", z_flat)):
    e0 = links_from_positions(z)
    rec = integrate(e0, spec)
    print(f"{name:10s} line: initial area {oriented_area2(e0):+.1e} -> {rec.classification.value}"
          f" at t = {rec.final_time:.2f}, max |area| {rec.max_abs_collinearity():.2e}")
