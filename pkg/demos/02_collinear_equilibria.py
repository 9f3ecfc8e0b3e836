"""
Collinear equilibria and their Gamma values
===========================================

Collinear equilibria satisfy e2 = x e1, e3 = -(1+x) e1 with s = |e1|^2.
Eliminating s leaves a quartic in x. Apart from equilateral targets, where
the quartic vanishes identically and a whole curve of equilibria appears,
there are finitely many roots.
"""

import numpy as np

from triformation import FormationSpec, collinear_equilibria
from triformation.equilibria import quartic_coefficients
from triformation.experiments import random_specs

for d in [(3, 4, 5), (2, 3, 3), (1, 1, 1)]:
    spec = FormationSpec(*d)
    print(f"d = {d}: quartic coefficients {np.round(quartic_coefficients(spec), 6)}")
    for r in collinear_equilibria(spec):
        x = "-" if r.x is None else f"{r.x: .6f}"
        tag = " (family sample)" if r.family else ""
        print(f"   {r.kind.value:24s} x = {x:>10s}  s = {r.s:.6g}  gamma = {r.gamma_scalar():.6g}"
              f"  psi_sum = {r.psi_sum:.6g}{tag}")

# Every collinear equilibrium has a positive Gamma and a negative psi sum.
# The largest real part of the link-space Jacobian spectrum equals -psi_sum:
# it is the growth rate of the signed area e1^T J e2.
worst_gamma, worst_sum, far = np.inf, -np.inf, 0
for spec in random_specs(500, seed=1):
    for r in collinear_equilibria(spec):
        worst_gamma = min(worst_gamma, r.gamma_scalar())
        worst_sum = max(worst_sum, r.psi_sum)
        far += r.x is not None and abs(r.x) > 10
print(f"500 random specs: min gamma {worst_gamma:.3g}, max psi_sum {worst_sum:.3g}")
print(f"roots with |x| > 10: {far}  (a search window of |x| <= 10 would miss these)")
