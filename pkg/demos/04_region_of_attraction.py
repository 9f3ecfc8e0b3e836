"""
Region of attraction
====================

Random non-collinear starts all reach the target; exactly collinear starts
all end at a collinear equilibrium. Trials are seeded per index, so running
with several workers gives the same report.
"""

from triformation import FormationSpec
from triformation.experiments import region_of_attraction_study

for d in [(1, 1, 1), (3, 4, 5)]:
    spec = FormationSpec(*d)
    gauss = region_of_attraction_study(spec, 200, "gaussian", seed=42, workers=2)
    line = region_of_attraction_study(spec, 50, "collinear", seed=42)
    print(f"d = {d}")
    print("   gaussian starts :", gauss.counts(), "rates", gauss.rate_stats())
    print("   collinear starts:", line.counts())
    print("   dichotomy holds :", gauss.dichotomy_holds() and line.dichotomy_holds())
    slow = max(gauss.trials, key=lambda t: t.final_time)
    print(f"   slowest trial #{slow.trial}: t = {slow.final_time:.2f}, starting |area| {abs(slow.e0[0] * slow.e0[3] - slow.e0[1] * slow.e0[2]):.2e}")
