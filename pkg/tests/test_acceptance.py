"""Acceptance criteria, one test each, with a PASS/FAIL line per criterion.

Criterion 1 asks for three-way agreement of the V-dot expressions. The two
closed forms agree with each other but are twice the chain-rule derivative,
so that test is expected to fail; the corrected relation is checked next to it.
"""
import time

import numpy as np
import pytest

from conftest import report
from triformation.algebra import FormationSpec
from triformation.dynamics import Classification, exponential_tail, integrate
from triformation.equilibria import (
    EquilibriumKind,
    all_equilibria,
    brute_force_collinear,
    collinear_equilibria,
    collinear_residuals,
)
from triformation.experiments import (
    initial_links,
    probe_equilibrium,
    random_specs,
    vdot_identity_suite_raw,
)
from triformation.manifolds import gamma_collocated_closed

SPEC_111 = FormationSpec(1.0, 1.0, 1.0)
SPEC_345 = FormationSpec(3.0, 4.0, 5.0)


def test_criterion_1_vdot_three_way_identity():
    t0 = time.perf_counter()
    rep = vdot_identity_suite_raw(SPEC_111, n_samples=1000, seed=7)
    dt = time.perf_counter() - t0
    spread = max(rep.chain_vs_squares, rep.chain_vs_rigidity, rep.squares_vs_rigidity)
    ok = spread <= 1e-10 and dt < 1.0
    report(1, ok, f"max relative spread {spread:.3e} (tol 1e-10), closed/chain ratio {rep.closed_ratio:.6f}, "
                  f"{dt:.2f} s")
    assert spread <= 1e-10
    assert dt < 1.0


def test_criterion_1_corrected_relation():
    # Not a criterion by itself: documents what does hold at the same tolerance.
    for spec, scale in ((SPEC_111, 1.0), (SPEC_345, 1.0), (SPEC_345, 10.0)):
        rep = vdot_identity_suite_raw(spec, n_samples=1000, seed=7, scale=scale)
        assert rep.squares_vs_rigidity <= 1e-10
        assert rep.chain_vs_half_closed <= 1e-10


def test_criterion_2_collocated_gamma():
    t0 = time.perf_counter()
    w = np.linalg.eigvalsh(gamma_collocated_closed(SPEC_111))
    spectrum_ok = np.allclose(w, [3, 3, 9, 9], atol=1e-12)
    specs = random_specs(1000, seed=2)
    mins = [np.linalg.eigvalsh(gamma_collocated_closed(s))[0] for s in specs]
    dt = time.perf_counter() - t0
    ok = spectrum_ok and min(mins) > 0 and dt < 5
    report(2, ok, f"(1,1,1) eigenvalues {np.round(w, 12).tolist()}, min eigenvalue over 1000 specs "
                  f"{min(mins):.4g}, {dt:.2f} s")
    assert ok


def test_criterion_3_collinear_catalog():
    t0 = time.perf_counter()
    r = next(r for r in collinear_equilibria(SPEC_111) if r.x == 1.0)
    ok_x1 = (abs(r.s - 1 / 3) < 1e-12 and np.allclose(r.psi, [-2 / 3, -2 / 3, 1 / 3], atol=1e-12)
             and abs(r.gamma_scalar() - 2) <= 1e-9 and abs(r.psi_sum + 1) < 1e-12)
    # For an equilateral spec the oracle returns points scattered along the
    # continuum s = 1/(x^2 + x + 1); confirm it traces that curve on both sides
    # of x = 1 and that (1, 1/3) solves the oracle's own residual equations.
    grid = brute_force_collinear(SPEC_111)
    on_curve = np.allclose(grid[:, 1], 1 / (grid[:, 0] ** 2 + grid[:, 0] + 1), rtol=1e-9)
    near = grid[np.abs(grid[:, 0] - 1) < 0.1]
    brackets = bool(near.size) and near[:, 0].min() < 1 < near[:, 0].max()
    ok_oracle_x1 = on_curve and brackets and np.abs(collinear_residuals(1.0, 1 / 3, SPEC_111)).max() < 1e-14
    mismatches = []
    for spec in random_specs(10, seed=3):
        sol = sorted((q.x, q.s) for q in collinear_equilibria(spec) if q.x is not None)
        # widen the oracle window past the largest solver root so full sets are compared
        x_max = max(10.0, 1.25 * max(abs(x) for x, _ in sol))
        orc = brute_force_collinear(spec, x_max=x_max)
        same = len(orc) == len(sol) and all(
            abs(a[0] - b[0]) <= 1e-6 and abs(a[1] - b[1]) <= 1e-6 * (1 + abs(a[1])) for a, b in zip(sol, orc))
        if not same:
            mismatches.append((spec.as_tuple(), sol, orc.tolist()))
    dt = time.perf_counter() - t0
    ok = ok_x1 and ok_oracle_x1 and not mismatches and dt < 30
    report(3, ok, f"x=1 branch s={r.s:.12g} gamma={r.gamma_scalar():.12g} psi_sum={r.psi_sum:.12g}, "
                  f"oracle sees it: {ok_oracle_x1}, root-set mismatches on 10 specs: {len(mismatches)}, {dt:.1f} s")
    assert ok, mismatches


def test_criterion_4_psi_sum_negative():
    t0 = time.perf_counter()
    worst, count = -np.inf, 0
    for spec in random_specs(200, seed=4):
        for r in collinear_equilibria(spec):
            worst = max(worst, r.psi_sum)
            count += 1
    dt = time.perf_counter() - t0
    ok = worst < 0 and dt < 60
    report(4, ok, f"{count} collinear equilibria on 200 specs, largest psi_sum {worst:.4g}, {dt:.1f} s")
    assert ok


def test_criterion_5_outward_probes():
    t0 = time.perf_counter()
    n, worst_slope, bad = 0, 0.0, []
    for spec in random_specs(20, seed=5):
        for rec in all_equilibria(spec):
            if rec.kind is EquilibriumKind.TARGET:
                continue
            for pr in probe_equilibrium(rec, spec, eps_ladder=(1e-4, 1e-5, 1e-6)):
                n += 1
                worst_slope = max(worst_slope, pr.slope_error)
                if not (np.all(pr.inner_products > 0) and pr.slope_error <= 0.05):
                    bad.append((spec.as_tuple(), rec.kind.value, pr.inner_products.tolist()))
    dt = time.perf_counter() - t0
    ok = not bad and dt < 60
    report(5, ok, f"{n} probes, {len(bad)} non-positive or off-slope, worst slope error {worst_slope:.2e}, {dt:.1f} s")
    assert ok, bad[:5]


@pytest.fixture(scope="module")
def corpus():
    """Trajectories for criteria 6-8: 500 Gaussian and 100 collinear starts per spec."""
    t0 = time.perf_counter()
    runs = {}
    for spec in (SPEC_111, SPEC_345):
        for dist, n in (("gaussian", 500), ("collinear", 100)):
            recs = []
            for i in range(n):
                e0 = initial_links(spec, dist, np.random.default_rng([42, i]))
                recs.append(integrate(e0, spec))
            runs[(spec.as_tuple(), dist)] = recs
    return runs, time.perf_counter() - t0


def test_criterion_6_region_of_attraction(corpus):
    runs, dt = corpus
    notes, ok = [], dt < 600
    for (d, dist), recs in runs.items():
        if dist == "gaussian":
            good = [r.classification is Classification.TARGET
                    and np.max(np.abs(r.final_lengths() - np.array(d))) <= 1e-6 for r in recs]
        else:
            good = [r.classification is Classification.COLLINEAR and r.max_abs_collinearity() <= 1e-7 for r in recs]
        ok &= all(good)
        notes.append(f"{d} {dist} {sum(good)}/{len(recs)}")
    report(6, ok, "; ".join(notes) + f"; {dt:.0f} s")
    assert ok


def test_criterion_7_exponential_tail(corpus):
    runs, _ = corpus
    fits = [exponential_tail(r) for recs in runs.values() for r in recs
            if r.classification is Classification.TARGET]
    bad = [f for f in fits if not (f[0] < 0 and f[1] > 0.99)]
    ok = bool(fits) and not bad
    report(7, ok, f"{len(fits)} target trajectories, {len(bad)} failing fits, "
                  f"min R^2 {min(f[1] for f in fits):.6f}, max slope {max(f[0] for f in fits):.3f}")
    assert ok


def test_criterion_8_conservation(corpus):
    runs, _ = corpus
    recs = [r for rs in runs.values() for r in rs]
    cyc = max(r.max_cycle_residual() for r in recs)
    excess = max(r.max_potential_excess() for r in recs)
    ok = cyc <= 1e-9 and excess <= 1.0
    report(8, ok, f"{len(recs)} trajectories, max |e1+e2+e3| {cyc:.2e}, "
                  f"largest V step rise {excess:.3g} x 1e-10(1+V)")
    assert ok
