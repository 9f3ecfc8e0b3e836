import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from triformation.algebra import FormationSpec, is_collinear, psi
from triformation.equilibria import (
    CATALOG_COLUMNS,
    EquilibriumKind,
    all_equilibria,
    brute_force_collinear,
    catalog_json,
    collinear_condition,
    collinear_equilibria,
    collinear_links,
    collinear_residuals,
    orbit_distance,
    quartic_coefficients,
    relabel_links,
    target_separation,
    verify_psi_sum_negative,
    write_catalog_csv,
)
from triformation.errors import VerificationError
from triformation.experiments import random_specs
from triformation.manifolds import equilibrium_residual

lengths = st.floats(0.1, 10.0)


def realizable(d):
    return all(d[i] < d[(i + 1) % 3] + d[(i + 2) % 3] * (1 - 1e-6) for i in range(3))


def test_equilateral_x1_branch():
    recs = collinear_equilibria(FormationSpec(1, 1, 1))
    r = next(r for r in recs if r.x == 1.0)
    assert r.s == pytest.approx(1 / 3)
    assert np.allclose(r.psi, [-2 / 3, -2 / 3, 1 / 3])
    assert r.gamma_scalar() == pytest.approx(2.0, abs=1e-9)
    assert r.psi_sum == pytest.approx(-1.0)
    assert r.family


def test_equilateral_family_is_a_curve():
    # P vanishes identically and every x carries an equilibrium with s = 1/(x^2+x+1)
    assert np.allclose(quartic_coefficients((1, 1, 1)), 0)
    for x in (-4.0, -0.7, 0.3, 5.0):
        s = 1 / (x * x + x + 1)
        assert np.abs(collinear_residuals(x, s, (1, 1, 1))).max() < 1e-14
    pts = brute_force_collinear((1, 1, 1), nx=801, ns=200)
    assert len(pts) > 20
    assert np.allclose(pts[:, 1], 1 / (pts[:, 0] ** 2 + pts[:, 0] + 1), rtol=1e-6)


def test_345_catalog():
    spec = FormationSpec(3, 4, 5)
    recs = all_equilibria(spec)
    kinds = [r.kind for r in recs]
    assert kinds.count(EquilibriumKind.ORIGIN) == 1
    assert kinds.count(EquilibriumKind.TARGET) == 2
    coll = [r for r in recs if r.is_collinear]
    assert sorted(round(r.x, 5) for r in coll) == [-0.76583, 2.32138]
    for r in recs:
        assert equilibrium_residual(r.e, spec) < 1e-9 * (1 + np.linalg.norm(r.e) ** 3)
    for r in coll:
        assert r.gamma_scalar() > 0 and r.psi_sum < 0
        assert is_collinear(r.e)
        # the transverse eigenvalue equals -psi_sum, so every collinear point is unstable
        assert r.max_real_eigenvalue() == pytest.approx(-r.psi_sum, rel=1e-9)
    for r in recs:
        if r.kind is EquilibriumKind.TARGET:
            assert np.allclose(np.linalg.norm(r.e.reshape(3, 2), axis=1), spec.distances)


def test_collocated_pairs_need_equal_lengths():
    recs = collinear_equilibria(FormationSpec(2.0, 3.0, 3.0))
    pairs = [r for r in recs if r.kind is EquilibriumKind.COLLOCATED_PAIR]
    assert len(pairs) == 1
    assert np.allclose(pairs[0].e[:2], 0)
    assert not any(r.kind is EquilibriumKind.COLLOCATED_PAIR for r in collinear_equilibria(FormationSpec(3, 4, 5)))


@pytest.mark.parametrize("spec", random_specs(6, seed=21), ids=str)
def test_solver_matches_grid_oracle(spec):
    solver = sorted((r.x, r.s) for r in collinear_equilibria(spec) if r.x is not None)
    oracle = brute_force_collinear(spec)
    inside = [p for p in solver if abs(p[0]) <= 10]
    assert len(oracle) == len(inside)
    for (x, s), (xo, so) in zip(inside, oracle):
        assert x == pytest.approx(xo, abs=1e-6)
        assert s == pytest.approx(so, rel=1e-6)


def test_roots_beyond_the_default_window():
    # a spec whose quartic has a root well past |x| = 10
    spec = next(s for s in random_specs(400, seed=3)
                if any(r.x is not None and 10 < abs(r.x) < 60 for r in collinear_equilibria(s)))
    far = [r for r in collinear_equilibria(spec) if r.x is not None and abs(r.x) > 10]
    pts = brute_force_collinear(spec, x_max=100, nx=20001)
    for r in far:
        assert np.min(np.abs(pts[:, 0] - r.x)) < 1e-6 * (1 + abs(r.x))


@settings(max_examples=40, deadline=None)
@given(st.tuples(lengths, lengths, lengths).filter(realizable))
def test_collinear_records_are_equilibria(d):
    spec = FormationSpec(*d)
    recs = collinear_equilibria(spec)
    assert recs
    for r in recs:
        assert equilibrium_residual(r.e, spec) <= 1e-8 * (1 + np.linalg.norm(r.e) ** 3)
        assert r.psi_sum < 0
        assert r.gamma_scalar() > 0
        assert np.allclose(psi(r.e, spec), r.psi)


def test_quartic_factored_form_agrees():
    spec = (2.0, 2.5, 1.2)
    c = quartic_coefficients(spec)
    for x in np.linspace(-3, 3, 13):
        assert collinear_condition(x, spec) == pytest.approx(np.polyval(c, x), rel=1e-12, abs=1e-12)


def test_cyclic_relabel_closure():
    for spec in random_specs(10, seed=4):
        rot = collinear_equilibria(spec.rotated())
        for r in collinear_equilibria(spec):
            img = relabel_links(r.e)
            assert min(orbit_distance(img, q.e) for q in rot) < 1e-8


def test_psi_sum_report():
    recs = all_equilibria(FormationSpec(3, 4, 5))
    rep = verify_psi_sum_negative(recs)
    assert rep.count == 2 and rep.margin > 0
    bad = collinear_equilibria(FormationSpec(3, 4, 5))[0]
    bad.psi_sum = 0.5
    with pytest.raises(VerificationError):
        verify_psi_sum_negative([bad])


def test_orbit_distance():
    e = collinear_links(0.5, 2.0)
    th = 0.9
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    rotated = (e.reshape(3, 2) @ R.T).ravel()
    assert orbit_distance(rotated, e) < 1e-14
    assert orbit_distance(e + 1e-9 * np.array([0, 1, 0, 0, 0, -1]), e) > 0


def test_target_separation_positive():
    assert target_separation(FormationSpec(3, 4, 5)) > 0.1


def test_catalog_outputs():
    spec = FormationSpec(1, 1, 1)
    recs = all_equilibria(spec)
    rows = list(csv.reader(io.StringIO(write_catalog_csv(recs))))
    assert tuple(rows[0]) == CATALOG_COLUMNS
    assert len(rows) == len(recs) + 1
    d = json.loads(catalog_json(spec, recs))
    assert d["schema_version"] == "1"
    assert len(d["records"]) == len(recs)
