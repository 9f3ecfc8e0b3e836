import numpy as np
import pytest

from triformation.algebra import J, finite_difference_jacobian, jacobian_links, links_from_positions
from triformation.equilibria import collinear_equilibria, collinear_links
from triformation.errors import DegenerateError, DomainError, PreconditionError
from triformation.experiments import random_specs
from triformation.manifolds import (
    collocated_point,
    defining_function_line_set,
    gamma_collocated_closed,
    gamma_from_basis,
    gamma_general,
    gamma_line_closed,
    gamma_line_product,
    jacobian_defining_function,
    lambda_fn,
    line_gamma_terms,
    line_normal_raw,
    line_set_point,
    line_set_tangents,
    normal_basis_collocated,
    normal_basis_line_set,
    orthogonal_normal_line_set,
)


def test_collocated_equilateral_spectrum():
    w = np.linalg.eigvalsh(gamma_collocated_closed((1, 1, 1)))
    assert np.allclose(w, [3, 3, 9, 9], atol=1e-12)


@pytest.mark.parametrize("d", [(1, 1, 1), (3, 4, 5), (0.2, 7.0, 7.1)])
def test_collocated_closed_matches_jacobian(d):
    pt = collocated_point()
    pt.check()
    assert np.allclose(gamma_general(pt, d, raw=True).gamma, gamma_collocated_closed(d), atol=1e-12)


def test_collocated_positive_over_random_specs():
    for s in random_specs(300, seed=5):
        assert gamma_general(collocated_point(), s).positive_definite


def test_collocated_basis_is_orthonormal_in_link_space():
    B = normal_basis_collocated()
    assert np.allclose(B @ B.T, np.eye(4))
    assert np.allclose(B.reshape(4, 3, 2).sum(axis=1), 0)


def test_defining_function_jacobian():
    e = links_from_positions([0.1, 0.2, 1.0, 0.4, -0.3, 1.7])
    fd = finite_difference_jacobian(defining_function_line_set, e)
    assert np.allclose(jacobian_defining_function(e), fd, atol=1e-8)


def test_line_normals():
    e = collinear_links(2.0, 0.5)
    n = line_normal_raw(e)
    tangents = line_set_tangents(e)
    m = orthogonal_normal_line_set(e)[0]
    assert np.allclose(n.reshape(3, 2).sum(axis=0), 0)
    assert np.allclose(m.reshape(3, 2).sum(axis=0), 0)
    # both normals are orthogonal to in-line motion
    assert np.allclose(tangents[:2] @ n, 0)
    assert np.allclose(tangents[:2] @ m, 0)
    # only the orthogonal one is orthogonal to the rotation direction
    assert np.allclose(tangents[2] @ m, 0, atol=1e-12)
    x, s = 2.0, 0.5
    assert tangents[2] @ n == pytest.approx((x * x + x + 1) * s)
    # the orthogonal normal is along the gradient of the area form inside the link space
    g = jacobian_defining_function(e)[0]
    g = g - np.tile(g.reshape(3, 2).mean(axis=0), 3)
    assert abs(abs(g @ m) - np.linalg.norm(g)) < 1e-12


def test_line_point_preconditions():
    with pytest.raises(PreconditionError):
        normal_basis_line_set(links_from_positions([0, 0, 1, 0, 0, 1]))
    with pytest.raises(PreconditionError):
        normal_basis_line_set(collinear_links(1.0, 1e-8))
    with pytest.raises(DegenerateError):
        normal_basis_line_set(collinear_links(1.0, 1e-22), exclusion_radius=0.0)
    with pytest.raises(ValueError):
        line_set_point(collinear_links(1.0, 1.0), normal="other")
    line_set_point(collinear_links(1.0, 1.0)).check()
    line_set_point(collinear_links(1.0, 1.0), normal="orthogonal").check()


def test_equilateral_x1_gamma_is_two():
    e = collinear_links(1.0, 1.0 / 3.0)
    assert gamma_line_closed(e, (1, 1, 1)) == pytest.approx(2.0, abs=1e-12)
    assert gamma_general(line_set_point(e, normal="orthogonal"), (1, 1, 1)).gamma[0, 0] == pytest.approx(2.0)
    first, _ = line_gamma_terms(e, (1, 1, 1))
    assert abs(first) < 1e-14


def test_closed_form_is_symmetrized_quadratic_form():
    for s in random_specs(30, seed=9):
        for r in collinear_equilibria(s):
            raw = line_normal_raw(r.e)
            A = jacobian_links(r.e, s)
            g = gamma_line_closed(r.e, s)
            assert g == pytest.approx(raw @ (A + A.T) @ raw, rel=1e-9)
            assert g == pytest.approx(gamma_from_basis(r.e, raw[None, :], s)[0, 0], rel=1e-9)
            assert g > 0
            if r.x is not None and r.x not in (0.0, -1.0):
                assert gamma_line_product(r.x, r.s, r.psi[0]) == pytest.approx(g, rel=1e-8)


def test_collocated_pair_gamma():
    # e1 = 0 is an equilibrium when d2 = d3; e2 = -e3 with |e2| = d2
    d = (1.3, 2.0, 2.0)
    e = np.array([0, 0, 2.0, 0, -2.0, 0])
    assert gamma_line_closed(e, d) == pytest.approx(2 * d[0] ** 2 * 4.0)


def test_gamma_line_closed_requires_equilibrium():
    with pytest.raises(PreconditionError):
        gamma_line_closed(collinear_links(1.0, 1.0), (3, 4, 5))
    with pytest.raises(PreconditionError):
        gamma_line_closed(np.zeros(6), (1, 1, 1))


def test_lambda_poles():
    assert lambda_fn(1.0) == pytest.approx(1.5)
    for x in (0.0, -1.0):
        with pytest.raises(DomainError):
            lambda_fn(x)


def test_rotation_matrix_convention():
    assert np.allclose(J @ J, -np.eye(2))
