"""Invariant sets of the link dynamics and their Gamma matrices.

Two invariant sets matter: the collocated set (the origin of the link space)
and the punctured line set of collinear links with short links excised.
For an invariant set with normal directions stacked as the rows of ``B``,
``Gamma = B (A + A^T) B^T`` where ``A`` is the Jacobian of the link field;
a positive definite Gamma makes the field point out of thin tubes around
the set.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .algebra import (
    COLLINEAR_TOL,
    J,
    SpecLike,
    blocks,
    is_collinear,
    jacobian_links,
    oriented_area2,
    psi,
    squared_distances,
)
from .errors import DegenerateError, DomainError, PreconditionError

#: Radius of the excised neighborhood of the origin in the punctured line set.
EXCLUSION_RADIUS = 1e-3
NORMAL_MIN_NORM = 1e-9
PD_REL_TOL = 1e-12
EQUILIBRIUM_TOL = 1e-8


class ManifoldTag(str, Enum):
    COLLOCATED = "CollocatedSet"
    LINE_SET = "LineSetPunctured"


@dataclass
class ManifoldPoint:
    """A point on an invariant set together with unit normals inside the link space.

    ``normal_basis`` has one normal per row. ``raw_basis`` keeps the
    un-normalized vectors the closed-form Gamma expressions are written in.
    """

    e: np.ndarray
    normal_basis: np.ndarray
    manifold: ManifoldTag
    raw_basis: Optional[np.ndarray] = field(default=None, repr=False)

    def check(self, tol: float = 1e-12) -> None:
        B = np.atleast_2d(self.normal_basis)
        sums = B.reshape(B.shape[0], 3, 2).sum(axis=1)
        if np.abs(sums).max() > tol:
            raise PreconditionError("normal basis leaves the link space")
        if np.abs(B @ B.T - np.eye(B.shape[0])).max() > tol:
            raise PreconditionError("normal basis is not orthonormal")
        if self.manifold is ManifoldTag.LINE_SET:
            if not is_collinear(self.e):
                raise PreconditionError("point is not on the line set")
            if np.linalg.norm(self.e) <= EXCLUSION_RADIUS:
                raise PreconditionError("point lies in the excised neighborhood of the origin")
        elif np.linalg.norm(self.e) != 0.0:
            raise PreconditionError("collocated set is the origin")


@dataclass
class GammaReport:
    point: ManifoldPoint
    gamma: np.ndarray
    eigenvalues: np.ndarray
    min_eigenvalue: float
    positive_definite: bool

    def to_dict(self) -> dict:
        return {
            "manifold": self.point.manifold.value,
            "e": self.point.e.tolist(),
            "normal_basis": np.atleast_2d(self.point.normal_basis).tolist(),
            "gamma": self.gamma.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "min_eigenvalue": self.min_eigenvalue,
            "positive_definite": self.positive_definite,
        }


def defining_function_line_set(e) -> np.ndarray:
    """F(e) = (e1^T J e2, e1 + e2 + e3); the line set is its zero set."""
    eb = blocks(e)
    return np.concatenate([[oriented_area2(e)], eb.sum(axis=0)])


def jacobian_defining_function(e) -> np.ndarray:
    eb = blocks(e)
    F = np.zeros((3, 6))
    F[0, 0:2] = -eb[1] @ J
    F[0, 2:4] = eb[0] @ J
    F[1:, :] = np.hstack([np.eye(2)] * 3)
    return F


def _orthonormal_rows(vectors) -> np.ndarray:
    q, r = np.linalg.qr(np.atleast_2d(vectors).T)
    # Fix signs so each orthonormal vector has positive overlap with its source.
    q = q * np.sign(np.diag(r))
    return q.T


def collocated_normals_raw() -> np.ndarray:
    """Link-space columns of the collocated normal-space matrix, as rows."""
    m = np.zeros((4, 6))
    for k in range(2):
        m[k, k] = -1.0
        m[k, 2 + k] = 1.0
        m[2 + k, 2 + k] = -1.0
        m[2 + k, 4 + k] = 1.0
    return m


def normal_basis_collocated() -> np.ndarray:
    """Four orthonormal link-space normals of the collocated set (rows)."""
    return _orthonormal_rows(collocated_normals_raw())


def _check_line_point(e, exclusion_radius):
    if not is_collinear(e, COLLINEAR_TOL):
        raise PreconditionError(f"links are not collinear (e1^T J e2 = {oriented_area2(e):.3e})")
    if np.linalg.norm(e) <= exclusion_radius:
        raise PreconditionError(f"|e| <= {exclusion_radius:g}: inside the excised neighborhood")


def line_normal_raw(e) -> np.ndarray:
    """(-J e2, -J e3, -J e1), the cyclically shifted link-space normal of the line set."""
    eb = blocks(e)
    return -np.concatenate([J @ eb[1], J @ eb[2], J @ eb[0]])


def line_normal_orthogonal_raw(e) -> np.ndarray:
    """(J(e2 - e3), J(e3 - e1), J(e1 - e2)), the gradient of the area form within Im H.

    Unlike :func:`line_normal_raw` this is orthogonal to the rotation
    direction (J e1, J e2, J e3) as well as to the in-line directions.
    """
    eb = blocks(e)
    d = eb - np.roll(eb, -1, axis=0)
    return np.concatenate([J @ d[1], J @ d[2], J @ d[0]])


def _unit(v, what):
    n = np.linalg.norm(v)
    if n < NORMAL_MIN_NORM:
        raise DegenerateError(f"{what} has norm {n:.3e}; links too short")
    return v / n


def normal_basis_line_set(e, exclusion_radius: float = EXCLUSION_RADIUS) -> np.ndarray:
    """Unit vector along (-J e2, -J e3, -J e1), shape (1, 6)."""
    _check_line_point(e, exclusion_radius)
    return _unit(line_normal_raw(e), "line-set normal")[None, :]


def orthogonal_normal_line_set(e, exclusion_radius: float = EXCLUSION_RADIUS) -> np.ndarray:
    """Unit normal orthogonal to the whole tangent space of the line set, shape (1, 6)."""
    _check_line_point(e, exclusion_radius)
    return _unit(line_normal_orthogonal_raw(e), "line-set normal")[None, :]


def line_set_tangents(e) -> np.ndarray:
    """Tangent directions of the line set at a collinear ``e`` (rows).

    Two in-line directions (links stretched along their common line while
    keeping the cycle closed) and the rigid rotation (J e1, J e2, J e3).
    """
    eb = blocks(e)
    k = int(np.argmax(np.linalg.norm(eb, axis=1)))
    u = eb[k] / np.linalg.norm(eb[k])
    t1 = np.concatenate([u, -u, 0 * u])
    t2 = np.concatenate([0 * u, u, -u])
    rot = np.concatenate([J @ eb[0], J @ eb[1], J @ eb[2]])
    return np.vstack([t1, t2, rot])


def collocated_point() -> ManifoldPoint:
    return ManifoldPoint(
        e=np.zeros(6),
        normal_basis=normal_basis_collocated(),
        manifold=ManifoldTag.COLLOCATED,
        raw_basis=collocated_normals_raw(),
    )


def line_set_point(e, normal: str = "shifted", exclusion_radius: float = EXCLUSION_RADIUS) -> ManifoldPoint:
    """Build a line-set point; ``normal`` is ``"shifted"`` or ``"orthogonal"``."""
    e = np.asarray(e, dtype=float).reshape(6)
    if normal == "shifted":
        basis, raw = normal_basis_line_set(e, exclusion_radius), line_normal_raw(e)[None, :]
    elif normal == "orthogonal":
        basis, raw = orthogonal_normal_line_set(e, exclusion_radius), line_normal_orthogonal_raw(e)[None, :]
    else:
        raise ValueError(f"unknown normal choice {normal!r}")
    return ManifoldPoint(e=e, normal_basis=basis, manifold=ManifoldTag.LINE_SET, raw_basis=raw)


def gamma_from_basis(e, basis, spec: SpecLike) -> np.ndarray:
    """B (A + A^T) B^T for the rows of ``basis`` and the link Jacobian A at ``e``."""
    A = jacobian_links(e, spec)
    B = np.atleast_2d(basis)
    G = B @ (A + A.T) @ B.T
    return 0.5 * (G + G.T)


def gamma_report(point: ManifoldPoint, gamma) -> GammaReport:
    gamma = np.atleast_2d(np.asarray(gamma, dtype=float))
    w = np.linalg.eigvalsh(gamma)
    tol = PD_REL_TOL * abs(np.trace(gamma))
    return GammaReport(point, gamma, w, float(w[0]), bool(w[0] > tol))


def gamma_general(point: ManifoldPoint, spec: SpecLike, raw: bool = False) -> GammaReport:
    """Gamma from the link Jacobian and the point's normals.

    ``raw=True`` uses the un-normalized basis, which is the congruent form
    the closed expressions are written in.
    """
    basis = point.raw_basis if raw else point.normal_basis
    return gamma_report(point, gamma_from_basis(point.e, basis, spec))


def gamma_collocated_closed(spec: SpecLike) -> np.ndarray:
    """Closed-form 4x4 Gamma on the collocated set (raw basis)."""
    a, b, c = squared_distances(spec)
    I2 = np.eye(2)
    return np.block([
        [(2 * a + 4 * b) * I2, (a - 3 * b - c) * I2],
        [(a - 3 * b - c) * I2, (2 * b + 4 * c) * I2],
    ])


def equilibrium_residual(e, spec: SpecLike) -> float:
    g = blocks(e) * psi(e, spec)[:, None]
    return float(np.linalg.norm(g[0] - g[1]) + np.linalg.norm(g[1] - g[2]))


def line_gamma_terms(e, spec: SpecLike):
    """The two brackets of the simplified line-set expression.

    Returns ``(first, second)`` with ``first = psi1 e2.e1 + psi2 e3.e2 + psi3 e1.e3``
    (zero on equilibria) and ``second = psi1 |e2|^2 + psi2 |e3|^2 + psi3 |e1|^2``.
    """
    e1, e2, e3 = blocks(e)
    p1, p2, p3 = psi(e, spec)
    first = p1 * (e2 @ e1) + p2 * (e3 @ e2) + p3 * (e1 @ e3)
    second = p1 * (e2 @ e2) + p2 * (e3 @ e3) + p3 * (e1 @ e1)
    return float(first), float(second)


def gamma_line_closed(e, spec: SpecLike) -> float:
    """Gamma of the line set at a collinear equilibrium, raw shifted normal.

    ``2 * (first - second)`` from :func:`line_gamma_terms`. The factor two
    comes from the symmetrization A + A^T; the bracket difference alone is
    the quadratic form n^T A n.
    """
    e = np.asarray(e, dtype=float).reshape(6)
    if np.linalg.norm(e) == 0.0:
        raise PreconditionError("origin is not on the punctured line set")
    r = equilibrium_residual(e, spec)
    if r > EQUILIBRIUM_TOL * (1.0 + np.linalg.norm(e) ** 3):
        raise PreconditionError(f"not an equilibrium: residual {r:.3e}")
    first, second = line_gamma_terms(e, spec)
    return 2.0 * (first - second)


def lambda_fn(x: float) -> float:
    """1 + 1/x - 1/(1 + x)."""
    if x == 0 or x == -1:
        raise DomainError(f"lambda has a pole at x = {x}")
    return 1.0 + 1.0 / x - 1.0 / (1.0 + x)


def gamma_line_product(x: float, s: float, psi1: float) -> float:
    """Product form of the line-set Gamma for e2 = x e1, e3 = -(1+x) e1, |e1|^2 = s."""
    lam = lambda_fn(x)
    return 2.0 * s * (-psi1 / lam) * ((x + 0.5) ** 2 + 0.75) ** 3 / (x ** 2 * (1 + x) ** 2)
