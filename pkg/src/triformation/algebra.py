"""Constant matrices and link-space algebra for the three-robot cyclic graph.

States are flat float arrays of shape (6,): positions ``z = (z1, z2, z3)``
and links ``e = (e1, e2, e3)`` with each block a planar vector. Link ``k``
points from robot ``k`` to robot ``k+1`` (mod 3), so ``e = H z`` with the
block-circulant incidence matrix ``H``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import CycleConstraintError, InvalidSpecError

#: Planar 90 degree rotation used in the oriented-area form e1^T J e2.
J = np.array([[0.0, 1.0], [-1.0, 0.0]])

CYCLE_TOL = 1e-9
COLLINEAR_TOL = 1e-9
FD_STEP = 1e-5

_I2 = np.eye(2)
_O2 = np.zeros((2, 2))
_H = np.block([[-_I2, _I2, _O2], [_O2, -_I2, _I2], [_I2, _O2, -_I2]])
_H.setflags(write=False)


@dataclass(frozen=True)
class FormationSpec:
    """Target triangle given by the three link lengths.

    Raises :class:`InvalidSpecError` unless all lengths are positive and
    satisfy the strict triangle inequalities.
    """

    d1: float
    d2: float
    d3: float

    def __post_init__(self):
        d = self.distances
        if not np.all(np.isfinite(d)) or np.any(d <= 0):
            raise InvalidSpecError(f"distances must be positive and finite, got {tuple(d)}")
        for i in range(3):
            if not d[i] < d[(i + 1) % 3] + d[(i + 2) % 3]:
                raise InvalidSpecError(
                    f"distances {tuple(float(v) for v in d)} violate the strict triangle inequality"
                )

    @classmethod
    def from_sequence(cls, values: Sequence[float]) -> "FormationSpec":
        if len(values) != 3:
            raise InvalidSpecError(f"expected three distances, got {len(values)}")
        return cls(*(float(v) for v in values))

    @property
    def distances(self) -> np.ndarray:
        return np.array([self.d1, self.d2, self.d3], dtype=float)

    @property
    def squared(self) -> np.ndarray:
        return self.distances ** 2

    def rotated(self) -> "FormationSpec":
        """Spec after the cyclic relabeling (d1, d2, d3) -> (d2, d3, d1)."""
        return FormationSpec(self.d2, self.d3, self.d1)

    def as_tuple(self):
        return (self.d1, self.d2, self.d3)


SpecLike = Union[FormationSpec, Sequence[float], np.ndarray]


def squared_distances(spec: SpecLike) -> np.ndarray:
    """Squared target lengths; plain sequences are accepted without validation."""
    if isinstance(spec, FormationSpec):
        return spec.squared
    d = np.asarray(spec, dtype=float)
    if d.shape != (3,):
        raise InvalidSpecError(f"expected three distances, got shape {d.shape}")
    return d ** 2


def incidence_matrix() -> np.ndarray:
    """Return a fresh copy of the 6x6 block-circulant incidence matrix."""
    return _H.copy()


def blocks(v) -> np.ndarray:
    """View a 6-vector as a (3, 2) array of planar blocks."""
    return np.asarray(v, dtype=float).reshape(3, 2)


def cycle_residual(e) -> float:
    return float(np.linalg.norm(blocks(e).sum(axis=0)))


def check_links(e, tol: float = CYCLE_TOL) -> np.ndarray:
    """Validate a link vector and return it as a float array."""
    e = np.asarray(e, dtype=float).reshape(6)
    if not np.all(np.isfinite(e)):
        raise CycleConstraintError("link vector has non-finite entries")
    r = cycle_residual(e)
    if r > tol * max(1.0, float(np.abs(e).max())):
        raise CycleConstraintError(f"cycle residual |e1+e2+e3| = {r:.3e} exceeds {tol:.1e}")
    return e


def project_to_link_space(v) -> np.ndarray:
    """Orthogonal projection onto Im H (subtract the mean block)."""
    b = blocks(v)
    return (b - b.mean(axis=0)).ravel()


def link_space_basis() -> np.ndarray:
    """Orthonormal 6x4 basis of the link space."""
    u, s, _ = np.linalg.svd(_H)
    return u[:, :4]


def links_from_positions(z) -> np.ndarray:
    z = np.asarray(z, dtype=float).reshape(6)
    b = z.reshape(3, 2)
    return np.roll(b, -1, axis=0).ravel() - z


def positions_from_links(e, anchor=(0.0, 0.0)) -> np.ndarray:
    """Positions with robot 1 at ``anchor`` realizing the links ``e``."""
    eb = blocks(e)
    z1 = np.asarray(anchor, dtype=float)
    z2 = z1 + eb[0]
    z3 = z2 + eb[1]
    return np.concatenate([z1, z2, z3])


def psi(e, spec: SpecLike) -> np.ndarray:
    """Squared-length errors ``|e_i|^2 - d_i^2``."""
    eb = blocks(e)
    return np.einsum("ij,ij->i", eb, eb) - squared_distances(spec)


def oriented_area2(e) -> float:
    """e1^T J e2, twice the signed area of the triangle."""
    eb = blocks(e)
    return float(eb[0] @ J @ eb[1])


def is_collinear(e, tol: float = COLLINEAR_TOL) -> bool:
    eb = blocks(e)
    scale = np.linalg.norm(eb[0]) * np.linalg.norm(eb[1]) + 1.0
    return abs(oriented_area2(e)) <= tol * scale


def rigidity_matrix(e) -> np.ndarray:
    """R(e) = diag(e_i)^T H, shape (3, 6)."""
    eb = blocks(e)
    R = np.zeros((3, 6))
    for k in range(3):
        R[k] = eb[k] @ _H[2 * k:2 * k + 2]
    return R


def theta_blocks(e, spec: SpecLike) -> np.ndarray:
    """Per-link Jacobians of e_i * psi_i, psi_i I + 2 e_i e_i^T, shape (3, 2, 2)."""
    eb = blocks(e)
    p = psi(e, spec)
    return p[:, None, None] * _I2 + 2.0 * eb[:, :, None] * eb[:, None, :]


def _block_diag(th) -> np.ndarray:
    D = np.zeros((6, 6))
    for i in range(3):
        D[2 * i:2 * i + 2, 2 * i:2 * i + 2] = th[i]
    return D


def jacobian_links(e, spec: SpecLike) -> np.ndarray:
    """Analytic Jacobian of the link vector field, H diag(Theta_i)."""
    return _H @ _block_diag(theta_blocks(e, spec))


def jacobian_positions(z, spec: SpecLike) -> np.ndarray:
    """Analytic Jacobian of the position vector field, diag(Theta_i) H."""
    e = links_from_positions(z)
    return _block_diag(theta_blocks(e, spec)) @ _H


def finite_difference_jacobian(fun, x, step: float = FD_STEP) -> np.ndarray:
    """Central-difference Jacobian of ``fun`` at ``x``."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fun(x))
    jac = np.zeros((f0.size, x.size))
    for j in range(x.size):
        dx = np.zeros_like(x)
        dx[j] = step
        jac[:, j] = (np.asarray(fun(x + dx)) - np.asarray(fun(x - dx))) / (2 * step)
    return jac
