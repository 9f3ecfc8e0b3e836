"""Equilibria of the link dynamics: target triangles, the origin and collinear states.

Collinear equilibria with no collocated pair are written as
``e2 = x e1``, ``e3 = -(1 + x) e1`` with ``s = |e1|^2`` and ``e1`` along
``+x``. The equilibrium conditions ``x psi2 = psi1`` and
``(1 + x) psi3 = -psi1`` are each linear in ``s``; eliminating ``s`` leaves
the quartic

    P(x) = (x b - a)((1 + x)^3 + 1) - ((1 + x) c + a)(x^3 - 1)

with ``(a, b, c) = (d1^2, d2^2, d3^2)``. ``P`` vanishes identically only for
an equilateral spec, where the collinear equilibria form the continuous
family ``s = d^2 / (x^2 + x + 1)``.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np
from scipy import optimize

from .algebra import (
    FormationSpec,
    SpecLike,
    blocks,
    jacobian_links,
    link_space_basis,
    psi,
    squared_distances,
)
from .dynamics import SCHEMA_VERSION, potential
from .errors import SolverError, VerificationError
from .manifolds import (
    GammaReport,
    collocated_point,
    equilibrium_residual,
    gamma_general,
    gamma_line_closed,
)

CATALOG_COLUMNS = (
    "kind", "x", "s", "psi1", "psi2", "psi3", "gamma", "psi_sum",
    "eig_re_max", "jacobian_spectrum",
)

#: x values sampled from the equilateral continuum; closed under x -> -(1+x)/x.
FAMILY_SAMPLES = (1.0, -2.0, -0.5, 0.5, -3.0, -2.0 / 3.0, 2.0, -1.5, -1.0 / 3.0)

_EQUAL_RTOL = 1e-12
_POLE_GUARD = 1e-9


class EquilibriumKind(str, Enum):
    TARGET = "Target"
    COLLOCATED_PAIR = "CollinearCollocatedPair"
    DISTINCT = "CollinearDistinct"
    ORIGIN = "Origin"


@dataclass
class EquilibriumRecord:
    e: np.ndarray
    kind: EquilibriumKind
    x: Optional[float]
    s: float
    psi: np.ndarray
    gamma_value: object = None
    psi_sum: float = 0.0
    family: bool = False
    spectrum: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    @property
    def is_collinear(self) -> bool:
        return self.kind in (EquilibriumKind.COLLOCATED_PAIR, EquilibriumKind.DISTINCT)

    def residual(self, spec: SpecLike) -> float:
        return equilibrium_residual(self.e, spec)

    def gamma_scalar(self) -> float:
        """Gamma for collinear records, minimum eigenvalue for the origin."""
        g = self.gamma_value
        if isinstance(g, GammaReport):
            return g.min_eigenvalue
        return float("nan") if g is None else float(g)

    def max_real_eigenvalue(self) -> float:
        return float(np.max(self.spectrum.real)) if self.spectrum.size else float("nan")

    def to_dict(self) -> dict:
        g = self.gamma_value
        return {
            "kind": self.kind.value,
            "e": self.e.tolist(),
            "x": self.x,
            "s": self.s,
            "psi": self.psi.tolist(),
            "gamma": g.to_dict() if isinstance(g, GammaReport) else g,
            "psi_sum": self.psi_sum,
            "family": self.family,
            "jacobian_spectrum": [[float(z.real), float(z.imag)] for z in self.spectrum],
        }

    def to_row(self) -> list:
        spec_str = " ".join(f"{float(z.real)!r}{float(z.imag):+.17g}j" for z in self.spectrum)
        return [
            self.kind.value,
            "" if self.x is None else repr(float(self.x)),
            repr(float(self.s)),
            *(repr(float(p)) for p in self.psi),
            "" if self.gamma_value is None else repr(self.gamma_scalar()),
            repr(float(self.psi_sum)),
            repr(self.max_real_eigenvalue()),
            spec_str,
        ]


def link_space_spectrum(e, spec: SpecLike) -> np.ndarray:
    """Eigenvalues of the link Jacobian restricted to Im H."""
    Q = link_space_basis()
    return np.linalg.eigvals(Q.T @ jacobian_links(e, spec) @ Q)


def _make_record(e, kind, x, spec, family=False):
    e = np.asarray(e, dtype=float).reshape(6)
    p = psi(e, spec)
    if kind is EquilibriumKind.TARGET:
        p = np.zeros(3)
    rec = EquilibriumRecord(
        e=e, kind=kind, x=x, s=float(blocks(e)[0] @ blocks(e)[0]), psi=p,
        psi_sum=float(p.sum()), family=family, spectrum=link_space_spectrum(e, spec),
    )
    if rec.is_collinear:
        rec.gamma_value = gamma_line_closed(e, spec)
    elif kind is EquilibriumKind.ORIGIN:
        rec.gamma_value = gamma_general(collocated_point(), spec, raw=True)
    return rec


def collinear_links(x: float, s: float) -> np.ndarray:
    r = np.sqrt(s)
    return np.array([r, 0.0, x * r, 0.0, -(1.0 + x) * r, 0.0])


def quartic_coefficients(spec: SpecLike) -> np.ndarray:
    """Coefficients of P(x), highest degree first."""
    a, b, c = squared_distances(spec)
    return np.array([b - c, 3 * b - 2 * a - c, 3 * (b - a), 2 * b - 3 * a + c, c - a])


def collinear_condition(x, spec: SpecLike):
    """P(x) in its factored form (both s-relations cross-multiplied)."""
    a, b, c = squared_distances(spec)
    x = np.asarray(x, dtype=float)
    return (x * b - a) * ((1 + x) ** 3 + 1) - ((1 + x) * c + a) * (x ** 3 - 1)


def s_from_x(x: float, spec: SpecLike) -> float:
    """Solve the better-conditioned of the two linear s-relations at ``x``."""
    a, b, c = squared_distances(spec)
    den_a = x ** 3 - 1
    den_b = (1 + x) ** 3 + 1
    if abs(den_b) >= abs(den_a):
        return ((1 + x) * c + a) / den_b
    return (x * b - a) / den_a


def collinear_residuals(x, s, spec: SpecLike):
    """(x psi2 - psi1, (1 + x) psi3 + psi1) for the (x, s) parameterization."""
    a, b, c = squared_distances(spec)
    p1 = s - a
    p2 = x * x * s - b
    p3 = (1 + x) ** 2 * s - c
    return x * p2 - p1, (1 + x) * p3 + p1


def is_equilateral(spec: SpecLike) -> bool:
    a = squared_distances(spec)
    return bool(np.ptp(a) <= _EQUAL_RTOL * a.max())


def scan_grid(x_max: float, n: int = 400) -> np.ndarray:
    """Sample points on (-x_max, -1) U (-1, 0) U (0, x_max), dense near 0, -1 and large |x|."""
    near = np.geomspace(1e-8, 0.5, n)
    far = np.geomspace(1e-8, max(x_max, 2.0), 2 * n)
    pts = np.concatenate([near, -near, -1 + near, -1 - near, far, -1 - far])
    pts = pts[(np.abs(pts) <= x_max + 1) & (np.abs(pts - 0.0) > 0) & (pts != -1)]
    return np.unique(pts)


def root_bound(coeffs) -> float:
    """Cauchy bound on the magnitude of the real roots of a polynomial."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "f")
    if c.size <= 1:
        return 0.0
    return float(1 + np.max(np.abs(c[1:] / c[0])))


def _polish(x0, coeffs, dcoeffs):
    """One guarded Newton step on the expanded quartic."""
    p0 = np.polyval(coeffs, x0)
    dp = np.polyval(dcoeffs, x0)
    if not np.isfinite(p0) or not np.isfinite(dp):
        raise SolverError(f"quartic is not finite near x = {x0!r}")
    if dp == 0:
        return float(x0)
    x1 = x0 - p0 / dp
    return float(x1) if abs(np.polyval(coeffs, x1)) < abs(p0) else float(x0)


def _distinct_roots(spec: SpecLike) -> List[float]:
    coeffs = quartic_coefficients(spec)
    dcoeffs = np.polyder(coeffs)
    scale = np.abs(coeffs).max()
    x_max = max(10.0, 2 * root_bound(coeffs))
    grid = scan_grid(x_max)
    vals = collinear_condition(grid, spec)
    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        lo, hi = grid[i], grid[i + 1]
        xb = optimize.brentq(lambda t: float(collinear_condition(t, spec)), lo, hi,
                             xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
        roots.append(_polish(xb, coeffs, dcoeffs))
    # Even-multiplicity roots leave no sign change: refine small local minima of |P|.
    av = np.abs(vals)
    for i in np.nonzero((av[1:-1] < av[:-2]) & (av[1:-1] < av[2:]))[0] + 1:
        res = optimize.minimize_scalar(lambda t: abs(float(collinear_condition(t, spec))),
                                       bounds=(grid[i - 1], grid[i + 1]), method="bounded",
                                       options={"xatol": 1e-14})
        if abs(float(collinear_condition(res.x, spec))) <= 1e-12 * scale * (1 + abs(res.x)) ** 4:
            roots.append(float(res.x))
    out = []
    for x in sorted(roots):
        if abs(x) < _POLE_GUARD or abs(1 + x) < _POLE_GUARD:
            continue
        if out and abs(x - out[-1]) <= 1e-9 * (1 + abs(x)):
            continue
        out.append(x)
    return out


def _collocated_pairs(spec: SpecLike):
    d = np.sqrt(squared_distances(spec))
    out = []
    close = lambda u, v: abs(u - v) <= _EQUAL_RTOL * max(u, v)
    if close(d[1], d[2]):
        out.append((np.array([0.0, 0.0, d[1], 0.0, -d[1], 0.0]), None))
    if close(d[0], d[2]):
        out.append((np.array([d[0], 0.0, 0.0, 0.0, -d[0], 0.0]), 0.0))
    if close(d[0], d[1]):
        out.append((np.array([d[0], 0.0, -d[0], 0.0, 0.0, 0.0]), -1.0))
    return out


def collinear_equilibria(spec: SpecLike) -> List[EquilibriumRecord]:
    """All collinear equilibrium classes except the origin.

    One record per class, realized on the positive x-axis. For an
    equilateral spec the continuum is represented by ``FAMILY_SAMPLES``
    (records flagged ``family=True``).
    """
    records = []
    for e, x in _collocated_pairs(spec):
        records.append(_make_record(e, EquilibriumKind.COLLOCATED_PAIR, x, spec))
    if is_equilateral(spec):
        d2 = float(squared_distances(spec)[0])
        for x in FAMILY_SAMPLES:
            e = collinear_links(x, d2 / (x * x + x + 1))
            records.append(_make_record(e, EquilibriumKind.DISTINCT, x, spec, family=True))
        return records
    for x in _distinct_roots(spec):
        s = s_from_x(x, spec)
        if not s > 0:
            continue
        r1, r2 = collinear_residuals(x, s, spec)
        e = collinear_links(x, s)
        a, b, c = squared_distances(spec)
        # relative to the size of the terms that cancel; large |x| means large terms
        scale1 = abs(x) * (x * x * s + b) + s + a
        scale2 = abs(1 + x) * ((1 + x) ** 2 * s + c) + s + a
        if abs(r1) > 1e-10 * scale1 or abs(r2) > 1e-10 * scale2:
            raise SolverError(f"root x = {x!r} does not satisfy both equilibrium relations ({r1:.2e}, {r2:.2e})")
        records.append(_make_record(e, EquilibriumKind.DISTINCT, x, spec))
    return records


def target_equilibria(spec: SpecLike) -> List[EquilibriumRecord]:
    """The two mirror-image target triangles with e1 on the positive x-axis."""
    d1, d2, d3 = np.sqrt(squared_distances(spec))
    px = (d1 ** 2 + d3 ** 2 - d2 ** 2) / (2 * d1)
    py = np.sqrt(max(d3 ** 2 - px ** 2, 0.0))
    out = []
    for sign in (1.0, -1.0):
        z3 = np.array([px, sign * py])
        e = np.concatenate([[d1, 0.0], z3 - np.array([d1, 0.0]), -z3])
        out.append(_make_record(e, EquilibriumKind.TARGET, None, spec))
    return out


def origin_equilibrium(spec: SpecLike) -> EquilibriumRecord:
    return _make_record(np.zeros(6), EquilibriumKind.ORIGIN, None, spec)


def all_equilibria(spec: SpecLike) -> List[EquilibriumRecord]:
    return [origin_equilibrium(spec), *collinear_equilibria(spec), *target_equilibria(spec)]


@dataclass
class PsiSumReport:
    count: int
    margin: float
    violations: list


def verify_psi_sum_negative(records) -> PsiSumReport:
    """Check psi1 + psi2 + psi3 < 0 on every collinear record."""
    coll = [r for r in records if r.is_collinear]
    bad = [r for r in coll if not r.psi_sum < 0]
    margin = min((-r.psi_sum for r in coll), default=float("inf"))
    if bad:
        raise VerificationError(f"{len(bad)} collinear equilibria with psi_sum >= 0", bad)
    return PsiSumReport(count=len(coll), margin=float(margin), violations=[])


def orbit_distance(e, e_ref) -> float:
    """Distance from ``e`` to the rotation orbit of ``e_ref``."""
    a = blocks(e)
    b = blocks(e_ref)
    K = np.array([[0.0, -1.0], [1.0, 0.0]])
    alpha = float(np.sum(a * b))
    beta = float(np.sum(a * (b @ K.T)))
    # Rotate e_ref onto its best alignment and subtract directly: the
    # |a|^2 + |b|^2 - 2 hypot(alpha, beta) form cancels catastrophically.
    th = np.arctan2(beta, alpha)
    c, s = np.cos(th), np.sin(th)
    Rb = b @ np.array([[c, s], [-s, c]])
    return float(np.linalg.norm(a - Rb))


def target_separation(spec: SpecLike, records=None) -> float:
    """Smallest distance between a collinear equilibrium and the target set."""
    records = all_equilibria(spec) if records is None else records
    targets = [r.e for r in records if r.kind is EquilibriumKind.TARGET] or [r.e for r in target_equilibria(spec)]
    coll = [r.e for r in records if r.is_collinear]
    return min((orbit_distance(c, t) for c in coll for t in targets), default=float("inf"))


def relabel_links(e) -> np.ndarray:
    """(e1, e2, e3) -> (e2, e3, e1), matching (d1, d2, d3) -> (d2, d3, d1)."""
    return np.roll(blocks(e), -1, axis=0).ravel()


def brute_force_collinear(spec: SpecLike, x_max: float = 10.0, nx: int = 4001, ns: int = 400,
                          tol: float = 1e-10) -> np.ndarray:
    """Independent (x, s) root search on a grid with 2-D Newton refinement.

    Seeds are the local minima of the scaled residual on an
    ``nx`` x ``ns`` grid over ``[-x_max, x_max] x (0, (d1+d2+d3)^2]``; each
    seed is refined with ``scipy.optimize.root``. Returns an ``(m, 2)``
    array of distinct converged ``(x, s)`` pairs.
    """
    d = np.sqrt(squared_distances(spec))
    s_max = float(d.sum() ** 2)
    xs = np.linspace(-x_max, x_max, nx)
    ss = np.geomspace(s_max * 1e-8, s_max, ns)
    X, S = np.meshgrid(xs, ss, indexing="ij")
    r1, r2 = collinear_residuals(X, S, spec)
    norm = 1.0 + d.max() ** 2 * (1 + np.abs(X)) ** 3
    res = np.hypot(r1, r2) / norm
    inner = res[1:-1, 1:-1]
    is_min = np.ones_like(inner, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_min &= inner <= res[1 + di:res.shape[0] - 1 + di, 1 + dj:res.shape[1] - 1 + dj]
    seeds = np.argwhere(is_min) + 1
    found = []
    for i, j in seeds:
        sol = optimize.root(lambda v: collinear_residuals(v[0], v[1], spec), [xs[i], ss[j]],
                            method="hybr", options={"xtol": 1e-14})
        x, s = sol.x
        if not (-x_max <= x <= x_max and 0 < s <= s_max):
            continue
        if abs(x) < 1e-6 or abs(1 + x) < 1e-6:
            continue
        r = np.hypot(*collinear_residuals(x, s, spec))
        if r > tol * (1 + d.max() ** 2 * (1 + abs(x)) ** 3):
            continue
        found.append((x, s))
    found.sort()
    out = []
    for x, s in found:
        if out and abs(x - out[-1][0]) < 1e-7 and abs(s - out[-1][1]) < 1e-7 * (1 + s):
            continue
        out.append((x, s))
    return np.array(out).reshape(-1, 2)


def write_catalog_csv(records, fh=None) -> str:
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CATALOG_COLUMNS)
    for r in records:
        w.writerow(r.to_row())
    return buf.getvalue() if fh is None else ""


def catalog_dict(spec: FormationSpec, records) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "equilibrium_catalog",
        "spec": list(spec.as_tuple()),
        "records": [r.to_dict() for r in records],
        "target_separation": target_separation(spec, records),
        "potential": [potential(r.e, spec) for r in records],
    }


def catalog_json(spec: FormationSpec, records) -> str:
    return json.dumps(catalog_dict(spec, records))
