"""Numerical experiments tying the Gamma conditions to the actual flow.

* outward probes: the exact inner product <f(p + eps n), n> at equilibria
  on the collocated and line sets, next to its linear prediction eps n^T A n;
* Monte-Carlo region-of-attraction runs from random and collinear starts;
* escape runs from small normal offsets of collinear equilibria;
* the three-way comparison of V-dot expressions.
"""
from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import optimize

from .algebra import (
    FormationSpec,
    jacobian_links,
    links_from_positions,
    oriented_area2,
)
from .dynamics import (
    SCHEMA_VERSION,
    Classification,
    IntegratorConfig,
    e_vector_field,
    exponential_tail,
    integrate,
    vdot_chain_rule,
    vdot_rigidity,
    vdot_sum_of_squares,
)
from .equilibria import (
    EquilibriumKind,
    EquilibriumRecord,
    all_equilibria,
    collinear_equilibria,
    is_equilateral,
    orbit_distance,
)
from .errors import VerificationError
from .manifolds import (
    ManifoldTag,
    gamma_collocated_closed,
    line_set_tangents,
    normal_basis_collocated,
    normal_basis_line_set,
    orthogonal_normal_line_set,
)

DEFAULT_LADDER = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
MONTECARLO_COLUMNS = ("trial", "seed", "classification", "final_V", "rate")


def random_specs(n: int, seed: int = 0, low: float = 0.1, high: float = 10.0) -> List[FormationSpec]:
    """``n`` specs with log-uniform lengths in [low, high], rejection-filtered for realizability."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        d = np.exp(rng.uniform(np.log(low), np.log(high), 3))
        if all(d[i] < d[(i + 1) % 3] + d[(i + 2) % 3] for i in range(3)):
            out.append(FormationSpec(*map(float, d)))
    return out


def random_links(rng, scale: float = 1.0) -> np.ndarray:
    return links_from_positions(rng.standard_normal(6) * scale)


# --- outward probes -------------------------------------------------------

@dataclass
class ProbeResult:
    base: np.ndarray
    normal: np.ndarray
    eps: np.ndarray
    inner_products: np.ndarray
    verdict: bool
    slope: float
    predicted_slope: float
    manifold: str = ""

    @property
    def slope_error(self) -> float:
        return abs(self.slope - self.predicted_slope) / abs(self.predicted_slope)

    def to_dict(self) -> dict:
        return {
            "manifold": self.manifold,
            "base": self.base.tolist(),
            "normal": self.normal.tolist(),
            "eps": self.eps.tolist(),
            "inner_products": self.inner_products.tolist(),
            "verdict": self.verdict,
            "slope": self.slope,
            "predicted_slope": self.predicted_slope,
        }


def outward_probe(p, n, spec, eps_ladder: Sequence[float] = DEFAULT_LADDER, manifold: str = "") -> ProbeResult:
    """Evaluate <f(p + eps n), n> without linearization along a decreasing eps ladder.

    The slope is the difference quotient over the two smallest rungs; the
    prediction is n^T A n = (1/2) n^T (A + A^T) n with A the Jacobian at p.
    """
    p = np.asarray(p, dtype=float).reshape(6)
    n = np.asarray(n, dtype=float).reshape(6)
    n = n / np.linalg.norm(n)
    eps = np.asarray(eps_ladder, dtype=float)
    if eps.ndim != 1 or eps.size < 2 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise ValueError("eps ladder must be strictly decreasing and positive, length >= 2")
    ip = np.array([e_vector_field(p + h * n, spec) @ n for h in eps])
    slope = float((ip[-2] - ip[-1]) / (eps[-2] - eps[-1]))
    A = jacobian_links(p, spec)
    return ProbeResult(p, n, eps, ip, bool(ip[-1] > 0), slope, float(n @ A @ n), manifold)


def record_normals(record: EquilibriumRecord, include_orthogonal: bool = True):
    """Unit normals used to probe an equilibrium, with their manifold tag."""
    if record.kind is EquilibriumKind.ORIGIN:
        return ManifoldTag.COLLOCATED, list(normal_basis_collocated())
    if record.is_collinear:
        normals = [normal_basis_line_set(record.e)[0]]
        if include_orthogonal:
            normals.append(orthogonal_normal_line_set(record.e)[0])
        return ManifoldTag.LINE_SET, normals
    raise ValueError(f"no invariant manifold to probe for kind {record.kind.value}")


def probe_equilibrium(record: EquilibriumRecord, spec, eps_ladder=DEFAULT_LADDER,
                      include_orthogonal: bool = True) -> List[ProbeResult]:
    """Probe along every normal of the record's manifold, in both orientations."""
    tag, normals = record_normals(record, include_orthogonal)
    out = []
    for n in normals:
        for sign in (1.0, -1.0):
            out.append(outward_probe(record.e, sign * n, spec, eps_ladder, tag.value))
    return out


def tangent_probe(record: EquilibriumRecord, spec, eps_ladder=DEFAULT_LADDER) -> np.ndarray:
    """<f(p + eps v), n> for each line-set tangent v; rows follow :func:`line_set_tangents`."""
    n = normal_basis_line_set(record.e)[0]
    tangents = line_set_tangents(record.e)
    tangents = tangents / np.linalg.norm(tangents, axis=1)[:, None]
    return np.array([[e_vector_field(record.e + h * v, spec) @ n for h in eps_ladder] for v in tangents])


@dataclass
class ProbeSuiteReport:
    n_specs: int
    n_probes: int
    all_positive: bool
    max_slope_error: float
    failures: list = field(default_factory=list)


def probe_suite(specs, eps_ladder=(1e-4, 1e-5, 1e-6), slope_rtol: float = 0.05) -> ProbeSuiteReport:
    """Outward probes at the origin and every collinear equilibrium of each spec."""
    n_probes = 0
    worst = 0.0
    failures = []
    for spec in specs:
        for rec in [r for r in all_equilibria(spec) if r.kind is not EquilibriumKind.TARGET]:
            for pr in probe_equilibrium(rec, spec, eps_ladder):
                n_probes += 1
                worst = max(worst, pr.slope_error)
                if not np.all(pr.inner_products > 0) or pr.slope_error > slope_rtol:
                    failures.append((spec.as_tuple(), rec.kind.value, pr.to_dict()))
    return ProbeSuiteReport(len(specs), n_probes, not failures and True, worst, failures)


# --- Monte-Carlo region of attraction --------------------------------------

@dataclass
class TrialResult:
    trial: int
    seed: int
    classification: str
    initially_collinear: bool
    final_V: float
    final_time: float
    rate: float
    tail_r2: float
    max_length_error: float
    max_abs_area: float
    max_cycle_residual: float
    max_potential_excess: float
    n_samples: int
    e0: list


def initial_links(spec: FormationSpec, distribution: str, rng) -> np.ndarray:
    scale = float(sum(spec.as_tuple())) / 3.0
    if distribution == "gaussian":
        return links_from_positions(rng.standard_normal(6) * scale)
    if distribution == "collinear":
        # Horizontal line: the flow is rotation-equivariant and this keeps e1^T J e2 exactly 0.
        c = rng.standard_normal(2) * scale
        t = rng.standard_normal(3) * scale
        z = np.concatenate([c + np.array([ti, 0.0]) for ti in t])
        return links_from_positions(z)
    raise ValueError(f"unknown distribution {distribution!r}")


def _run_trial(args):
    spec_t, distribution, seed, index, cfg, emit_dir = args
    spec = FormationSpec(*spec_t)
    rng = np.random.default_rng([seed, index])
    e0 = initial_links(spec, distribution, rng)
    rec = integrate(e0, spec, cfg)
    slope, r2 = exponential_tail(rec) if rec.classification is Classification.TARGET else (float("nan"),) * 2
    if emit_dir:
        with open(os.path.join(emit_dir, f"trial_{index:05d}.csv"), "w", newline="") as fh:
            rec.to_csv(fh)
    return TrialResult(
        trial=index,
        seed=seed,
        classification=rec.classification.value,
        initially_collinear=oriented_area2(e0) == 0.0,
        final_V=float(rec.potential_values[-1]),
        final_time=rec.final_time,
        rate=-slope,
        tail_r2=r2,
        max_length_error=float(np.max(np.abs(rec.final_lengths() - spec.distances))),
        max_abs_area=rec.max_abs_collinearity(),
        max_cycle_residual=rec.max_cycle_residual(),
        max_potential_excess=rec.max_potential_excess(),
        n_samples=len(rec.times),
        e0=e0.tolist(),
    )


@dataclass
class MonteCarloReport:
    spec: tuple
    n_trials: int
    distribution: str
    seed: int
    trials: List[TrialResult]
    config: IntegratorConfig

    def counts(self) -> dict:
        out = {c.value: 0 for c in Classification}
        for t in self.trials:
            out[t.classification] += 1
        return out

    def unresolved(self) -> List[TrialResult]:
        return [t for t in self.trials if t.classification == Classification.UNRESOLVED.value]

    def collinear_starts(self) -> List[TrialResult]:
        return [t for t in self.trials if t.initially_collinear]

    def dichotomy_holds(self) -> bool:
        """Collinear starts end collinear and every other start reaches the target."""
        for t in self.trials:
            expect = Classification.COLLINEAR if t.initially_collinear else Classification.TARGET
            if t.classification != expect.value:
                return False
        return True

    def rate_stats(self) -> dict:
        r = np.array([t.rate for t in self.trials if np.isfinite(t.rate)])
        if r.size == 0:
            return {"count": 0}
        return {"count": int(r.size), "mean": float(r.mean()), "min": float(r.min()), "max": float(r.max())}

    def to_dict(self) -> dict:
        coll = self.collinear_starts()
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "montecarlo",
            "spec": list(self.spec),
            "seed": self.seed,
            "n_trials": self.n_trials,
            "distribution": {
                "name": self.distribution,
                "scale": float(sum(self.spec)) / 3.0,
                "description": "i.i.d. standard normal positions times (d1+d2+d3)/3"
                if self.distribution == "gaussian"
                else "positions on a random horizontal line, offsets standard normal times (d1+d2+d3)/3",
            },
            "config": asdict(self.config),
            "counts": self.counts(),
            "dichotomy_holds": self.dichotomy_holds(),
            "collinear_starts": {
                "count": len(coll),
                "outcomes": {c: sum(t.classification == c for t in coll) for c in self.counts()},
            },
            "rate": self.rate_stats(),
            "unresolved": [asdict(t) for t in self.unresolved()],
            "trials": [asdict(t) for t in self.trials],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(MONTECARLO_COLUMNS)
        for t in self.trials:
            w.writerow([t.trial, t.seed, t.classification, repr(t.final_V), repr(t.rate)])
        return buf.getvalue() if fh is None else ""


def region_of_attraction_study(spec: FormationSpec, n_trials: int, distribution: str = "gaussian",
                               seed: int = 42, cfg: Optional[IntegratorConfig] = None,
                               workers: int = 1, emit_dir: Optional[str] = None) -> MonteCarloReport:
    """Integrate ``n_trials`` independent starts and classify their limits.

    Trial ``i`` draws from ``numpy.random.default_rng([seed, i])`` so the
    report does not depend on execution order or on ``workers``.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    cfg = cfg or IntegratorConfig()
    if emit_dir:
        os.makedirs(emit_dir, exist_ok=True)
    jobs = [(spec.as_tuple(), distribution, seed, i, cfg, emit_dir) for i in range(n_trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trials = list(pool.map(_run_trial, jobs, chunksize=max(1, n_trials // (4 * workers))))
    else:
        trials = [_run_trial(j) for j in jobs]
    trials.sort(key=lambda t: t.trial)
    return MonteCarloReport(spec.as_tuple(), n_trials, distribution, seed, trials, cfg)


# --- escape from collinear equilibria --------------------------------------

def _family_point(x, d2):
    r = np.sqrt(d2 / (x * x + x + 1))
    return np.array([r, 0.0, x * r, 0.0, -(1 + x) * r, 0.0])


def distance_to_collinear_equilibria(e, spec: FormationSpec, records=None) -> float:
    """Distance from ``e`` to the set of collinear equilibria, rotations included."""
    records = collinear_equilibria(spec) if records is None else records
    best = min((orbit_distance(e, r.e) for r in records if not r.family), default=np.inf)
    if is_equilateral(spec):
        d2 = float(spec.squared[0])
        f = lambda phi: orbit_distance(e, _family_point(np.tan(phi), d2))
        phis = np.linspace(-np.pi / 2, np.pi / 2, 721)[1:-1]
        vals = np.array([f(p) for p in phis])
        k = int(np.argmin(vals))
        lo, hi = phis[max(k - 1, 0)], phis[min(k + 1, len(phis) - 1)]
        res = optimize.minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        best = min(best, float(res.fun), float(vals[k]))
    return float(best)


@dataclass
class EscapeTrial:
    equilibrium: int
    x: Optional[float]
    eps: float
    classification: str
    area_nondecreasing: bool
    min_distance: float
    initial_distance: float
    final_time: float


@dataclass
class EscapeReport:
    spec: tuple
    seed: int
    window: int
    trials: List[EscapeTrial]

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "kind": "escape", "spec": list(self.spec),
                "seed": self.seed, "window": self.window, "trials": [asdict(t) for t in self.trials]}


def near_collinear_escape_study(spec: FormationSpec, offsets=(1e-4, 1e-8, 0.0), seed: int = 0,
                                cfg: Optional[IntegratorConfig] = None, window: int = 50,
                                records=None, normal: str = "shifted") -> EscapeReport:
    """Start at collinear equilibria displaced by ``eps`` along a unit normal and integrate.

    ``records`` defaults to every non-family collinear equilibrium plus the
    x = 1 member of an equilateral family. The normal orientation is drawn
    from ``seed``.
    """
    cfg = cfg or IntegratorConfig()
    if records is None:
        records = [r for r in collinear_equilibria(spec) if not r.family or r.x == 1.0]
    rng = np.random.default_rng(seed)
    all_coll = collinear_equilibria(spec)
    trials = []
    for k, rec in enumerate(records):
        n_fn = normal_basis_line_set if normal == "shifted" else orthogonal_normal_line_set
        n = n_fn(rec.e)[0] * rng.choice([-1.0, 1.0])
        for eps in offsets:
            e0 = rec.e + eps * n
            tr = integrate(e0, spec, cfg)
            area = np.abs(tr.collinearity_values[: window + 1])
            nondecr = bool(np.all(np.diff(area) >= -1e-15 * (1 + area[:-1])))
            dists = [distance_to_collinear_equilibria(e, spec, all_coll) for e in tr.states]
            trials.append(EscapeTrial(k, rec.x, float(eps), tr.classification.value, nondecr,
                                      float(min(dists)), float(dists[0]), tr.final_time))
    return EscapeReport(spec.as_tuple(), seed, window, trials)


# --- V-dot identity ---------------------------------------------------------

def _rel(a, b):
    den = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-300)
    return np.where((a == 0) & (b == 0), 0.0, np.abs(a - b) / den)


@dataclass
class VdotReport:
    n_samples: int
    seed: int
    scale: float
    chain_vs_squares: float
    chain_vs_rigidity: float
    squares_vs_rigidity: float
    chain_vs_half_closed: float
    closed_ratio: float
    tol: float = 1e-10

    @property
    def closed_forms_agree(self) -> bool:
        return self.squares_vs_rigidity <= self.tol

    @property
    def literal_identity_holds(self) -> bool:
        """All three expressions equal to ``tol``, as the three-way identity requires."""
        return max(self.chain_vs_squares, self.chain_vs_rigidity, self.squares_vs_rigidity) <= self.tol

    @property
    def corrected_identity_holds(self) -> bool:
        """Chain rule equals one half of the (mutually equal) closed forms."""
        return self.closed_forms_agree and self.chain_vs_half_closed <= self.tol

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(literal_identity_holds=self.literal_identity_holds,
                 corrected_identity_holds=self.corrected_identity_holds)
        return d


def vdot_identity_suite_raw(spec, n_samples: int = 1000, seed: int = 7, scale: float = 1.0,
                            tol: float = 1e-10) -> VdotReport:
    rng = np.random.default_rng(seed)
    vals = np.array([
        (vdot_chain_rule(e, spec), vdot_sum_of_squares(e, spec), vdot_rigidity(e, spec))
        for e in (random_links(rng, scale) for _ in range(n_samples))
    ])
    c, q, r = vals.T
    report = VdotReport(
        n_samples=n_samples, seed=seed, scale=scale,
        chain_vs_squares=float(_rel(c, q).max()),
        chain_vs_rigidity=float(_rel(c, r).max()),
        squares_vs_rigidity=float(_rel(q, r).max()),
        chain_vs_half_closed=float(_rel(c, 0.5 * r).max()),
        closed_ratio=float(np.median(q / c)),
        tol=tol,
    )
    return report


def vdot_identity_suite(spec, n_samples: int = 1000, seed: int = 7, scale: float = 1.0,
                        tol: float = 1e-10) -> VdotReport:
    """Compare the three V-dot expressions at random link states.

    Raises :class:`VerificationError` if the closed forms disagree with
    each other or the chain rule differs from half of them.
    """
    report = vdot_identity_suite_raw(spec, n_samples, seed, scale, tol)
    if not report.corrected_identity_holds:
        raise VerificationError("V-dot expressions disagree beyond the factor-two relation", [report])
    return report


def gamma_collocated_sweep(specs) -> float:
    """Smallest eigenvalue of the closed-form collocated Gamma over ``specs``."""
    return min(float(np.linalg.eigvalsh(gamma_collocated_closed(s))[0]) for s in specs)


# --- property suite ----------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: float
    margin: float
    detail: str = ""


def _upper(name, value, threshold, detail=""):
    value = float(value)
    return Check(name, bool(value <= threshold), value, threshold, threshold - value, detail)


def _lower(name, value, threshold=0.0, detail=""):
    value = float(value)
    return Check(name, bool(value > threshold), value, threshold, value - threshold, detail)


def _fd_error(fun, jac, x):
    from .algebra import finite_difference_jacobian
    A = jac(x)
    return float(np.abs(finite_difference_jacobian(fun, x) - A).max() / (1.0 + np.abs(A).max()))


def run_verification(seed: int = 0, samples: int = 1000, quick: bool = False) -> dict:
    """Run the property suite; returns ``{"checks": [...], "notes": {...}}``.

    ``quick`` shrinks the spec sweeps. Everything is seeded from ``seed``,
    so equal arguments give identical results.
    """
    from .algebra import jacobian_positions
    from .dynamics import z_vector_field
    from .equilibria import relabel_links
    from .manifolds import gamma_from_basis, gamma_line_closed, gamma_line_product, line_normal_raw

    n_gamma, n_line, n_probe, n_fd = (100, 40, 4, 50) if quick else (1000, 200, 20, 200)
    checks = []
    rng = np.random.default_rng([seed, 0])
    specs = random_specs(n_line, seed=seed + 1)

    fd_l = fd_z = 0.0
    for k in range(n_fd):
        sp = specs[k % len(specs)]
        e = random_links(rng, float(np.mean(sp.distances)))
        fd_l = max(fd_l, _fd_error(lambda v: e_vector_field(v, sp), lambda v: jacobian_links(v, sp), e))
        z = rng.standard_normal(6)
        fd_z = max(fd_z, _fd_error(lambda v: z_vector_field(v, sp), lambda v: jacobian_positions(v, sp), z))
    checks.append(_upper("jacobian_links_fd", fd_l, 1e-6, f"{n_fd} states, central differences"))
    checks.append(_upper("jacobian_positions_fd", fd_z, 1e-6, f"{n_fd} states, central differences"))

    vd = [vdot_identity_suite_raw(FormationSpec(1.0, 1.0, 1.0), samples, seed, 1.0),
          vdot_identity_suite_raw(FormationSpec(3.0, 4.0, 5.0), samples, seed, 10.0)]
    checks.append(_upper("vdot_closed_forms_agree", max(r.squares_vs_rigidity for r in vd), 1e-10,
                         "sum of squares vs -psi^T R R^T psi"))
    checks.append(_upper("vdot_chain_rule_equals_half_closed", max(r.chain_vs_half_closed for r in vd), 1e-10,
                         "chain rule vs -(1/2) psi^T R R^T psi, scales 1 and 10"))

    w = np.linalg.eigvalsh(gamma_collocated_closed((1.0, 1.0, 1.0)))
    checks.append(_upper("gamma_collocated_equilateral_spectrum", np.abs(w - [3, 3, 9, 9]).max(), 1e-12))
    gspecs = random_specs(n_gamma, seed=seed + 2)
    from .manifolds import collocated_normals_raw
    closed_err = max(
        np.abs(gamma_collocated_closed(s) - gamma_from_basis(np.zeros(6), collocated_normals_raw(), s)).max()
        / np.abs(gamma_collocated_closed(s)).max()
        for s in gspecs
    )
    checks.append(_upper("gamma_collocated_closed_vs_jacobian", closed_err, 1e-12, f"{n_gamma} specs"))
    checks.append(_lower("gamma_collocated_min_eigenvalue", gamma_collocated_sweep(gspecs), 0.0, f"{n_gamma} specs"))

    min_gamma = np.inf
    closed_vs_jac = product_err = 0.0
    min_neg_sum = np.inf
    sym_err = 0.0
    for sp in specs:
        recs = collinear_equilibria(sp)
        rot = collinear_equilibria(sp.rotated())
        for r in recs:
            g = gamma_line_closed(r.e, sp)
            gj = float(gamma_from_basis(r.e, line_normal_raw(r.e)[None, :], sp)[0, 0])
            min_gamma = min(min_gamma, g)
            closed_vs_jac = max(closed_vs_jac, abs(g - gj) / abs(gj))
            if r.x is not None and r.x not in (0.0, -1.0):
                gp = gamma_line_product(r.x, r.s, float(r.psi[0]))
                product_err = max(product_err, abs(gp - g) / abs(g))
            min_neg_sum = min(min_neg_sum, -r.psi_sum)
            img = relabel_links(r.e)
            sym_err = max(sym_err, min(orbit_distance(img, q.e) for q in rot) / (1 + np.linalg.norm(img)))
    checks.append(_lower("gamma_line_set_positive", min_gamma, 0.0, f"{n_line} specs, shifted normal"))
    checks.append(_upper("gamma_line_closed_vs_jacobian", closed_vs_jac, 1e-8))
    checks.append(_upper("gamma_line_product_vs_closed", product_err, 1e-8, "(x, s) product form"))
    checks.append(_lower("psi_sum_negative", min_neg_sum, 0.0, f"-max(psi1+psi2+psi3) over {n_line} specs"))
    checks.append(_upper("cyclic_relabel_closure", sym_err, 1e-8))

    pr = probe_suite(specs[:n_probe])
    checks.append(Check("outward_probes", pr.all_positive and pr.max_slope_error <= 0.05, pr.max_slope_error, 0.05,
                        0.05 - pr.max_slope_error, f"{pr.n_probes} probes on {pr.n_specs} specs"))

    notes = {
        "vdot_closed_over_chain_rule": [r.closed_ratio for r in vd],
        "vdot_literal_three_way_max_spread": max(max(r.chain_vs_squares, r.chain_vs_rigidity) for r in vd),
    }
    return {"checks": [asdict(c) for c in checks], "notes": notes,
            "passed": all(c.passed for c in checks)}
