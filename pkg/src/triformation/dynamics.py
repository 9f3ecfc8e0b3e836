"""Closed-loop gradient dynamics, the potential V and trajectory integration."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy import integrate as _integrate
from scipy import stats

from .algebra import (
    CYCLE_TOL,
    SpecLike,
    blocks,
    check_links,
    links_from_positions,
    oriented_area2,
    psi,
    rigidity_matrix,
    squared_distances,
)
from .errors import ConfigError, StallError

SCHEMA_VERSION = "1"
TRAJECTORY_COLUMNS = ("t", "e1x", "e1y", "e2x", "e2y", "e3x", "e3y", "V", "area2")


class Classification(str, Enum):
    TARGET = "TargetFormation"
    COLLINEAR = "CollinearEquilibrium"
    UNRESOLVED = "Unresolved"


def _weighted_links(e, spec):
    """Blocks e_i * psi_i, shape (3, 2)."""
    return blocks(e) * psi(e, spec)[:, None]


def z_vector_field(z, spec: SpecLike) -> np.ndarray:
    """Right-hand side of the position dynamics, block i = e_i psi_i."""
    return _weighted_links(links_from_positions(z), spec).ravel()


def e_vector_field(e, spec: SpecLike) -> np.ndarray:
    """Right-hand side of the link dynamics.

    Blocks are ``(e2 psi2 - e1 psi1, e3 psi3 - e2 psi2, e1 psi1 - e3 psi3)``,
    which telescope to zero so the field is tangent to the link space.
    """
    g = _weighted_links(e, spec)
    return (np.roll(g, -1, axis=0) - g).ravel()


def potential(e, spec: SpecLike) -> float:
    """V(e) = psi^T psi / 4."""
    p = psi(e, spec)
    return 0.25 * float(p @ p)


def vdot_chain_rule(e, spec: SpecLike) -> float:
    """grad V(e) . e_dot, with grad V = (psi_i e_i)_i."""
    return float(_weighted_links(e, spec).ravel() @ e_vector_field(e, spec))


def vdot_sum_of_squares(e, spec: SpecLike) -> float:
    """-(|g1-g2|^2 + |g2-g3|^2 + |g3-g1|^2) with g_i = e_i psi_i.

    The sum-of-squares form. It equals ``2 * vdot_chain_rule``;
    see :func:`potential_rate` for the derivative itself.
    """
    g = _weighted_links(e, spec)
    diff = g - np.roll(g, -1, axis=0)
    return -float(np.sum(diff * diff))


def vdot_rigidity(e, spec: SpecLike) -> float:
    """-psi^T R(e) R(e)^T psi, the rigidity-matrix form (same value as the squared form)."""
    p = psi(e, spec)
    w = rigidity_matrix(e).T @ p
    return -float(w @ w)


def potential_rate(e, spec: SpecLike) -> float:
    """Time derivative of V along the link dynamics.

    Equal to ``-psi^T R R^T psi / 2``; the factor one half is what the chain
    rule gives for V = psi^T psi / 4.
    """
    return 0.5 * vdot_rigidity(e, spec)


@dataclass(frozen=True)
class IntegratorConfig:
    """Integration settings and stop conditions.

    ``method`` is ``"dop853"`` (adaptive Dormand-Prince 8(5,3), the default),
    ``"rk45"`` (Dormand-Prince 5(4)) or ``"rk4"`` (fixed step ``step``).
    The tight default tolerances are needed for the field norm to drop below
    ``field_tol`` near collinear equilibria; at rtol 1e-9 it stalls near 1e-9.
    """

    method: str = "dop853"
    rtol: float = 1e-12
    atol: float = 1e-14
    step: float = 1e-3
    t_max: float = 1e3
    v_target: float = 1e-14
    field_tol: float = 1e-12
    v_collinear_min: float = 1e-6
    velocity_tol: float = 1e-10
    max_steps: int = 2_000_000

    def __post_init__(self):
        if self.method not in ("rk45", "dop853", "rk4"):
            raise ConfigError(f"unknown integration method {self.method!r}")
        for name in ("rtol", "atol", "step", "t_max", "v_target", "field_tol", "velocity_tol"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be positive, got {value!r}")
        if self.v_collinear_min < 0:
            raise ConfigError("v_collinear_min must be non-negative")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")


def monotonic_step_tol(v):
    return 1e-10 * (1.0 + np.asarray(v))


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    states: np.ndarray
    potential_values: np.ndarray
    collinearity_values: np.ndarray
    classification: Classification
    spec: tuple
    config: IntegratorConfig
    positions: Optional[np.ndarray] = None
    nfev: int = 0
    solution: Optional[object] = field(default=None, repr=False, compare=False)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    def final_lengths(self) -> np.ndarray:
        return np.linalg.norm(blocks(self.final_state), axis=1)

    def max_cycle_residual(self) -> float:
        return float(np.max(np.linalg.norm(self.states.reshape(-1, 3, 2).sum(axis=1), axis=1)))

    def max_potential_excess(self) -> float:
        """Largest per-step rise of V in units of the allowed 1e-10 (1 + V)."""
        v = self.potential_values
        if v.size < 2:
            return 0.0
        return float(np.max((v[1:] - v[:-1]) / monotonic_step_tol(v[:-1])))

    def is_monotone(self) -> bool:
        return self.max_potential_excess() <= 1.0

    def max_abs_collinearity(self) -> float:
        return float(np.max(np.abs(self.collinearity_values)))

    def link_state_at(self, t) -> np.ndarray:
        """Links at time ``t`` from the dense output (needs ``keep_dense=True``)."""
        if self.solution is None:
            raise ValueError("record was integrated without keep_dense=True")
        y = np.asarray(self.solution(t))
        return links_from_positions(y) if self.positions is not None else _expand_links(y)

    def rows(self):
        for t, e, v, a in zip(self.times, self.states, self.potential_values, self.collinearity_values):
            yield [float(t), *map(float, e), float(v), float(a)]

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for row in self.rows():
            w.writerow([repr(x) for x in row])
        return buf.getvalue() if fh is None else ""

    def to_dict(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "kind": "trajectory",
            "spec": list(self.spec),
            "config": asdict(self.config),
            "classification": self.classification.value,
            "columns": list(TRAJECTORY_COLUMNS),
            "t": self.times.tolist(),
            "e": self.states.tolist(),
            "V": self.potential_values.tolist(),
            "area2": self.collinearity_values.tolist(),
        }
        if self.positions is not None:
            out["z"] = self.positions.tolist()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _reduced_links_rhs(a1, a2, a3):
    # State (e1, e2); e3 = -(e1 + e2) keeps the cycle constraint exact.
    def rhs(t, y):
        x1, y1, x2, y2 = y
        x3 = -(x1 + x2)
        y3 = -(y1 + y2)
        p1 = x1 * x1 + y1 * y1 - a1
        p2 = x2 * x2 + y2 * y2 - a2
        p3 = x3 * x3 + y3 * y3 - a3
        return np.array([x2 * p2 - x1 * p1, y2 * p2 - y1 * p1, x3 * p3 - x2 * p2, y3 * p3 - y2 * p2])

    return rhs


def _positions_rhs(a1, a2, a3):
    def rhs(t, z):
        z1x, z1y, z2x, z2y, z3x, z3y = z
        e1x, e1y = z2x - z1x, z2y - z1y
        e2x, e2y = z3x - z2x, z3y - z2y
        e3x, e3y = z1x - z3x, z1y - z3y
        p1 = e1x * e1x + e1y * e1y - a1
        p2 = e2x * e2x + e2y * e2y - a2
        p3 = e3x * e3x + e3y * e3y - a3
        return np.array([e1x * p1, e1y * p1, e2x * p2, e2y * p2, e3x * p3, e3y * p3])

    return rhs


def _expand_links(y):
    e1, e2 = y[:2], y[2:4]
    return np.concatenate([e1, e2, -(e1 + e2)])


class _Monitor:
    """Accumulates samples and evaluates the stop conditions."""

    def __init__(self, spec, cfg, to_links, positions_mode):
        self.spec = spec
        self.cfg = cfg
        self.to_links = to_links
        self.positions_mode = positions_mode
        self.t, self.e, self.v, self.a, self.y = [], [], [], [], []

    def add(self, t, y):
        e = self.to_links(y)
        v = potential(e, self.spec)
        self.t.append(float(t))
        self.e.append(e)
        self.v.append(v)
        self.a.append(oriented_area2(e))
        if self.positions_mode:
            self.y.append(np.array(y, dtype=float))
        return self.classify(e, v, y)

    def classify(self, e, v, y):
        cfg = self.cfg
        if v < cfg.v_target:
            if not self.positions_mode:
                return Classification.TARGET
            if np.linalg.norm(z_vector_field(y, self.spec)) < cfg.velocity_tol:
                return Classification.TARGET
        if v > cfg.v_collinear_min and np.linalg.norm(e_vector_field(e, self.spec)) < cfg.field_tol:
            return Classification.COLLINEAR
        return None


def _run(rhs, y0, spec, cfg, to_links, positions_mode, keep_dense, raise_on_stall):
    mon = _Monitor(spec, cfg, to_links, positions_mode)
    verdict = mon.add(0.0, y0)
    dense = []
    nfev = 0
    if verdict is None:
        if cfg.method == "rk4":
            verdict, nfev = _rk4_loop(rhs, y0, cfg, mon)
        else:
            cls = _integrate.RK45 if cfg.method == "rk45" else _integrate.DOP853
            solver = cls(rhs, 0.0, np.asarray(y0, dtype=float), cfg.t_max, rtol=cfg.rtol, atol=cfg.atol)
            steps = 0
            while solver.status == "running" and steps < cfg.max_steps:
                solver.step()
                steps += 1
                if solver.status == "failed":
                    break
                if keep_dense:
                    dense.append(solver.dense_output())
                verdict = mon.add(solver.t, solver.y)
                if verdict is not None:
                    break
            nfev = solver.nfev
    record = TrajectoryRecord(
        times=np.array(mon.t),
        states=np.array(mon.e),
        potential_values=np.array(mon.v),
        collinearity_values=np.array(mon.a),
        classification=verdict or Classification.UNRESOLVED,
        spec=tuple(float(x) for x in np.sqrt(squared_distances(spec))),
        config=cfg,
        positions=np.array(mon.y) if positions_mode else None,
        nfev=nfev,
    )
    if dense:
        ts = np.concatenate([[0.0], record.times[1:]])
        record.solution = _integrate.OdeSolution(ts, dense)
    if verdict is None and raise_on_stall:
        raise StallError(f"no stop condition met by t = {record.final_time:g}", record)
    return record


def _rk4_loop(rhs, y0, cfg, mon):
    y = np.array(y0, dtype=float)
    h = cfg.step
    n_steps = min(int(np.ceil(cfg.t_max / h)), cfg.max_steps)
    for k in range(1, n_steps + 1):
        t = (k - 1) * h
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + h / 2 * k1)
        k3 = rhs(t + h / 2, y + h / 2 * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        verdict = mon.add(k * h, y)
        if verdict is not None:
            return verdict, 4 * k
    return None, 4 * n_steps


def integrate(e0, spec: SpecLike, cfg: Optional[IntegratorConfig] = None, *,
              keep_dense: bool = False, raise_on_stall: bool = False) -> TrajectoryRecord:
    """Integrate the link dynamics from ``e0`` until a stop condition fires.

    The state is advanced in the coordinates (e1, e2) with e3 = -(e1 + e2),
    which keeps every sample on the link space. With ``raise_on_stall`` a
    run that reaches ``cfg.t_max`` raises :class:`StallError` carrying the
    record; otherwise it is returned classified ``Unresolved``.
    """
    cfg = cfg or IntegratorConfig()
    e0 = check_links(e0, CYCLE_TOL)
    e0 = e0.copy()
    e0[4:] = -(e0[:2] + e0[2:4])
    a = squared_distances(spec)
    return _run(_reduced_links_rhs(*a), e0[:4], spec, cfg, _expand_links, False, keep_dense, raise_on_stall)


def integrate_positions(z0, spec: SpecLike, cfg: Optional[IntegratorConfig] = None, *,
                        keep_dense: bool = False, raise_on_stall: bool = False) -> TrajectoryRecord:
    """Integrate the position dynamics; ``states`` holds the induced links.

    A target classification additionally requires |z_dot| < ``cfg.velocity_tol``.
    """
    cfg = cfg or IntegratorConfig()
    z0 = np.asarray(z0, dtype=float).reshape(6)
    a = squared_distances(spec)
    return _run(_positions_rhs(*a), z0, spec, cfg, links_from_positions, True, keep_dense, raise_on_stall)


def exponential_tail(record: TrajectoryRecord, fraction: float = 0.5):
    """Least-squares line through log V over the final ``fraction`` of the run.

    Returns ``(slope, r_squared)``; the decay rate is ``-slope``.
    """
    t = record.times
    v = record.potential_values
    mask = (t >= t[-1] * (1 - fraction)) & (v > 0)
    if mask.sum() < 3:
        return float("nan"), float("nan")
    fit = stats.linregress(t[mask], np.log(v[mask]))
    return float(fit.slope), float(fit.rvalue ** 2)
