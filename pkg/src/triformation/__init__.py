"""Gradient-law distance control of three planar robots on a directed cycle."""
from .algebra import FormationSpec, incidence_matrix, links_from_positions, positions_from_links, psi
from .dynamics import Classification, IntegratorConfig, TrajectoryRecord, integrate, integrate_positions
from .equilibria import EquilibriumKind, EquilibriumRecord, all_equilibria, collinear_equilibria
from .errors import TriformationError

__version__ = "0.1.0"

__all__ = [
    "FormationSpec", "incidence_matrix", "links_from_positions", "positions_from_links", "psi",
    "Classification", "IntegratorConfig", "TrajectoryRecord", "integrate", "integrate_positions",
    "EquilibriumKind", "EquilibriumRecord", "all_equilibria", "collinear_equilibria",
    "TriformationError",
]
