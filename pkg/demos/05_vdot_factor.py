"""
Three ways to write dV/dt
=========================

The chain rule gives dV/dt = grad V . e_dot. Two closed forms are often
quoted for it, a negative sum of squared differences of the weighted links
and -psi^T R R^T psi with the rigidity matrix R. They agree with each
other, and both are exactly twice the chain-rule value.
"""

import numpy as np

from triformation import FormationSpec, links_from_positions
from triformation.dynamics import (
    e_vector_field, potential, vdot_chain_rule, vdot_rigidity, vdot_sum_of_squares,
)

spec = FormationSpec(3.0, 4.0, 5.0)
rng = np.random.default_rng(7)
for _ in range(5):
    e = links_from_positions(rng.standard_normal(6) * 2)
    f = e_vector_field(e, spec)
    h = 1e-6
    numeric = (potential(e + h * f, spec) - potential(e - h * f, spec)) / (2 * h)
    c, q, r = vdot_chain_rule(e, spec), vdot_sum_of_squares(e, spec), vdot_rigidity(e, spec)
    print(f"numeric {numeric: .8e}  chain {c: .8e}  squares {q: .8e}  rigidity {r: .8e}  ratio {q / c:.12f}")

# With g_i = e_i psi_i the link velocity is H g, and grad V = (e_i psi_i)_i = g,
# so dV/dt = g^T H g = -(1/2) sum |g_i - g_j|^2 over the three edges.
