"""
Population effect bounds from a partially representative estimand
=================================================================

If the estimand equals the average effect over a subpopulation of size
P(W*=1), the population average effect is pinned down only up to the
effects of the excluded complement.  With outcome-support bounds on the
per-cell effects, that gives a sharp interval whose width shrinks
linearly in the representative share.
"""

import numpy as np

from estimand_audit import (
    SupportBounds,
    ate_bounds_from_validity,
    ate_bounds_general,
    cell_table,
    decompose_negative_weights,
    mu,
    uniform_internal_validity,
)

support = SupportBounds(-2.0, 3.0)

design = cell_table(
    labels=("1", "2"),
    p=(0.2, 0.8),
    a=(0.24, 0.09),
    tau=(1.0, 3.0),
)
report = uniform_internal_validity(design)
value = mu(design)
interval = ate_bounds_from_validity(value, report.p_representative, support)

print("estimand value:", value)
print("representative share P(W*=1):", report.p_representative)
print("bounds on the population average effect:",
      (interval.lo, interval.hi))
print("width = (B_u - B_l)(1 - P(W*=1)):", interval.width,
      "=", (support.b_hi - support.b_lo) * (1 - report.p_representative))

# The general construction agrees whenever a representation exists.
general = ate_bounds_general(design, value, support)
print("general bounds:", (general.lo, general.hi))

# With negative weights there's no representative subpopulation, but
# the estimand still splits into a positively and a negatively weighted
# average; reporting both makes the sign structure visible.
signed = cell_table(
    labels=("1", "2", "3"),
    p=(0.3, 0.4, 0.3),
    a=(0.4, -0.1, 0.25),
    tau=(1.0, 3.0, 2.0),
)
dec = decompose_negative_weights(signed)
print("\nnegative-weight design")
print("  omega+ =", dec.omega_plus, " mu+ =", dec.mu_plus)
print("  omega- =", dec.omega_minus, " mu- =", dec.mu_minus)
print("  recombined:", dec.omega_plus * dec.mu_plus
      - dec.omega_minus * dec.mu_minus)
print("  direct estimand value:", mu(signed))

rep = uniform_internal_validity(signed)
print("  representation exists:", rep.exists)
general = ate_bounds_general(signed, mu(signed), support)
print("  bounds remain available:", (general.lo, general.hi))
print("  interval width / full support width:",
      general.width / (support.b_hi - support.b_lo))
