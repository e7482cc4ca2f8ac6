#!/usr/bin/env python3
"""Exact optimal cost of the two-mode example as the horizon grows."""

import dataclasses

from jumpdelay import optimal_cost, solve_riccati, two_mode_example
from jumpdelay.oracle import solve_policy

model, init = two_mode_example()
for N in range(3, 10):
    m = dataclasses.replace(model, N=N)
    j = optimal_cost(m, solve_riccati(m), init)
    _, qp_min, _ = solve_policy(m, init)
    print(f"N={N}  J*={j:.7f}  QP={qp_min:.7f}  rel gap={abs(j - qp_min) / qp_min:.1e}")
