"""Cross-checks between the Riccati solution and the brute-force oracle, and
the side-by-side comparison with the reference two-mode example."""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass

import numpy as np

from . import oracle
from .controller import costate, gains, optimal_cost
from .model import InitialData, JumpLinearModel, path_probability
from .riccati import table_identity_residual, solve_riccati
from .simulate import exact_expected_cost, monte_carlo_cost, schedule_to_policy

DEFAULT_TOL = 1e-8


@dataclass
class Check:
    name: str
    value: float
    tol: float
    passed: bool


def _rel(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    return float(np.abs(a - b).max(initial=0.0)) / scale


def costate_gap(model, tables, init, schedule, policy, budget=oracle.DEFAULT_PATH_BUDGET) -> float:
    """Worst relative gap between the closed-form and definitional costates, all k, all prefixes."""
    worst = 0.0
    for k in range(1, model.N + 1):
        for prefix in itertools.product(range(model.L), repeat=k):
            if path_probability(model, prefix) == 0.0:
                continue
            lam = costate(model, tables, k, init, prefix, schedule)
            ref = oracle.definitional_costate(model, policy, init, k - 1, prefix, budget)
            worst = max(worst, _rel(lam, ref))
    return worst


def verify_instance(model: JumpLinearModel, init: InitialData, tol: float = DEFAULT_TOL,
                    budget: int = oracle.DEFAULT_PATH_BUDGET, full: bool = True) -> dict:
    """Every residual against ``tol``; ``full`` adds the costate and stationarity sweeps."""
    oracle.check_budget(model, budget)
    tables = solve_riccati(model)
    qp = oracle.build_qp(model, init, budget)
    hess_pd = oracle.hessian_pd(qp)
    checks = [Check("solvability_equivalence", float(hess_pd != tables.solvable), 0.5,
                    hess_pd == tables.solvable)]
    if not tables.solvable:
        return {"solvable": False, "failure": list(tables.failure), "checks": [asdict(c) for c in checks],
                "passed": all(c.passed for c in checks)}

    schedule = gains(tables)
    policy = schedule_to_policy(model, schedule, init)
    z, qp_min = oracle.solve_qp(qp)
    j_star = optimal_cost(model, tables, init)
    exact = exact_expected_cost(model, schedule, init, budget)
    values = {
        "table_identities": table_identity_residual(model, tables),
        "decision_vs_qp_argmin": _rel(policy.to_vector(), z),
        "optimal_cost_vs_qp_min": abs(j_star - qp_min) / max(1.0, abs(qp_min)),
        "exact_cost_vs_qp_min": abs(exact - qp_min) / max(1.0, abs(qp_min)),
        "symmetry": tables.max_asymmetry,
    }
    if full:
        scale = max(1.0, float(np.abs(qp.b).max(initial=0.0)))
        values["stationarity"] = oracle.stationarity_residual(model, policy, init, budget) / scale
        values["costate_identity"] = costate_gap(model, tables, init, schedule, policy, budget)
    for name, v in values.items():
        checks.append(Check(name, float(v), tol, bool(v < tol)))
    return {
        "solvable": True,
        "optimal_cost": j_star,
        "qp_minimum": qp_min,
        "exact_expected_cost": exact,
        "checks": [asdict(c) for c in checks],
        "passed": all(c.passed for c in checks),
    }


# ------------------------------------------------------------ reference example

# Reference table: k, W1, W2, T0_1, T0_2, T1_1, T1_2
REFERENCE_TABLE = [
    (0, 23.6031, 26.7636, (12.2690, 7.5948), (9.6518, 4.6516), 21.8683, 24.7279),
    (1, 23.1641, 26.2088, (12.0539, 7.4614), (9.4635, 4.5596), 21.4732, 24.2257),
    (2, 21.8477, 24.0482, (11.6367, 7.1986), (8.9148, 4.2748), 20.5775, 22.5743),
    (3, 17.7981, 19.0574, (9.6188, 5.9405), (7.1852, 3.4079), 16.8338, 17.9382),
    (4, 3.6400, 5.0800, (0.3659, 0.2187), (0.7673, 0.2769), 0.9770, 2.2790),
    (5, 1.1000, 1.7000, (0.0, 0.0), (0.0, 0.0), 0.0, 0.0),
]
# Reference controller u(k) = -Kx x(k+1) - Ku u(k-1); modes realized along the printed run
REFERENCE_GAINS = [
    (0, 2, (0.3606, 0.1738), 0.9239),
    (1, 2, (0.3611, 0.1740), 0.9243),
    (2, 1, (0.5326, 0.3295), 0.9419),
    (3, 1, (0.5404, 0.3338), 0.9458),
    (4, 1, (0.1005, 0.0601), 0.2684),
]
REFERENCE_COST = 93.7285
# reference row k corresponds to decision time t = k + ROW_OFFSET of this solver
ROW_OFFSET = 1
REFERENCE_TOL = 1e-3

ALIGNMENT_NOTE = (
    "Reference rows k=0..4 coincide with decision times t=k+1 of this solver "
    "(t=1..5; t=N-d=5 is the last decision). The reference labels therefore "
    "run one step behind the absolute time used here. Row k=5 lies in the "
    "terminal window where no decision exists; its W entries equal the "
    "one-step average of R from each mode (0.9*1+0.1*2, 0.3*1+0.7*2), a "
    "placeholder the recursions never produce."
)


def _entry(label, computed, printed, tol=REFERENCE_TOL, ambiguous=False):
    computed = np.atleast_1d(np.asarray(computed, dtype=float))
    printed = np.atleast_1d(np.asarray(printed, dtype=float))
    gap = float(np.abs(computed - printed).max())
    status = "AMBIGUOUS" if ambiguous else ("MATCH" if gap <= tol else "MISMATCH")
    return {"entry": label, "computed": computed.tolist(), "printed": printed.tolist(),
            "abs_gap": gap, "status": status}


def reproduce(model: JumpLinearModel, init: InitialData, mc_runs: int = 50, seed: int = 0) -> dict:
    tables = solve_riccati(model)
    schedule = gains(tables)
    rows = []
    for k, w1, w2, t01, t02, t11, t12 in REFERENCE_TABLE:
        t = k + ROW_OFFSET
        if t > model.N - model.d:
            avgR = [float(model.trans[l] @ model.R[:, 0, 0]) for l in range(model.L)]
            rows.append(_entry(f"table k={k} W", avgR, (w1, w2), ambiguous=True))
            rows.append(_entry(f"table k={k} T0,T1", np.zeros(6), (*t01, *t02, t11, t12), ambiguous=True))
            continue
        rows.append(_entry(f"table k={k} W_1", tables.W[t, 0, 0, 0], w1))
        rows.append(_entry(f"table k={k} W_2", tables.W[t, 1, 0, 0], w2))
        rows.append(_entry(f"table k={k} T0_1", tables.T0[t, 0, 0], t01))
        rows.append(_entry(f"table k={k} T0_2", tables.T0[t, 1, 0], t02))
        rows.append(_entry(f"table k={k} T1_1", tables.Tu[0, t, 0, 0, 0], t11))
        rows.append(_entry(f"table k={k} T1_2", tables.Tu[0, t, 1, 0, 0], t12))
    gain_rows = []
    for k, mode, kx, ku in REFERENCE_GAINS:
        t = k + ROW_OFFSET
        l = mode - 1
        computed = [*(tables.T0[t, l, 0] / tables.W[t, l, 0, 0]), tables.Tu[0, t, l, 0, 0] / tables.W[t, l, 0, 0]]
        gain_rows.append(_entry(f"u({k}) mode {mode}", computed, (*kx, ku)))
    gain_rows.append(_entry("u(5)", 0.0, 0.0, ambiguous=True))

    j_star = optimal_cost(model, tables, init)
    _, qp_min, _ = oracle.solve_policy(model, init)
    exact = exact_expected_cost(model, schedule, init)
    mc_mean, mc_se = monte_carlo_cost(model, schedule, init, mc_runs, seed)
    cost = {
        "closed_form": j_star,
        "qp_minimum": qp_min,
        "exact_expected_cost": exact,
        "closed_form_vs_qp_rel": abs(j_star - qp_min) / abs(qp_min),
        "printed": REFERENCE_COST,
        "printed_gap": j_star - REFERENCE_COST,
        "status": "AMBIGUOUS",
        "note": "printed figure may be a single realized trajectory; the exact expectation is the QP minimum",
        "monte_carlo": {"runs": mc_runs, "seed": seed, "mean": mc_mean, "stderr": mc_se},
    }
    return {
        "schema_version": 1,
        "alignment": {"row_offset": ROW_OFFSET, "note": ALIGNMENT_NOTE},
        "table": rows,
        "gains": gain_rows,
        "optimal_cost": cost,
    }
