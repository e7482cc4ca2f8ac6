"""Chain sampling, closed-loop rollouts and expected-cost evaluation.

Random numbers: numpy's PCG64 bit generator behind ``numpy.random.Generator``.
Run r of a Monte Carlo experiment with base seed s draws from
``SeedSequence(entropy=s, spawn_key=(r,))``, so a run's stream depends only on
(s, r) and never on scheduling. Modes are drawn by inverse CDF: one
``Generator.random()`` double U per step, mode = first index whose cumulative
probability exceeds U.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .controller import GainSchedule, closed_loop_prefix
from .model import InitialData, JumpLinearModel, path_probability
from .oracle import DEFAULT_PATH_BUDGET, PolicyTree, check_budget, policy_states


@dataclass(eq=False)
class Trajectory:
    """modes theta(0..N+1), states x(0..N+1), decisions u(-d..N-d) (row i is u(i-d))."""

    modes: np.ndarray
    states: np.ndarray
    decisions: np.ndarray
    cost: float

    def dynamics_residual(self, model: JumpLinearModel) -> float:
        worst = 0.0
        for k in range(model.N + 1):
            l = self.modes[k]
            pred = model.A[l] @ self.states[k] + model.B[l] @ self.decisions[k]
            scale = max(1.0, float(np.abs(pred).max()))
            worst = max(worst, float(np.abs(self.states[k + 1] - pred).max()) / scale)
        return worst

    def to_dict(self) -> dict:
        return {
            "modes": [int(l) + 1 for l in self.modes],
            "states": self.states.tolist(),
            "decisions": self.decisions.tolist(),
            "cost": self.cost,
        }


def realized_cost(model: JumpLinearModel, modes, states, decisions) -> float:
    """Sum of x'Qx (k=0..N), u(k-d)'R u(k-d) (k=d..N) and the terminal penalty on one path."""
    N, d = model.N, model.d
    total = 0.0
    for k in range(N + 1):
        x = states[k]
        total += float(x @ model.Q[modes[k]] @ x)
    for k in range(d, N + 1):
        u = decisions[k]
        total += float(u @ model.R[modes[k]] @ u)
    xN = states[N + 1]
    total += float(xN @ model.P_term[modes[N + 1]] @ xN)
    return total


def _rng(seed: int, run: int | None = None) -> np.random.Generator:
    if run is None:
        ss = np.random.SeedSequence(seed)
    else:
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(run,))
    return np.random.Generator(np.random.PCG64(ss))


def _draw(cdf: np.ndarray, u: float) -> int:
    return int(min(np.searchsorted(cdf, u, side="right"), cdf.size - 1))


def sample_chain(model: JumpLinearModel, seed: int, run: int | None = None) -> np.ndarray:
    """theta(0..N+1) with theta(0) ~ pi0 and transitions from ``trans``."""
    rng = _rng(seed, run)
    u = rng.random(model.N + 2)
    cdf0 = np.cumsum(model.pi0)
    cdfs = np.cumsum(model.trans, axis=1)
    modes = np.empty(model.N + 2, dtype=int)
    modes[0] = _draw(cdf0, u[0])
    for k in range(1, model.N + 2):
        modes[k] = _draw(cdfs[modes[k - 1]], u[k])
    return modes


def rollout(model: JumpLinearModel, schedule: GainSchedule, init: InitialData, modes) -> Trajectory:
    modes = np.asarray(modes, dtype=int)
    if modes.shape != (model.N + 2,):
        raise ValueError(f"need {model.N + 2} modes theta(0..N+1), got {modes.shape}")
    init.check(model)
    xs, us = closed_loop_prefix(model, schedule, init, tuple(int(l) for l in modes[:-1]))
    return Trajectory(modes, xs, us, realized_cost(model, modes, xs, us))


def monte_carlo_cost(
    model: JumpLinearModel,
    schedule: GainSchedule,
    init: InitialData,
    runs: int,
    seed: int = 0,
    workers: int = 1,
) -> tuple[float, float]:
    """Sample mean and standard error of the realized cost over ``runs`` chains."""
    if runs < 1:
        raise ValueError("runs must be >= 1")

    def one(r):
        return rollout(model, schedule, init, sample_chain(model, seed, r)).cost

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            costs = np.array(list(pool.map(one, range(runs))))
    else:
        costs = np.array([one(r) for r in range(runs)])
    mean = float(costs.mean())
    stderr = float(costs.std(ddof=1) / np.sqrt(runs)) if runs > 1 else 0.0
    return mean, stderr


def iter_trajectories(model, schedule, init, runs, seed=0):
    for r in range(runs):
        yield rollout(model, schedule, init, sample_chain(model, seed, r))


def exact_expected_cost(
    model: JumpLinearModel,
    policy: GainSchedule | PolicyTree,
    init: InitialData,
    budget: int = DEFAULT_PATH_BUDGET,
) -> float:
    """Probability-weighted realized cost over every theta(0..N+1)."""
    check_budget(model, budget)
    init.check(model)
    d, N = model.d, model.N
    total = 0.0
    for modes in itertools.product(range(model.L), repeat=N + 2):
        w = path_probability(model, modes)
        if w == 0.0:
            continue
        if isinstance(policy, GainSchedule):
            xs, us = closed_loop_prefix(model, policy, init, modes[:-1])
        else:
            xs = policy_states(model, policy, init, modes)
            us = list(init.u_pre) + [policy.decide(t, modes) for t in range(N - d + 1)]
        total += w * realized_cost(model, modes, xs, us)
    return total


def schedule_to_policy(model: JumpLinearModel, schedule: GainSchedule, init: InitialData) -> PolicyTree:
    """Closed-loop decisions of a gain schedule written out as a policy tree."""
    policy = PolicyTree.zeros(model)
    for t in range(model.N - model.d + 1):
        for prefix in itertools.product(range(model.L), repeat=t + 1):
            _, us = closed_loop_prefix(model, schedule, init, prefix)
            policy.decisions[t][prefix] = us[t + model.d]
    return policy
