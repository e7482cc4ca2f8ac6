"""Feedback law, costate and optimal cost built from the Riccati tables.

Indexing: decision u(t) is taken at time t with knowledge of theta(0..t) and
x(t), and is applied at time t + d::

    time        t-d   ...   t-1    t     t+1   ...   t+d
    applied     u(t-2d) ... u(t-d-1) u(t-d) ...      u(t)
                                     |
    decided at t:  u(t) = -Kx[t] x(t+1) - sum_j Ku[j][t] u(t-d+j)

x(t+1) = A x(t) + B u(t-d) is already determined at time t, so the
controller predicts it one step ahead. Decisions u(-d..-1) come from the
initial data.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .model import InitialData, JumpLinearModel, enumerate_paths
from .riccati import RiccatiTables, backward_expectation


class NotSolvable(ArithmeticError):
    pass


@dataclass(eq=False)
class GainSchedule:
    """Kx[t][l] (m x n) and Ku[j-1][t][l] (m x m) for t = 0..N-d."""

    Kx: np.ndarray
    Ku: np.ndarray

    @property
    def last_decision(self) -> int:
        return self.Kx.shape[0] - 1

    def to_dict(self) -> dict:
        out = []
        for t in range(self.Kx.shape[0]):
            per_mode = []
            for l in range(self.Kx.shape[1]):
                per_mode.append({
                    "mode": l + 1,
                    "K_x": self.Kx[t, l].tolist(),
                    "K_u": [self.Ku[j, t, l].tolist() for j in range(self.Ku.shape[0])],
                })
            out.append({"t": t, "modes": per_mode})
        return {"gains": out}


def gains(tables: RiccatiTables) -> GainSchedule:
    if not tables.solvable:
        t, l = tables.failure
        raise NotSolvable(f"W not positive definite at t={t}, mode={l + 1}")
    last = tables.last_decision
    L = tables.W.shape[1]
    Kx = np.zeros((last + 1,) + tables.T0.shape[1:])
    Ku = np.zeros((tables.Tu.shape[0], last + 1) + tables.Tu.shape[2:])
    for t in range(last + 1):
        for l in range(L):
            Kx[t, l] = tables.w_solve(t, l, tables.T0[t, l])
            for j in range(Ku.shape[0]):
                Ku[j, t, l] = tables.w_solve(t, l, tables.Tu[j, t, l])
    return GainSchedule(Kx, Ku)


def control(model: JumpLinearModel, schedule: GainSchedule, t: int, mode: int,
            x_t: np.ndarray, u_hist: np.ndarray) -> np.ndarray:
    """Decision u(t) from x(t), theta(t) and u_hist = [u(t-d), ..., u(t-1)]."""
    if not 0 <= t <= schedule.last_decision:
        raise ValueError(f"decision time {t} outside 0..{schedule.last_decision}")
    d = model.d
    u_hist = np.asarray(u_hist, dtype=float).reshape(d, model.m)
    x_next = model.A[mode] @ x_t + model.B[mode] @ u_hist[0]
    u = -schedule.Kx[t, mode] @ x_next
    for j in range(1, d):
        u -= schedule.Ku[j - 1, t, mode] @ u_hist[j]
    return u


def closed_loop_prefix(model: JumpLinearModel, schedule: GainSchedule, init: InitialData, modes):
    """States x(0..K) and decisions u(-d..) along the prefix theta(0..K-1).

    Returns (xs, us) where us[i] = u(i - d). Decisions are produced for every
    decision time t <= min(K-1, N-d).
    """
    d = model.d
    K = len(modes)
    xs = [np.asarray(init.x0, dtype=float)]
    us = [u for u in init.u_pre]
    for k in range(K):
        if k <= schedule.last_decision:
            us.append(control(model, schedule, k, modes[k], xs[k], us[k:k + d]))
        xs.append(model.A[modes[k]] @ xs[k] + model.B[modes[k]] @ us[k])
    return np.array(xs), np.array(us)


def costate(model: JumpLinearModel, tables: RiccatiTables, k: int, init: InitialData,
            modes, schedule: GainSchedule | None = None) -> np.ndarray:
    """lambda_{k-1} in closed loop along the chain prefix theta(0..k-1).

    For k >= d:
        lambda_{k-1} = (P - P0)(k-1) x(k)
            - sum_s alpha^{d-s}' W(k-s-1)^{-1} E{alpha^{d-s} x(k) | theta(0..k-s-1)}
    For k < d some pending inputs are pre-horizon data rather than feedback
    and the closed form does not apply; there lambda_{k-1} is obtained from
    lambda_{k-1} = E{Q x(k) + A' lambda_k | theta(0..k-1)}, stepping forward
    until k reaches d.
    """
    N, d = model.N, model.d
    if not 1 <= k <= N:
        raise ValueError(f"k must lie in 1..N={N}")
    modes = tuple(modes)
    if len(modes) != k:
        raise ValueError("need the chain prefix theta(0..k-1)")
    if schedule is None:
        schedule = gains(tables)
    if k < d:
        xs, _ = closed_loop_prefix(model, schedule, init, modes)
        lam = np.zeros(model.n)
        for nxt in range(model.L):
            w = model.trans[modes[-1], nxt]
            if w == 0.0:
                continue
            lam_k = costate(model, tables, k + 1, init, modes + (nxt,), schedule)
            lam += w * (model.Q[nxt] @ xs[k] + model.A[nxt].T @ lam_k)
        return lam
    xs, us = closed_loop_prefix(model, schedule, init, modes)
    lk1 = modes[k - 1]
    lam = (tables.P[k - 1, lk1] - tables.P0[k - 1, lk1]) @ xs[k]
    for s in range(1, d):
        tau = k - s - 1
        alpha = tables.alpha[(d - s, k - 1)]
        a_here = alpha[modes[k - s:k]]

        # g receives theta(k-s-1..k); alpha^{d-s} depends on theta(k-s..k-1)
        def g(ms, alpha=alpha, s=s):
            return alpha[tuple(ms[1:s + 1])]

        cond = backward_expectation(
            model, k, s + 1, g, modes[tau], xs[tau], lambda i: us[i],
        )
        lam = lam - a_here.T @ tables.w_solve(tau, modes[tau], cond)
    return lam


def optimal_cost(model: JumpLinearModel, tables: RiccatiTables, init: InitialData) -> float:
    """J* = E{ sum_{k<d} x(k)'Q x(k) + x(d)' lambda_{d-1} } over all theta(0..d-1)."""
    if not tables.solvable:
        raise NotSolvable("Riccati tables are not solvable")
    d = model.d
    schedule = gains(tables)
    total = 0.0
    for l0 in range(model.L):
        p0 = model.pi0[l0]
        if p0 == 0.0:
            continue
        for path in enumerate_paths(model, l0, d - 1):
            w = p0 * path.weight
            if w == 0.0:
                continue
            modes = (l0,) + path.modes
            xs, _ = closed_loop_prefix(model, schedule, init, modes)
            val = sum(float(xs[k] @ model.Q[modes[k]] @ xs[k]) for k in range(d))
            val += float(xs[d] @ costate(model, tables, d, init, modes, schedule))
            total += w * val
    return float(total)
