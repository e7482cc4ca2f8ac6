"""Brute-force ground truth for the delayed jump LQ problem.

Nothing here uses the Riccati tables. The admissible controllers are
parameterized exactly as policy trees (one decision per chain prefix per
decision time), the expected cost is expanded into a quadratic in the stacked
decisions by walking the full chain tree, and costates / stationarity
conditions are evaluated by direct enumeration of chain continuations.

Stacked variable order: decision time, then prefix theta(0..t) in
lexicographic order, then input coordinate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .model import InitialData, JumpLinearModel, path_probability

DEFAULT_PATH_BUDGET = 10**6


class PathBudgetExceeded(RuntimeError):
    pass


class HessianNotPD(ArithmeticError):
    pass


def full_path_count(model: JumpLinearModel) -> int:
    return model.L ** (model.N + 2)


def check_budget(model: JumpLinearModel, budget: int = DEFAULT_PATH_BUDGET) -> None:
    count = full_path_count(model)
    if count > budget:
        raise PathBudgetExceeded(f"{count} full chain paths exceed the budget of {budget}")


# ------------------------------------------------------------------ policy tree


def _offsets(L: int, m: int, last: int) -> list[int]:
    out, acc = [], 0
    for t in range(last + 1):
        out.append(acc)
        acc += L ** (t + 1) * m
    out.append(acc)
    return out


@dataclass(eq=False)
class PolicyTree:
    """decisions[t] has shape (L,)*(t+1) + (m,): one input per prefix theta(0..t)."""

    decisions: list

    @classmethod
    def zeros(cls, model: JumpLinearModel) -> "PolicyTree":
        L, m = model.L, model.m
        return cls([np.zeros((L,) * (t + 1) + (m,)) for t in range(model.N - model.d + 1)])

    @classmethod
    def from_vector(cls, model: JumpLinearModel, z: np.ndarray) -> "PolicyTree":
        L, m = model.L, model.m
        offs = _offsets(L, m, model.N - model.d)
        return cls([
            np.asarray(z[offs[t]:offs[t + 1]], dtype=float).reshape((L,) * (t + 1) + (m,)).copy()
            for t in range(model.N - model.d + 1)
        ])

    def to_vector(self) -> np.ndarray:
        return np.concatenate([u.ravel() for u in self.decisions])

    def decide(self, t: int, prefix) -> np.ndarray:
        return self.decisions[t][tuple(prefix[: t + 1])]

    def to_dict(self) -> dict:
        out = []
        for t, arr in enumerate(self.decisions):
            L = arr.shape[0]
            for prefix in itertools.product(range(L), repeat=t + 1):
                out.append({
                    "t": t,
                    "prefix": [p + 1 for p in prefix],
                    "u": arr[prefix].tolist(),
                })
        return {"decisions": out}


def variable_count(model: JumpLinearModel) -> int:
    return _offsets(model.L, model.m, model.N - model.d)[-1]


def _var_index(offs, L, m, t, prefix) -> np.ndarray:
    p = 0
    for l in prefix[: t + 1]:
        p = p * L + l
    start = offs[t] + p * m
    return np.arange(start, start + m)


# -------------------------------------------------------------- quadratic cost


@dataclass(eq=False)
class QuadraticCost:
    """Expected cost = z' H z + 2 b' z + c over the stacked decisions z.

    ``active`` masks decisions whose prefix has positive probability; the
    rest never influence the cost and are pinned to zero when solving.
    """

    H: np.ndarray
    b: np.ndarray
    c: float
    active: np.ndarray | None = None

    def active_mask(self) -> np.ndarray:
        return np.ones(self.b.size, dtype=bool) if self.active is None else self.active

    def value(self, z: np.ndarray) -> float:
        return float(z @ self.H @ z + 2.0 * self.b @ z + self.c)

    def to_dict(self) -> dict:
        return {"H": self.H.tolist(), "b": self.b.tolist(), "c": self.c}


def _walk(model, init, visit):
    """Depth-first walk over theta(0..N+1), tracking x(k) affine in local decisions.

    ``visit(k, modes, w, X, c0, idx)`` is called at every node, where
    x(k) = X @ z[idx] + c0 along the prefix ``modes`` = theta(0..k) with
    probability ``w``; idx lists the global indices of the decisions
    u(0..k-1-d) on this prefix.
    """
    L, n, m, d, N = model.L, model.n, model.m, model.d, model.N
    offs = _offsets(L, m, N - d)
    A, B = model.A, model.B

    def rec(k, modes, w, X, c0, idx):
        visit(k, modes, w, X, c0, idx)
        if k == N + 1:
            return
        lk = modes[-1]
        Xn = A[lk] @ X
        cn = A[lk] @ c0
        idx_n = idx
        if k - d < 0:
            cn = cn + B[lk] @ init.u_pre[k]
        else:
            Xn = np.hstack([Xn, B[lk]])
            idx_n = np.concatenate([idx, _var_index(offs, L, m, k - d, modes)])
        for nxt in range(L):
            wn = w * model.trans[lk, nxt]
            rec(k + 1, modes + (nxt,), wn, Xn, cn, idx_n)

    for l0 in range(L):
        rec(0, (l0,), float(model.pi0[l0]), np.zeros((n, 0)), init.x0.copy(), np.zeros(0, dtype=int))


def build_qp(model: JumpLinearModel, init: InitialData, budget: int = DEFAULT_PATH_BUDGET) -> QuadraticCost:
    """Exact expected cost as a quadratic in the stacked policy-tree decisions."""
    check_budget(model, budget)
    init.check(model)
    L, m, d, N = model.L, model.m, model.d, model.N
    offs = _offsets(L, m, N - d)
    nz = offs[-1]
    H = np.zeros((nz, nz))
    b = np.zeros(nz)
    c = [0.0]
    active = np.zeros(nz, dtype=bool)

    def visit(k, modes, w, X, c0, idx):
        if w == 0.0:
            return
        lk = modes[-1]
        if k <= N - d:
            active[_var_index(offs, L, m, k, modes)] = True
        M = model.P_term[lk] if k == N + 1 else model.Q[lk]
        if idx.size:
            MX = M @ X
            H[np.ix_(idx, idx)] += w * (X.T @ MX)
            b[idx] += w * (MX.T @ c0)
        c[0] += w * float(c0 @ M @ c0)
        if d <= k <= N:
            j = _var_index(offs, L, m, k - d, modes)
            H[np.ix_(j, j)] += w * model.R[lk]

    _walk(model, init, visit)
    H = 0.5 * (H + H.T)
    return QuadraticCost(H, b, c[0], active)


def is_pd(H: np.ndarray) -> bool:
    if H.size == 0:
        return True
    try:
        cf = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        return False
    tr = np.trace(H)
    return bool(np.min(np.diag(cf)) ** 2 > 1e-12 * tr / H.shape[0])


def hessian_pd(qp: QuadraticCost) -> bool:
    """Positive definiteness of H restricted to the active decisions."""
    act = qp.active_mask()
    return is_pd(qp.H[np.ix_(act, act)])


def solve_qp(qp: QuadraticCost) -> tuple[np.ndarray, float]:
    """Minimizer z* = -H^{-1} b and the minimum c - b' H^{-1} b (active block)."""
    act = qp.active_mask()
    Ha = qp.H[np.ix_(act, act)]
    if not is_pd(Ha):
        raise HessianNotPD("QP Hessian is not positive definite")
    z = np.zeros(qp.b.size)
    z[act] = -sla.cho_solve(sla.cho_factor(Ha, lower=True), qp.b[act])
    return z, float(qp.c + qp.b @ z)


def solve_policy(model: JumpLinearModel, init: InitialData, budget: int = DEFAULT_PATH_BUDGET):
    """(PolicyTree*, minimum value, QuadraticCost) for the instance."""
    qp = build_qp(model, init, budget)
    z, val = solve_qp(qp)
    return PolicyTree.from_vector(model, z), val, qp


# ----------------------------------------------------------- policy evaluation


def policy_states(model: JumpLinearModel, policy: PolicyTree, init: InitialData, modes) -> np.ndarray:
    """x(0..N+1) along a full mode sequence theta(0..N+1) under a policy tree."""
    d, N = model.d, model.N
    xs = [init.x0.copy()]
    for k in range(N + 1):
        u = init.u_pre[k] if k < d else policy.decide(k - d, modes)
        xs.append(model.A[modes[k]] @ xs[-1] + model.B[modes[k]] @ u)
    return np.array(xs)


def definitional_costate(
    model: JumpLinearModel,
    policy: PolicyTree,
    init: InitialData,
    i: int,
    prefix,
    budget: int = DEFAULT_PATH_BUDGET,
) -> np.ndarray:
    """lambda_i = E{ sum_{k>i} F' Q x(k) + F' P_term x(N+1) | theta(0..i) = prefix }.

    F is the product of A along theta(i+1..k-1) that carries x(i+1) to x(k).
    Evaluated by enumerating every continuation of the prefix.
    """
    check_budget(model, budget)
    N, L = model.N, model.L
    if not 0 <= i <= N or len(prefix) != i + 1:
        raise ValueError("costate index must satisfy 0 <= i <= N with prefix theta(0..i)")
    total = np.zeros(model.n)
    for tail in itertools.product(range(L), repeat=N + 1 - i):
        modes = tuple(prefix) + tail
        w = 1.0
        prev = modes[i]
        for l in tail:
            w *= model.trans[prev, l]
            prev = l
        if w == 0.0:
            continue
        xs = policy_states(model, policy, init, modes)
        F = np.eye(model.n)
        acc = np.zeros(model.n)
        for k in range(i + 1, N + 2):
            M = model.P_term[modes[k]] if k == N + 1 else model.Q[modes[k]]
            acc += F.T @ (M @ xs[k])
            if k <= N:
                F = model.A[modes[k]] @ F
        total += w * acc
    return total


def stationarity_residual(
    model: JumpLinearModel,
    policy: PolicyTree,
    init: InitialData,
    budget: int = DEFAULT_PATH_BUDGET,
) -> float:
    """max over k = d..N and prefixes of || E[B' lambda_k + R u(k-d) | theta(0..k-d)] ||.

    Zero-probability prefixes are skipped.
    """
    check_budget(model, budget)
    d, N, L = model.d, model.N, model.L
    worst = 0.0
    for k in range(d, N + 1):
        t = k - d
        for prefix in itertools.product(range(L), repeat=t + 1):
            if path_probability(model, prefix) == 0.0:
                continue
            u = policy.decide(t, prefix)
            g = np.zeros(model.m)
            for mid in itertools.product(range(L), repeat=d):
                modes = prefix + mid
                w = 1.0
                prev = prefix[-1]
                for l in mid:
                    w *= model.trans[prev, l]
                    prev = l
                if w == 0.0:
                    continue
                lam = definitional_costate(model, policy, init, k, modes, budget)
                lk = modes[k]
                g += w * (model.B[lk].T @ lam + model.R[lk] @ u)
            worst = max(worst, float(np.linalg.norm(g)))
    return worst


def expected_policy_cost(model: JumpLinearModel, policy: PolicyTree, init: InitialData,
                         budget: int = DEFAULT_PATH_BUDGET) -> float:
    """Expected cost of a policy tree evaluated through the QP expansion."""
    qp = build_qp(model, init, budget)
    return qp.value(policy.to_vector())


# --------------------------------------------------------------- references


def conditioned_on_first_mode(model: JumpLinearModel, mode: int) -> JumpLinearModel:
    """Same model with theta(0) = mode almost surely."""
    return JumpLinearModel(
        A=model.A, B=model.B, Q=model.Q, R=model.R, P_term=model.P_term,
        trans=model.trans, pi0=np.eye(model.L)[mode], d=model.d, N=model.N,
    )


def fixed_first_decision_cost(
    model: JumpLinearModel,
    mode: int,
    u0: np.ndarray,
    budget: int = DEFAULT_PATH_BUDGET,
    qp: QuadraticCost | None = None,
) -> float:
    """Expected cost, given theta(0) = mode, with u(0) pinned to u0 and zero initial data.

    All later decisions are optimized; u(0) is removed from the QP by
    elimination, so the value is exact. ``qp`` may carry a cached
    ``build_qp`` of the model conditioned on theta(0) = mode with zero data.
    """
    L, m, N, d = model.L, model.m, model.N, model.d
    cond = conditioned_on_first_mode(model, mode)
    if qp is None:
        qp = build_qp(cond, InitialData.zeros(model), budget)
    offs = _offsets(L, m, N - d)
    # u(0) for prefix (mode,) is pinned; decisions on other roots have probability 0
    pinned = _var_index(offs, L, m, 0, (mode,))
    live = []
    for t in range(N - d + 1):
        for prefix in itertools.product(range(L), repeat=t + 1):
            if prefix[0] != mode or path_probability(cond, prefix) == 0.0:
                continue
            if t == 0:
                continue
            live.extend(_var_index(offs, L, m, t, prefix))
    live = np.array(live, dtype=int)
    u0 = np.asarray(u0, dtype=float).reshape(m)
    H, b = qp.H, qp.b
    const = qp.c + u0 @ H[np.ix_(pinned, pinned)] @ u0 + 2.0 * b[pinned] @ u0
    if live.size == 0:
        return float(const)
    Hll = H[np.ix_(live, live)]
    bl = b[live] + H[np.ix_(live, pinned)] @ u0
    if not is_pd(Hll):
        raise HessianNotPD("reduced QP Hessian is not positive definite")
    z = -sla.cho_solve(sla.cho_factor(Hll, lower=True), bl)
    return float(const + bl @ z)


def augmented_lqr(model: JumpLinearModel):
    """Delay-free reformulation for a single-mode model.

    State s(t) = [x(t+1); u(t-d+1); ...; u(t-1)] at decision time t. Returns
    feedback matrices G[t] (t = 0..N-d) with u(t) = -G[t] s(t) from a
    standard time-varying Riccati recursion, plus the cost-to-go matrices.
    """
    if model.L != 1:
        raise ValueError("augmented_lqr needs a single-mode model (L = 1)")
    A, B, Q, R, Pf = model.A[0], model.B[0], model.Q[0], model.R[0], model.P_term[0]
    n, m, d, N = model.n, model.m, model.d, model.N
    ns = n + (d - 1) * m
    # s(t+1) = Aa s(t) + Ba u(t): x(t+2) = A x(t+1) + B u(t+1-d)
    Aa = np.zeros((ns, ns))
    Ba = np.zeros((ns, m))
    Aa[:n, :n] = A
    if d == 1:
        Ba[:n] = B
    else:
        Aa[:n, n:n + m] = B  # u(t-d+1) is the oldest pending input
        for r in range(d - 2):
            Aa[n + r * m:n + (r + 1) * m, n + (r + 1) * m:n + (r + 2) * m] = np.eye(m)
        Ba[n + (d - 2) * m:] = np.eye(m)
    # stage cost at decision t covers x(t+1)'Qx(t+1) and the input applied at t+1
    Qa = np.zeros((ns, ns))
    Qa[:n, :n] = Q
    if d == 1:
        Ra = R.copy()  # u(t) applied at t+1
    else:
        Qa[n:n + m, n:n + m] = R
        Ra = np.zeros((m, m))
    # after the last decision t = N-d, remaining cost is carried by the tail
    # x(N-d+2..N+1) and inputs u(N-d+1.. ) -- all determined by s(N-d+1)
    last = N - d
    # terminal weight on s(last+1): roll the fixed dynamics forward
    S = _augmented_tail(A, B, Q, R, Pf, n, m, d, N)
    Ps = [None] * (last + 2)
    Ps[last + 1] = S
    G = [None] * (last + 1)
    for t in range(last, -1, -1):
        Pn = Ps[t + 1]
        M = Ra + Ba.T @ Pn @ Ba
        G[t] = np.linalg.solve(M, Ba.T @ Pn @ Aa)
        Pt = Qa + Aa.T @ Pn @ Aa - (Aa.T @ Pn @ Ba) @ G[t]
        Ps[t] = 0.5 * (Pt + Pt.T)
    return G, Ps


def _augmented_tail(A, B, Q, R, Pf, n, m, d, N):
    """Quadratic weight of s(N-d+1) collecting every cost term after the last decision.

    s(N-d+1) = [x(N-d+2); u(N-2d+2); ...; u(N-d)]. With d = 1 the tail is only
    x(N+1)'Pf x(N+1) where s = x(N+1) - here s(N) = [x(N+1)].
    """
    ns = n + (d - 1) * m
    if d == 1:
        return Pf.copy()
    # simulate symbolic linear maps: x(k) and applied inputs as matrices of s
    xmap = np.zeros((n, ns))
    xmap[:, :n] = np.eye(n)  # x(N-d+2)
    pending = [np.zeros((m, ns)) for _ in range(d - 1)]
    for r in range(d - 1):
        pending[r][:, n + r * m:n + (r + 1) * m] = np.eye(m)
    W = np.zeros((ns, ns))
    k = N - d + 2
    # stage costs for k = N-d+2..N, plus R on u(k-d) for k = N-d+1..N
    # u(N-2d+1+... ) : the input applied at k = N-d+1 is u(N-2d+1), already
    # accounted in the stage cost Qa/Ra of the final decision step.
    for k in range(N - d + 2, N + 1):
        W += xmap.T @ Q @ xmap
        u = pending.pop(0)
        W += u.T @ R @ u
        xmap = A @ xmap + B @ u
    W += xmap.T @ Pf @ xmap
    return 0.5 * (W + W.T)


def standard_coupled_riccati(model: JumpLinearModel):
    """Delay-free coupled Riccati recursion (the delay is ignored).

    Upsilon_l = B_l' E[P+] B_l + R_l, M_l = B_l' E[P+] A_l,
    P_l = A_l' E[P+] A_l + Q_l - M_l' Upsilon_l^{-1} M_l, with E[P+]_l =
    sum_j trans[l, j] P_j(k+1) and P(N+1) = P_term. Returns (P, Upsilon, M,
    gains) indexed by k = 0..N, gains u(k) = -gains[k][l] x(k).
    """
    L, n, m, N = model.L, model.n, model.m, model.N
    P = np.zeros((N + 2, L, n, n))
    Ups = np.zeros((N + 1, L, m, m))
    M = np.zeros((N + 1, L, m, n))
    K = np.zeros((N + 1, L, m, n))
    P[N + 1] = model.P_term
    for k in range(N, -1, -1):
        EP = np.einsum("ij,jab->iab", model.trans, P[k + 1])
        for l in range(L):
            A, B = model.A[l], model.B[l]
            U = B.T @ EP[l] @ B + model.R[l]
            if not is_pd(0.5 * (U + U.T)):
                raise HessianNotPD(f"Upsilon not positive definite at k={k}, mode={l + 1}")
            Ml = B.T @ EP[l] @ A
            Ups[k, l], M[k, l] = U, Ml
            K[k, l] = np.linalg.solve(U, Ml)
            Pl = A.T @ EP[l] @ A + model.Q[l] - Ml.T @ K[k, l]
            P[k, l] = 0.5 * (Pl + Pl.T)
    return P, Ups, M, K
