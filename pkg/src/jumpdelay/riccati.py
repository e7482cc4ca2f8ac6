"""Backward coupled difference Riccati sweep for the delayed jump system.

Every table is indexed by absolute time t in 0..N and by the mode that the
quantity's subscript refers to, i.e. a quantity is stored at the time of its
mode subscript. With k the application time of decision u(k-d):

    W[t], T0[t], Tu[j][t]   decision time t = k - d
    P[t], P0[t], delta[t]   time t = k - 1

``T0`` is the m x n coefficient of x(t+1) in the stationarity condition of
u(t); ``Tu[j-1]`` (j = 1..d-1) is the m x m coefficient of u(t-d+j). The
terminal window t = N-d+1..N holds T = 0, P0 = 0 and W = I (placeholders that
only ever meet a zero T).

``alpha[(g, t)]`` holds the m x n matrices alpha^g at time t for every mode
path theta(t-(d-g)+1..t); the array axes run oldest mode first. For d <= 3 the
path has at most two modes, so it is the (past, current) mode pair.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .model import JumpLinearModel, ModePath, enumerate_paths, f_product

PD_REL_THRESHOLD = 1e-12


class WNotPositiveDefinite(ArithmeticError):
    def __init__(self, t: int, mode: int, tables: "RiccatiTables"):
        self.t = t
        self.mode = mode
        self.tables = tables
        super().__init__(f"W not positive definite at t={t}, mode={mode + 1}")


@dataclass(eq=False)
class RiccatiTables:
    N: int
    d: int
    W: np.ndarray  # (N+1, L, m, m)
    W_chol: np.ndarray  # lower Cholesky factor of W, identity where unavailable
    T0: np.ndarray  # (N+1, L, m, n)
    Tu: np.ndarray  # (d-1, N+1, L, m, m)
    P: np.ndarray  # (N+1, L, n, n)
    P0: np.ndarray  # (N+1, L, n, n)
    delta: np.ndarray  # (d-1, N+1, L, m, n), delta[j-1] is delta^j
    alpha: dict = field(default_factory=dict)
    solvable: bool = True
    failure: tuple[int, int] | None = None
    max_asymmetry: float = 0.0

    @property
    def last_decision(self) -> int:
        return self.N - self.d

    def T(self, j: int) -> np.ndarray:
        """T^j over (time, mode): T^0 is m x n, T^j (j >= 1) is m x m."""
        return self.T0 if j == 0 else self.Tu[j - 1]

    def w_solve(self, t: int, l: int, X: np.ndarray) -> np.ndarray:
        """W[t][l]^{-1} @ X using the stored factorization."""
        c = self.W_chol[t, l]
        y = np.linalg.solve(c, X)
        return np.linalg.solve(c.T, y)

    def alpha_at(self, g: int, t: int, modes: Sequence[int]) -> np.ndarray:
        """alpha^g at time t for modes theta(t-(d-g)+1..t) (oldest first)."""
        return self.alpha[(g, t)][tuple(modes)]

    def has_alpha(self, g: int, t: int) -> bool:
        return (g, t) in self.alpha


def lambda_expectation(
    model: JumpLinearModel,
    start_mode: int,
    span: int,
    f: Callable[[ModePath], np.ndarray],
) -> np.ndarray:
    """Transition-weighted sum of f over every ``span``-step continuation."""
    total = None
    for path in enumerate_paths(model, start_mode, span):
        val = np.asarray(f(path), dtype=float)
        if total is None:
            total = path.weight * val
        elif val.shape != total.shape:
            raise ValueError(f"f returned shape {val.shape}, expected {total.shape}")
        else:
            total = total + path.weight * val
    return total


def backward_expectation(
    model: JumpLinearModel,
    k: int,
    msteps: int,
    g: Callable[[tuple[int, ...]], np.ndarray],
    start_mode: int,
    x_past: np.ndarray,
    u_applied: Callable[[int], np.ndarray],
) -> np.ndarray:
    """E{ g(theta(k-msteps..k)) x(k) | chain up to k-msteps }.

    ``start_mode`` is theta(k-msteps) and ``x_past`` is x(k-msteps).
    ``u_applied(i)`` must return the input u(i-d) entering x(i+1), for
    i = k-msteps..k-1; all of them were decided no later than k-msteps-1 when
    msteps <= d. ``g`` receives the full mode tuple theta(k-msteps..k).
    """
    if not 1 <= msteps <= model.d:
        raise ValueError(f"msteps must lie in 1..d={model.d}, got {msteps}")
    us = [np.asarray(u_applied(i), dtype=float) for i in range(k - msteps, k)]
    total = None
    for path in enumerate_paths(model, start_mode, msteps):
        modes = (start_mode,) + path.modes
        # modes[r] is theta(k - msteps + r)
        x = np.asarray(x_past, dtype=float)
        for r in range(msteps):
            x = model.A[modes[r]] @ x + model.B[modes[r]] @ us[r]
        val = path.weight * (np.asarray(g(modes)) @ x)
        total = val if total is None else total + val
    return total


def factorization_gap(model: JumpLinearModel, k: int, start_mode: int, x_past, u_applied) -> float:
    """|| E{A_theta(k) x(k)} - E{A_theta(k)} E{x(k)} || over d backward steps.

    Nonzero whenever theta(k) is correlated with the modes that produced x(k).
    """
    d = model.d
    joint = backward_expectation(model, k, d, lambda ms: model.A[ms[-1]], start_mode, x_past, u_applied)
    eye = np.eye(model.n)
    mean_x = backward_expectation(model, k, d, lambda ms: eye, start_mode, x_past, u_applied)
    mean_A = lambda_expectation(model, start_mode, d, lambda p: model.A[p.end])
    return float(np.linalg.norm(joint - mean_A @ mean_x))


def _pd_cholesky(Wm: np.ndarray) -> np.ndarray | None:
    m = Wm.shape[0]
    tr = np.trace(Wm)
    if not np.isfinite(tr) or tr <= 0:
        return None
    try:
        c = np.linalg.cholesky(Wm)
    except np.linalg.LinAlgError:
        return None
    if np.min(np.diag(c)) ** 2 <= PD_REL_THRESHOLD * tr / m:
        return None
    return c


def _sym(X):
    return 0.5 * (X + np.swapaxes(X, -1, -2))


def _rel_asym(X) -> float:
    scale = max(np.abs(X).max(initial=0.0), 1e-300)
    return float(np.abs(X - np.swapaxes(X, -1, -2)).max(initial=0.0) / scale)


def solve_riccati(model: JumpLinearModel, raise_on_failure: bool = False) -> RiccatiTables:
    """Single downward sweep k = N..1 producing every table.

    Iteration k builds W, T^j at decision time k-d (when k >= d), then P at
    k-1 and the delta/alpha quantities at k-1. Sweeping stops at the first W
    that is not positive definite; the partial tables are kept.
    """
    L, n, m, d, N = model.L, model.n, model.m, model.d, model.N
    A, B, Q, R, trans = model.A, model.B, model.Q, model.R, model.trans

    W = np.zeros((N + 1, L, m, m))
    W_chol = np.zeros((N + 1, L, m, m))
    W[N - d + 1:] = np.eye(m)
    W_chol[:] = np.eye(m)
    T0 = np.zeros((N + 1, L, m, n))
    Tu = np.zeros((max(d - 1, 0), N + 1, L, m, m))
    P = np.zeros((N + 1, L, n, n))
    P0 = np.zeros((N + 1, L, n, n))
    delta = np.zeros((max(d - 1, 0), N + 1, L, m, n))
    tables = RiccatiTables(N, d, W, W_chol, T0, Tu, P, P0, delta)

    P[N] = np.einsum("ij,jab->iab", trans, model.P_term)
    for g in range(1, d):
        shape = (L,) * (d - g) + (m, n)
        tables.alpha[(g, N)] = np.zeros(shape)

    def T(j):
        return T0 if j == 0 else Tu[j - 1]

    # continuations of length d from every start mode, F-products cached per path
    d_paths = {l: enumerate_paths(model, l, d) for l in range(L)}
    F_cache: dict[tuple[int, ...], np.ndarray] = {}

    def F(modes):
        key = tuple(modes)
        if key not in F_cache:
            F_cache[key] = f_product(model, key)
        return F_cache[key]

    for k in range(N, 0, -1):
        S = P[k] - P0[k]  # value weight on x(k+1) given theta(k)

        if k >= d:
            t = k - d
            for l in range(L):
                Wl = np.zeros((m, m))
                T0l = np.zeros((m, n))
                Tul = np.zeros((max(d - 1, 0), m, m))
                for path in d_paths[l]:
                    w = path.weight
                    if w == 0.0:
                        continue
                    # th[i] = theta(t + i), i = 0..d
                    th = (l,) + path.modes
                    lk = th[d]
                    BS = B[lk].T @ S[lk]
                    Wl += w * (BS @ B[lk] + R[lk])
                    T0l += w * (BS @ F(th[1:d + 1]))
                    for j in range(1, d):
                        Tul[j - 1] += w * (BS @ F(th[j + 1:d + 1]) @ B[th[j]])
                    for s in range(1, d):
                        tau = k - s
                        ls = th[d - s]
                        Ts = T(s)[tau, ls]
                        if not Ts.any():
                            continue
                        KsT = Ts.T @ tables.w_solve(tau, ls, np.eye(m))
                        Wl -= w * (KsT @ Ts)
                        K0 = KsT @ T0[tau, ls]
                        # x(t+1) -> x(tau+1) through theta(t+1..tau)
                        T0l -= w * (K0 @ F(th[1:d - s + 1]))
                        for j in range(1, d):
                            if s <= d - j:
                                Tul[j - 1] -= w * (K0 @ F(th[j + 1:d - s + 1]) @ B[th[j]])
                            else:
                                Tul[j - 1] -= w * (KsT @ T(s - d + j)[tau, ls])
                tables.max_asymmetry = max(tables.max_asymmetry, _rel_asym(Wl))
                Wl = _sym(Wl)
                W[t, l] = Wl
                T0[t, l] = T0l
                if d > 1:
                    Tu[:, t, l] = Tul
                c = _pd_cholesky(Wl)
                if c is None:
                    tables.solvable = False
                    tables.failure = (t, l)
                    if raise_on_failure:
                        raise WNotPositiveDefinite(t, l, tables)
                    return tables
                W_chol[t, l] = c
                P0l = T0l.T @ tables.w_solve(t, l, T0l)
                tables.max_asymmetry = max(tables.max_asymmetry, _rel_asym(P0l))
                P0[t, l] = _sym(P0l)

        # P at time k-1
        stage = Q + np.einsum("lba,lbc,lcd->lad", A, S, A)
        Pk1 = np.einsum("ij,jab->iab", trans, stage)
        tables.max_asymmetry = max(tables.max_asymmetry, _rel_asym(Pk1))
        P[k - 1] = _sym(Pk1)

        if d == 1:
            continue
        # delta^j at time k-1, stored as m x n (the transpose of the printed n x m form)
        t1 = k - 1
        ASB = np.einsum("lba,lbc,lcd->lad", A, S, B)  # A' S B per theta(k)
        for l in range(L):
            K0T = T0[t1, l].T  # n x m
            corr = lambda j: tables.w_solve(t1, l, T(j)[t1, l])  # W^{-1} T^j
            dT = trans[l] @ ASB.reshape(L, -1)
            dT = dT.reshape(n, m) - K0T @ corr(1)
            delta[0, t1, l] = dT.T
            for j in range(2, d):
                prevT = np.swapaxes(delta[j - 2, k], -1, -2)  # (L, n, m)
                AdT = np.einsum("lba,lbc->lac", A, prevT)
                dT = (trans[l] @ AdT.reshape(L, -1)).reshape(n, m) - K0T @ corr(j)
                delta[j - 1, t1, l] = dT.T

        # alpha^{d-j} at time k-1 over theta(k-j..k-1), needs W at k-2..k-j
        for j in range(1, d):
            g = d - j
            if j >= 2 and k - j - 1 < -1:
                break
            if k - j < 0:
                break
            arr = np.zeros((L,) * j + (m, n))
            for modes in itertools.product(range(L), repeat=j):
                # modes[r] = theta(k - j + r); modes[-1] = theta(k-1)
                aT = delta[g - 1, t1, modes[-1]].T.copy()
                for s in range(1, j):
                    tau = k - s - 1
                    prev = tables.alpha[(d - s, t1)][modes[j - s:]]
                    ls = modes[j - s - 1]  # theta(k-s-1)
                    aT -= prev.T @ tables.w_solve(tau, ls, T(d - j + s)[tau, ls])
                arr[modes] = aT.T
            tables.alpha[(g, t1)] = arr

    return tables


def terminal_window_ok(tables: RiccatiTables) -> bool:
    """T = 0 and P0 = 0 exactly on t = N-d+1..N."""
    lo = tables.N - tables.d + 1
    return (
        not tables.T0[lo:].any()
        and not tables.Tu[:, lo:].any()
        and not tables.P0[lo:].any()
    )


def table_identity_residual(model: JumpLinearModel, tables: RiccatiTables) -> float:
    """Largest relative residual of the four alpha/T identities.

    For every time where both sides exist:
        E{A' alpha^{d-1}' | theta(k-1)}       = T0(k-1)'
        E{A' alpha^{d-j}' | theta(k-1)}       = alpha^{d-j+1}(k-1)'   j = 2..d-1
        E{B' alpha^{d-1}' | theta(k-1)}       = T^1(k-1)'
        E{B' alpha^{d-j}' | theta(k-j)}       = T^j(k-j)'             j = 2..d-1
    Empty for d = 1.
    """
    d, N, L = model.d, model.N, model.L
    A, B = model.A, model.B
    worst = 0.0

    def rel(lhs, rhs):
        scale = max(np.abs(rhs).max(initial=0.0), np.abs(lhs).max(initial=0.0), 1.0)
        return float(np.abs(lhs - rhs).max(initial=0.0) / scale)

    if d == 1:
        return 0.0
    for k in range(1, N + 1):
        if not tables.has_alpha(d - 1, k):
            continue
        a_top = tables.alpha[(d - 1, k)]  # axes: theta(k)
        for l in range(L):
            lhsA = lambda_expectation(model, l, 1, lambda p: A[p.end].T @ a_top[p.end].T)
            worst = max(worst, rel(lhsA, tables.T0[k - 1, l].T))
            lhsB = lambda_expectation(model, l, 1, lambda p: B[p.end].T @ a_top[p.end].T)
            worst = max(worst, rel(lhsB, tables.Tu[0, k - 1, l].T))
        for j in range(2, d):
            if not tables.has_alpha(d - j, k):
                continue
            arr = tables.alpha[(d - j, k)]  # axes: theta(k-j+1..k)
            # (c2): average over theta(k) given theta(k-j+1..k-1)
            if tables.has_alpha(d - j + 1, k - 1):
                prev = tables.alpha[(d - j + 1, k - 1)]
                for hist in itertools.product(range(L), repeat=j - 1):
                    lhs = lambda_expectation(
                        model, hist[-1], 1, lambda p: A[p.end].T @ arr[hist + (p.end,)].T
                    )
                    worst = max(worst, rel(lhs, prev[hist].T))
            # (c4): average over theta(k-j+1..k) given theta(k-j)
            if k - j >= 0:
                for l in range(L):
                    lhs = lambda_expectation(
                        model, l, j, lambda p: B[p.end].T @ arr[p.modes].T
                    )
                    worst = max(worst, rel(lhs, tables.Tu[j - 1, k - j, l].T))
    return worst


# -------------------------------------------------------------- serialization


def tables_to_dict(tables: RiccatiTables) -> dict:
    """JSON layout: per quantity, a list over time of per-mode matrices.

    alpha entries carry their 1-based mode path theta(t-(d-g)+1..t).
    """
    d = tables.d
    alpha = []
    for (g, t), arr in sorted(tables.alpha.items()):
        for modes in itertools.product(range(arr.shape[0]), repeat=d - g):
            alpha.append({
                "g": g, "t": t, "modes": [l + 1 for l in modes],
                "value": arr[modes].tolist(),
            })
    return {
        "schema_version": 1,
        "N": tables.N,
        "d": d,
        "solvable": tables.solvable,
        "failure": None if tables.failure is None
        else {"t": tables.failure[0], "mode": tables.failure[1] + 1},
        "W": tables.W.tolist(),
        "T0": tables.T0.tolist(),
        "Tu": tables.Tu.tolist(),
        "P": tables.P.tolist(),
        "P0": tables.P0.tolist(),
        "delta": tables.delta.tolist(),
        "alpha": alpha,
    }


def tables_from_dict(doc: dict) -> RiccatiTables:
    W = np.array(doc["W"], dtype=float)
    N1, L, m, _ = W.shape
    T0 = np.array(doc["T0"], dtype=float)
    n = T0.shape[-1]
    d = int(doc["d"])
    Tu = np.array(doc["Tu"], dtype=float).reshape(max(d - 1, 0), N1, L, m, m)
    delta = np.array(doc["delta"], dtype=float).reshape(max(d - 1, 0), N1, L, m, n)
    W_chol = np.broadcast_to(np.eye(m), W.shape).copy()
    failure = doc.get("failure")
    fail_t = failure["t"] if failure else -1
    for t in range(N1):
        for l in range(L):
            if t <= int(doc["N"]) - d and (not failure or t > fail_t):
                c = _pd_cholesky(W[t, l])
                if c is not None:
                    W_chol[t, l] = c
    alpha = {}
    for item in doc["alpha"]:
        key = (item["g"], item["t"])
        if key not in alpha:
            alpha[key] = np.zeros((L,) * (d - item["g"]) + (m, n))
        alpha[key][tuple(l - 1 for l in item["modes"])] = item["value"]
    return RiccatiTables(
        N=int(doc["N"]), d=d, W=W, W_chol=W_chol, T0=T0, Tu=Tu,
        P=np.array(doc["P"], dtype=float), P0=np.array(doc["P0"], dtype=float),
        delta=delta, alpha=alpha, solvable=bool(doc["solvable"]),
        failure=None if not failure else (failure["t"], failure["mode"] - 1),
    )
