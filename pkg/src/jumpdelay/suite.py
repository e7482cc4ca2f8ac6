"""Randomized and engineered test instances for the oracle cross-checks."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .model import InitialData, JumpLinearModel

SUITE_SEED = 20240607
SUITE_SIZE = 54
# largest horizon per mode count keeping the full chain tree L^(N+2) small
MAX_N = {1: 8, 2: 6, 3: 4}


@dataclass
class Instance:
    name: str
    model: JumpLinearModel
    init: InitialData
    expect_solvable: bool | None = None


def _psd(rng, n, rank=None):
    G = rng.standard_normal((n, rank or n))
    return G @ G.T


def random_instance(rng: np.random.Generator, L: int, n: int, m: int, d: int, N: int,
                    rho: tuple[float, float] = (0.5, 1.3)) -> tuple[JumpLinearModel, InitialData]:
    """Random model with PSD Q and P_term, PD R, strictly positive chain and scaled A."""
    A = np.empty((L, n, n))
    for l in range(L):
        M = rng.standard_normal((n, n))
        r = max(abs(np.linalg.eigvals(M)))
        A[l] = M * rng.uniform(*rho) / max(r, 1e-3)
    B = rng.standard_normal((L, n, m))
    # Q may be rank-deficient; R always carries a ridge
    Q = np.stack([_psd(rng, n, rank=int(rng.integers(1, n + 1))) for _ in range(L)])
    R = np.stack([_psd(rng, m) + 0.1 * np.eye(m) for _ in range(L)])
    P_term = np.stack([_psd(rng, n) for _ in range(L)])
    trans = rng.dirichlet(np.full(L, 2.0), size=L)
    pi0 = rng.dirichlet(np.full(L, 2.0))
    model = JumpLinearModel(A=A, B=B, Q=Q, R=R, P_term=P_term, trans=trans, pi0=pi0, d=d, N=N)
    init = InitialData(x0=rng.standard_normal(n), u_pre=rng.standard_normal((d, m)))
    return model, init


def random_suite(size: int = SUITE_SIZE, seed: int = SUITE_SEED) -> list[Instance]:
    """Cycle through L in {1,2,3}, d in {1,2,3}, n,m in {1,2}; N drawn in [d+1, MAX_N[L]]."""
    # L varies fastest so a truncated cycle stays balanced across mode counts
    combos = list(itertools.product((1, 2), (1, 2), (1, 2, 3), (1, 2, 3)))
    out = []
    for i in range(size):
        n, m, d, L = combos[i % len(combos)]
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))
        N = int(rng.integers(d + 1, MAX_N[L] + 1))
        model, init = random_instance(rng, L, n, m, d, N)
        out.append(Instance(f"rand{i:02d}_L{L}_d{d}_n{n}_m{m}_N{N}", model, init))
    return out


def boundary_instances() -> list[Instance]:
    """Hand-built cases on either side of the solvability boundary."""
    out = []
    # no weights at all: every decision is free, nothing is PD
    for L, d in ((1, 1), (2, 2)):
        n, m, N = 2, 1, 4
        A = np.stack([np.array([[0.9, 0.2], [0.0, 0.7]])] * L)
        B = np.stack([np.array([[1.0], [0.5]])] * L)
        Z = np.zeros((L, n, n))
        trans = np.full((L, L), 1.0 / L)
        model = JumpLinearModel(A=A, B=B, Q=Z, R=np.zeros((L, m, m)), P_term=Z,
                                trans=trans, pi0=np.full(L, 1.0 / L), d=d, N=N)
        out.append(Instance(f"zero_weights_L{L}_d{d}", model,
                            InitialData(np.ones(n), np.ones((d, m))), expect_solvable=False))
    # only the terminal penalty sees the first state coordinate, B only drives the second:
    # the last decision is unpenalized and fails, earlier ones would not
    n, m, d, N = 2, 1, 1, 3
    A = np.array([[[1.0, 0.0], [0.0, 1.0]]])
    B = np.array([[[0.0], [1.0]]])
    model = JumpLinearModel(A=A, B=B, Q=np.zeros((1, n, n)), R=np.zeros((1, m, m)),
                            P_term=np.array([np.diag([1.0, 0.0])]), trans=np.ones((1, 1)),
                            pi0=np.ones(1), d=d, N=N)
    out.append(Instance("terminal_blind", model, InitialData(np.ones(n), np.ones((d, m))),
                        expect_solvable=False))
    # R = 0 but the state cost makes every decision visible: solvable
    A = np.array([[[0.5, 0.1], [0.0, 0.8]], [[1.1, 0.0], [0.3, 0.4]]])
    B = np.array([[[1.0], [0.0]], [[0.5], [1.0]]])
    Q = np.stack([np.eye(2)] * 2)
    model = JumpLinearModel(A=A, B=B, Q=Q, R=np.zeros((2, 1, 1)), P_term=Q,
                            trans=np.array([[0.6, 0.4], [0.2, 0.8]]), pi0=np.array([0.3, 0.7]),
                            d=2, N=4)
    out.append(Instance("zero_R_observable", model, InitialData(np.ones(2), np.ones((2, 1))),
                        expect_solvable=True))
    return out
