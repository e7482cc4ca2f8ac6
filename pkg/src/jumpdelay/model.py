"""Markov jump linear systems with a d-step input delay.

    x(k+1) = A[θ(k)] x(k) + B[θ(k)] u(k-d),   k = 0..N

with θ a finite Markov chain and cost

    E[ Σ_{k=0}^{N} x(k)' Q[θ(k)] x(k) + Σ_{k=d}^{N} u(k-d)' R[θ(k)] u(k-d)
       + x(N+1)' P_term[θ(N+1)] x(N+1) ].

Modes are 0-based inside the library and 1-based in every external format.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

STOCHASTIC_TOL = 1e-12
SYMMETRY_TOL = 1e-12
PSD_REL_TOL = 1e-10

MODEL_FIELDS = ("n", "m", "L", "A", "B", "Q", "R", "P_term", "trans", "pi0", "d", "N")
FILE_FIELDS = MODEL_FIELDS + ("x0", "u_pre")


class ModelError(ValueError):
    """Raised when a model or its initial data is malformed."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _stack(mats, shape, name):
    arr = np.array(mats, dtype=float)
    if arr.ndim == 2 and len(shape) == 3 and shape[0] == 1:
        arr = arr[None]
    if arr.shape != shape:
        raise ModelError([f"{name}: expected shape {shape}, got {arr.shape}"])
    return arr


@dataclass(frozen=True, eq=False)
class JumpLinearModel:
    """Mode-indexed system, weight and chain data.

    Matrix stacks carry the mode on the leading axis: ``A[l]`` is the
    dynamics matrix of (0-based) mode ``l``.
    """

    A: np.ndarray  # (L, n, n)
    B: np.ndarray  # (L, n, m)
    Q: np.ndarray  # (L, n, n)
    R: np.ndarray  # (L, m, m)
    P_term: np.ndarray  # (L, n, n)
    trans: np.ndarray  # (L, L), trans[i, j] = P(θ(k+1)=j | θ(k)=i)
    pi0: np.ndarray  # (L,)
    d: int
    N: int

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 3:
            raise ModelError([f"A: expected a stack of square matrices, got ndim={A.ndim}"])
        L, n, _ = A.shape
        B = np.asarray(self.B, dtype=float)
        if B.ndim != 3 or B.shape[:2] != (L, n):
            raise ModelError([f"B: expected shape ({L}, {n}, m), got {B.shape}"])
        m = B.shape[2]
        fields = {
            "A": _stack(A, (L, n, n), "A"),
            "B": B,
            "Q": _stack(self.Q, (L, n, n), "Q"),
            "R": _stack(self.R, (L, m, m), "R"),
            "P_term": _stack(self.P_term, (L, n, n), "P_term"),
            "trans": _stack(self.trans, (L, L), "trans"),
            "pi0": _stack(self.pi0, (L,), "pi0"),
        }
        for name, arr in fields.items():
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "N", int(self.N))

    @property
    def L(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.B.shape[2]

    def symmetrized(self) -> "JumpLinearModel":
        """Copy with Q, R and P_term replaced by (X + X')/2."""
        sym = lambda X: 0.5 * (X + np.swapaxes(X, -1, -2))
        return JumpLinearModel(
            A=self.A, B=self.B, Q=sym(self.Q), R=sym(self.R), P_term=sym(self.P_term),
            trans=self.trans, pi0=self.pi0, d=self.d, N=self.N,
        )

    def scaled_weights(self, c: float) -> "JumpLinearModel":
        return JumpLinearModel(
            A=self.A, B=self.B, Q=c * self.Q, R=c * self.R, P_term=c * self.P_term,
            trans=self.trans, pi0=self.pi0, d=self.d, N=self.N,
        )

    def to_dict(self) -> dict:
        return {
            "n": self.n, "m": self.m, "L": self.L,
            "A": self.A.tolist(), "B": self.B.tolist(), "Q": self.Q.tolist(),
            "R": self.R.tolist(), "P_term": self.P_term.tolist(),
            "trans": self.trans.tolist(), "pi0": self.pi0.tolist(),
            "d": self.d, "N": self.N,
        }


@dataclass(frozen=True, eq=False)
class InitialData:
    """Initial state and the d known pre-horizon inputs.

    ``u_pre[i]`` is u(i - d), so ``u_pre[0]`` = u(-d) and ``u_pre[-1]`` = u(-1).
    """

    x0: np.ndarray
    u_pre: np.ndarray

    def __post_init__(self):
        x0 = np.array(self.x0, dtype=float).reshape(-1)
        u_pre = np.array(self.u_pre, dtype=float)
        if u_pre.ndim == 1:
            u_pre = u_pre[:, None]
        x0.setflags(write=False)
        u_pre.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "u_pre", u_pre)

    def check(self, model: JumpLinearModel) -> None:
        problems = []
        if self.x0.shape != (model.n,):
            problems.append(f"x0: expected length {model.n}, got {self.x0.shape[0]}")
        if self.u_pre.shape != (model.d, model.m):
            problems.append(
                f"u_pre: expected {model.d} inputs of dimension {model.m}, got shape {self.u_pre.shape}"
            )
        if problems:
            raise ModelError(problems)

    @classmethod
    def zeros(cls, model: JumpLinearModel) -> "InitialData":
        return cls(np.zeros(model.n), np.zeros((model.d, model.m)))


@dataclass(frozen=True)
class ModePath:
    """Mode sequence occupying times start_time, start_time+1, ...

    ``weight`` is the product of one-step transition probabilities along the
    path, conditioned on the mode that precedes ``start_time``.
    """

    start_time: int
    modes: tuple[int, ...]
    weight: float

    @property
    def end(self) -> int:
        return self.modes[-1]


def _psd_ok(X: np.ndarray) -> bool:
    scale = max(np.linalg.norm(X, ord=np.inf), 1.0) if X.size else 1.0
    return bool(np.linalg.eigvalsh(0.5 * (X + X.T)).min() >= -PSD_REL_TOL * scale)


def validate_model(model: JumpLinearModel) -> list[str]:
    """List of violated invariants; an empty list means the model passes."""
    problems = []
    trans, pi0 = model.trans, model.pi0
    if np.any(trans < 0) or np.any(trans > 1):
        problems.append("trans: entries must lie in [0, 1]")
    for i, row_sum in enumerate(trans.sum(axis=1)):
        if abs(row_sum - 1.0) > STOCHASTIC_TOL:
            problems.append(f"trans: row {i + 1} not stochastic (sums to {row_sum:.15g})")
    if np.any(pi0 < 0) or np.any(pi0 > 1):
        problems.append("pi0: entries must lie in [0, 1]")
    if abs(pi0.sum() - 1.0) > STOCHASTIC_TOL:
        problems.append(f"pi0: not a probability vector (sums to {pi0.sum():.15g})")
    for name in ("Q", "R", "P_term"):
        stack = getattr(model, name)
        for l, X in enumerate(stack):
            if np.abs(X - X.T).max(initial=0.0) >= SYMMETRY_TOL:
                problems.append(f"{name}[{l + 1}]: not symmetric")
            elif not _psd_ok(X):
                problems.append(f"{name}[{l + 1}]: not positive semidefinite")
    if model.d < 1:
        problems.append("d: delay must be >= 1")
    if model.N <= model.d:
        problems.append("N: horizon must exceed the delay (N > d)")
    arrays = (model.A, model.B, model.Q, model.R, model.P_term, model.trans, model.pi0)
    if not all(np.all(np.isfinite(a)) for a in arrays):
        problems.append("non-finite entries present")
    return problems


def check_model(model: JumpLinearModel) -> JumpLinearModel:
    """Validate and return the symmetrized model, raising ModelError on failure."""
    problems = validate_model(model)
    if problems:
        raise ModelError(problems)
    return model.symmetrized()


def enumerate_paths(
    model: JumpLinearModel, start_mode: int, steps: int, start_time: int = 0
) -> list[ModePath]:
    """All L**steps continuations of ``start_mode`` in lexicographic order.

    Returned paths occupy times start_time+1 .. start_time+steps. Cost is
    O(L**steps); fine for the small delays this library targets.
    """
    if not 0 <= start_mode < model.L:
        raise ValueError(f"mode {start_mode} out of range 0..{model.L - 1}")
    if steps < 0:
        raise ValueError("steps must be non-negative")
    trans = model.trans
    paths = []
    for modes in itertools.product(range(model.L), repeat=steps):
        w, prev = 1.0, start_mode
        for l in modes:
            w *= trans[prev, l]
            prev = l
        paths.append(ModePath(start_time + 1, tuple(modes), w))
    return paths


def path_probability(model: JumpLinearModel, modes: Sequence[int]) -> float:
    """Unconditional probability of the chain prefix θ(0..len-1) = modes."""
    if not modes:
        return 1.0
    p = model.pi0[modes[0]]
    for a, b in zip(modes[:-1], modes[1:]):
        p *= model.trans[a, b]
    return float(p)


def f_product(model: JumpLinearModel, modes: Iterable[int]) -> np.ndarray:
    """A[modes[-1]] @ ... @ A[modes[0]]; identity for an empty sequence."""
    F = np.eye(model.n)
    for l in modes:
        if not 0 <= l < model.L:
            raise ValueError(f"mode {l} out of range 0..{model.L - 1}")
        F = model.A[l] @ F
    return F


# ---------------------------------------------------------------- file format


def model_from_dict(doc: dict) -> tuple[JumpLinearModel, InitialData]:
    """Parse a model document (the JSON file layout) into model + initial data."""
    missing = [f for f in FILE_FIELDS if f not in doc]
    unknown = [f for f in doc if f not in FILE_FIELDS and f != "schema_version"]
    problems = [f"{f}: missing" for f in missing] + [f"{f}: unknown field" for f in unknown]
    if problems:
        raise ModelError(problems)
    try:
        model = JumpLinearModel(
            A=doc["A"], B=doc["B"], Q=doc["Q"], R=doc["R"], P_term=doc["P_term"],
            trans=doc["trans"], pi0=doc["pi0"], d=doc["d"], N=doc["N"],
        )
    except ModelError:
        raise
    except (TypeError, ValueError) as exc:
        raise ModelError([f"malformed matrix data: {exc}"]) from exc
    for key, actual in (("n", model.n), ("m", model.m), ("L", model.L)):
        if doc[key] != actual:
            raise ModelError([f"{key}: declared {doc[key]} but matrices imply {actual}"])
    model = check_model(model)
    try:
        init = InitialData(doc["x0"], doc["u_pre"])
    except (TypeError, ValueError) as exc:
        raise ModelError([f"x0/u_pre: {exc}"]) from exc
    init.check(model)
    return model, init


def model_to_dict(model: JumpLinearModel, init: InitialData | None = None) -> dict:
    doc = model.to_dict()
    if init is not None:
        doc["x0"] = init.x0.tolist()
        doc["u_pre"] = init.u_pre.tolist()
    return doc


def load_model(path: str | Path) -> tuple[JumpLinearModel, InitialData]:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError([f"not valid JSON: {exc}"]) from exc
    if not isinstance(doc, dict):
        raise ModelError(["top level must be a JSON object"])
    return model_from_dict(doc)


def two_mode_example() -> tuple[JumpLinearModel, InitialData]:
    """The two-mode, d=2, N=7 benchmark instance shipped with the package."""
    return load_model(Path(__file__).parent / "data" / "two_mode_example.json")
