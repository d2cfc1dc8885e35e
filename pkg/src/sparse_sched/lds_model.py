"""Discrete-time linear systems, actuator schedules and scheduled Gramians.

Index convention used throughout the package: for a schedule of length K, the
actuator set used at time step ``t`` (0-based) reaches the final state through
the power ``A**(K - 1 - t)``.  Actuator indices are 1-based, as in the schedule
file format.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

DEFAULT_RANK_TOL = 1e-10


class DimensionError(ValueError):
    """Raised when a system, schedule or vector has inconsistent shape."""


class InfeasibleSystemError(ValueError):
    """Raised when an operation requires an s-sparse controllable system."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """The pair (A, B) of ``x(k+1) = A x(k) + B u(k)``.

    Arrays are copied and made read-only, so instances (and their cached
    matrix powers) can be shared freely.
    """

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
            raise DimensionError(f"A must be a non-empty square matrix, got shape {A.shape}")
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if B.ndim != 2 or B.shape[0] != A.shape[0] or B.shape[1] == 0:
            raise DimensionError(f"B must have {A.shape[0]} rows and at least one column, got shape {B.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise ValueError("system matrices must be finite")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "B", _frozen(B))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @cached_property
    def powers(self) -> np.ndarray:
        """``powers[k] = A**k`` for k = 0..n, shape (n+1, n, n)."""
        n = self.n
        out = np.empty((n + 1, n, n))
        out[0] = np.eye(n)
        for k in range(1, n + 1):
            out[k] = self.A @ out[k - 1]
        out.setflags(write=False)
        return out

    def power(self, k: int) -> np.ndarray:
        if k < 0:
            raise ValueError("negative matrix power")
        if k <= self.n:
            return self.powers[k]
        return np.linalg.matrix_power(self.A, k)

    def candidate_vectors(self, K: int | None = None) -> np.ndarray:
        """Columns ``A**(K-1-k) b_j`` for every pair (k, j), shape (n, K*m).

        Column ``k*m + (j-1)`` belongs to pair (k, j), so column order is the
        lexicographic order of the pairs.
        """
        K = self.n if K is None else K
        if K == self.n:
            return self._candidate_vectors_n
        return self._build_candidates(K)

    @cached_property
    def _candidate_vectors_n(self) -> np.ndarray:
        out = self._build_candidates(self.n)
        out.setflags(write=False)
        return out

    def _build_candidates(self, K: int) -> np.ndarray:
        blocks = [self.power(K - 1 - k) @ self.B for k in range(K)]
        return np.hstack(blocks)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "A": self.A.ravel().tolist(),
            "B": self.B.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearSystem":
        try:
            n, m = int(d["n"]), int(d["m"])
            A, B = d["A"], d["B"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed system descriptor: {exc}") from exc
        if n <= 0 or m <= 0:
            raise DimensionError("n and m must be positive")
        if len(A) != n * n or len(B) != n * m:
            raise DimensionError(f"expected {n * n} entries for A and {n * m} for B, got {len(A)} and {len(B)}")
        return cls(np.reshape(np.asarray(A, dtype=float), (n, n)), np.reshape(np.asarray(B, dtype=float), (n, m)))


@dataclass(frozen=True)
class ActuatorSchedule:
    """Ordered actuator index sets ``(S_0, ..., S_{K-1})`` with 1-based indices."""

    steps: tuple[tuple[int, ...], ...]
    s: int | None = None

    def __post_init__(self):
        steps = []
        for k, step in enumerate(self.steps):
            idx = [int(j) for j in step]
            if len(set(idx)) != len(idx):
                raise ValueError(f"duplicate actuator index at step {k}: {list(step)}")
            if any(j < 1 for j in idx):
                raise ValueError(f"actuator indices are 1-based, got {list(step)} at step {k}")
            steps.append(tuple(sorted(idx)))
        object.__setattr__(self, "steps", tuple(steps))
        if self.s is not None:
            if self.s < 1:
                raise ValueError("sparsity must be at least 1")
            for k, step in enumerate(self.steps):
                if len(step) > self.s:
                    raise ValueError(f"step {k} has {len(step)} actuators, exceeding s={self.s}")

    @property
    def K(self) -> int:
        return len(self.steps)

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def __getitem__(self, k: int) -> tuple[int, ...]:
        return self.steps[k]

    @property
    def max_step_size(self) -> int:
        return max((len(step) for step in self.steps), default=0)

    def validate(self, m: int, s: int | None = None) -> None:
        """Check actuator range and the per-step cardinality bound."""
        s = self.s if s is None else s
        for k, step in enumerate(self.steps):
            if any(j > m for j in step):
                raise DimensionError(f"step {k} references actuator > m={m}: {list(step)}")
            if s is not None and len(step) > s:
                raise ValueError(f"step {k} has {len(step)} actuators, exceeding s={s}")

    @classmethod
    def full(cls, K: int, m: int) -> "ActuatorSchedule":
        return cls(tuple(tuple(range(1, m + 1)) for _ in range(K)), s=m)

    def to_dict(self) -> dict:
        s = self.s if self.s is not None else self.max_step_size
        return {"s": s, "steps": [list(step) for step in self.steps]}

    @classmethod
    def from_dict(cls, d: dict) -> "ActuatorSchedule":
        try:
            steps = d["steps"]
            s = d.get("s")
            return cls(tuple(tuple(int(j) for j in step) for step in steps), s=None if s is None else int(s))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed schedule descriptor: {exc}") from exc


@dataclass
class GramianState:
    """Gramian ``W`` with its epsilon-shifted inverse ``M = (W + eps I)^-1``.

    With ``epsilon == 0`` the inverse fields are left as ``None``.
    """

    W: np.ndarray
    epsilon: float
    M: np.ndarray | None
    rank: int
    trace_inv: float | None

    @classmethod
    def from_gramian(cls, W: np.ndarray, epsilon: float, tol: float = DEFAULT_RANK_TOL) -> "GramianState":
        W = 0.5 * (W + W.T)
        if epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        rank = numerical_rank(W, tol)
        if epsilon == 0:
            return cls(W, 0.0, None, rank, None)
        M = np.linalg.inv(W + epsilon * np.eye(W.shape[0]))
        M = 0.5 * (M + M.T)
        return cls(W, float(epsilon), M, rank, float(np.trace(M)))

    @property
    def n(self) -> int:
        return self.W.shape[0]


def numerical_rank(M: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> int:
    """Number of singular values above ``tol * sigma_max * max(rows, cols)``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.count_nonzero(sv > tol * sv[0] * max(M.shape)))


def _check_schedule(sys: LinearSystem, schedule: ActuatorSchedule) -> None:
    if schedule.K < 1:
        raise DimensionError("schedule must have at least one step")
    schedule.validate(sys.m, s=None)


def controllability_matrix(sys: LinearSystem, schedule: ActuatorSchedule) -> np.ndarray:
    """``[A^{K-1} B_{S_0} | A^{K-2} B_{S_1} | ... | B_{S_{K-1}}]``.

    Column blocks follow the time steps; columns within a block follow
    ascending actuator index.  Empty steps contribute no columns.
    """
    _check_schedule(sys, schedule)
    K = schedule.K
    blocks = [sys.power(K - 1 - t) @ sys.B[:, [j - 1 for j in step]] for t, step in enumerate(schedule.steps) if step]
    if not blocks:
        return np.zeros((sys.n, 0))
    return np.hstack(blocks)


def gramian(sys: LinearSystem, schedule: ActuatorSchedule, epsilon: float = 0.0,
            tol: float = DEFAULT_RANK_TOL) -> GramianState:
    """Scheduled Gramian ``W = sum_t A^{K-1-t} B_{S_t} B_{S_t}^T (A^{K-1-t})^T``."""
    C = controllability_matrix(sys, schedule)
    return GramianState.from_gramian(C @ C.T, epsilon, tol)


def epsilon_auxiliary_energy(state: GramianState) -> float:
    """``trace((W + eps I)^-1)``."""
    if state.epsilon <= 0:
        raise ValueError("epsilon-auxiliary energy needs epsilon > 0")
    if state.M is not None:
        return float(np.trace(state.M))
    return float(np.trace(np.linalg.inv(state.W + state.epsilon * np.eye(state.n))))


def trace_inverse(W: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> float:
    """``trace(W^-1)`` for a PSD Gramian, ``inf`` when W is numerically singular."""
    if numerical_rank(W, tol) < W.shape[0]:
        return math.inf
    lam = np.linalg.eigvalsh(0.5 * (W + W.T))
    if lam[0] <= 0:
        return math.inf
    return float(np.sum(1.0 / lam))


def kalman_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """``[B, AB, ..., A^{n-1} B]``."""
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


@dataclass(frozen=True)
class SparseControllability:
    """Outcome of the s-sparse controllability test; truthy iff both conditions hold."""

    kalman_rank: int
    rank_A: int
    n: int
    s: int

    @property
    def controllable(self) -> bool:
        return self.kalman_rank == self.n

    @property
    def min_sparsity(self) -> int:
        return self.n - self.rank_A

    @property
    def sparse_ok(self) -> bool:
        return self.s >= self.min_sparsity

    def __bool__(self) -> bool:
        return self.controllable and self.sparse_ok


def is_sparse_controllable(sys: LinearSystem, s: int, tol: float = DEFAULT_RANK_TOL) -> SparseControllability:
    """Classical controllability plus ``s >= n - rank(A)``."""
    if not 1 <= s <= sys.m:
        raise ValueError(f"sparsity must lie in [1, {sys.m}], got {s}")
    return SparseControllability(
        kalman_rank=numerical_rank(kalman_matrix(sys.A, sys.B), tol),
        rank_A=numerical_rank(sys.A, tol),
        n=sys.n,
        s=s,
    )


def minimal_polynomial_degree(A: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> int:
    """Smallest q with ``I, A, ..., A^q`` linearly dependent.

    The vectorised powers are normalised to unit length before the rank test so
    that growth or decay of ``A**k`` does not swamp the tolerance.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    cols = [np.eye(n).ravel()]
    P = np.eye(n)
    for q in range(1, n + 1):
        P = A @ P
        v = P.ravel()
        norm = np.linalg.norm(v)
        if norm == 0.0:
            return q
        cols.append(v / norm)
        if numerical_rank(np.column_stack(cols), tol) < q + 1:
            return q
    return n


def horizon_bounds(sys: LinearSystem, s: int, tol: float = DEFAULT_RANK_TOL) -> tuple[int, int]:
    """Lower and upper bounds on the shortest controlling horizon K."""
    report = is_sparse_controllable(sys, s, tol)
    if not report:
        raise InfeasibleSystemError(
            f"system is not {s}-sparse controllable (Kalman rank {report.kalman_rank}/{sys.n}, "
            f"needs s >= {report.min_sparsity})"
        )
    n = sys.n
    q = minimal_polynomial_degree(sys.A, tol)
    rank_B = numerical_rank(sys.B, tol)
    lower = math.ceil(n / s)
    upper = min(q * math.ceil(rank_B / s), n - s + 1)
    return lower, upper


def load_system(path: str | Path) -> LinearSystem:
    with open(path) as fh:
        return LinearSystem.from_dict(json.load(fh))


def save_system(sys: LinearSystem, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(sys.to_dict(), fh)


def load_schedule(path: str | Path) -> ActuatorSchedule:
    with open(path) as fh:
        return ActuatorSchedule.from_dict(json.load(fh))


def save_schedule(schedule: ActuatorSchedule, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(schedule.to_dict(), fh)
