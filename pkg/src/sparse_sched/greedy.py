"""Greedy minimisation of the epsilon-auxiliary energy over actuator schedules.

A schedule of length n is identified with a set of pairs ``(k, j)`` (time step
k, 0-based; actuator j, 1-based).  The inner loop adds one pair at a time,
choosing the pair that most decreases ``trace((W + eps I)^-1)`` among pairs
that keep every step at most s actuators wide, and maintains the inverse by
Sherman-Morrison updates.  The outer loop shrinks eps by a factor c until the
Gramian reaches full rank.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Literal

import numpy as np

from .lds_model import (
    DEFAULT_RANK_TOL,
    ActuatorSchedule,
    DimensionError,
    GramianState,
    LinearSystem,
    gramian,
    is_sparse_controllable,
    numerical_rank,
)

log = logging.getLogger(__name__)

Pair = tuple[int, int]
SelectionSet = frozenset  # frozenset[Pair]
Mode = Literal["time-varying", "time-invariant"]

TIE_TOL = 1e-12


@dataclass(frozen=True)
class GreedyConfig:
    s: int
    # the outer loop returns the first full-rank schedule, so epsilon0 must sit
    # below the small Gramian eigenvalues for the energy to be meaningful
    epsilon0: float = 1e-6
    c: float = 10.0
    max_outer: int = 10
    rank_tol: float = DEFAULT_RANK_TOL
    mode: Mode = "time-varying"
    # stop the inner loop once rank n is reached and the best gain is below 1e-12
    early_stop: bool = False

    def __post_init__(self):
        if self.epsilon0 <= 0:
            raise ValueError("epsilon0 must be positive")
        if self.c <= 1:
            raise ValueError("decay factor c must exceed 1")
        if self.s < 1:
            raise ValueError("sparsity must be at least 1")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")
        if self.mode not in ("time-varying", "time-invariant"):
            raise ValueError(f"unknown mode {self.mode!r}")

    def check(self, sys: LinearSystem) -> None:
        if self.s > sys.m:
            raise ValueError(f"sparsity {self.s} exceeds number of actuators m={sys.m}")


@dataclass
class GreedyDiagnostics:
    outer_iterations: int = 0
    final_epsilon: float = float("nan")
    final_rank: int = 0
    rank_history: list[int] = field(default_factory=list)
    # objective after each pick, one list per outer iteration
    trace_history: list[list[float]] = field(default_factory=list)

    @property
    def per_pick_trace(self) -> list[float]:
        return self.trace_history[-1] if self.trace_history else []

    def to_dict(self) -> dict:
        return {
            "outer_iterations": self.outer_iterations,
            "final_epsilon": self.final_epsilon,
            "final_rank": self.final_rank,
            "rank_history": list(self.rank_history),
            "trace_history": [list(t) for t in self.trace_history],
        }


class RankDeficientSchedule(RuntimeError):
    """The outer loop ran out of iterations without a full-rank Gramian.

    Carries the best schedule found (highest rank, latest on ties) and the
    diagnostics of the whole run.
    """

    def __init__(self, schedule: ActuatorSchedule, rank: int, diagnostics: GreedyDiagnostics):
        super().__init__(
            f"no full-rank schedule after {diagnostics.outer_iterations} outer iterations (best rank {rank})"
        )
        self.schedule = schedule
        self.rank = rank
        self.diagnostics = diagnostics


# --- selection sets ---------------------------------------------------------

def flatten_schedule(schedule: ActuatorSchedule) -> SelectionSet:
    """Inverse of :func:`schedule_from_selection`."""
    return frozenset((k, j) for k, step in enumerate(schedule.steps) for j in step)


def schedule_from_selection(T: Iterable[Pair], n: int, m: int | None = None,
                            s: int | None = None) -> ActuatorSchedule:
    steps: list[list[int]] = [[] for _ in range(n)]
    for k, j in T:
        if not 0 <= k < n or j < 1 or (m is not None and j > m):
            raise ValueError(f"pair {(k, j)} out of range for n={n}, m={m}")
        steps[k].append(j)
    return ActuatorSchedule(tuple(tuple(step) for step in steps), s=s)


def step_counts(T: Iterable[Pair], n: int) -> np.ndarray:
    counts = np.zeros(n, dtype=int)
    for k, _ in T:
        counts[k] += 1
    return counts


def is_independent(T: Iterable[Pair], s: int) -> bool:
    """Per-step sparsity: at most s actuators share any time step."""
    counts: dict[int, int] = {}
    for k, _ in T:
        counts[k] = counts.get(k, 0) + 1
        if counts[k] > s:
            return False
    return True


def feasible_candidates(T: Iterable[Pair], n: int, m: int, s: int) -> set[Pair]:
    """Pairs outside T whose addition keeps every step within s actuators."""
    T = set(T)
    counts = step_counts(T, n)
    return {(k, j) for k in range(n) if counts[k] < s for j in range(1, m + 1) if (k, j) not in T}


# --- incremental inverse ----------------------------------------------------

def candidate_gain(state: GramianState, v: np.ndarray) -> float:
    """Decrease of ``trace((W + eps I)^-1)`` when ``v v^T`` is added to W."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("candidate vector must be finite")
    if state.M is None:
        raise ValueError("gain needs the shifted inverse (epsilon > 0)")
    Mv = state.M @ v
    return float(Mv @ Mv / (1.0 + v @ Mv))


def _gains(M: np.ndarray, V: np.ndarray) -> np.ndarray:
    MV = M @ V
    return np.einsum("ij,ij->j", MV, MV) / (1.0 + np.einsum("ij,ij->j", V, MV))


def _argmax_lex(gains: np.ndarray) -> int:
    """First index whose gain is within TIE_TOL of the best."""
    best = gains.max()
    return int(np.flatnonzero(gains >= best - TIE_TOL)[0])


class _ShiftedInverse:
    """Running W and ``M = (W + eps I)^-1`` under rank-one additions."""

    def __init__(self, n: int, eps: float):
        self.eps = eps
        self.W = np.zeros((n, n))
        self.M = np.eye(n) / eps

    def add(self, v: np.ndarray) -> None:
        self.W += np.outer(v, v)
        Mv = self.M @ v
        den = 1.0 + v @ Mv
        if den > 0 and np.isfinite(den):
            self.M -= np.outer(Mv, Mv) / den
            self.M = 0.5 * (self.M + self.M.T)
        else:
            log.debug("Sherman-Morrison denominator %g, recomputing inverse", den)
            self.recompute()
        if not np.all(np.isfinite(self.M)):
            self.recompute()

    def recompute(self) -> None:
        n = self.W.shape[0]
        W = 0.5 * (self.W + self.W.T)
        try:
            M = np.linalg.inv(W + self.eps * np.eye(n))
        except np.linalg.LinAlgError as exc:
            raise FloatingPointError("shifted Gramian inverse broke down") from exc
        if not np.all(np.isfinite(M)):
            raise FloatingPointError("shifted Gramian inverse is not finite")
        self.M = 0.5 * (M + M.T)

    def state(self, tol: float) -> GramianState:
        W = 0.5 * (self.W + self.W.T)
        return GramianState(W, self.eps, self.M.copy(), numerical_rank(W, tol), float(np.trace(self.M)))


PickHook = Callable[[int, Pair, np.ndarray, np.ndarray], None]


def greedy_inner(sys: LinearSystem, cfg: GreedyConfig, eps: float, *,
                 start: Iterable[Pair] = (), max_picks: int | None = None,
                 on_pick: PickHook | None = None,
                 trace_out: list[float] | None = None) -> tuple[SelectionSet, GramianState]:
    """Greedy inner loop at a fixed eps.

    Starting from ``start`` (empty by default), repeatedly add the feasible pair
    with the largest gain until no feasible pair remains, or until
    ``max_picks`` picks have been made.  Ties are broken towards the
    lexicographically smallest pair.  ``on_pick(r, pair, W, M)`` is called after
    every pick with the running Gramian and its Sherman-Morrison inverse.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    cfg.check(sys)
    n, m, s = sys.n, sys.m, cfg.s
    V = sys.candidate_vectors()
    inv = _ShiftedInverse(n, eps)

    available = np.ones(n * m, dtype=bool)
    counts = np.zeros(n, dtype=int)
    T: set[Pair] = set()

    def take(k: int, j: int) -> None:
        col = k * m + (j - 1)
        inv.add(V[:, col])
        T.add((k, j))
        available[col] = False
        counts[k] += 1
        if counts[k] >= s:
            available[k * m:(k + 1) * m] = False

    for k, j in sorted(set(start)):
        if not (0 <= k < n and 1 <= j <= m):
            raise DimensionError(f"start pair {(k, j)} out of range")
        if counts[k] >= s:
            raise ValueError(f"start selection exceeds sparsity {s} at step {k}")
        take(k, j)

    picks = 0
    while available.any() and (max_picks is None or picks < max_picks):
        idx = np.flatnonzero(available)
        gains = _gains(inv.M, V[:, idx])
        best = idx[_argmax_lex(gains)]
        if cfg.early_stop and gains.max() < TIE_TOL and numerical_rank(inv.W, cfg.rank_tol) == n:
            break
        k, j = divmod(int(best), m)
        take(k, j + 1)
        picks += 1
        if trace_out is not None:
            trace_out.append(float(np.trace(inv.M)))
        if on_pick is not None:
            on_pick(picks, (k, j + 1), inv.W, inv.M)

    return frozenset(T), inv.state(cfg.rank_tol)


def greedy_schedule(sys: LinearSystem, cfg: GreedyConfig, *,
                    strict: bool = True) -> tuple[ActuatorSchedule, GreedyDiagnostics]:
    """Full greedy scheduler with the shrinking-eps outer loop.

    Runs the inner loop at ``eps_t = epsilon0 / c**t`` until the scheduled
    Gramian has numerical rank n.  If ``max_outer`` iterations do not reach full
    rank, raises :class:`RankDeficientSchedule` (or, with ``strict=False``,
    returns the best schedule; check ``diagnostics.final_rank``).
    """
    if cfg.mode == "time-invariant":
        return greedy_schedule_time_invariant(sys, cfg, strict=strict)
    cfg.check(sys)
    _warn_if_infeasible(sys, cfg)
    n = sys.n

    def inner(eps: float, history: list[float]) -> ActuatorSchedule:
        T, _ = greedy_inner(sys, cfg, eps, trace_out=history)
        return schedule_from_selection(T, n, sys.m, cfg.s)

    return _outer_loop(sys, cfg, inner, strict)


def _outer_loop(sys, cfg, inner, strict):
    diag = GreedyDiagnostics()
    best: tuple[int, ActuatorSchedule] | None = None
    eps = cfg.epsilon0
    for t in range(cfg.max_outer):
        history: list[float] = []
        schedule = inner(eps, history)
        rank = gramian(sys, schedule, tol=cfg.rank_tol).rank
        diag.outer_iterations = t + 1
        diag.final_epsilon = eps
        diag.rank_history.append(rank)
        diag.trace_history.append(history)
        if best is None or rank >= best[0]:
            best = (rank, schedule)
        if rank == sys.n:
            diag.final_rank = rank
            return schedule, diag
        eps = eps / cfg.c
    rank, schedule = best
    diag.final_rank = rank
    if strict:
        raise RankDeficientSchedule(schedule, rank, diag)
    return schedule, diag


def _warn_if_infeasible(sys: LinearSystem, cfg: GreedyConfig) -> None:
    report = is_sparse_controllable(sys, cfg.s, cfg.rank_tol)
    if not report:
        warnings.warn(
            f"system is not {cfg.s}-sparse controllable (Kalman rank {report.kalman_rank}/{sys.n}, "
            f"needs s >= {report.min_sparsity}); the scheduler will not reach full rank",
            RuntimeWarning,
            stacklevel=3,
        )


# --- time-invariant variant --------------------------------------------------

def _block_gain(M: np.ndarray, Vj: np.ndarray) -> float:
    # trace(M) - trace((M^-1 + Vj Vj^T)^-1) by the Woodbury identity
    MV = M @ Vj
    inner = np.eye(Vj.shape[1]) + Vj.T @ MV
    return float(np.trace(np.linalg.solve(inner, MV.T @ MV)))


def greedy_inner_time_invariant(sys: LinearSystem, cfg: GreedyConfig, eps: float,
                                trace_out: list[float] | None = None) -> tuple[frozenset[int], GramianState]:
    """Greedy choice of one actuator set used at every step.

    Picking actuator j adds all n vectors ``A**(n-1-k) b_j`` at once.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    cfg.check(sys)
    n, m = sys.n, sys.m
    V = sys.candidate_vectors()
    blocks = [V[:, j::m] for j in range(m)]  # n x n Krylov block of actuator j+1
    inv = _ShiftedInverse(n, eps)
    chosen: list[int] = []
    while len(chosen) < min(cfg.s, m):
        remaining = [j for j in range(m) if j + 1 not in chosen]
        gains = np.array([_block_gain(inv.M, blocks[j]) for j in remaining])
        j = remaining[_argmax_lex(gains)]
        if cfg.early_stop and gains.max() < TIE_TOL and numerical_rank(inv.W, cfg.rank_tol) == n:
            break
        for col in range(n):
            inv.add(blocks[j][:, col])
        chosen.append(j + 1)
        if trace_out is not None:
            trace_out.append(float(np.trace(inv.M)))
    return frozenset(chosen), inv.state(cfg.rank_tol)


def greedy_schedule_time_invariant(sys: LinearSystem, cfg: GreedyConfig, *,
                                   strict: bool = True) -> tuple[ActuatorSchedule, GreedyDiagnostics]:
    cfg.check(sys)
    _warn_if_infeasible(sys, cfg)

    def inner(eps: float, history: list[float]) -> ActuatorSchedule:
        S0, _ = greedy_inner_time_invariant(sys, cfg, eps, trace_out=history)
        return ActuatorSchedule(tuple(tuple(sorted(S0)) for _ in range(sys.n)), s=cfg.s)

    return _outer_loop(sys, cfg, inner, strict)
