"""Brute-force and closed-form checks for the greedy scheduler.

Everything here evaluates the objective by direct inversion, never through
the Sherman-Morrison path used by :mod:`sparse_sched.greedy`.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .greedy import Pair, feasible_candidates, is_independent
from .lds_model import (
    DEFAULT_RANK_TOL,
    ActuatorSchedule,
    LinearSystem,
    numerical_rank,
)

ENUMERATION_LIMIT = 10**6


class EnumerationLimitError(ValueError):
    pass


class NotSparseControllableError(ValueError):
    pass


def _shifted_trace_inv(W: np.ndarray, eps: float) -> float:
    return float(np.trace(np.linalg.inv(W + eps * np.eye(W.shape[0]))))


def objective(sys: LinearSystem, T: Iterable[Pair], eps: float) -> float:
    """``trace((W_{S(T)} + eps I)^-1)`` by direct inversion."""
    V = sys.candidate_vectors()
    cols = [k * sys.m + (j - 1) for k, j in T]
    Vt = V[:, cols]
    return _shifted_trace_inv(Vt @ Vt.T, eps)


# --- brute force --------------------------------------------------------------

def _cache_key(sys: LinearSystem, s: int, eps: float, K: int, include_smaller: bool) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(sys.A).tobytes())
    h.update(np.ascontiguousarray(sys.B).tobytes())
    h.update(repr((sys.n, sys.m, s, float(eps), K, include_smaller)).encode())
    return h.hexdigest()


def brute_force_optimal_schedule(sys: LinearSystem, s: int, eps: float, K: int | None = None, *,
                                 include_smaller: bool = False, tol: float = DEFAULT_RANK_TOL,
                                 limit: int = ENUMERATION_LIMIT,
                                 cache_dir: str | Path | None = None) -> tuple[ActuatorSchedule, float]:
    """Exhaustive minimiser of the (shifted) inverse-Gramian trace.

    Every step ranges over all actuator subsets of size exactly s (or of size
    at most s with ``include_smaller``).  With ``eps == 0`` only full-rank
    schedules are admissible and the value is ``trace(W^-1)``.  The first
    minimiser in lexicographic enumeration order is returned.
    """
    n, m = sys.n, sys.m
    K = n if K is None else K
    if not 1 <= s <= m:
        raise ValueError(f"sparsity must lie in [1, {m}], got {s}")
    if eps < 0:
        raise ValueError("eps must be non-negative")
    sizes = range(0, s + 1) if include_smaller else [s]
    subsets = [c for size in sizes for c in itertools.combinations(range(1, m + 1), size)]
    total = len(subsets) ** K
    if total > limit:
        raise EnumerationLimitError(f"{total} schedules exceed the enumeration limit {limit}")

    cache_file = None
    if cache_dir is not None:
        cache_file = Path(cache_dir) / f"bf_{_cache_key(sys, s, eps, K, include_smaller)}.json"
        if cache_file.exists():
            data = json.loads(cache_file.read_text())
            return ActuatorSchedule.from_dict(data["schedule"]), data["value"]

    # per-step contribution of every subset: A^{K-1-t} B_S B_S^T (A^{K-1-t})^T
    contrib = np.empty((K, len(subsets), n, n))
    for t in range(K):
        P = sys.power(K - 1 - t)
        for i, sub in enumerate(subsets):
            cols = P @ sys.B[:, [j - 1 for j in sub]]
            contrib[t, i] = cols @ cols.T

    best_value = math.inf
    best_idx = None
    for idx in itertools.product(range(len(subsets)), repeat=K):
        W = sum(contrib[t, i] for t, i in enumerate(idx))
        if eps == 0:
            if numerical_rank(W, tol) < n:
                continue
            value = float(np.trace(np.linalg.inv(W)))
        else:
            value = _shifted_trace_inv(W, eps)
        if value < best_value:
            best_value, best_idx = value, idx
    if best_idx is None:
        raise NotSparseControllableError(f"no full-rank schedule: not {s}-sparse controllable at K={K}")
    schedule = ActuatorSchedule(tuple(subsets[i] for i in best_idx), s=s)
    if cache_file is not None:
        cache_file.parent.mkdir(parents=True, exist_ok=True)
        cache_file.write_text(json.dumps({"schedule": schedule.to_dict(), "value": best_value}))
    return schedule, best_value


# --- approximate supermodularity ------------------------------------------------

def full_gramian(sys: LinearSystem) -> np.ndarray:
    V = sys.candidate_vectors()
    return V @ V.T


def alpha_lower_bound(sys: LinearSystem, eps: float) -> float:
    """``eps / lambda_max(eps I + W)`` with W the fully actuated Gramian."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    lam_max = np.linalg.eigvalsh(full_gramian(sys))[-1]
    return float(eps / (eps + max(lam_max, 0.0)))


@dataclass
class SupermodularityReport:
    trials: int
    evaluated: int
    min_ratio: float
    alpha_bound: float
    violations: int

    def to_dict(self) -> dict:
        return asdict(self)


def _batched_shifted_trace(V: np.ndarray, masks: np.ndarray, eps: float) -> np.ndarray:
    # masks: (batch, N) 0/1; W_b = V diag(mask_b) V^T
    W = np.einsum("ik,bk,jk->bij", V, masks, V)
    n = V.shape[0]
    inv = np.linalg.inv(W + eps * np.eye(n))
    return np.trace(inv, axis1=1, axis2=2)


def check_supermodularity(sys: LinearSystem, eps: float, trials: int, seed, *,
                          tol: float = 1e-9, chunk: int = 2000) -> SupermodularityReport:
    """Sample chains ``A ⊆ B ⊆ V``, ``e ∉ B`` and test the alpha-bound.

    Checks ``E(A) - E(A+e) >= alpha * (E(B) - E(B+e))`` with alpha from
    :func:`alpha_lower_bound`.  Chains are drawn without regard to the
    sparsity constraint.  Trials with ``E(B) - E(B+e) <= 0`` (numerically) do
    not enter the minimum ratio.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = np.random.default_rng(seed)
    V = sys.candidate_vectors()
    N = V.shape[1]
    alpha = alpha_lower_bound(sys, eps)
    min_ratio = math.inf
    violations = 0
    evaluated = 0
    done = 0
    while done < trials:
        b = min(chunk, trials - done)
        done += b
        mA = np.zeros((b, N))
        mB = np.zeros((b, N))
        mAe = np.zeros((b, N))
        mBe = np.zeros((b, N))
        for i in range(b):
            perm = rng.permutation(N)
            e = perm[0]
            size_B = rng.integers(0, N)  # |B| <= N - 1 so that e fits outside
            B = perm[1:1 + size_B]
            size_A = rng.integers(0, size_B + 1)
            A = rng.choice(B, size=size_A, replace=False) if size_A else np.empty(0, dtype=int)
            mA[i, A] = 1
            mB[i, B] = 1
            mAe[i] = mA[i]
            mAe[i, e] = 1
            mBe[i] = mB[i]
            mBe[i, e] = 1
        EA, EAe, EB, EBe = (_batched_shifted_trace(V, mk, eps) for mk in (mA, mAe, mB, mBe))
        dA = EA - EAe
        dB = EB - EBe
        violations += int(np.count_nonzero(dA < alpha * dB - tol))
        scale = np.maximum(1.0, np.abs(EB))
        ok = dB > 1e-13 * scale
        evaluated += int(np.count_nonzero(ok))
        if ok.any():
            min_ratio = min(min_ratio, float(np.min(dA[ok] / dB[ok])))
    return SupermodularityReport(trials, evaluated, min_ratio, alpha, violations)


# --- matroid axioms --------------------------------------------------------------

Independence = Callable[[frozenset], bool]


def check_matroid_exchange(n: int, m: int, s: int, trials: int, seed, *,
                           independent: Independence | None = None,
                           exhaustive: bool | None = None) -> bool:
    """Test the three matroid axioms for an independence family on V.

    The default family is the per-step sparsity constraint.  With
    ``exhaustive`` (default when |V| <= 8) every subset and every pair of
    subsets is checked; otherwise ``trials`` random instances of each axiom.
    """
    universe = [(k, j) for k in range(n) for j in range(1, m + 1)]
    if independent is None:
        def independent(T):
            return is_independent(T, s)
    if exhaustive is None:
        exhaustive = len(universe) <= 8

    if not independent(frozenset()):
        return False

    if exhaustive:
        family = [frozenset(c) for r in range(len(universe) + 1)
                  for c in itertools.combinations(universe, r)]
        indep = [T for T in family if independent(T)]
        indep_set = set(indep)
        for T in indep:
            for r in range(len(T)):
                if any(frozenset(c) not in indep_set for c in itertools.combinations(T, r)):
                    return False
        for T in indep:
            for Tp in indep:
                if len(T) > len(Tp) and not any(independent(Tp | {e}) for e in T - Tp):
                    return False
        return True

    rng = np.random.default_rng(seed)

    def sample_independent() -> frozenset:
        for _ in range(1000):
            q = rng.random()
            T = frozenset(u for u, keep in zip(universe, rng.random(len(universe)) < q) if keep)
            if independent(T):
                return T
        return frozenset()

    for _ in range(trials):
        T = sample_independent()
        items = sorted(T)
        keep = rng.random(len(items)) < rng.random()
        if not independent(frozenset(x for x, k in zip(items, keep) if k)):
            return False
        T1, T2 = T, sample_independent()
        if len(T1) == len(T2):
            continue
        big, small = (T1, T2) if len(T1) > len(T2) else (T2, T1)
        if not any(independent(small | {e}) for e in big - small):
            return False
    return True


# --- Theorem-style bound and rank-progress threshold -----------------------------

def beta(alpha: float) -> float:
    return min(alpha / 2.0, alpha / (1.0 + alpha))


def theorem1_bound(sys: LinearSystem, s: int, eps: float, E_star: float,
                   alpha: float | None = None) -> float:
    """Additive near-optimality bound ``(1 - beta) n / eps + beta E*``.

    ``beta = min(alpha/2, alpha/(1+alpha))``; alpha defaults to
    :func:`alpha_lower_bound`.  ``s`` is accepted for symmetry with the
    brute-force oracle; the bound does not depend on it.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    a = alpha_lower_bound(sys, eps) if alpha is None else alpha
    b = beta(a)
    return (1.0 - b) * sys.n / eps + b * E_star


def prop1_epsilon_threshold(lambda1_tilde: float, lambdaR1_hat: float, R: int) -> float:
    """Largest eps for which a rank-increasing pick provably wins.

    Returns ``+inf`` when ``R*l1 - (R+1)*lR1 <= 0``.
    """
    if lambda1_tilde <= 0 or lambdaR1_hat <= 0:
        raise ValueError("eigenvalue arguments must be positive")
    den = R * lambda1_tilde - (R + 1) * lambdaR1_hat
    if den <= 0:
        return math.inf
    return lambda1_tilde * lambdaR1_hat / den


@dataclass
class RankProgressInstance:
    R: int
    lambda1_tilde: float | None  # None when no rank-preserving candidate exists
    lambdaR1_hat: float
    threshold: float
    rank_increasing: list[Pair]
    rank_preserving: list[Pair]


def rank_progress_threshold(sys: LinearSystem, T: Iterable[Pair], s: int,
                            tol: float = DEFAULT_RANK_TOL) -> RankProgressInstance | None:
    """Threshold below which the next greedy pick from T must raise the rank.

    Takes the worst case over the feasible candidates: the largest top
    eigenvalue among rank-preserving alternatives and the smallest (R+1)-th
    eigenvalue among rank-increasing ones.  Returns None when no feasible
    candidate increases the rank.
    """
    T = frozenset(T)
    n, m = sys.n, sys.m
    V = sys.candidate_vectors()
    cols = [k * m + (j - 1) for k, j in T]
    W = V[:, cols] @ V[:, cols].T
    R = numerical_rank(W, tol)
    inc, pres = [], []
    lam_tilde, lam_hat = [], []
    for pair in sorted(feasible_candidates(T, n, m, s)):
        v = V[:, pair[0] * m + pair[1] - 1]
        Wc = W + np.outer(v, v)
        lam = np.linalg.eigvalsh(Wc)[::-1]
        if numerical_rank(Wc, tol) > R:
            inc.append(pair)
            lam_hat.append(lam[R])
        else:
            pres.append(pair)
            lam_tilde.append(lam[0])
    if not inc:
        return None
    l_hat = min(lam_hat)
    if not pres or R == 0:
        l_tilde = max(lam_tilde) if pres else None
        return RankProgressInstance(R, l_tilde, l_hat, math.inf, inc, pres)
    l_tilde = max(lam_tilde)
    return RankProgressInstance(R, l_tilde, l_hat, prop1_epsilon_threshold(l_tilde, l_hat, R), inc, pres)
