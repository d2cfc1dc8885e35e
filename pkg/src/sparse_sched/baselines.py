"""Comparison schedulers under the same per-step sparsity constraint."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from .lds_model import DEFAULT_RANK_TOL, ActuatorSchedule, LinearSystem, gramian, trace_inverse


def _check_s(sys: LinearSystem, s: int) -> None:
    if not 1 <= s <= sys.m:
        raise ValueError(f"sparsity must lie in [1, {sys.m}], got {s}")


def random_schedule(sys: LinearSystem, s: int, seed, K: int | None = None) -> ActuatorSchedule:
    """Each step draws s distinct actuators uniformly without replacement.

    ``seed`` is anything accepted by :func:`numpy.random.default_rng`.
    """
    _check_s(sys, s)
    K = sys.n if K is None else K
    rng = np.random.default_rng(seed)
    steps = tuple(tuple(int(j) + 1 for j in rng.choice(sys.m, size=s, replace=False)) for _ in range(K))
    return ActuatorSchedule(steps, s=s)


def greedy_trace_max_schedule(sys: LinearSystem, s: int) -> ActuatorSchedule:
    """Greedy maximisation of ``trace(W_S)`` under the per-step bound.

    The gain of pair (k, j) is ``||A^{n-1-k} b_j||^2`` and does not depend on
    the other picks, so the greedy reduces to taking the s largest-norm
    candidates at every step (smallest j on ties).
    """
    _check_s(sys, s)
    n, m = sys.n, sys.m
    norms = np.sum(sys.candidate_vectors() ** 2, axis=0).reshape(n, m)
    steps = []
    for k in range(n):
        row = norms[k].copy()
        picked = []
        for _ in range(s):
            best = row.max()
            j = int(np.flatnonzero(row >= best - 1e-12 * max(1.0, best))[0])
            picked.append(j + 1)
            row[j] = -np.inf
        steps.append(tuple(picked))
    return ActuatorSchedule(tuple(steps), s=s)


@dataclass
class EnsembleSummary:
    trials: int
    mean: float
    median: float
    min: float
    rank_deficient: int
    records: list[tuple[int, int, float]] = field(default_factory=list)  # (trial, rank, trace_inv)

    @property
    def all_rank_deficient(self) -> bool:
        return self.rank_deficient == self.trials

    def write_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "rank", "trace_inv"])
        for trial, rank, value in self.records:
            w.writerow([trial, rank, "" if math.isinf(value) else repr(value)])


def random_schedule_ensemble_energy(sys: LinearSystem, s: int, trials: int, seed: int,
                                    tol: float = DEFAULT_RANK_TOL) -> EnsembleSummary:
    """``trace(W_S^-1)`` statistics over ``trials`` random schedules.

    Trial i uses the seed ``(seed, i)``.  Statistics cover full-rank draws
    only; if every draw is rank deficient they are NaN and
    ``all_rank_deficient`` is set.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    records = []
    values = []
    for i in range(trials):
        sched = random_schedule(sys, s, (seed, i))
        W = gramian(sys, sched, tol=tol)
        value = trace_inverse(W.W, tol) if W.rank == sys.n else math.inf
        records.append((i, W.rank, value))
        if math.isfinite(value):
            values.append(value)
    if values:
        arr = np.array(values)
        mean, median, lo = float(arr.mean()), float(np.median(arr)), float(arr.min())
    else:
        mean = median = lo = math.nan
    return EnsembleSummary(trials, mean, median, lo, trials - len(values), records)
