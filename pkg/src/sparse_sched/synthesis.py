"""Minimum-energy sparse inputs for a given schedule, and forward simulation."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .lds_model import (
    DEFAULT_RANK_TOL,
    ActuatorSchedule,
    DimensionError,
    LinearSystem,
    controllability_matrix,
    numerical_rank,
)


class UnreachableTargetError(ValueError):
    """The schedule's Gramian is singular; carries the least-squares residual."""

    def __init__(self, residual: float, rank: int, n: int):
        super().__init__(f"target unreachable under schedule (Gramian rank {rank}/{n}, residual {residual:.3e})")
        self.residual = residual
        self.rank = rank


@dataclass
class InputSequence:
    inputs: np.ndarray  # (K, m); row k is u(k)
    schedule: ActuatorSchedule

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        if self.inputs.ndim != 2 or self.inputs.shape[0] != self.schedule.K:
            raise DimensionError(f"expected {self.schedule.K} input rows, got shape {self.inputs.shape}")
        if not np.all(np.isfinite(self.inputs)):
            raise ValueError("inputs must be finite")

    @property
    def K(self) -> int:
        return self.inputs.shape[0]

    def respects_support(self) -> bool:
        for k, step in enumerate(self.schedule.steps):
            off = np.ones(self.inputs.shape[1], dtype=bool)
            off[[j - 1 for j in step]] = False
            if np.any(self.inputs[k, off] != 0.0):
                return False
        return True

    def to_dict(self) -> dict:
        return {"inputs": self.inputs.tolist()}

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)


@dataclass
class Trajectory:
    states: np.ndarray  # (K+1, n)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def write_csv(self, path: str | Path) -> None:
        n = self.states.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k"] + [f"x_{i + 1}" for i in range(n)])
            for k, x in enumerate(self.states):
                w.writerow([k] + [repr(float(v)) for v in x])


def _vec(x, n: int, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape != (n,):
        raise DimensionError(f"{name} must have length {n}, got {x.shape[0]}")
    return x


def min_energy_inputs(sys: LinearSystem, schedule: ActuatorSchedule, x0, xf,
                      tol: float = DEFAULT_RANK_TOL) -> InputSequence:
    """Least-norm inputs on the schedule's support steering x0 to xf in K steps.

    Solves ``min ||z|| s.t. C z = d`` with ``d = xf - A^K x0`` as
    ``z = C^T W^-1 d`` using a Cholesky factorisation of ``W = C C^T``.
    """
    n, K = sys.n, schedule.K
    x0 = _vec(x0, n, "x0")
    xf = _vec(xf, n, "xf")
    C = controllability_matrix(sys, schedule)
    d = xf - sys.power(K) @ x0
    W = C @ C.T
    W = 0.5 * (W + W.T)
    rank = numerical_rank(W, tol)
    factor = None
    if rank == n:
        try:
            factor = scipy.linalg.cho_factor(W)
        except np.linalg.LinAlgError:
            factor = None
    if factor is None:
        if C.shape[1] == 0:
            residual = float(np.linalg.norm(d))
        else:
            z_ls = np.linalg.lstsq(C, d, rcond=None)[0]
            residual = float(np.linalg.norm(C @ z_ls - d))
        raise UnreachableTargetError(residual, rank, n)
    z = C.T @ scipy.linalg.cho_solve(factor, d)

    U = np.zeros((K, sys.m))
    pos = 0
    for k, step in enumerate(schedule.steps):
        for j in step:
            U[k, j - 1] = z[pos]
            pos += 1
    return InputSequence(U, schedule)


def simulate(sys: LinearSystem, inputs: InputSequence | np.ndarray, x0) -> Trajectory:
    U = inputs.inputs if isinstance(inputs, InputSequence) else np.asarray(inputs, dtype=float)
    if U.ndim != 2 or U.shape[1] != sys.m:
        raise DimensionError(f"inputs must have shape (K, {sys.m}), got {U.shape}")
    x = _vec(x0, sys.n, "x0")
    states = np.empty((U.shape[0] + 1, sys.n))
    states[0] = x
    for k, u in enumerate(U):
        x = sys.A @ x + sys.B @ u
        states[k + 1] = x
    return Trajectory(states)


def control_energy(inputs: InputSequence | np.ndarray) -> float:
    """Sum over steps of ``||u(k)||^2``."""
    U = inputs.inputs if isinstance(inputs, InputSequence) else np.asarray(inputs, dtype=float)
    return float(np.sum(U * U))
