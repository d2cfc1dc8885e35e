"""Random network systems and the sparsity/energy experiments.

Randomness: every trial draws from ``numpy.random.SeedSequence([seed, trial,
stream])``, where ``stream`` separates the graph, the input matrix and the
random baselines.  Results therefore do not depend on evaluation order or on
the number of worker threads.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .baselines import greedy_trace_max_schedule, random_schedule
from .greedy import GreedyConfig, greedy_schedule, greedy_schedule_time_invariant
from .lds_model import DEFAULT_RANK_TOL, ActuatorSchedule, LinearSystem, gramian, trace_inverse

STREAM_GRAPH = 0
STREAM_INPUT = 1
STREAM_BASELINE = 2

B_MODES = ("identity", "uniform01", "gaussian")
SCHEDULER_MODES = ("time-varying", "time-invariant", "random", "trace-max", "unconstrained")

CDF_COLUMNS = ["trial", "s", "mode", "value_dB", "rank_ok"]
RATIO_COLUMNS = ["n", "s", "s_over_m", "rho", "rank_failures"]
BASELINE_COLUMNS = ["s", "method", "mean_trace_inv", "rank_failure_fraction"]


def trial_rng(seed: int, trial: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, trial, stream]))


def erdos_renyi_transfer_matrix(n: int, rng, log_base: float = math.e) -> np.ndarray:
    """``A = I - L/n`` for an Erdős–Rényi graph with ``p = 2 log(n) / n``."""
    if n < 2:
        raise ValueError("need at least two vertices")
    rng = np.random.default_rng(rng)
    p = min(1.0, 2.0 * math.log(n, log_base) / n)
    upper = np.triu(rng.random((n, n)) < p, k=1)
    adj = (upper | upper.T).astype(float)
    L = np.diag(adj.sum(axis=1)) - adj
    return np.eye(n) - L / n


def erdos_renyi_system(n: int, seed, B: np.ndarray | None = None, log_base: float = math.e) -> LinearSystem:
    """Network system on a random graph; ``B`` defaults to the identity."""
    A = erdos_renyi_transfer_matrix(n, seed, log_base)
    return LinearSystem(A, np.eye(n) if B is None else B)


def random_input_matrix(n: int, m: int, mode: str, seed) -> np.ndarray:
    if mode == "identity":
        if n != m:
            raise ValueError(f"identity input matrix needs n == m, got n={n}, m={m}")
        return np.eye(n)
    rng = np.random.default_rng(seed)
    if mode == "uniform01":
        return rng.random((n, m))
    if mode == "gaussian":
        return rng.standard_normal((n, m))
    raise ValueError(f"unknown input matrix mode {mode!r}")


@dataclass
class ExperimentConfig:
    n: int = 20
    m: int = 20
    sparsity_levels: list[int] = field(default_factory=lambda: [5, 10, 15])
    trials: int = 500
    seed: int = 0
    b_mode: str = "identity"
    scheduler_modes: list[str] = field(default_factory=lambda: ["time-varying", "time-invariant", "unconstrained"])
    output_path: str | None = None
    n_values: list[int] | None = None  # state dimensions swept by the ratio experiment
    random_draws: int = 10  # random schedules per system in the baseline comparison
    epsilon0: float = 1e-6
    c: float = 10.0
    max_outer: int = 10
    rank_tol: float = DEFAULT_RANK_TOL
    log_base: float = math.e

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.b_mode not in B_MODES:
            raise ValueError(f"b_mode must be one of {B_MODES}")
        for mode in self.scheduler_modes:
            if mode not in SCHEDULER_MODES:
                raise ValueError(f"unknown scheduler mode {mode!r}")
        for s in self.sparsity_levels:
            if not 1 <= s <= self.m:
                raise ValueError(f"sparsity level {s} outside [1, {self.m}]")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)

    def greedy_config(self, s: int, mode: str = "time-varying") -> GreedyConfig:
        return GreedyConfig(s=s, epsilon0=self.epsilon0, c=self.c, max_outer=self.max_outer,
                            rank_tol=self.rank_tol, mode=mode)


def draw_system(cfg: ExperimentConfig, trial: int, n: int | None = None) -> LinearSystem:
    n = cfg.n if n is None else n
    A = erdos_renyi_transfer_matrix(n, trial_rng(cfg.seed, trial, STREAM_GRAPH), cfg.log_base)
    B = random_input_matrix(n, cfg.m, cfg.b_mode, trial_rng(cfg.seed, trial, STREAM_INPUT))
    return LinearSystem(A, B)


def make_schedule(sys: LinearSystem, s: int, mode: str, cfg: ExperimentConfig,
                  rng_seed=None) -> ActuatorSchedule:
    if mode == "unconstrained":
        return ActuatorSchedule.full(sys.n, sys.m)
    if mode in ("time-varying", "time-invariant"):
        gcfg = cfg.greedy_config(s, mode)
        runner = greedy_schedule if mode == "time-varying" else greedy_schedule_time_invariant
        schedule, _ = runner(sys, gcfg, strict=False)
        return schedule
    if mode == "random":
        return random_schedule(sys, s, rng_seed)
    if mode == "trace-max":
        return greedy_trace_max_schedule(sys, s)
    raise ValueError(f"unknown scheduler mode {mode!r}")


def measure(sys: LinearSystem, schedule: ActuatorSchedule, s: int | None, tol: float) -> float:
    """``trace(W_S^-1)`` after re-checking the schedule; ``inf`` if singular."""
    schedule.validate(sys.m, s)
    return trace_inverse(gramian(sys, schedule, tol=tol).W, tol)


def _threads() -> int:
    try:
        k = int(os.environ.get("SPARSE_SCHED_THREADS", "0"))
    except ValueError:
        k = 0
    return k if k > 0 else min(8, os.cpu_count() or 1)


def parallel_map(fn: Callable, items: Sequence) -> list:
    """Order-preserving map over independent trials."""
    workers = _threads()
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else ("inf" if x > 0 else "nan" if math.isnan(x) else "-inf")
    return str(x)


def write_csv(rows: Iterable[dict], columns: Sequence[str], path: str | Path | None = None) -> str:
    """Render rows to CSV text (LF endings, fixed column order); also write it to ``path``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow(["" if row[c] is None else _fmt(row[c]) for c in columns])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def run_cdf_experiment(cfg: ExperimentConfig) -> list[dict]:
    """``10 log10 trace(W_S^-1)`` per trial, sparsity level and scheduler.

    The unconstrained reference is computed once per trial and repeated under
    every sparsity level, so each (trial, s) group is self-contained.
    """
    def one_trial(trial: int) -> list[dict]:
        sys = draw_system(cfg, trial)
        cache: dict = {}
        rows = []
        for s in cfg.sparsity_levels:
            for mode in cfg.scheduler_modes:
                key = ("unconstrained",) if mode == "unconstrained" else (mode, s)
                if key not in cache:
                    seed = np.random.SeedSequence([cfg.seed, trial, STREAM_BASELINE, s])
                    sched = make_schedule(sys, s, mode, cfg, seed)
                    cache[key] = measure(sys, sched, None if mode == "unconstrained" else s, cfg.rank_tol)
                value = cache[key]
                ok = math.isfinite(value)
                rows.append({"trial": trial, "s": s, "mode": mode,
                             "value_dB": 10.0 * math.log10(value) if ok else None, "rank_ok": ok})
        return rows

    out = []
    for rows in parallel_map(one_trial, range(cfg.trials)):
        out.extend(rows)
    return out


def run_energy_ratio_experiment(cfg: ExperimentConfig) -> list[dict]:
    """``rho = mean trace(W_S^-1) / mean trace(W^-1)`` against the fully actuated W.

    Means run over trials where both Gramians are invertible; the number of
    excluded trials is reported as ``rank_failures``.
    """
    n_values = cfg.n_values or [cfg.n]
    rows = []
    for n in n_values:
        def one_trial(trial: int) -> list[tuple[float, float]]:
            sys = draw_system(cfg, trial, n)
            full = measure(sys, ActuatorSchedule.full(n, cfg.m), None, cfg.rank_tol)
            return [(measure(sys, make_schedule(sys, s, "time-varying", cfg), s, cfg.rank_tol), full)
                    for s in cfg.sparsity_levels]

        results = parallel_map(one_trial, range(cfg.trials))
        for i, s in enumerate(cfg.sparsity_levels):
            pairs = [r[i] for r in results]
            good = [(a, b) for a, b in pairs if math.isfinite(a) and math.isfinite(b)]
            if good:
                num = float(np.mean([a for a, _ in good]))
                den = float(np.mean([b for _, b in good]))
                rho = num / den
            else:
                rho = math.nan
            rows.append({"n": n, "s": s, "s_over_m": s / cfg.m, "rho": rho,
                         "rank_failures": len(pairs) - len(good)})
    return rows


def run_baseline_comparison(cfg: ExperimentConfig) -> list[dict]:
    """Greedy against uniform-random and trace-max schedules across sparsity.

    The random method pools ``cfg.random_draws`` schedules per system.  Means
    cover full-rank outcomes; the failure fraction counts the rest.
    """
    methods = ["greedy", "random", "trace-max"]
    if "time-invariant" in cfg.scheduler_modes:
        methods.append("time-invariant")

    def one_trial(trial: int) -> dict:
        sys = draw_system(cfg, trial)
        values: dict = {}
        for s in cfg.sparsity_levels:
            values[(s, "greedy")] = [measure(sys, make_schedule(sys, s, "time-varying", cfg), s, cfg.rank_tol)]
            values[(s, "random")] = [
                measure(sys, random_schedule(sys, s, np.random.SeedSequence([cfg.seed, trial, STREAM_BASELINE, s, d])),
                        s, cfg.rank_tol)
                for d in range(cfg.random_draws)
            ]
            values[(s, "trace-max")] = [measure(sys, greedy_trace_max_schedule(sys, s), s, cfg.rank_tol)]
            if "time-invariant" in methods:
                values[(s, "time-invariant")] = [
                    measure(sys, make_schedule(sys, s, "time-invariant", cfg), s, cfg.rank_tol)]
        return values

    per_trial = parallel_map(one_trial, range(cfg.trials))
    rows = []
    for s in cfg.sparsity_levels:
        for method in methods:
            vals = [v for t in per_trial for v in t[(s, method)]]
            finite = [v for v in vals if math.isfinite(v)]
            rows.append({
                "s": s,
                "method": method,
                "mean_trace_inv": float(np.mean(finite)) if finite else math.nan,
                "rank_failure_fraction": (len(vals) - len(finite)) / len(vals),
            })
    return rows


EXPERIMENTS = {
    "cdf": (run_cdf_experiment, CDF_COLUMNS),
    "ratio": (run_energy_ratio_experiment, RATIO_COLUMNS),
    "baselines": (run_baseline_comparison, BASELINE_COLUMNS),
}
