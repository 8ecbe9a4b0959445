"""Learning runs end to end (sample, estimate, plan, score) and the sweep over (m, T, run)."""

from __future__ import annotations

import csv
import io
import logging
import os
import time
import weakref
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import ParameterError
from .estimation import count_windows, estimation_error, to_model
from .exact import SuperstateModel, build_exact
from .planning import (
    greedy,
    optimal_superstate_value,
    pomdp_policy_value,
    superstate_policy_value,
    value_iteration,
)
from .pomdp import TabularPomdp, load_pomdp, make_rng, sample_trajectory, validate

log = logging.getLogger(__name__)

DEFAULT_T_GRID = (1_000, 3_000, 10_000, 30_000, 100_000, 300_000, 1_000_000)
DEFAULT_M = (1, 2, 3, 4, 5)

CSV_COLUMNS = (
    "m",
    "T",
    "run",
    "seed",
    "v_m_policy",
    "v_pomdp_policy",
    "v_m_star",
    "p_err",
    "r_err",
    "unvisited",
)


def fmt(x: Any) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


def cell_seed(master_seed: int, m: int, T: int, run: int) -> int:
    """Independent 32-bit seed for one sweep cell."""
    ss = np.random.SeedSequence([master_seed, m, T, run])
    return int(ss.generate_state(1, np.uint32)[0])


@dataclass
class ExperimentConfig:
    pomdp: str = "probe"
    m_list: Sequence[int] = DEFAULT_M
    T_list: Sequence[int] = DEFAULT_T_GRID
    K: int = 50
    gamma: float = 0.95
    runs: int = 10
    master_seed: int = 0
    eps: float = 0.1
    delta: float = 0.05
    out: str | None = None
    workers: int = 1
    mode: str = "suffix"
    svg: bool = True
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.m_list or not self.T_list:
            raise ParameterError("m and T lists must be non-empty")
        if self.K < 1:
            raise ParameterError("K must be >= 1")
        if self.runs < 1:
            raise ParameterError("runs must be >= 1")
        if any(m < 1 for m in self.m_list) or any(T < 1 for T in self.T_list):
            raise ParameterError("m and T values must be positive")

    def load(self) -> TabularPomdp:
        return load_pomdp(self.pomdp, discount=self.gamma)


_EXACT_CACHE: "weakref.WeakKeyDictionary[TabularPomdp, dict]" = weakref.WeakKeyDictionary()


def exact_and_optimum(pomdp: TabularPomdp, m: int) -> tuple[SuperstateModel, float]:
    """Exact model and ``V^m_*`` for ``pomdp`` (memoised per POMDP object)."""
    per_m = _EXACT_CACHE.setdefault(pomdp, {})
    if m not in per_m:
        exact = build_exact(pomdp, m)
        v_star, _ = optimal_superstate_value(exact, pomdp.discount)
        per_m[m] = (exact, v_star)
    return per_m[m]


def run_algorithm1(
    pomdp: TabularPomdp,
    m: int,
    T: int,
    K: int,
    gamma: float,
    seed: int,
    mode: str = "suffix",
) -> dict[str, Any]:
    """Sample, estimate, plan, and score the learned window policy.

    ``v_m_policy`` is the learned policy's value on the exact superstate
    model, ``v_pomdp_policy`` its value in the POMDP itself.
    """
    if not np.isclose(gamma, pomdp.discount):
        pomdp = pomdp.with_discount(gamma)
    start = time.perf_counter()
    traj = sample_trajectory(pomdp, None, T, seed)
    counts = count_windows(traj, _index_for(pomdp, m), mode=mode)
    est = to_model(counts)
    q = value_iteration(est, gamma, K)
    pi = greedy(q)
    exact, v_star = exact_and_optimum(pomdp, m)
    err = estimation_error(est, exact)
    return {
        "m": m,
        "T": T,
        "seed": seed,
        "v_m_policy": superstate_policy_value(exact, pi, gamma),
        "v_pomdp_policy": pomdp_policy_value(pomdp, pi, gamma),
        "v_m_star": v_star,
        "p_err": err.p_err,
        "r_err": err.r_err,
        "unvisited": err.unvisited,
        "p_err_full": err.p_err_full,
        "r_err_full": err.r_err_full,
        "policy": pi,
        "wall_time": time.perf_counter() - start,
    }


def _index_for(pomdp: TabularPomdp, m: int):
    exact, _ = exact_and_optimum(pomdp, m)
    return exact.idx


def _run_cell(args: tuple) -> dict[str, Any]:
    pomdp, m, T, run, K, gamma, seed, mode = args
    rec = run_algorithm1(pomdp, m, T, K, gamma, seed, mode=mode)
    rec["run"] = run
    rec.pop("policy")
    return rec


def sweep_records(config: ExperimentConfig, pomdp: TabularPomdp | None = None) -> list[dict[str, Any]]:
    pomdp = config.load() if pomdp is None else pomdp
    validate(pomdp)
    cells = [
        (pomdp, m, T, run, config.K, config.gamma, cell_seed(config.master_seed, m, T, run), config.mode)
        for m in config.m_list
        for T in config.T_list
        for run in range(config.runs)
    ]
    workers = config.workers if config.workers > 0 else (os.cpu_count() or 1)
    if workers == 1:
        records = [_run_cell(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_cell, cells, chunksize=1))
    records.sort(key=lambda r: (r["m"], r["T"], r["run"]))
    return records


def records_to_csv(records: Sequence[dict[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow([fmt(rec[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def read_results_csv(text: str) -> list[dict[str, Any]]:
    ints = {"m", "T", "run", "seed", "unvisited"}
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        rows.append({k: int(v) if k in ints else float(v) for k, v in row.items()})
    return rows


def summarize(records: Sequence[dict[str, Any]]) -> dict[int, dict[str, Any]]:
    """Per-m mean/std of the learned value and of the optimality gap for each T."""
    out: dict[int, dict[str, Any]] = {}
    for m in sorted({r["m"] for r in records}):
        rows = [r for r in records if r["m"] == m]
        Ts = sorted({r["T"] for r in rows})
        entry: dict[str, Any] = {"v_m_star": rows[0]["v_m_star"], "T": Ts, "mean": [], "std": [], "gap": []}
        for T in Ts:
            vals = np.array([r["v_m_policy"] for r in rows if r["T"] == T])
            entry["mean"].append(float(vals.mean()))
            entry["std"].append(float(vals.std()))
            entry["gap"].append(float(np.mean(rows[0]["v_m_star"] - vals)))
        out[m] = entry
    return out


def _check_writable(out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write-test"
    try:
        probe.write_text("")
    finally:
        if probe.exists():
            probe.unlink()


def figure1_sweep(config: ExperimentConfig, pomdp: TabularPomdp | None = None) -> Path:
    """Run every ``(m, T, run)`` cell and write ``results.csv`` (and ``figure1.svg``)."""
    if config.out is None:
        raise ParameterError("an output directory is required")
    out = Path(config.out)
    _check_writable(out)
    records = sweep_records(config, pomdp)
    path = out / "results.csv"
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(records_to_csv(records))
    if config.svg:
        from .svg import learning_curve_svg

        (out / "figure1.svg").write_text(learning_curve_svg(summarize(records)), encoding="utf-8")
    log.info("wrote %d rows to %s", len(records), path)
    return path
