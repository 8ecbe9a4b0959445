"""Single-trajectory estimation of the superstate model from window counts.

At step ``t`` the agent sits in the window of pairs strictly before ``t``
and takes ``a_t``; the transition goes to ``shift_append(w_t, a_t, o_t)``.

Two counting modes are offered:

``suffix`` (default)
    every window that is a suffix of the recent history is counted at every
    step, so a window of length ``n`` is visited at each ``t > n``. This is
    what makes short windows, and the empty one, estimable from one long
    trajectory.
``position``
    only the window of length ``min(t-1, m)`` is counted, so each step
    contributes exactly one visit and windows shorter than ``m`` are seen
    once at the very start of the trajectory.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import ParameterError
from .exact import ESTIMATED, EXACT, SuperstateModel
from .pomdp import Trajectory
from .windows import WindowIndex, trajectory_windows

MODES = ("suffix", "position")


@dataclass(eq=False)
class CountsModel:
    idx: WindowIndex
    visit: np.ndarray  # (W, A)
    trans_count: np.ndarray  # (W, A, O), successor idx.successor[w, a, o]
    reward_sum: np.ndarray  # (W, A)
    T: int
    mode: str = "suffix"

    def to_csv(self, precision: int = 12) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["window", "action", "visits", "successor", "count", "reward_mean"])
        for w, a in zip(*np.nonzero(self.visit)):
            n = int(self.visit[w, a])
            mean = f"{self.reward_sum[w, a] / n:.{precision}g}"
            label = self.idx.text(int(w))
            for o in range(self.idx.O):
                c = int(self.trans_count[w, a, o])
                if c:
                    succ = self.idx.text(int(self.idx.successor[w, a, o]))
                    writer.writerow([label, int(a), n, succ, c, mean])
        return buf.getvalue()


def _rolling_codes(codes: np.ndarray, n: int, base: int) -> np.ndarray:
    """Code of ``codes[t-n:t]`` for ``t = n..T-1``."""
    T = len(codes)
    out = np.zeros(T - n, dtype=np.int64)
    for k in range(n):
        out = out * base + codes[k : k + T - n]
    return out


def count_windows(traj: Trajectory, idx: WindowIndex, mode: str = "suffix") -> CountsModel:
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")
    actions = np.asarray(traj.actions, dtype=np.int64)
    observations = np.asarray(traj.observations, dtype=np.int64)
    rewards = np.asarray(traj.rewards, dtype=float)
    T = len(actions)
    A, O, W = idx.A, idx.O, idx.size
    if T and (actions.max() >= A or observations.max() >= O):
        raise ParameterError("trajectory alphabet does not match the window index")
    codes = actions * O + observations

    visit = np.zeros(W * A, dtype=np.int64)
    trans_count = np.zeros(W * A * O, dtype=np.int64)
    reward_sum = np.zeros(W * A)

    def accumulate(w: np.ndarray, t0: int, t1: int, with_reward: bool) -> None:
        a, o = actions[t0:t1], observations[t0:t1]
        wa = w * A + a
        visit[:] += np.bincount(wa, minlength=W * A)
        trans_count[:] += np.bincount(wa * O + o, minlength=W * A * O)
        if with_reward:
            reward_sum[:] += np.bincount(wa, weights=rewards[t0:t1], minlength=W * A)

    if mode == "suffix":
        # Under "previous" timing the empty window has no observation to pay on.
        empty_reward = traj.reward_timing == "emitted"
        for n in range(min(idx.m, T - 1) + 1):
            w = idx.offsets[n] + _rolling_codes(codes, n, idx.base)
            accumulate(w, n, T, with_reward=n > 0 or empty_reward)
    else:
        w = trajectory_windows(idx, actions, observations)[:T]
        accumulate(w, 0, T, with_reward=True)

    return CountsModel(
        idx=idx,
        visit=visit.reshape(W, A),
        trans_count=trans_count.reshape(W, A, O),
        reward_sum=reward_sum.reshape(W, A),
        T=T,
        mode=mode,
    )


def to_model(counts: CountsModel) -> SuperstateModel:
    """Empirical averages; unvisited ``(w, a)`` get a zero row and zero reward."""
    visit = counts.visit
    seen = visit > 0
    denom = np.where(seen, visit, 1).astype(float)
    probs = counts.trans_count / denom[:, :, None]
    reward = np.where(seen, counts.reward_sum / denom, 0.0)
    reachable = np.ones(counts.idx.size, dtype=bool)
    return SuperstateModel(
        counts.idx, probs, reward, reachable, kind=ESTIMATED, visited=seen
    )


@dataclass
class ErrorReport:
    p_err: float
    r_err: float
    unvisited: int
    p_err_full: float
    r_err_full: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "p_err": self.p_err,
            "r_err": self.r_err,
            "unvisited": self.unvisited,
            "p_err_full": self.p_err_full,
            "r_err_full": self.r_err_full,
        }


def estimation_error(est: SuperstateModel, exact: SuperstateModel) -> ErrorReport:
    """Sup-norm transition and reward errors over visited pairs.

    ``*_full`` restrict the maximum to windows of full length ``m``.
    """
    if est.idx != exact.idx:
        raise ParameterError(f"index mismatch: {est.idx} vs {exact.idx}")
    if exact.kind != EXACT:
        raise ParameterError("reference model must be exact")
    mask = est.visited & exact.reachable[:, None]
    full = mask & (est.idx.lengths == est.idx.m)[:, None]
    p_diff = np.abs(est.probs - exact.probs).max(axis=2)
    r_diff = np.abs(est.reward - exact.reward)

    def sup(diff: np.ndarray, sel: np.ndarray) -> float:
        return float(diff[sel].max()) if sel.any() else 0.0

    return ErrorReport(
        p_err=sup(p_diff, mask),
        r_err=sup(r_diff, mask),
        unvisited=int((~est.visited[exact.reachable]).sum()),
        p_err_full=sup(p_diff, full),
        r_err_full=sup(r_diff, full),
    )


def from_exact(exact: SuperstateModel) -> SuperstateModel:
    """Estimated-kind copy of an exact model (every reachable pair visited)."""
    return SuperstateModel(
        exact.idx,
        np.array(exact.probs),
        np.array(exact.reward),
        np.ones(exact.idx.size, dtype=bool),
        kind=ESTIMATED,
        visited=np.repeat(exact.reachable[:, None], exact.idx.A, axis=1),
    )
