"""Superstate MDP over windows: model container, exact construction, window-gap audit."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .belief import predictive, window_belief
from .errors import ParameterError
from .pomdp import TabularPomdp, validate
from .windows import WindowIndex

EXACT, ESTIMATED = "exact", "estimated"


@dataclass(eq=False)
class SuperstateModel:
    """Transitions and rewards over windows.

    ``probs[w, a, o]`` is the probability of moving to
    ``idx.successor[w, a, o]``; every other successor has probability 0.
    ``reachable[w]`` is False for windows excluded from planning and
    ``visited[w, a]`` is False for zero rows of an estimated model.
    """

    idx: WindowIndex
    probs: np.ndarray
    reward: np.ndarray
    reachable: np.ndarray
    kind: str = EXACT
    visited: np.ndarray | None = None
    beliefs: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        W, A, O = self.idx.size, self.idx.A, self.idx.O
        if self.probs.shape != (W, A, O):
            raise ParameterError(f"probs must have shape {(W, A, O)}, got {self.probs.shape}")
        if self.reward.shape != (W, A):
            raise ParameterError(f"reward must have shape {(W, A)}, got {self.reward.shape}")
        if self.visited is None:
            self.visited = np.repeat(self.reachable[:, None], A, axis=1)

    @property
    def n_actions(self) -> int:
        return self.idx.A

    def row(self, w: int, a: int) -> dict[int, float]:
        """Non-zero successor probabilities of ``(w, a)`` keyed by window index."""
        succ = self.idx.successor[w, a]
        return {int(s): float(p) for s, p in zip(succ, self.probs[w, a]) if p != 0.0}

    def dense_row(self, w: int, a: int) -> np.ndarray:
        out = np.zeros(self.idx.size)
        np.add.at(out, self.idx.successor[w, a], self.probs[w, a])
        return out

    def expected_next(self, values: np.ndarray) -> np.ndarray:
        """``sum_w' P(w'|w,a) values[w']`` for every ``(w, a)``."""
        return np.einsum("wao,wao->wa", self.probs, values[self.idx.successor])

    def to_csv(self, precision: int = 12) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["window", "action", "successor", "probability", "reward"])
        for w in range(self.idx.size):
            if not self.reachable[w]:
                continue
            label = self.idx.text(w)
            for a in range(self.idx.A):
                for o in range(self.idx.O):
                    p = self.probs[w, a, o]
                    if p == 0.0:
                        continue
                    writer.writerow(
                        [
                            label,
                            a,
                            self.idx.text(int(self.idx.successor[w, a, o])),
                            f"{p:.{precision}g}",
                            f"{self.reward[w, a]:.{precision}g}",
                        ]
                    )
        return buf.getvalue()


def window_beliefs(pomdp: TabularPomdp, idx: WindowIndex, prior: np.ndarray | None = None) -> np.ndarray:
    """Belief at the end of every window, folded from ``prior``; NaN rows are unreachable."""
    S = pomdp.n_states
    mu = pomdp.init_dist if prior is None else np.asarray(prior, dtype=float)
    B = np.full((idx.size, S), np.nan)
    B[0] = mu
    # trans_by_action[a] is the (S, S) matrix trans[:, a, :].
    trans_by_action = pomdp.trans.transpose(1, 0, 2)
    for n in range(1, idx.m + 1):
        ws = np.arange(idx.offsets[n], idx.offsets[n + 1])
        prev = B[idx.prefix[ws]]
        pair = idx.last_pair[ws]
        a, o = pair // idx.O, pair % idx.O
        weighted = prev * pomdp.obs[:, a, o].T
        num = np.einsum("ns,nst->nt", weighted, trans_by_action[a])
        z = num.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            B[ws] = np.where((z > 0)[:, None], num / z[:, None], np.nan)
    return B


def build_exact(pomdp: TabularPomdp, m: int, prior: np.ndarray | None = None) -> SuperstateModel:
    """Window-belief MDP: ``P(w o (a,o) | w, a) = sum_s b(s|w) obs[s, a, o]``.

    Rewards follow the POMDP's timing: the expected reward of the emitted
    observation, or the reward of the window's last observation (0 when empty).
    """
    idx = WindowIndex(pomdp.n_actions, pomdp.n_obs, m)
    B = window_beliefs(pomdp, idx, prior)
    reachable = ~np.isnan(B).any(axis=1)
    S, A, O = pomdp.n_states, pomdp.n_actions, pomdp.n_obs
    probs = np.zeros((idx.size, A, O))
    probs[reachable] = (B[reachable] @ pomdp.obs.reshape(S, A * O)).reshape(-1, A, O)
    if pomdp.reward_timing == "emitted":
        reward = np.einsum("wao,oa->wa", probs, pomdp.reward)
    else:
        reward = np.zeros((idx.size, A))
        has_obs = idx.last_obs >= 0
        reward[has_obs] = pomdp.reward[idx.last_obs[has_obs]]
        reward[~reachable] = 0.0
    for arr in (probs, reward, reachable, B):
        arr.setflags(write=False)
    return SuperstateModel(idx, probs, reward, reachable, kind=EXACT, beliefs=B)


@dataclass
class GapReport:
    gap: float
    bound: float
    passed: bool
    window: tuple
    history_length: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "gap": self.gap,
            "bound": self.bound,
            "pass": self.passed,
            "window_length": len(self.window),
            "history_length": self.history_length,
        }


def lemma1_gap(
    pomdp: TabularPomdp,
    m: int,
    h: Sequence[tuple[int, int]],
    w_len: int | None = None,
) -> GapReport:
    """Largest |P^m(w'|w,a) - P^inf(h'|h,a)| over ``(a, o)`` with ``w`` the tail of ``h``.

    The full-history probability comes from filtering all of ``h`` from mu;
    the window probability from filtering only its last ``w_len`` pairs.
    """
    h = tuple(tuple(p) for p in h)
    w_len = m if w_len is None else w_len
    if len(h) < m:
        raise ParameterError(f"history length {len(h)} < m={m}")
    if not 0 <= w_len <= m:
        raise ParameterError(f"w_len={w_len} outside [0, {m}]")
    w = h[len(h) - w_len :]
    b_hist = window_belief(pomdp, h)
    b_win = window_belief(pomdp, w)
    gap = 0.0
    for a in range(pomdp.n_actions):
        diff = np.abs(predictive(pomdp, b_win, a) - predictive(pomdp, b_hist, a))
        gap = max(gap, float(diff.max()))
    bound = (1.0 - validate(pomdp).rho) ** m
    return GapReport(gap=gap, bound=bound, passed=gap <= bound, window=w, history_length=len(h))
