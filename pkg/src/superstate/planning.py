"""Value iteration on superstate models, greedy extraction, policy evaluation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, NumericError, ParameterError
from .exact import SuperstateModel
from .pomdp import TabularPomdp, make_rng
from .windows import WindowIndex, WindowPolicy

EVAL_RESIDUAL = 1e-12
MAX_EVAL_ITERS = 200_000
MAX_PRODUCT_STATES = 20_000_000


@dataclass(eq=False)
class QTable:
    idx: WindowIndex
    values: np.ndarray  # (W, A)
    k: int = 0
    residuals: list[float] = field(default_factory=list)

    @classmethod
    def zeros(cls, idx: WindowIndex) -> QTable:
        return cls(idx, np.zeros((idx.size, idx.A)))

    def to_csv(self, precision: int = 12) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["window", "action", "q_value"])
        for w in range(self.idx.size):
            label = self.idx.text(w)
            for a in range(self.idx.A):
                writer.writerow([label, a, f"{self.values[w, a]:.{precision}g}"])
        return buf.getvalue()


def policy_to_csv(pi: WindowPolicy) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["window", "chosen_action"])
    for w in range(pi.index.size):
        writer.writerow([pi.index.text(w), int(pi.actions[w])])
    return buf.getvalue()


def _check_gamma(gamma: float, allow_zero: bool = False) -> None:
    lo_ok = gamma >= 0 if allow_zero else gamma > 0
    if not (lo_ok and gamma < 1):
        raise ParameterError(f"gamma must lie in {'[0' if allow_zero else '(0'}, 1), got {gamma}")


def bellman_backup(model: SuperstateModel, q: np.ndarray, gamma: float) -> np.ndarray:
    """One synchronous optimality backup; unreachable windows stay at zero."""
    v = q.max(axis=1)
    out = model.reward + gamma * model.expected_next(v)
    out[~model.reachable] = 0.0
    return out


def value_iteration(
    model: SuperstateModel,
    gamma: float,
    K: int,
    q0: QTable | None = None,
    check_contraction: bool = False,
) -> QTable:
    """``K`` backups from ``q0`` (zeros by default).

    With ``check_contraction`` every step asserts
    ``||Q_{k+1} - Q_k|| <= gamma * ||Q_k - Q_{k-1}||`` up to 1e-12.
    """
    _check_gamma(gamma)
    if K < 0:
        raise ParameterError(f"K must be >= 0, got {K}")
    q0 = QTable.zeros(model.idx) if q0 is None else q0
    if q0.values.shape != (model.idx.size, model.idx.A):
        raise ParameterError(f"q0 has shape {q0.values.shape}, model needs {(model.idx.size, model.idx.A)}")
    q = np.array(q0.values, dtype=float)
    residuals: list[float] = []
    for _ in range(K):
        nxt = bellman_backup(model, q, gamma)
        res = float(np.abs(nxt - q).max())
        if check_contraction and residuals and res > gamma * residuals[-1] + 1e-12:
            raise NumericError(
                f"backup {len(residuals) + 1} residual {res} exceeds gamma * {residuals[-1]}"
            )
        residuals.append(res)
        q = nxt
    return QTable(model.idx, q, q0.k + K, residuals)


def value_iteration_to_tolerance(
    model: SuperstateModel, gamma: float, residual: float, max_iter: int = 1_000_000
) -> QTable:
    _check_gamma(gamma)
    q = np.zeros((model.idx.size, model.idx.A))
    residuals = []
    for k in range(1, max_iter + 1):
        nxt = bellman_backup(model, q, gamma)
        res = float(np.abs(nxt - q).max())
        residuals.append(res)
        q = nxt
        if res <= residual:
            return QTable(model.idx, q, k, residuals)
    raise NumericError(f"value iteration did not reach residual {residual} in {max_iter} steps")


def greedy(q: QTable) -> WindowPolicy:
    """Per-window argmax; ties go to the lowest action index."""
    return WindowPolicy(q.idx, np.argmax(q.values, axis=1))


def _fixed_point(step, v0: np.ndarray, what: str) -> np.ndarray:
    v = v0
    for _ in range(MAX_EVAL_ITERS):
        nxt = step(v)
        if np.abs(nxt - v).max() <= EVAL_RESIDUAL:
            return nxt
        v = nxt
    raise NumericError(f"{what} did not converge to residual {EVAL_RESIDUAL}")


def superstate_values(model: SuperstateModel, pi: WindowPolicy, gamma: float) -> np.ndarray:
    """Value of ``pi`` at every window under ``model`` (zero at unreachable windows)."""
    _check_gamma(gamma, allow_zero=True)
    if pi.index != model.idx:
        raise ParameterError("policy and model use different window indices")
    rows = np.arange(model.idx.size)
    a = pi.actions
    r = np.where(model.reachable, model.reward[rows, a], 0.0)
    p = np.where(model.reachable[:, None], model.probs[rows, a], 0.0)
    succ = model.idx.successor[rows, a]
    if gamma == 0:
        return r
    return _fixed_point(
        lambda v: r + gamma * np.einsum("wo,wo->w", p, v[succ]),
        np.zeros(model.idx.size),
        "superstate policy evaluation",
    )


def superstate_policy_value(model: SuperstateModel, pi: WindowPolicy, gamma: float) -> float:
    """Discounted value of ``pi`` started from the empty window."""
    return float(superstate_values(model, pi, gamma)[0])


def pomdp_state_values(pomdp: TabularPomdp, pi: WindowPolicy, gamma: float) -> np.ndarray:
    """Values ``V[s, w]`` of the (hidden state, window) chain induced by ``pi``.

    At ``(s, w)`` the agent plays ``a = pi(w)``; ``o ~ obs[s, a]`` and
    ``s' ~ trans[s, a]`` independently and ``w' = shift_append(w, a, o)``.
    The reward is ``reward[o, a]`` in expectation, or ``reward[last obs of
    w, a]`` (0 for the empty window) under "previous" timing.
    """
    _check_gamma(gamma, allow_zero=True)
    idx = pi.index
    if (idx.A, idx.O) != (pomdp.n_actions, pomdp.n_obs):
        raise ParameterError("policy alphabet does not match the POMDP")
    S, W = pomdp.n_states, idx.size
    if S * W > MAX_PRODUCT_STATES:
        raise CapacityError(f"product chain needs {S * W} states (limit {MAX_PRODUCT_STATES})")
    rows = np.arange(W)
    a = pi.actions
    if pomdp.reward_timing == "emitted":
        r = pomdp.state_reward[:, a]
    else:
        r = np.where(idx.last_obs >= 0, pomdp.reward[np.maximum(idx.last_obs, 0), a], 0.0)
        r = np.broadcast_to(r, (S, W))
    succ = idx.successor[rows, a]  # (W, O)
    obs_p = pomdp.obs[:, a, :]  # (S, W, O)
    trans_p = pomdp.trans[:, a, :]  # (S, W, S')
    if gamma == 0:
        return r.copy()

    def step(v: np.ndarray) -> np.ndarray:
        # nxt[s, w, o] = sum_s' trans[s, a_w, s'] * v[s', succ[w, o]]
        nxt = np.einsum("swt,two->swo", trans_p, v[:, succ])
        return r + gamma * np.einsum("swo,swo->sw", obs_p, nxt)

    return _fixed_point(step, np.zeros((S, W)), "POMDP policy evaluation")


def pomdp_policy_value(pomdp: TabularPomdp, pi: WindowPolicy, gamma: float) -> float:
    v = pomdp_state_values(pomdp, pi, gamma)
    return float(pomdp.init_dist @ v[:, 0])


def optimal_superstate_value(
    model: SuperstateModel, gamma: float, tol: float = 1e-10
) -> tuple[float, WindowPolicy]:
    """Value within ``tol`` of the best window policy, and that greedy policy."""
    if not tol > 0:
        raise ParameterError("tol must be positive")
    q = value_iteration_to_tolerance(model, gamma, tol * (1 - gamma) / (2 * gamma))
    pi = greedy(q)
    return superstate_policy_value(model, pi, gamma), pi


def mc_horizon(gamma: float, rel: float = 1e-4) -> int:
    return math.ceil(math.log(rel * (1 - gamma)) / math.log(gamma))


def mc_pomdp_value(
    pomdp: TabularPomdp,
    pi: WindowPolicy,
    gamma: float,
    episodes: int,
    seed: int,
    horizon: int | None = None,
) -> tuple[float, float]:
    """Truncated Monte-Carlo estimate of the POMDP value: ``(mean, standard error)``."""
    horizon = mc_horizon(gamma) if horizon is None else horizon
    rng = make_rng(seed)
    idx = pi.index
    S, O = pomdp.n_states, pomdp.n_obs
    mu_cdf = np.cumsum(pomdp.init_dist)
    trans_cdf = np.cumsum(pomdp.trans, axis=-1)
    obs_cdf = np.cumsum(pomdp.obs, axis=-1)
    s = np.minimum((mu_cdf[None, :] <= rng.random(episodes)[:, None]).sum(axis=1), S - 1)
    w = np.zeros(episodes, dtype=np.int64)
    total = np.zeros(episodes)
    disc = 1.0
    emitted = pomdp.reward_timing == "emitted"
    for _ in range(horizon):
        a = pi.actions[w]
        o = np.minimum((obs_cdf[s, a] <= rng.random(episodes)[:, None]).sum(axis=1), O - 1)
        if emitted:
            total += disc * pomdp.reward[o, a]
        else:
            lo = idx.last_obs[w]
            total += disc * np.where(lo >= 0, pomdp.reward[np.maximum(lo, 0), a], 0.0)
        s = np.minimum((trans_cdf[s, a] <= rng.random(episodes)[:, None]).sum(axis=1), S - 1)
        w = idx.successor[w, a, o]
        disc *= gamma
    return float(total.mean()), float(total.std(ddof=1) / math.sqrt(episodes))


def mc_superstate_value(
    model: SuperstateModel,
    pi: WindowPolicy,
    gamma: float,
    episodes: int,
    seed: int,
    horizon: int | None = None,
) -> tuple[float, float]:
    """Monte-Carlo rollouts on the superstate chain itself."""
    horizon = mc_horizon(gamma) if horizon is None else horizon
    rng = make_rng(seed)
    idx = model.idx
    cdf = np.cumsum(model.probs, axis=-1)
    w = np.zeros(episodes, dtype=np.int64)
    total = np.zeros(episodes)
    disc = 1.0
    for _ in range(horizon):
        a = pi.actions[w]
        total += disc * model.reward[w, a]
        o = np.minimum((cdf[w, a] <= rng.random(episodes)[:, None]).sum(axis=1), idx.O - 1)
        w = idx.successor[w, a, o]
        disc *= gamma
    return float(total.mean()), float(total.std(ddof=1) / math.sqrt(episodes))
