"""Tabular POMDPs: representation, validation, built-in environments, sampling."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np

from .errors import ParameterError, ValidationError

if TYPE_CHECKING:
    from .windows import WindowPolicy

ROW_TOL = 1e-9

# "emitted": r_t = reward[o_t, a_t], o_t emitted by s_t under a_t.
# "previous": r_t = reward[o_{t-1}, a_t] and r_1 = 0.
REWARD_TIMINGS = ("emitted", "previous")

# Action and observation labels used by the Probe environment.
PROBE, A1, A2 = 0, 1, 2
O1, O2 = 0, 1


def _check_rows(name: str, arr: np.ndarray) -> np.ndarray:
    if np.any(~np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise ValidationError(f"{name}{list(bad)} is not finite")
    if np.any(arr < 0):
        bad = np.argwhere(arr < 0)[0]
        raise ValidationError(f"{name}{list(bad)} is negative ({arr[tuple(bad)]})")
    sums = arr.sum(axis=-1)
    dev = np.abs(sums - 1.0)
    if np.any(dev > ROW_TOL):
        bad = np.unravel_index(np.argmax(dev), dev.shape)
        raise ValidationError(
            f"{name}{[int(i) for i in bad]} sums to {sums[bad]!r}, not 1"
        )
    return arr / sums[..., None]


@dataclass(frozen=True, eq=False)
class TabularPomdp:
    """Finite POMDP with action-dependent observation kernel.

    ``trans[s, a, s']``, ``obs[s, a, o]`` and ``reward[o, a]``. Rows are
    checked on construction and renormalized to absorb rounding below
    ``ROW_TOL``. Arrays are made read-only. ``reward_timing`` selects which
    observation the reward of step ``t`` is paid on (see ``REWARD_TIMINGS``).
    """

    trans: np.ndarray
    obs: np.ndarray
    reward: np.ndarray
    init_dist: np.ndarray
    discount: float = 0.95
    name: str = field(default="pomdp", compare=False)
    reward_timing: str = "emitted"

    def __post_init__(self) -> None:
        trans = np.array(self.trans, dtype=float)
        obs = np.array(self.obs, dtype=float)
        reward = np.array(self.reward, dtype=float)
        mu = np.array(self.init_dist, dtype=float)
        if trans.ndim != 3 or trans.shape[0] != trans.shape[2]:
            raise ValidationError(f"trans must have shape (S, A, S), got {trans.shape}")
        S, A, _ = trans.shape
        if obs.ndim != 3 or obs.shape[:2] != (S, A):
            raise ValidationError(f"obs must have shape ({S}, {A}, O), got {obs.shape}")
        O = obs.shape[2]
        if reward.shape != (O, A):
            raise ValidationError(f"reward must have shape ({O}, {A}), got {reward.shape}")
        if mu.shape != (S,):
            raise ValidationError(f"init_dist must have shape ({S},), got {mu.shape}")
        if S < 1 or A < 1 or O < 1:
            raise ValidationError("state, action and observation sets must be non-empty")
        trans = _check_rows("trans", trans)
        obs = _check_rows("obs", obs)
        mu = _check_rows("init_dist", mu[None, :])[0]
        out = np.argwhere((reward < -1) | (reward > 1) | ~np.isfinite(reward))
        if len(out):
            o, a = out[0]
            raise ValidationError(f"reward[{o}, {a}] = {reward[o, a]} outside [-1, 1]")
        if self.reward_timing not in REWARD_TIMINGS:
            raise ValidationError(f"reward_timing must be one of {REWARD_TIMINGS}")
        if not 0.0 < self.discount < 1.0:
            raise ValidationError(f"discount must lie in (0, 1), got {self.discount}")
        for arr in (trans, obs, reward, mu):
            arr.setflags(write=False)
        object.__setattr__(self, "trans", trans)
        object.__setattr__(self, "obs", obs)
        object.__setattr__(self, "reward", reward)
        object.__setattr__(self, "init_dist", mu)
        object.__setattr__(self, "discount", float(self.discount))

    @property
    def n_states(self) -> int:
        return self.trans.shape[0]

    @property
    def n_actions(self) -> int:
        return self.trans.shape[1]

    @property
    def n_obs(self) -> int:
        return self.obs.shape[2]

    @property
    def state_reward(self) -> np.ndarray:
        """Expected reward of the emitted observation, indexed ``[s, a]``."""
        return np.einsum("sao,oa->sa", self.obs, self.reward)

    def with_discount(self, discount: float) -> TabularPomdp:
        return replace(self, discount=discount)

    def with_timing(self, reward_timing: str) -> TabularPomdp:
        return replace(self, reward_timing=reward_timing)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "n_obs": self.n_obs,
            "trans": self.trans.tolist(),
            "obs": self.obs.tolist(),
            "reward": self.reward.tolist(),
            "init_dist": self.init_dist.tolist(),
            "discount": self.discount,
            "reward_timing": self.reward_timing,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any], name: str = "pomdp") -> TabularPomdp:
        try:
            pomdp = cls(
                trans=data["trans"],
                obs=data["obs"],
                reward=data["reward"],
                init_dist=data["init_dist"],
                discount=data["discount"],
                name=name,
                reward_timing=data.get("reward_timing", "emitted"),
            )
        except KeyError as exc:
            raise ValidationError(f"missing field {exc.args[0]!r}") from None
        declared = (data.get("n_states"), data.get("n_actions"), data.get("n_obs"))
        actual = (pomdp.n_states, pomdp.n_actions, pomdp.n_obs)
        for label, d, a in zip(("n_states", "n_actions", "n_obs"), declared, actual):
            if d is not None and d != a:
                raise ValidationError(f"{label} = {d} does not match array shapes ({a})")
        return pomdp


@dataclass(frozen=True)
class StabilityReport:
    alpha: float
    beta: float
    rho: float
    assumption1_ok: bool
    assumption2_ok: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "rho": self.rho,
            "assumption1_ok": self.assumption1_ok,
            "assumption2_ok": self.assumption2_ok,
        }


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One rollout of ``(a_t, o_t, r_t)``; ``hidden_states`` is for diagnostics only."""

    actions: np.ndarray
    observations: np.ndarray
    rewards: np.ndarray
    seed: int | None = None
    hidden_states: np.ndarray | None = None
    reward_timing: str = "emitted"

    def __post_init__(self) -> None:
        n = len(self.actions)
        if len(self.observations) != n or len(self.rewards) != n:
            raise ValidationError("trajectory sequences must have equal length")
        if self.hidden_states is not None and len(self.hidden_states) != n:
            raise ValidationError("hidden_states length differs from trajectory length")

    @property
    def length(self) -> int:
        return len(self.actions)

    def __len__(self) -> int:
        return self.length

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        same = (
            np.array_equal(self.actions, other.actions)
            and np.array_equal(self.observations, other.observations)
            and np.array_equal(self.rewards, other.rewards)
        )
        if self.hidden_states is None or other.hidden_states is None:
            return same and self.hidden_states is other.hidden_states
        return same and np.array_equal(self.hidden_states, other.hidden_states)


def validate(pomdp: TabularPomdp) -> StabilityReport:
    """Minimum-entry scan of both kernels; ``rho = S * alpha * beta``."""
    alpha = float(pomdp.trans.min())
    beta = float(pomdp.obs.min())
    return StabilityReport(
        alpha=alpha,
        beta=beta,
        rho=pomdp.n_states * alpha * beta,
        assumption1_ok=alpha > 0,
        assumption2_ok=beta > 0,
    )


def probe_env(discount: float = 0.95, reward_timing: str = "emitted") -> TabularPomdp:
    """Two hidden states, a probing action and two betting actions.

    Probing reveals the state w.p. 0.95 and otherwise emits a uniform
    observation; the betting actions do the converse. The state flips
    w.p. 0.05 regardless of the action.
    """
    S, A, O = 2, 3, 2
    trans = np.full((S, A, S), 0.05)
    for s in range(S):
        trans[s, :, s] = 0.95
    obs = np.empty((S, A, O))
    for s in range(S):
        for a, reveal in ((PROBE, 0.95), (A1, 0.05), (A2, 0.05)):
            obs[s, a, :] = (1 - reveal) / O
            obs[s, a, s] += reveal
    reward = np.zeros((O, A))
    reward[O1, A1] = reward[O2, A2] = 1.0
    reward[O1, A2] = reward[O2, A1] = -1.0
    return TabularPomdp(
        trans, obs, reward, np.full(S, 1.0 / S), discount, "probe", reward_timing
    )


BUILTINS = {"probe": probe_env}


def _floored_rows(rng: np.random.Generator, shape: tuple[int, ...], floor: float) -> np.ndarray:
    n = shape[-1]
    raw = rng.dirichlet(np.ones(n), size=shape[:-1])
    # Mixing weight lam on the random row keeps every entry >= floor.
    lam = 1.0 - n * floor
    return lam * raw + (1.0 - lam) / n


def random_pomdp(
    S: int,
    A: int,
    O: int,
    alpha_floor: float,
    beta_floor: float,
    seed: int,
    discount: float = 0.95,
    reward_timing: str = "emitted",
) -> TabularPomdp:
    """Random instance with every trans entry >= alpha_floor and obs entry >= beta_floor."""
    if min(S, A, O) < 1:
        raise ParameterError("S, A and O must be positive")
    if alpha_floor < 0 or S * alpha_floor > 1 + 1e-12:
        raise ParameterError(f"alpha_floor={alpha_floor} infeasible for S={S}")
    if beta_floor < 0 or O * beta_floor > 1 + 1e-12:
        raise ParameterError(f"beta_floor={beta_floor} infeasible for O={O}")
    rng = np.random.default_rng(seed)
    trans = _floored_rows(rng, (S, A, S), alpha_floor)
    obs = _floored_rows(rng, (S, A, O), beta_floor)
    reward = rng.uniform(-1.0, 1.0, size=(O, A))
    mu = rng.dirichlet(np.ones(S))
    return TabularPomdp(trans, obs, reward, mu, discount, f"random-{seed}", reward_timing)


def load_pomdp(source: str | Path, discount: float | None = None) -> TabularPomdp:
    """Built-in name (``probe``) or path to a JSON interchange file."""
    if str(source) in BUILTINS:
        pomdp = BUILTINS[str(source)]()
    else:
        path = Path(source)
        with path.open(encoding="utf-8") as fh:
            pomdp = TabularPomdp.from_dict(json.load(fh), name=path.stem)
    if discount is not None:
        pomdp = pomdp.with_discount(discount)
    validate(pomdp)
    return pomdp


def save_pomdp(pomdp: TabularPomdp, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(pomdp.to_dict(), fh, indent=2)
        fh.write("\n")


def make_rng(*key: int) -> np.random.Generator:
    """Counter-based generator for a seed tuple such as (master, m, T, run)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(key))))


def sample_trajectory(
    pomdp: TabularPomdp,
    policy: WindowPolicy | str | None,
    T: int,
    seed: int | np.random.Generator,
    m: int | None = None,
) -> Trajectory:
    """Roll out ``T`` steps from ``s_1 ~ mu``.

    ``policy`` is ``None``/``"uniform"`` for uniformly random actions or a
    ``WindowPolicy`` reading the last ``policy.m`` action-observation pairs.
    ``m`` caps the window length a policy may use.
    """
    if T < 1:
        raise ParameterError(f"T must be >= 1, got {T}")
    uniform = policy is None or (isinstance(policy, str) and policy == "uniform")
    if isinstance(policy, str) and not uniform:
        raise ParameterError(f"unknown policy {policy!r}")
    if not uniform:
        idx = policy.index
        if (idx.A, idx.O) != (pomdp.n_actions, pomdp.n_obs):
            raise ParameterError("policy alphabet does not match the POMDP")
        if m is not None and idx.m > m:
            raise ParameterError(f"policy window length {idx.m} exceeds m={m}")

    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    S, A, O = pomdp.n_states, pomdp.n_actions, pomdp.n_obs
    s = int(np.searchsorted(np.cumsum(pomdp.init_dist), rng.random(), side="right"))
    s = min(s, S - 1)
    rand_actions = rng.integers(0, A, size=T)
    u_obs = rng.random(T)
    u_trans = rng.random(T)

    trans_cdf = np.cumsum(pomdp.trans, axis=-1)
    trans_cdf[..., -1] = 1.0
    obs_cdf = np.cumsum(pomdp.obs, axis=-1)
    obs_cdf[..., -1] = 1.0

    if uniform:
        actions = rand_actions
        states = np.empty(T, dtype=np.int64)
        cdf = trans_cdf.tolist()
        a_list = actions.tolist()
        u_list = u_trans.tolist()
        for t in range(T):
            states[t] = s
            row = cdf[s][a_list[t]]
            u = u_list[t]
            nxt = 0
            while row[nxt] <= u:
                nxt += 1
            s = nxt
        # Given the state path, observations are conditionally independent.
        cum = obs_cdf[states, actions]
        observations = (cum <= u_obs[:, None]).sum(axis=1).astype(np.int64)
        np.minimum(observations, O - 1, out=observations)
    else:
        idx = policy.index
        table = policy.actions
        actions = np.empty(T, dtype=np.int64)
        observations = np.empty(T, dtype=np.int64)
        states = np.empty(T, dtype=np.int64)
        w = 0
        for t in range(T):
            a = int(table[w])
            o = min(int(np.searchsorted(obs_cdf[s, a], u_obs[t], side="right")), O - 1)
            states[t], actions[t], observations[t] = s, a, o
            w = idx.successor[w, a, o]
            s = min(int(np.searchsorted(trans_cdf[s, a], u_trans[t], side="right")), S - 1)

    if pomdp.reward_timing == "emitted":
        rewards = pomdp.reward[observations, actions]
    else:
        rewards = np.zeros(T)
        rewards[1:] = pomdp.reward[observations[:-1], actions[1:]]
    return Trajectory(
        actions=actions,
        observations=observations,
        rewards=rewards,
        seed=seed if isinstance(seed, int) else None,
        hidden_states=states,
        reward_timing=pomdp.reward_timing,
    )
