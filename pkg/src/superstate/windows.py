"""Dense enumeration of action-observation windows of length <= m.

A window is a tuple of ``(action, observation)`` pairs, oldest first. Pair
``(a, o)`` has code ``a * O + o``; a window of length ``n`` is stored at
``offset[n] + sum(code_i * (A*O)**(n-1-i))``, so indices run by length and
then lexicographically, with the empty window at 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import CapacityError, ParameterError

Window = tuple[tuple[int, int], ...]

MAX_WINDOWS = 50_000_000
EMPTY_TEXT = "∅"


class WindowIndex:
    def __init__(self, A: int, O: int, m: int):
        if A < 1 or O < 1 or m < 1:
            raise ParameterError(f"need A, O, m >= 1, got A={A}, O={O}, m={m}")
        base = A * O
        offsets = [0]
        for n in range(m + 1):
            offsets.append(offsets[-1] + base**n)
        size = offsets[-1]
        if size > MAX_WINDOWS:
            raise CapacityError(f"{size} windows required for A={A}, O={O}, m={m}")
        self.A, self.O, self.m = A, O, m
        self.base = base
        self.size = size
        self.offsets = np.array(offsets, dtype=np.int64)

    def __repr__(self) -> str:
        return f"WindowIndex(A={self.A}, O={self.O}, m={self.m}, size={self.size})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WindowIndex):
            return NotImplemented
        return (self.A, self.O, self.m) == (other.A, other.O, other.m)

    def __hash__(self) -> int:
        return hash((self.A, self.O, self.m))

    def __len__(self) -> int:
        return self.size

    @cached_property
    def lengths(self) -> np.ndarray:
        out = np.empty(self.size, dtype=np.int64)
        for n in range(self.m + 1):
            out[self.offsets[n] : self.offsets[n + 1]] = n
        out.setflags(write=False)
        return out

    @cached_property
    def last_pair(self) -> np.ndarray:
        """Code of the most recent pair per window; -1 for the empty window."""
        codes = np.arange(self.size, dtype=np.int64) - self.offsets[self.lengths]
        out = np.where(self.lengths > 0, codes % self.base, -1)
        out.setflags(write=False)
        return out

    @cached_property
    def last_obs(self) -> np.ndarray:
        out = np.where(self.last_pair >= 0, self.last_pair % self.O, -1)
        out.setflags(write=False)
        return out

    @cached_property
    def prefix(self) -> np.ndarray:
        """Index of the window with the newest pair removed; -1 for the empty window."""
        codes = np.arange(self.size, dtype=np.int64) - self.offsets[self.lengths]
        prev = self.offsets[np.maximum(self.lengths - 1, 0)] + codes // self.base
        out = np.where(self.lengths > 0, prev, -1)
        out.setflags(write=False)
        return out

    @cached_property
    def successor(self) -> np.ndarray:
        """``successor[w, a, o]``: index of ``shift_append(w, a, o)``."""
        w = np.arange(self.size, dtype=np.int64)
        n = self.lengths
        code = w - self.offsets[n]
        full = n == self.m
        # Drop the oldest pair of full windows before appending.
        kept = np.where(full, code % self.base ** (self.m - 1), code)
        new_len = np.minimum(n + 1, self.m)
        pair = np.arange(self.base, dtype=np.int64).reshape(self.A, self.O)
        out = (
            self.offsets[new_len][:, None, None]
            + kept[:, None, None] * self.base
            + pair[None, :, :]
        )
        out.setflags(write=False)
        return out

    def encode(self, w: Window) -> int:
        n = len(w)
        if n > self.m:
            raise ParameterError(f"window of length {n} exceeds m={self.m}")
        code = 0
        for a, o in w:
            if not (0 <= a < self.A and 0 <= o < self.O):
                raise ParameterError(f"pair ({a}, {o}) outside alphabet")
            code = code * self.base + a * self.O + o
        return int(self.offsets[n]) + code

    def decode(self, i: int) -> Window:
        if not 0 <= i < self.size:
            raise ParameterError(f"index {i} outside [0, {self.size})")
        n = int(self.lengths[i])
        code = i - int(self.offsets[n])
        pairs = []
        for _ in range(n):
            code, c = divmod(code, self.base)
            pairs.append(divmod(c, self.O))
        return tuple(reversed(pairs))

    def windows_of_length(self, n: int) -> range:
        return range(int(self.offsets[n]), int(self.offsets[n + 1]))

    def text(self, i: int) -> str:
        w = self.decode(i)
        if not w:
            return EMPTY_TEXT
        return "|".join(f"a{a}o{o}" for a, o in w)

    def parse(self, text: str) -> int:
        text = text.strip()
        if text in (EMPTY_TEXT, ""):
            return 0
        pairs = []
        for tok in text.split("|"):
            a, o = tok[1:].split("o")
            pairs.append((int(a), int(o)))
        return self.encode(tuple(pairs))


def build(A: int, O: int, m: int) -> WindowIndex:
    return WindowIndex(A, O, m)


def shift_append(idx: WindowIndex, w: Window, a: int, o: int) -> Window:
    if len(w) > idx.m:
        raise ParameterError(f"window of length {len(w)} exceeds m={idx.m}")
    out = tuple(w) + ((a, o),)
    return out[-idx.m :]


def window_at(idx: WindowIndex, traj, t: int) -> Window:
    """Pairs ``(a_i, o_i)`` for ``i`` in ``[max(1, t-m), t-1]`` (1-based ``t``)."""
    if not 1 <= t <= traj.length + 1:
        raise ParameterError(f"t={t} outside [1, {traj.length + 1}]")
    lo = max(1, t - idx.m)
    return tuple(
        (int(traj.actions[i - 1]), int(traj.observations[i - 1])) for i in range(lo, t)
    )


def trajectory_windows(idx: WindowIndex, actions: np.ndarray, observations: np.ndarray) -> np.ndarray:
    """Indices of ``window_at(t)`` for ``t = 1..T+1`` (length ``T + 1``)."""
    T = len(actions)
    codes = np.asarray(actions, dtype=np.int64) * idx.O + np.asarray(observations, dtype=np.int64)
    out = np.empty(T + 1, dtype=np.int64)
    w = 0
    succ = idx.successor
    # Growth phase is at most m steps; afterwards windows are a rolling code.
    for t in range(min(idx.m, T)):
        out[t] = w
        w = int(succ[w, codes[t] // idx.O, codes[t] % idx.O])
    out[min(idx.m, T)] = w
    if T > idx.m:
        m, base = idx.m, idx.base
        roll = np.zeros(T - m + 1, dtype=np.int64)
        for k in range(m):
            roll = roll * base + codes[k : k + T - m + 1]
        out[m:] = idx.offsets[m] + roll
    return out


@dataclass(frozen=True, eq=False)
class WindowPolicy:
    """Stationary policy mapping each window index to an action."""

    index: WindowIndex
    actions: np.ndarray

    def __post_init__(self) -> None:
        acts = np.asarray(self.actions, dtype=np.int64)
        if acts.shape != (self.index.size,):
            raise ParameterError(f"policy needs {self.index.size} actions, got {acts.shape}")
        if acts.size and (acts.min() < 0 or acts.max() >= self.index.A):
            raise ParameterError("policy maps a window to an invalid action")
        acts = acts.copy()
        acts.setflags(write=False)
        object.__setattr__(self, "actions", acts)

    @property
    def m(self) -> int:
        return self.index.m

    def __call__(self, w: Window) -> int:
        return int(self.actions[self.index.encode(w)])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WindowPolicy):
            return NotImplemented
        return self.index == other.index and np.array_equal(self.actions, other.actions)


def random_policy(idx: WindowIndex, seed: int) -> WindowPolicy:
    rng = np.random.default_rng(seed)
    return WindowPolicy(idx, rng.integers(0, idx.A, size=idx.size))
