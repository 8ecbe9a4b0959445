"""Exact Bayesian filtering over hidden states and filter-stability auditing.

The belief after a history is the distribution of the state that will emit
the next observation: updating on ``(a, o)`` weighs each current state by
``obs[s, a, o]`` and then pushes it through ``trans[s, a, :]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .errors import FilteringError, ParameterError, UnreachableWindowError
from .pomdp import TabularPomdp, make_rng, validate


def belief_update(pomdp: TabularPomdp, b: np.ndarray, a: int, o: int) -> np.ndarray:
    weighted = np.asarray(b, dtype=float) * pomdp.obs[:, a, o]
    num = weighted @ pomdp.trans[:, a, :]
    z = num.sum()
    if not z > 0:
        raise FilteringError(f"zero normalizer for action {a}, observation {o}")
    return num / z


def window_belief(
    pomdp: TabularPomdp,
    w: Sequence[tuple[int, int]],
    prior: np.ndarray | None = None,
) -> np.ndarray:
    """Fold ``belief_update`` over the pairs of ``w`` starting from ``prior`` (default mu)."""
    b = pomdp.init_dist if prior is None else np.asarray(prior, dtype=float)
    b = b.copy()
    for a, o in w:
        try:
            b = belief_update(pomdp, b, a, o)
        except FilteringError:
            raise UnreachableWindowError(tuple(w)) from None
    return b


history_belief = window_belief


def predictive(pomdp: TabularPomdp, b: np.ndarray, a: int) -> np.ndarray:
    """Distribution of the next observation under action ``a``."""
    return np.asarray(b, dtype=float) @ pomdp.obs[:, a, :]


def tv_distance(b: np.ndarray, b2: np.ndarray) -> float:
    b, b2 = np.asarray(b, dtype=float), np.asarray(b2, dtype=float)
    if b.shape != b2.shape:
        raise ParameterError(f"dimension mismatch: {b.shape} vs {b2.shape}")
    return 0.5 * float(np.abs(b - b2).sum())


@dataclass
class AuditReport:
    pairs: int
    max_ratio: float
    bound: float
    passed: bool
    skipped: int = 0
    checks: int = 0
    worst: dict[str, Any] | None = None

    def to_dict(self) -> dict[str, Any]:
        out = {
            "pairs": self.pairs,
            "max_ratio": self.max_ratio,
            "bound": self.bound,
            "pass": self.passed,
            "skipped": self.skipped,
        }
        if self.worst is not None:
            out["worst"] = self.worst
        return out


def _random_history(rng: np.random.Generator, A: int, O: int, max_len: int) -> tuple:
    n = int(rng.integers(0, max_len + 1))
    return tuple((int(rng.integers(A)), int(rng.integers(O))) for _ in range(n))


def contraction_ratio(pomdp: TabularPomdp, b: np.ndarray, b2: np.ndarray, a: int, o: int) -> float:
    """TV after a shared update divided by TV before; 0 when the beliefs coincide."""
    before = tv_distance(b, b2)
    after = tv_distance(belief_update(pomdp, b, a, o), belief_update(pomdp, b2, a, o))
    if before == 0.0:
        return 0.0 if after <= 1e-12 else np.inf
    return after / before


def contraction_audit(
    pomdp: TabularPomdp,
    n_pairs: int,
    max_len: int,
    seed: int,
    pairs: Sequence[tuple[tuple, tuple]] | None = None,
) -> AuditReport:
    """Check one-step TV contraction by ``1 - S*alpha*beta`` on sampled history pairs.

    Histories are uniform random action-observation sequences of length
    ``0..max_len`` (all are reachable when beta > 0). Every ``(a, o)`` is
    checked for every pair. ``pairs`` overrides sampling.
    """
    report = validate(pomdp)
    if not (report.assumption1_ok and report.assumption2_ok):
        raise ParameterError(
            f"audit requires alpha > 0 and beta > 0 (alpha={report.alpha}, beta={report.beta})"
        )
    bound = 1.0 - report.rho
    A, O = pomdp.n_actions, pomdp.n_obs
    if pairs is None:
        rng = make_rng(seed)
        pairs = [
            (_random_history(rng, A, O, max_len), _random_history(rng, A, O, max_len))
            for _ in range(n_pairs)
        ]
    max_ratio, skipped, checks, passed = 0.0, 0, 0, True
    worst = None
    for h, h2 in pairs:
        try:
            b = window_belief(pomdp, h)
            b2 = window_belief(pomdp, h2)
        except FilteringError:
            skipped += 1
            continue
        before = tv_distance(b, b2)
        for a in range(A):
            for o in range(O):
                after = tv_distance(belief_update(pomdp, b, a, o), belief_update(pomdp, b2, a, o))
                checks += 1
                if after > bound * before + 1e-12:
                    passed = False
                ratio = after / before if before > 0 else 0.0
                if ratio > max_ratio:
                    max_ratio = ratio
                    worst = {
                        "h": [list(p) for p in h],
                        "h2": [list(p) for p in h2],
                        "a": a,
                        "o": o,
                        "tv_before": before,
                        "tv_after": after,
                    }
    return AuditReport(
        pairs=len(pairs) - skipped,
        max_ratio=max_ratio,
        bound=bound,
        passed=passed,
        skipped=skipped,
        checks=checks,
        worst=worst,
    )
