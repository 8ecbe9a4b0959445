import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from superstate.pomdp import TabularPomdp, probe_env, random_pomdp  # noqa: E402


@pytest.fixture(scope="session")
def probe():
    return probe_env()


@pytest.fixture(scope="session")
def probe_prev():
    return probe_env(reward_timing="previous")


@pytest.fixture
def small_random():
    return random_pomdp(3, 2, 2, 0.05, 0.05, seed=11)


def uniform_pomdp(S=4, A=2, O=2, reward=None, timing="emitted"):
    import numpy as np

    trans = np.full((S, A, S), 1.0 / S)
    obs = np.full((S, A, O), 1.0 / O)
    reward = np.zeros((O, A)) if reward is None else reward
    return TabularPomdp(trans, obs, reward, np.full(S, 1.0 / S), 0.9, "uniform", timing)


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[n])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
