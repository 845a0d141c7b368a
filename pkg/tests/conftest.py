import dataclasses

import numpy as np
import pytest

from ddpcut.model import MultistageProblem, extensive_form
from ddpcut.simplex import solve_lp


def tail_value(problem, t, x_prev):
    """Exact Q_t(x_prev) from the extensive form of stages t..T."""
    stages = [dataclasses.replace(s, t=k) for k, s in enumerate(problem.stages[t - 1:], start=1)]
    tail = MultistageProblem(np.asarray(x_prev, dtype=float), tuple(stages), "min", "tail")
    ef = extensive_form(tail)
    sol = solve_lp(ef.lp)
    return sol.obj + ef.constant if sol.optimal else np.inf


def ef_value(problem):
    ef = extensive_form(problem)
    sol = solve_lp(ef.lp)
    assert sol.optimal
    return problem.to_user_value(sol.obj + ef.constant)


@pytest.fixture
def tail():
    return tail_value


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        ok, detail = mod.RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}: {detail}")
