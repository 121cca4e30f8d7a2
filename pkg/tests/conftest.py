import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from carnotkit.groups import abelian, free_step2, heisenberg

settings.register_profile("ckit", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("ckit")

GROUPS = {"H1": heisenberg(), "F3": free_step2(3), "R2": abelian(2), "R3": abelian(3)}


@pytest.fixture(params=list(GROUPS), ids=list(GROUPS))
def group(request):
    return GROUPS[request.param]


@pytest.fixture
def h1():
    return GROUPS["H1"]


def points(n, bound=3.0):
    return arrays(np.float64, (n,), elements=st.floats(-bound, bound, allow_nan=False, width=64))


def group_and_points(k, bound=3.0):
    """A named group with k points on it."""
    return st.sampled_from(sorted(GROUPS)).flatmap(
        lambda name: st.tuples(st.just(GROUPS[name]), *[points(GROUPS[name].n, bound) for _ in range(k)]))


ACCEPTANCE = {}


def record_acceptance(number: int, passed: bool, title: str, detail: str) -> None:
    ACCEPTANCE[number] = (passed, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {title}: {detail}")
