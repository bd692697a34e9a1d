import pytest

from fibercrack.constitutive import ModelParams
from fibercrack.continuation import trace_pitchfork, trace_trivial
from fibercrack.fem import Mesh
from fibercrack.linearized import critical_root, find_roots
from fibercrack.postprocess import stress_along_branch

ACCEPTANCE = {}


class Study:
    """Trivial branch plus both pitchfork sides at one parameter set and mesh."""

    def __init__(self, k, n_elements):
        self.p = ModelParams(k=k)
        self.mesh = Mesh(n_elements)
        self.root = critical_root(find_roots(self.p))
        self.trivial = stress_along_branch(trace_trivial(self.p, self.mesh, (1.05, 3.5)))
        self.sides = {}
        for side in (1, -1):
            self.sides[side] = stress_along_branch(trace_pitchfork(self.root, side, self.p, self.mesh))


_cache = {}


@pytest.fixture(scope="session")
def study():
    def get(k, n_elements=100):
        key = (k, n_elements)
        if key not in _cache:
            _cache[key] = Study(k, n_elements)
        return _cache[key]

    return get


@pytest.fixture(scope="session")
def record():
    def rec(criterion, ok, detail=""):
        prev = ACCEPTANCE.get(criterion)
        ACCEPTANCE[criterion] = (bool(ok) and (prev is None or prev[0]), detail if prev is None else f"{prev[1]}; {detail}")

    return rec


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[c]
        terminalreporter.write_line(f"criterion {c:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
