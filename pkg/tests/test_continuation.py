import numpy as np
import pytest
from dataclasses import replace

from fibercrack import continuation
from fibercrack.constitutive import ModelParams
from fibercrack.continuation import (
    HEALING,
    STEP_FAILURE,
    USER_STOP,
    WINDOW_END,
    Branch,
    ConsistencyError,
    StepPolicy,
    branch_switch,
    reflect_state,
    shift_state,
    start_pitchfork,
    trace_branch,
    trace_trivial,
)
from fibercrack.fem import Mesh, NodalState, assemble_energy
from fibercrack.linearized import critical_root, find_roots
from fibercrack.solver import newton_solve_fixed_active
from fibercrack.stability import classify_state

P2 = ModelParams(k=2.0)


def corr(state, mesh, n):
    phi = mesh.interpolate(lambda s: np.sin(n * np.pi * s), lambda s: n * np.pi * np.cos(n * np.pi * s))
    from fibercrack.fem import mass_matrix

    M = mass_matrix(mesh)
    return abs(state.x @ M @ phi) / np.sqrt((state.x @ M @ state.x) * (phi @ M @ phi))


def test_trivial_branch():
    m = Mesh(40)
    b = trace_trivial(P2, m, (1.1, 3.0), 0.05)
    assert b.origin == "trivial" and b.termination == WINDOW_END
    assert len(b.points) == 39
    for pt in b.points:
        assert pt.energy == pytest.approx(P2.beta / 6 * (1 - 1 / pt.lam) ** 2, abs=1e-10)
    with pytest.raises(ValueError):
        trace_trivial(P2, m, (0.9, 3.0))


def test_trivial_consistency_error(monkeypatch):
    monkeypatch.setattr(continuation, "trivial_stability", lambda lam, p, n_max: (False, 1))
    with pytest.raises(ConsistencyError):
        trace_trivial(P2, Mesh(20), (1.1, 1.5), 0.1)


def test_branch_switch_mode_shape():
    m = Mesh(100)
    r = critical_root(find_roots(P2))
    pt = branch_switch(r, 1, P2, m, 1e-2)
    assert pt.event == "switch" and pt.lam < r.lambda_n
    assert corr(pt.state, m, 3) >= 0.99
    with pytest.raises(ValueError):
        branch_switch(replace(r, simple=False), 1, P2, m)
    with pytest.raises(ValueError):
        branch_switch(r, 0, P2, m)


def test_even_mode_sides_related_by_half_period_shift():
    m = Mesh(100)
    p = ModelParams(k=2.5)
    r = critical_root(find_roots(p))
    a = branch_switch(r, 1, p, m)
    b = branch_switch(r, -1, p, m)
    shifted = shift_state(a.state, m, m.n_elements // r.n)
    assert shifted.lam == a.lam
    assert np.max(np.abs(shifted.x - b.state.x)) <= 1e-6
    assert abs(a.lam - b.lam) <= 1e-9


def test_reflection_maps_sides_for_odd_mode(study):
    s = study(2.0)
    m = s.mesh
    for pt in s.sides[1].points[1::7]:
        image = reflect_state(pt.state, m)
        st, its = newton_solve_fixed_active(image, image.active, s.p, m)
        assert its <= 2
        assert assemble_energy(st, s.p, m)[1] == pytest.approx(pt.energy, abs=1e-12)
        assert classify_state(st, s.p, m)[1] == pt.inertia
    for a, b in zip(s.sides[1].points, s.sides[-1].points):
        assert np.max(np.abs(reflect_state(a.state, m).x - b.state.x)) <= 1e-8


def test_shift_maps_sides_for_even_mode(study):
    s = study(2.5)
    m = s.mesh
    shift = m.n_elements // s.root.n
    for pt in s.sides[1].points[1::6]:
        image = shift_state(pt.state, m, shift)
        st, its = newton_solve_fixed_active(image, image.active, s.p, m)
        assert its <= 2
        assert assemble_energy(st, s.p, m)[1] == pytest.approx(pt.energy, abs=1e-10)
        # the shift does not preserve the boundary conditions of variations, so
        # only the label (not the full inertia) carries over
        assert classify_state(st, s.p, m)[0] == pt.stability


def test_pitchfork_k2_structure(study):
    s = study(2.0)
    b = s.sides[1]
    assert b.origin == "pitchfork(3,+)" and b.termination == HEALING
    assert b.points[0].event == "bifurcation" and b.points[1].lam < s.root.lambda_n
    events = [pt.event for pt in b.points]
    assert events.count("contact") >= 1
    assert b.points[-1].healing and not any(pt.healing for pt in b.points[:-1])
    # no healing along the reported stable segment
    seg = [pt for pt in b.visible() if pt.stable and pt.active]
    for a, c in zip(seg, seg[1:]):
        assert set(a.active) <= set(c.active)


def test_step_bounds_and_arclength(study):
    s = study(2.0)
    policy = StepPolicy()
    theta = 1.0 / s.mesh.n_elements
    pts = s.sides[1].points
    for i in range(3, len(pts)):
        pt = pts[i]
        assert policy.min_step <= pt.step <= policy.max_step or pt.event == "contact"
        if pt.event is None and pts[i - 1].event is None and not pts[i - 1].controller["pending"]:
            dx = pts[i - 1].state.x - pts[i - 2].state.x
            dl = pts[i - 1].lam - pts[i - 2].lam
            nrm = np.sqrt(theta * dx @ dx + dl * dl)
            row = (theta * dx @ (pt.state.x - pts[i - 1].state.x) + dl * (pt.lam - pts[i - 1].lam)) / nrm
            assert row == pytest.approx(pt.step, abs=1e-7)
    arc = [pt.arclength for pt in pts]
    assert np.all(np.diff(arc) > 0)


def test_resume_matches_uninterrupted(study):
    s = study(2.0)
    start = start_pitchfork(s.root, 1, s.p, s.mesh)
    part = trace_branch(start, s.p, s.mesh, StepPolicy(max_points=24))
    assert part.termination == USER_STOP
    rest = trace_branch(part, s.p, s.mesh, StepPolicy())
    full = s.sides[1]
    assert len(rest.points) == len(full.points)
    for a, c in zip(rest.points, full.points):
        assert a.lam == c.lam and np.array_equal(a.state.x, c.state.x)


def test_step_failure_termination():
    m = Mesh(40)
    r = critical_root(find_roots(P2))
    start = start_pitchfork(r, 1, P2, m)
    # a corrector that can never converge forces repeated halving
    from fibercrack.solver import SolverOptions

    b = trace_branch(start, P2, m, StepPolicy(min_step=0.004), SolverOptions(max_iter=0))
    assert b.termination == STEP_FAILURE and len(b.points) == 2


def test_backward_direction(study):
    s = study(2.0)
    pts = s.sides[1].points[9:11]
    b = trace_branch(Branch(points=list(pts), origin="x"), s.p, s.mesh, StepPolicy(max_points=5), direction=-1)
    assert len(b.points) == 5
    assert b.points[-1] is pts[-1]
    lams = [pt.lam for pt in b.points]
    assert lams == sorted(lams, reverse=True)  # towards the bifurcation point, lam grows


def test_trace_branch_needs_two_points(study):
    s = study(2.0)
    with pytest.raises(ValueError):
        trace_branch(Branch(points=s.sides[1].points[:1]), s.p, s.mesh)
