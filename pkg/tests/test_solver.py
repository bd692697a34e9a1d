import numpy as np
import pytest
from scipy import linalg

from fibercrack.constitutive import ModelParams
from fibercrack.fem import Mesh, NodalState, assemble_energy, constraint_jacobian
from fibercrack.solver import (
    CyclingError,
    NonConvergenceError,
    SolverOptions,
    active_set_solve,
    assemble_kkt,
    kkt_residual,
    newton_solve_fixed_active,
)

P = ModelParams(k=2.0)


def sine(mesh, lam, a, n=3):
    q = n * np.pi
    return NodalState(lam=lam, x=mesh.interpolate(lambda s: a * np.sin(q * s), lambda s: a * q * np.cos(q * s)))


def stable_cracked(study):
    s = study(2.0)
    pt = [pt for pt in s.sides[1].visible() if pt.stable and pt.active][5]
    return s, pt


def test_trivial_one_iteration():
    m = Mesh(100)
    st, its = newton_solve_fixed_active(NodalState.trivial(m, 1.5), (), P, m)
    assert its == 1 and np.max(np.abs(st.x)) <= 1e-12


def test_returns_to_trivial_below_critical_load():
    m = Mesh(100)
    st, _ = newton_solve_fixed_active(sine(m, 2.44, 1e-3), (), P, m)
    assert np.max(np.abs(st.x)) <= 1e-9


def test_active_set_solve_trivial():
    m = Mesh(60)
    for lam in (1.2, 2.0, 2.4):
        st, rep = active_set_solve(sine(m, lam, 1e-3), (), P, m)
        assert rep.converged and st.active == () and rep.active_set_changes == []
        assert rep.residual_norm <= 1e-7


def test_kkt_conditions_at_cracked_point(study):
    s, pt = stable_cracked(study)
    m, st = s.mesh, pt.state
    assert np.max(np.abs(kkt_residual(st, s.p, m))) <= 1e-7
    slack = st.up(m) + 1.0
    act = list(st.active)
    inact = [j for j in range(m.n_nodes) if j not in st.active]
    assert np.max(np.abs(st.mu * slack[act])) <= 1e-10
    assert st.mu.min() >= -1e-10 and slack[inact].min() >= -1e-10
    assert np.allclose(constraint_jacobian(st.active, m) @ st.x + 1.0, 0.0, atol=1e-12)
    K = assemble_kkt(st, s.p, m).K
    assert np.array_equal(K, K.T)


def test_feasible_perturbations_do_not_lower_energy(study):
    s, pt = stable_cracked(study)
    m, st = s.mesh, pt.state
    Z = linalg.null_space(constraint_jacobian(st.active, m))
    J0 = assemble_energy(st, s.p, m)[0]
    rng = np.random.default_rng(3)
    for _ in range(20):
        d = Z @ rng.normal(size=Z.shape[1])
        d *= 1e-4 / np.max(np.abs(d))
        for sign in (1, -1):
            assert assemble_energy(st.copy(x=st.x + sign * d), s.p, m)[0] >= J0 - 1e-14
    # opening direction at an active node (healing) raises the energy at first order
    e = np.zeros(m.n_dof)
    e[m.slope_dof(st.active[0])] = 1e-6
    assert assemble_energy(st.copy(x=st.x + e), s.p, m)[0] > J0


def test_wrong_active_set_is_repaired(study):
    s, pt = stable_cracked(study)
    m = s.mesh
    # widen each crack by one node
    extra = tuple(a - 1 for a, b in zip(pt.active, (None,) + pt.active[:-1]) if b != a - 1 and a > 0)
    assert extra
    guess = pt.state.copy()
    st, rep = active_set_solve(guess, set(pt.active) | set(extra), s.p, m)
    assert st.active == pt.active
    assert {n for a, n in rep.active_set_changes if a == "removed"} == set(extra)
    assert np.allclose(st.x, pt.state.x, atol=1e-8)
    with pytest.raises(CyclingError) as info:
        active_set_solve(guess, set(pt.active) | set(extra), s.p, m, SolverOptions(max_outer=1))
    assert len(info.value.changes) == 2 and info.value.changes[0][0] == "removed"


def test_missing_nodes_are_added(study):
    s, pt = stable_cracked(study)
    m = s.mesh
    keep = pt.active[1:]
    st, rep = active_set_solve(pt.state.copy(), keep, s.p, m)
    assert st.active == pt.active
    assert ("added", pt.active[0]) in rep.active_set_changes


def test_non_convergence_carries_iterate():
    m = Mesh(30)
    with pytest.raises(NonConvergenceError) as info:
        newton_solve_fixed_active(sine(m, 2.0, 0.2), (), P, m, SolverOptions(max_iter=1))
    assert info.value.state is not None and info.value.state.x.shape == (m.n_dof,)


def test_deterministic(study):
    s, pt = stable_cracked(study)
    guess = pt.state.copy(x=pt.state.x * 1.01)
    a, ra = active_set_solve(guess, (), s.p, s.mesh)
    b, rb = active_set_solve(guess, (), s.p, s.mesh)
    assert np.array_equal(a.x, b.x) and ra.active_set_changes == rb.active_set_changes
