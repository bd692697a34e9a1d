"""Active-set Newton solver for the discretized variational inequality.

At a fixed active set the nodal constraints ``u'_k + 1 = 0`` are imposed as
equalities with multipliers ``mu_k``, and the stationarity system

    R(x, lam) - A^T mu = 0,    A x + 1 = 0

is solved by Newton's method.  ``mu_k >= 0`` is the physical sign (the layer
pushes against the constraint).  An outer loop moves one node per pass: the
node with the most negative multiplier is released first; otherwise the
inactive node with the most negative ``u' + 1`` is added.

An optional linear side condition ``c_x . x + c_lam * lam = rhs`` frees ``lam``
as an unknown; continuation uses it for arclength and amplitude conditions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .constitutive import ModelParams
from .fem import (
    Mesh,
    NodalState,
    assemble_residual,
    assemble_residual_dlam,
    assemble_tangent,
    constraint_jacobian,
)

log = logging.getLogger(__name__)


class NonConvergenceError(RuntimeError):
    def __init__(self, msg, state=None):
        super().__init__(msg)
        self.state = state


class CyclingError(RuntimeError):
    def __init__(self, msg, changes=()):
        super().__init__(msg)
        self.changes = list(changes)


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-7
    max_iter: int = 50
    max_outer: int | None = None  # default 2 (N + 1)
    sign_tol: float = 1e-10


@dataclass(frozen=True)
class SideCondition:
    """Linear condition ``cx @ x + clam * lam = rhs`` that makes ``lam`` unknown."""

    cx: np.ndarray
    clam: float
    rhs: float

    def value(self, state: NodalState) -> float:
        return float(self.cx @ state.x + self.clam * state.lam - self.rhs)


@dataclass
class KKTSystem:
    G: np.ndarray
    A: np.ndarray
    rhs: np.ndarray

    @property
    def K(self) -> np.ndarray:
        m = self.A.shape[0]
        return np.block([[self.G, self.A.T], [self.A, np.zeros((m, m))]])


@dataclass
class SolveReport:
    converged: bool = False
    newton_iterations: int = 0
    active_set_changes: list = field(default_factory=list)
    residual_norm: float = float("inf")


def kkt_residual(state: NodalState, p: ModelParams, mesh: Mesh, side: SideCondition | None = None):
    A = constraint_jacobian(state.active, mesh)
    F = [assemble_residual(state, p, mesh) - A.T @ state.mu, A @ state.x + 1.0]
    if side is not None:
        F.append([side.value(state)])
    return np.concatenate(F)


def assemble_kkt(state: NodalState, p: ModelParams, mesh: Mesh) -> KKTSystem:
    A = constraint_jacobian(state.active, mesh)
    rhs = kkt_residual(state, p, mesh)
    return KKTSystem(G=assemble_tangent(state, p, mesh), A=A, rhs=rhs)


def _newton_step(state, p, mesh, F, side):
    """Solve for ``(dx, dlam, dmu)``."""
    n = mesh.n_dof
    sysm = assemble_kkt(state, p, mesh)
    m = sysm.A.shape[0]
    if side is None:
        sol = linalg.solve(sysm.K, -F, assume_a="sym")
        return sol[:n], 0.0, -sol[n:]
    # bordered system in (dx, -dmu, dlam)
    J = np.zeros((n + m + 1, n + m + 1))
    J[: n + m, : n + m] = sysm.K
    J[:n, -1] = assemble_residual_dlam(state, p, mesh)
    J[-1, :n] = side.cx
    J[-1, -1] = side.clam
    sol = linalg.solve(J, -F)
    return sol[:n], float(sol[-1]), -sol[n : n + m]


def newton_solve_fixed_active(
    state: NodalState,
    active,
    p: ModelParams,
    mesh: Mesh,
    options: SolverOptions = SolverOptions(),
    side: SideCondition | None = None,
):
    """Newton iteration with ``active`` held fixed.

    Returns ``(state, iterations)``; converged means the KKT residual
    max-norm is at most ``options.tol``.  One extra polishing step is taken
    after that so sign tests in the outer loop see round-off-level residuals.

    Raises
    ------
    NonConvergenceError
        After ``options.max_iter`` iterations, carrying the last iterate.
    """
    active = tuple(sorted(active))
    if active != state.active:
        old = dict(zip(state.active, state.mu))
        state = state.copy(active=active, mu=np.array([old.get(a, 0.0) for a in active]))
    else:
        state = state.copy()
    it = 0
    F = kkt_residual(state, p, mesh, side)
    norm = np.max(np.abs(F))
    while True:
        if not np.isfinite(norm):
            raise NonConvergenceError("Newton iterate became non-finite", state)
        if norm <= options.tol:
            if norm > 1e-3 * options.tol:
                trial = _apply(state, _newton_step(state, p, mesh, F, side))
                Ft = kkt_residual(trial, p, mesh, side)
                if np.max(np.abs(Ft)) < norm:
                    state = trial
            return state, max(it, 1)
        if it >= options.max_iter:
            raise NonConvergenceError(f"Newton did not converge in {it} iterations (|F|={norm:.3e})", state)
        state = _apply(state, _newton_step(state, p, mesh, F, side))
        it += 1
        F = kkt_residual(state, p, mesh, side)
        norm = np.max(np.abs(F))


def _apply(state, step):
    dx, dlam, dmu = step
    return NodalState(lam=state.lam + dlam, x=state.x + dx, active=state.active, mu=state.mu + dmu)


def active_set_solve(
    state: NodalState,
    active_guess,
    p: ModelParams,
    mesh: Mesh,
    options: SolverOptions = SolverOptions(),
    side: SideCondition | None = None,
):
    """Find an equilibrium together with its active set.

    Returns ``(state, report)``.

    Raises
    ------
    CyclingError
        When the outer loop exceeds its cap (default ``2 (N + 1)`` passes).
    NonConvergenceError
        When an inner Newton solve fails.
    """
    cap = options.max_outer or 2 * mesh.n_nodes
    report = SolveReport()
    active = set(active_guess)
    for _ in range(cap + 1):
        state, its = newton_solve_fixed_active(state, active, p, mesh, options, side)
        report.newton_iterations += its
        if state.mu.size and state.mu.min() < -options.sign_tol:
            node = state.active[int(np.argmin(state.mu))]
            active.discard(node)
            report.active_set_changes.append(("removed", node))
            continue
        slack = state.up(mesh) + 1.0
        inactive = np.array([j for j in range(mesh.n_nodes) if j not in active], dtype=int)
        if inactive.size and slack[inactive].min() < -options.sign_tol:
            node = int(inactive[np.argmin(slack[inactive])])
            active.add(node)
            report.active_set_changes.append(("added", node))
            continue
        report.converged = True
        report.residual_norm = float(np.max(np.abs(kkt_residual(state, p, mesh, side))))
        return state, report
    raise CyclingError(f"active set did not settle within {cap} outer iterations", report.active_set_changes)
