"""Branch tracing: trivial branch, pitchfork switching, pseudo-arclength.

Arclength is measured in the metric ``ds^2 = |dx|^2 / N + dlam^2``, which for
the Hermite unknowns approximates ``integral(du^2 + du'^2) + dlam^2`` and so
does not depend on the mesh size.

Crack nucleation makes the branch non-smooth.  When a node touches the
constraint and the constrained branch leaves in the opposite sense of the
current secant, the corrector cannot settle (the node is added, then released
with a negative multiplier, and so on).  That cycle triggers a contact event:
the touching point is located exactly, every node within ``contact_tol`` of
contact joins the active set (contacts that coincide in the continuum are
split by the mesh), and the next predictor follows the tangent of the
constrained branch oriented so the new multipliers grow.
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
    amplitude_vector,
    assemble_energy,
    assemble_residual_dlam,
    assemble_tangent,
    constraint_jacobian,
)
from .linearized import BifurcationRoot, find_roots, trivial_stability
from .solver import (
    CyclingError,
    NonConvergenceError,
    SideCondition,
    SolverOptions,
    active_set_solve,
    newton_solve_fixed_active,
)
from .stability import STABLE, classify_state

log = logging.getLogger(__name__)

WINDOW_END = "window_end"
STEP_FAILURE = "step_failure"
USER_STOP = "user_stop"
HEALING = "healing"


class ConsistencyError(RuntimeError):
    """Analytic and inertia-based stability disagree away from a root."""


class AmplitudeTooSmallError(RuntimeError):
    """Branch-switch corrector fell back onto the trivial solution."""


@dataclass(frozen=True)
class StepPolicy:
    initial: float = 0.01
    min_step: float = 1e-6
    max_step: float = 0.05
    grow_after: int = 5
    max_points: int = 2000
    lambda_window: tuple = (1.01, 3.5)
    contact_tol: float | None = None  # default 50 h^2

    def contact_tolerance(self, mesh: Mesh) -> float:
        return self.contact_tol if self.contact_tol is not None else 50.0 * mesh.h**2


@dataclass
class BranchPoint:
    state: NodalState
    energy: float
    inertia: tuple
    stability: str
    arclength: float = 0.0
    step: float = 0.0
    stress: float = float("nan")
    stress_flag: bool = False
    event: str | None = None
    healing: bool = False
    controller: dict | None = None

    @property
    def lam(self) -> float:
        return self.state.lam

    @property
    def stable(self) -> bool:
        return self.stability == STABLE

    @property
    def active(self) -> tuple:
        return self.state.active


@dataclass
class Branch:
    points: list = field(default_factory=list)
    origin: str = "trivial"
    termination: str = WINDOW_END

    @property
    def lams(self) -> np.ndarray:
        return np.array([pt.lam for pt in self.points])

    @property
    def energies(self) -> np.ndarray:
        return np.array([pt.energy for pt in self.points])

    def visible(self) -> list:
        """Points shown in default output (healing points are left out)."""
        return [pt for pt in self.points if not pt.healing]


def pitchfork_origin(n: int, side: int) -> str:
    return f"pitchfork({n},{'+' if side > 0 else '-'})"


def make_point(state: NodalState, p: ModelParams, mesh: Mesh, **kw) -> BranchPoint:
    _, energy = assemble_energy(state, p, mesh)
    label, inert = classify_state(state, p, mesh)
    return BranchPoint(state=state, energy=energy, inertia=inert, stability=label, **kw)


def _metric(mesh: Mesh) -> float:
    return 1.0 / mesh.n_elements


def _distance(a: NodalState, b: NodalState, theta: float) -> float:
    dx = a.x - b.x
    return float(np.sqrt(theta * dx @ dx + (a.lam - b.lam) ** 2))


# ---------------------------------------------------------------- trivial


def trace_trivial(
    p: ModelParams,
    mesh: Mesh,
    lambda_window=(1.01, 3.5),
    step: float = 0.01,
    n_max: int = 10,
    options: SolverOptions = SolverOptions(),
) -> Branch:
    """Sample the homogeneous branch on a uniform ``lam`` grid.

    Each point's inertia classification is compared with the analytic
    trivial-branch eigenvalues; a disagreement farther than one grid step
    from every characteristic root raises :class:`ConsistencyError`.
    """
    lo, hi = lambda_window
    if lo <= 1.0 or hi <= lo or step <= 0:
        raise ValueError("need 1 < lo < hi and step > 0")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    roots = None
    branch = Branch(origin="trivial")
    for i in range(count):
        lam = lo + i * step
        state, _ = newton_solve_fixed_active(NodalState.trivial(mesh, lam), (), p, mesh, options)
        pt = make_point(state, p, mesh, arclength=lam - lo, step=step if i else 0.0)
        analytic, _ = trivial_stability(lam, p, n_max)
        if analytic != pt.stable:
            if roots is None:
                roots = find_roots(p, n_max, (min(lo, 1.01), max(hi + 2 * step, 10.0)))
            if not any(abs(r.lambda_n - lam) <= step for r in roots):
                raise ConsistencyError(
                    f"trivial branch at lam={lam:.6f}: inertia says {pt.stability}, "
                    f"analytic says {'stable' if analytic else 'unstable'}"
                )
        branch.points.append(pt)
    return branch


# --------------------------------------------------------------- switching


def mode_shape(n: int, mesh: Mesh) -> np.ndarray:
    """Reduced vector of the interpolated mode ``sin(n pi (1 - s))``.

    The mode is referenced from the right end, so side ``+`` always opens a
    crack at ``s = 1`` first; for odd ``n`` it coincides with ``sin(n pi s)``.
    """
    q = n * np.pi
    return mesh.interpolate(lambda s: np.sin(q * (1 - s)), lambda s: -q * np.cos(q * (1 - s)))


def branch_switch(
    root: BifurcationRoot,
    side: int,
    p: ModelParams,
    mesh: Mesh,
    tau0: float = 1e-2,
    options: SolverOptions = SolverOptions(),
) -> BranchPoint:
    """First nontrivial point on one side of the pitchfork at ``root``.

    The predictor ``side * tau0 * sin(n pi (1 - s))`` at ``lam_n`` is corrected
    with ``lam`` free and the mode amplitude held at ``side * tau0``.
    """
    if not root.simple:
        raise ValueError(f"root n={root.n}, lambda={root.lambda_n} is not simple")
    if side not in (1, -1):
        raise ValueError("side must be +1 or -1")
    shape = mode_shape(root.n, mesh)
    c = amplitude_vector(root.n, mesh, from_right=True)
    guess = NodalState(lam=root.lambda_n, x=side * tau0 * shape)
    state, _ = active_set_solve(guess, (), p, mesh, options, side=SideCondition(c, 0.0, side * tau0))
    if np.max(np.abs(state.x)) < 1e-3 * tau0:
        raise AmplitudeTooSmallError(f"corrector returned the trivial state for tau0={tau0}")
    bif = NodalState.trivial(mesh, root.lambda_n)
    return make_point(state, p, mesh, arclength=_distance(state, bif, _metric(mesh)), event="switch")


def start_pitchfork(root, side, p, mesh, tau0=1e-2, options=SolverOptions(), retries=3) -> Branch:
    """Two-point branch: the bifurcation point and the first switched point."""
    for attempt in range(retries + 1):
        try:
            first = branch_switch(root, side, p, mesh, tau0 * 2**attempt, options)
            break
        except AmplitudeTooSmallError:
            if attempt == retries:
                raise
    bif = make_point(NodalState.trivial(mesh, root.lambda_n), p, mesh, event="bifurcation")
    return Branch(points=[bif, first], origin=pitchfork_origin(root.n, side))


# -------------------------------------------------------------- arclength


def constrained_tangent(state: NodalState, active, p: ModelParams, mesh: Mesh):
    """Null vector ``(dx, dlam, dmu)`` of the bordered equilibrium Jacobian."""
    active = tuple(sorted(active))
    n = mesh.n_dof
    A = constraint_jacobian(active, mesh)
    m = A.shape[0]
    trial = NodalState(lam=state.lam, x=state.x, active=active)
    J = np.zeros((n + m, n + 1 + m))
    J[:n, :n] = assemble_tangent(trial, p, mesh)
    J[:n, n] = assemble_residual_dlam(trial, p, mesh)
    J[:n, n + 1 :] = -A.T
    J[n:, :n] = A
    ns = linalg.null_space(J)
    v = ns[:, -1]
    return v[:n], float(v[n]), v[n + 1 :]


def _toggled_node(changes):
    added = {n for a, n in changes if a == "added"}
    removed = {n for a, n in changes if a == "removed"}
    both = added & removed
    for _, n in reversed(changes):
        if n in both:
            return n
    return None


def _locate_contact(cur: BranchPoint, j: int, p, mesh, options, contact_tol):
    """Point on the current branch where node ``j`` just touches, plus near-contacts."""
    e = np.zeros(mesh.n_dof)
    e[mesh.slope_dof(j)] = 1.0
    try:
        C, _ = newton_solve_fixed_active(cur.state, cur.active, p, mesh, options, SideCondition(e, 0.0, -1.0))
    except (NonConvergenceError, linalg.LinAlgError):
        return None
    slack = C.up(mesh) + 1.0
    inactive = [i for i in range(mesh.n_nodes) if i not in C.active and i != j]
    if C.mu.size and C.mu.min() < -options.sign_tol:
        return None
    if inactive and slack[inactive].min() < -options.sign_tol:
        return None
    cand = {j} | {i for i in inactive if slack[i] <= contact_tol}
    mu = dict(zip(C.active, C.mu))
    active = tuple(sorted(set(C.active) | {j}))
    C = NodalState(lam=C.lam, x=C.x, active=active, mu=[mu.get(a, 0.0) for a in active])
    return C, tuple(sorted(cand))


def _oriented_tangent(state, pending, p, mesh):
    active = tuple(sorted(set(state.active) | set(pending)))
    dx, dlam, dmu = constrained_tangent(state, active, p, mesh)
    idx = [active.index(i) for i in pending]
    sign = 1.0 if dmu[idx].sum() >= 0 else -1.0
    return sign * dx, sign * dlam


def trace_branch(
    branch: Branch,
    p: ModelParams,
    mesh: Mesh,
    policy: StepPolicy = StepPolicy(),
    options: SolverOptions = SolverOptions(),
    direction: int = 1,
    sink=None,
) -> Branch:
    """Continue ``branch`` by pseudo-arclength until a termination condition.

    ``branch`` needs at least two points (the secant seeds the predictor).
    ``direction = -1`` continues from the first point backwards.  ``sink``,
    if given, is called with every newly accepted point.

    Terminations: ``window_end`` (``lam`` left ``policy.lambda_window``),
    ``step_failure`` (step fell below ``policy.min_step``), ``user_stop``
    (``policy.max_points`` reached), ``healing`` (an active node was released;
    that last point is flagged and kept).
    """
    pts = list(branch.points if direction > 0 else reversed(branch.points))
    if len(pts) < 2:
        raise ValueError("trace_branch needs a branch with at least two points")
    out = Branch(points=pts, origin=branch.origin, termination=USER_STOP)
    theta = _metric(mesh)
    lo, hi = policy.lambda_window
    ctrl = pts[-1].controller or {}
    ds = ctrl.get("ds", policy.initial)
    succ = ctrl.get("successes", 0)
    pending = tuple(ctrl["pending"]) if ctrl.get("pending") else None
    contact_tol = policy.contact_tolerance(mesh)
    tangent_cache = None

    def accept(pt):
        pt.controller = {"ds": ds, "successes": succ, "pending": list(pending) if pending else None}
        pts.append(pt)
        if sink is not None:
            sink(pt)

    while len(pts) < policy.max_points:
        cur = pts[-1]
        if pending:
            if tangent_cache is None:
                tangent_cache = _oriented_tangent(cur.state, pending, p, mesh)
            dx, dlam = tangent_cache
        else:
            dx = cur.state.x - pts[-2].state.x
            dlam = cur.lam - pts[-2].lam
        nrm = np.sqrt(theta * dx @ dx + dlam * dlam)
        tx, tl = dx / nrm, dlam / nrm
        pred = NodalState(lam=cur.lam + ds * tl, x=cur.state.x + ds * tx, active=cur.active, mu=cur.state.mu)
        cond = SideCondition(theta * tx, tl, ds + theta * tx @ cur.state.x + tl * cur.lam)
        guess = set(cur.active) | set(pending or ())
        try:
            new, report = active_set_solve(pred, guess, p, mesh, options, side=cond)
        except CyclingError as exc:
            j = _toggled_node(exc.changes)
            if j is not None and not pending:
                if j in cur.active:
                    log.info("multiplier of node %d vanishes at lam=%.6f", j, cur.lam)
                    out.termination = HEALING
                    break
                found = _locate_contact(cur, j, p, mesh, options, contact_tol)
                if found is not None:
                    C, pending = found
                    tangent_cache = None
                    succ = 0
                    pt = make_point(C, p, mesh, arclength=cur.arclength + _distance(C, cur.state, theta), event="contact")
                    accept(pt)
                    log.info("contact at lam=%.6f, nodes %s", C.lam, pending)
                    continue
            ds, succ = ds / 2, 0
        except (NonConvergenceError, linalg.LinAlgError):
            ds, succ = ds / 2, 0
        else:
            released = set(cur.active) - set(new.active)
            succ += 1
            step_used = ds
            if succ >= policy.grow_after:
                ds, succ = min(2 * ds, policy.max_step), 0
            pending, tangent_cache = None, None
            pt = make_point(
                new, p, mesh, arclength=cur.arclength + _distance(new, cur.state, theta), step=step_used,
                healing=bool(released),
            )
            accept(pt)
            if released:
                out.termination = HEALING
                break
            if not lo <= new.lam <= hi:
                out.termination = WINDOW_END
                break
            continue
        if ds < policy.min_step:
            out.termination = STEP_FAILURE
            break
    if direction < 0:
        out.points = list(reversed(out.points))
    return out


def trace_pitchfork(root, side, p, mesh, policy=StepPolicy(), options=SolverOptions(), tau0=1e-2, sink=None) -> Branch:
    start = start_pitchfork(root, side, p, mesh, tau0, options)
    if sink is not None:
        for pt in start.points:
            sink(pt)
    return trace_branch(start, p, mesh, policy, options, sink=sink)


# --------------------------------------------------------------- symmetry


def reflect_state(state: NodalState, mesh: Mesh) -> NodalState:
    """Image under ``u(s) -> -u(1 - s)`` (the reflection symmetry of the problem)."""
    full = mesh.expand(state.x)
    u, up = full[0::2], full[1::2]
    out = np.empty_like(full)
    out[0::2] = -u[::-1]
    out[1::2] = up[::-1]
    N = mesh.n_elements
    active = tuple(sorted(N - a for a in state.active))
    mu = dict(zip(state.active, state.mu))
    return NodalState(lam=state.lam, x=out[mesh.free], active=active, mu=[mu[N - a] for a in active])


def shift_state(state: NodalState, mesh: Mesh, m: int) -> NodalState:
    """Shift by ``m`` elements of the odd, 2-periodic extension of ``u``.

    This maps one side of an even-mode pitchfork onto the other when
    ``m = N/n``.  Boundary values of the result are dropped, so it is exact
    only for states with the corresponding periodicity.
    """
    N = mesh.n_elements
    full = mesh.expand(state.x)
    u, up = full[0::2], full[1::2]
    ext_u = np.concatenate([u, -u[-2::-1]])  # nodes 0..2N on [0, 2]
    ext_up = np.concatenate([up, up[-2::-1]])
    idx = (np.arange(N + 1) + m) % (2 * N)
    out = np.empty_like(full)
    out[0::2], out[1::2] = ext_u[idx], ext_up[idx]
    mapped = {}
    for a, val in zip(state.active, state.mu):
        for b in range(N + 1):
            if (b + m) % (2 * N) in (a, (2 * N - a) % (2 * N)):
                mapped[b] = val
    active = tuple(sorted(mapped))
    return NodalState(lam=state.lam, x=out[mesh.free], active=active, mu=[mapped[a] for a in active])
