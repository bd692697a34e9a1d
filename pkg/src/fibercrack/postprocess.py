"""Derived quantities of equilibria: stress, fields, cracks, energy crossover.

Fields are reported in two coordinates.  ``H(y) = (1 + u'(s))/lam`` lives on
the deformed interval ``y = lam s`` in ``[0, lam]``; the deformation
``f(x) = lam inf{s : s + u(s) >= x}`` lives on the reference interval
``[0, 1]`` and jumps across every crack.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import interpolate, optimize

from .constitutive import ModelParams, energy_inverse
from .fem import InfeasibleStateError, Mesh, NodalState, _fields, assemble_energy, shape_functions
from .solver import SolverOptions, active_set_solve

NODAL_FEAS_TOL = 1e-10
FOLD_TOL = 1e-12


# ----------------------------------------------------------------- stress


def _three_point(x, y, i, j, k, at):
    """Derivative at ``x[at]`` of the quadratic through points ``i, j, k``."""
    xi, xj, xk = x[i], x[j], x[k]
    t = x[at]
    return (
        y[i] * (2 * t - xj - xk) / ((xi - xj) * (xi - xk))
        + y[j] * (2 * t - xi - xk) / ((xj - xi) * (xj - xk))
        + y[k] * (2 * t - xi - xj) / ((xk - xi) * (xk - xj))
    )


def _segment_derivative(lam, val):
    n = len(lam)
    if n == 2:
        d = (val[1] - val[0]) / (lam[1] - lam[0])
        return np.array([d, d])
    out = np.empty(n)
    out[0] = _three_point(lam, val, 0, 1, 2, 0)
    out[-1] = _three_point(lam, val, n - 3, n - 2, n - 1, n - 1)
    for i in range(1, n - 1):
        out[i] = _three_point(lam, val, i - 1, i, i + 1, i)
    return out


def _breaks(lams, events):
    """Indices where the branch is split: folds in ``lam`` and contact kinks."""
    cuts = []
    dl = np.diff(lams)
    for i in range(1, len(lams) - 1):
        if events[i] == "contact" or dl[i - 1] * dl[i] <= 0 or abs(dl[i]) < FOLD_TOL:
            cuts.append(i)
    return cuts


def stress_values(lams, energies, events=None):
    """``dI*/dlam`` along an ordered sequence of branch points.

    The sequence is split at folds (``lam`` turns back) and at contact
    events, where the branch has a corner.  Inside each piece the
    non-uniform three-point formula is used (one-sided at the ends of a piece).
    Points shared by two pieces get the mean of the two one-sided values
    and are flagged.

    Returns ``(sigma, flags)``.
    """
    lams = np.asarray(lams, dtype=float)
    energies = np.asarray(energies, dtype=float)
    n = len(lams)
    if n < 3:
        raise ValueError("need at least three branch points")
    if events is None:
        events = [None] * n
    cuts = _breaks(lams, events)
    bounds = [0] + cuts + [n - 1]
    acc = np.zeros(n)
    cnt = np.zeros(n)
    for a, b in zip(bounds, bounds[1:]):
        seg = slice(a, b + 1)
        L, E = lams[seg], energies[seg]
        if b - a < 1 or np.any(np.abs(np.diff(L)) < FOLD_TOL):
            continue
        acc[seg] += _segment_derivative(L, E)
        cnt[seg] += 1
    sigma = np.where(cnt > 0, acc / np.maximum(cnt, 1), np.nan)
    flags = np.zeros(n, dtype=bool)
    flags[cuts] = True
    # isolated points between two folds: fall back to the neighbours
    bad = np.isnan(sigma)
    if bad.any():
        good = ~bad
        sigma[bad] = np.interp(np.nonzero(bad)[0], np.nonzero(good)[0], sigma[good])
        flags |= bad
    return sigma, flags


def stress_along_branch(branch):
    """Fill ``stress`` and ``stress_flag`` of every point of ``branch``."""
    pts = branch.points
    sigma, flags = stress_values([pt.lam for pt in pts], [pt.energy for pt in pts], [pt.event for pt in pts])
    for pt, s, f in zip(pts, sigma, flags):
        pt.stress = float(s)
        pt.stress_flag = bool(f)
    return branch


def energy_dlam(state: NodalState, p: ModelParams, mesh: Mesh) -> float:
    """Partial derivative of ``I*`` in ``lam`` at fixed ``x``.

    At an equilibrium this equals the stress (the constraint does not depend
    on ``lam``), so it serves as a check on the differenced values.
    """
    lam = state.lam
    u, up, _ = _fields(state.x, mesh)
    H = (1.0 + up) / lam
    dens = (
        4 * lam**3 * energy_inverse(H, p, 0, check=False)
        - lam**2 * (1.0 + up) * energy_inverse(H, p, 1, check=False)
        + 2.5 * p.k * lam**4 * u**2
    )
    dJ = float(np.sum(dens @ mesh.weights))
    J, _ = assemble_energy(state, p, mesh)
    return dJ / lam**3 - 3.0 * J / lam**4


# ----------------------------------------------------------------- fields


@dataclass
class Fields:
    s: np.ndarray
    y: np.ndarray
    H: np.ndarray
    h: np.ndarray
    x: np.ndarray
    f: np.ndarray
    lam: float


def _sample(state: NodalState, mesh: Mesh, per_element: int):
    xi = np.linspace(0.0, 1.0, per_element + 1)[:-1]
    B0, B1, _ = shape_functions(xi, mesh.h)
    U = state.full(mesh)[mesh.element_dofs]
    s = (mesh.nodes[:-1, None] + mesh.h * xi[None, :]).ravel()
    u = (U @ B0.T).ravel()
    up = (U @ B1.T).ravel()
    full = state.full(mesh)
    return np.append(s, 1.0), np.append(u, full[-2]), np.append(up, full[-1])


def deformation(x, s, h, lam):
    """``lam inf{s : h(s) >= x}`` from samples of a (numerically) monotone ``h``."""
    hm = np.maximum.accumulate(h)
    x = np.asarray(x, dtype=float)
    i = np.searchsorted(hm, x, side="left")
    i = np.clip(i, 1, len(hm) - 1)
    h0, h1 = hm[i - 1], hm[i]
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(h1 > h0, (x - h0) / (h1 - h0), 1.0)
    t = np.clip(t, 0.0, 1.0)
    sv = s[i - 1] + t * (s[i] - s[i - 1])
    sv = np.where(x <= hm[0], s[0], sv)
    return lam * sv


def reconstruct_fields(state: NodalState, mesh: Mesh, samples_per_element: int = 10) -> Fields:
    """Sample ``H`` on ``[0, lam]`` and ``f`` on ``[0, 1]``.

    ``H`` is the Hermite interpolant; inside a crack it may dip below zero
    between active nodes by the interpolation error, so feasibility is
    checked at the nodes, where the constraint is imposed.
    """
    if samples_per_element < 1:
        raise ValueError("samples_per_element must be positive")
    nodal = (1.0 + state.up(mesh)) / state.lam
    if nodal.min() < -NODAL_FEAS_TOL:
        node = int(np.argmin(nodal))
        raise InfeasibleStateError(f"H = {nodal[node]:.3e} < 0 at node {node}")
    s, u, up = _sample(state, mesh, samples_per_element)
    lam = state.lam
    h = s + u
    x = np.linspace(0.0, 1.0, len(s))
    return Fields(s=s, y=lam * s, H=(1.0 + up) / lam, h=h, x=x, f=deformation(x, s, h, lam), lam=lam)


def plateau_count(fields: Fields, tol: float = 0.05) -> int:
    """Number of maximal runs of samples with ``H * lam <= tol``.

    Independent of the active set; used to cross-check :func:`crack_census`.
    """
    low = fields.H * fields.lam <= tol
    if not low.any():
        return 0
    return int(low[0]) + int(np.sum(low[1:] & ~low[:-1]))


# ----------------------------------------------------------------- census


@dataclass(frozen=True)
class Crack:
    position: float  # reference coordinate x
    width: float  # extent in y
    nodes: tuple
    end: bool


def crack_census(state: NodalState, mesh: Mesh) -> list:
    """Cracks as maximal runs of consecutive active nodes."""
    if not state.active:
        return []
    h = mesh.nodes + state.u(mesh)
    runs, run = [], [state.active[0]]
    for a in state.active[1:]:
        if a == run[-1] + 1:
            run.append(a)
        else:
            runs.append(run)
            run = [a]
    runs.append(run)
    out = []
    for r in runs:
        # h varies by O(h^2) between active nodes; pin end cracks to the boundary
        if r[0] == 0:
            pos = 0.0
        elif r[-1] == mesh.n_elements:
            pos = 1.0
        else:
            pos = float(np.mean(h[r])) + 0.0
        out.append(
            Crack(
                position=pos,
                width=float(state.lam * (mesh.nodes[r[-1]] - mesh.nodes[r[0]])),
                nodes=(r[0], r[-1]),
                end=r[0] == 0 or r[-1] == mesh.n_elements,
            )
        )
    return out


# --------------------------------------------------------------- crossover


@dataclass
class Crossover:
    lam: float = float("nan")
    found: bool = False
    degenerate: bool = False
    bracket: tuple | None = None
    refined: bool = False
    crossings: list = field(default_factory=list)


def _stable_points(branch):
    return [pt for pt in branch.points if pt.stable and not pt.healing]


def energy_crossover(trivial, fractured, refine=None, atol: float = 1e-12) -> Crossover:
    """Load at which the stable fractured energy meets the stable trivial energy.

    The trivial energy is a cubic spline through the stable trivial points.
    Sign changes of the difference between consecutive stable fractured
    points are located by inverse linear interpolation, or by
    ``refine(pa, pb)`` when given.  The reported ``lam`` is the last crossing
    in ``lam``, past which the fractured state has the lower energy.
    """
    tv = _stable_points(trivial)
    fr = _stable_points(fractured)
    if len(tv) < 2 or len(fr) < 2:
        return Crossover()
    tl = np.array([pt.lam for pt in tv])
    order = np.argsort(tl)
    tl = tl[order]
    te = np.array([pt.energy for pt in tv])[order]
    spline = interpolate.CubicSpline(tl, te) if len(tl) >= 4 else interpolate.interp1d(tl, te)
    lo, hi = tl[0], tl[-1]

    idx = [i for i, pt in enumerate(fractured.points) if pt.stable and not pt.healing and lo <= pt.lam <= hi]
    diffs = {i: fractured.points[i].energy - float(spline(fractured.points[i].lam)) for i in idx}
    if not diffs:
        return Crossover()
    if all(abs(d) <= atol for d in diffs.values()):
        return Crossover(degenerate=True)
    res = Crossover()
    for a, b in zip(idx, idx[1:]):
        if b != a + 1:
            continue
        da, db = diffs[a], diffs[b]
        if da == 0.0 or da * db >= 0:
            continue
        pa, pb = fractured.points[a], fractured.points[b]
        if refine is not None:
            lam = float(refine(pa, pb))
            res.refined = True
        else:
            lam = pa.lam - da * (pb.lam - pa.lam) / (db - da)
        res.crossings.append((lam, (pa.lam, pb.lam)))
    if not res.crossings:
        return res
    res.lam, res.bracket = max(res.crossings)
    res.found = True
    return res


def fixed_load_refiner(p: ModelParams, mesh: Mesh, trivial_energy, options: SolverOptions = SolverOptions()):
    """Refinement callback for :func:`energy_crossover`.

    Solves the equilibrium at fixed ``lam`` between the two bracketing points
    (guess linearly interpolated, active set of the nearer point) and finds
    the zero of the energy difference with Brent's method.
    """

    def refine(pa, pb):
        def gap(lam):
            t = (lam - pa.lam) / (pb.lam - pa.lam)
            near = pa if t < 0.5 else pb
            guess = NodalState(lam=lam, x=(1 - t) * pa.state.x + t * pb.state.x, active=near.active, mu=near.state.mu)
            state, _ = active_set_solve(guess, near.active, p, mesh, options)
            return assemble_energy(state, p, mesh)[1] - float(trivial_energy(lam))

        return optimize.brentq(gap, pa.lam, pb.lam, xtol=1e-12)

    return refine


# -------------------------------------------------------------------- CSV

BRANCH_COLUMNS = ("lam", "stress", "energy", "stable", "crack_count")
H_COLUMNS = ("y", "H")
F_COLUMNS = ("x", "f")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def branch_rows(branch, mesh: Mesh, include_healing: bool = False):
    pts = branch.points if include_healing else branch.visible()
    return [(pt.lam, pt.stress, pt.energy, pt.stable, len(crack_census(pt.state, mesh))) for pt in pts]


def write_branch_csv(path, branch, mesh: Mesh, include_healing: bool = False):
    write_csv(path, BRANCH_COLUMNS, branch_rows(branch, mesh, include_healing))


def write_fields_csv(prefix, fields: Fields):
    """Write ``<prefix>_H.csv`` (y, H) and ``<prefix>_f.csv`` (x, f)."""
    write_csv(f"{prefix}_H.csv", H_COLUMNS, zip(fields.y, fields.H))
    write_csv(f"{prefix}_f.csv", F_COLUMNS, zip(fields.x, fields.f))
    return f"{prefix}_H.csv", f"{prefix}_f.csv"
