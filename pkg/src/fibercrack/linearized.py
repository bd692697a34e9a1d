"""Linear analysis of the homogeneous (trivial) branch ``u = 0``.

Mode ``n`` of the linearization is ``sin(n pi s)``.  It is neutral when the
characteristic relation

    eps (n pi)^4 + lam^2 W*''(1/lam) (n pi)^2 + lam^5 k = 0

holds, and the sign of the scaled eigenvalue ``sigma_n(lam)`` decides whether
that mode stiffens or softens the homogeneous state.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize

from .constitutive import ModelParams, energy_inverse

ROOT_TOL = 1e-10
SIMPLE_TOL = 1e-8
COINCIDENT_TOL = 1e-8
DEFAULT_WINDOW = (1.01, 10.0)
GRID_STEP = 1e-3


class NonGenericParameterError(ValueError):
    """Two characteristic roots from different modes coincide."""

    def __init__(self, n1, n2, lam):
        super().__init__(
            f"non-generic parameters: modes n={n1} and n={n2} share the root "
            f"lambda={lam:.10g}"
        )
        self.modes = (n1, n2)
        self.lam = lam


@dataclass(frozen=True)
class BifurcationRoot:
    n: int
    lambda_n: float
    simple: bool = True
    is_critical: bool = False
    simplicity_value: float = float("nan")


def char_residual(lam, n, p: ModelParams):
    """Left side of the characteristic equation for mode ``n``."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0) or n < 1:
        raise ValueError("need lambda > 0 and n >= 1")
    q2 = (n * np.pi) ** 2
    w2 = energy_inverse(1.0 / lam, p, order=2)
    return p.epsilon * q2 * q2 + lam**2 * w2 * q2 + lam**5 * p.k


def char_residual_dlam(lam, n, p: ModelParams):
    """Derivative of :func:`char_residual` with respect to ``lam``.

    This is also the expression whose non-vanishing makes a root simple.
    """
    lam = np.asarray(lam, dtype=float)
    q2 = (n * np.pi) ** 2
    w2 = energy_inverse(1.0 / lam, p, order=2)
    w3 = energy_inverse(1.0 / lam, p, order=3)
    return q2 * (2.0 * lam * w2 - w3) + 5.0 * lam**4 * p.k


def k_of_lambda(lam, n, p: ModelParams):
    """Interface stiffness at which ``lam`` is a characteristic root of mode ``n``."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("lambda must be positive")
    q2 = (n * np.pi) ** 2
    w2 = energy_inverse(1.0 / lam, p, order=2)
    return -p.epsilon * q2 * q2 / lam**5 - w2 * q2 / lam**3


def simplicity_check(root: BifurcationRoot, p: ModelParams):
    """Return ``(value, is_simple)`` for a characteristic root."""
    value = float(char_residual_dlam(root.lambda_n, root.n, p))
    return value, abs(value) > SIMPLE_TOL


def _refine(n, a, b, p):
    f = lambda x: float(char_residual(x, n, p))
    x = 0.5 * (a + b)
    for _ in range(50):
        fx = f(x)
        if abs(fx) <= ROOT_TOL:
            if a <= x <= b:
                return x
            break
        dx = fx / float(char_residual_dlam(x, n, p))
        x -= dx
        if not np.isfinite(x) or x <= 0:
            break
    # Newton left the bracket or stalled
    return optimize.bisect(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def find_roots(p: ModelParams, n_max: int = 10, lambda_window=DEFAULT_WINDOW, step=GRID_STEP):
    """Characteristic roots of modes ``1..n_max`` inside ``lambda_window``.

    Sign changes of ``k_of_lambda(., n) - k`` on a uniform grid are bracketed
    and refined on the characteristic residual.  The smallest root overall is
    flagged critical.

    Raises
    ------
    NonGenericParameterError
        If roots of two different modes coincide to within ``1e-8``.
    """
    lo, hi = lambda_window
    if n_max < 1 or lo <= 1.0 or hi <= lo:
        raise ValueError("need n_max >= 1 and 1 < lo < hi")
    grid = np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)
    roots = []
    for n in range(1, n_max + 1):
        g = k_of_lambda(grid, n, p) - p.k
        idx = np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) <= 0)[0]
        found = []
        for i in idx:
            if g[i] == 0.0 and i > 0 and g[i - 1] * g[i + 1] > 0:
                continue  # tangency on the grid
            if g[i + 1] == 0.0 and i + 1 in idx:
                continue  # counted by the next bracket
            lam = _refine(n, grid[i], grid[i + 1], p)
            if not found or abs(lam - found[-1]) > COINCIDENT_TOL:
                found.append(lam)
        for lam in found:
            r = BifurcationRoot(n=n, lambda_n=float(lam))
            value, simple = simplicity_check(r, p)
            roots.append(replace(r, simple=simple, simplicity_value=value))

    roots.sort(key=lambda r: (r.lambda_n, r.n))
    for a, b in zip(roots, roots[1:]):
        if a.n != b.n and abs(a.lambda_n - b.lambda_n) <= COINCIDENT_TOL:
            raise NonGenericParameterError(a.n, b.n, a.lambda_n)
    if roots:
        roots[0] = replace(roots[0], is_critical=True)
    roots.sort(key=lambda r: (r.n, r.lambda_n))
    return roots


def critical_root(roots):
    for r in roots:
        if r.is_critical:
            return r
    return None


def trivial_eigenvalue(lam, n, p: ModelParams):
    """Scaled eigenvalue ``sigma_n`` of the trivial-branch linearization."""
    lam = np.asarray(lam, dtype=float)
    q2 = (n * np.pi) ** 2
    w2 = energy_inverse(1.0 / lam, p, order=2)
    return p.k + (p.epsilon * q2 * q2 + lam**2 * w2 * q2) / lam**5


def trivial_stability(lam: float, p: ModelParams, n_max: int = 10):
    """Return ``(stable, mode)`` where ``mode`` minimizes ``sigma_n`` over ``n <= n_max``."""
    sig = [float(trivial_eigenvalue(lam, n, p)) for n in range(1, n_max + 1)]
    i = int(np.argmin(sig))
    return sig[i] > 0.0, i + 1


def curves(p: ModelParams, n_max: int = 5, lambda_window=DEFAULT_WINDOW, step=GRID_STEP):
    """Rows ``(n, lam, k_of_lambda)`` on the bracketing grid, mode-major."""
    lo, hi = lambda_window
    grid = np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)
    rows = []
    for n in range(1, n_max + 1):
        kk = k_of_lambda(grid, n, p)
        rows.extend((n, float(x), float(y)) for x, y in zip(grid, kk))
    return rows
