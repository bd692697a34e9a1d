"""Local stability of equilibria from the inertia of the KKT matrix.

An equilibrium with ``M`` active nodes is locally stable when the second
variation is positive on variations that keep ``eta' = 0`` at the active
nodes (crack healing is excluded).  With ``A`` of full row rank this holds
exactly when ``inertia(K) = (2N, M, 0)`` for ``K = [[G, A^T], [A, 0]]``.

The condition number of ``G`` grows like ``h^-4``, so a relative zero
threshold on the raw eigenvalues would misread small but genuine positive
eigenvalues as zero on fine meshes.  Before counting, ``K`` is replaced by the
congruent ``diag(L^-1, I) K diag(L^-T, I)`` with ``L L^T`` the ``H^2`` Gram
matrix; this keeps the inertia and makes the ``G`` block's eigenvalues the
dimensionless ratios ``delta^2 J / |eta|_{H^2}^2``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import linalg

from .constitutive import ModelParams
from .fem import Mesh, NodalState, assemble_tangent, constraint_jacobian, gram_matrix

STABLE = "stable"
UNSTABLE = "unstable"
MARGINAL = "marginal"

ZERO_TOL = 1e-8


def _jacobi_scale(K):
    d = np.sqrt(np.abs(np.diag(K)))
    d[d == 0.0] = 1.0
    return K / d[:, None] / d[None, :]


def inertia(K, rel_tol: float = ZERO_TOL):
    """Counts ``(n_plus, n_minus, n_zero)`` of eigenvalue signs of symmetric ``K``.

    Eigenvalues are taken of the Jacobi-scaled congruent matrix ``D K D``
    (same inertia by Sylvester's law); an eigenvalue is zero when its modulus
    is at most ``rel_tol`` times the largest modulus.  Without the scaling the
    ``h^-4`` spread of the Hermite stiffness would swamp the threshold.
    """
    K = np.asarray(K, dtype=float)
    if K.size == 0:
        return (0, 0, 0)
    ev = linalg.eigvalsh(_jacobi_scale(0.5 * (K + K.T)))
    tol = rel_tol * np.max(np.abs(ev))
    return int(np.sum(ev > tol)), int(np.sum(ev < -tol)), int(np.sum(np.abs(ev) <= tol))


@lru_cache(maxsize=8)
def _gram_factor(mesh: Mesh) -> np.ndarray:
    L = linalg.cholesky(gram_matrix(mesh), lower=True)
    L.setflags(write=False)
    return L


def kkt_matrix(state: NodalState, p: ModelParams, mesh: Mesh, congruent: bool = True) -> np.ndarray:
    """KKT matrix of ``state``, by default in the Gram-scaled congruent form."""
    G = assemble_tangent(state, p, mesh)
    A = constraint_jacobian(state.active, mesh)
    m = A.shape[0]
    if congruent:
        L = _gram_factor(mesh)
        Y = linalg.solve_triangular(L, G, lower=True)
        G = linalg.solve_triangular(L, Y.T, lower=True)
        G = 0.5 * (G + G.T)
        A = linalg.solve_triangular(L, A.T, lower=True).T
    return np.block([[G, A.T], [A, np.zeros((m, m))]])


def classify_inertia(inert, n_dof: int, m: int) -> str:
    if inert[2] > 0:
        return MARGINAL
    return STABLE if tuple(inert) == (n_dof, m, 0) else UNSTABLE


def classify_state(state: NodalState, p: ModelParams, mesh: Mesh):
    """Return ``(label, inertia)`` with label one of stable/unstable/marginal."""
    inert = inertia(kkt_matrix(state, p, mesh))
    return classify_inertia(inert, mesh.n_dof, len(state.active)), inert


def classify(point, p: ModelParams, mesh: Mesh) -> str:
    """Stability label of a branch point (anything with a ``state`` attribute)."""
    return classify_state(point.state, p, mesh)[0]


def reduced_hessian_eigenvalues(state: NodalState, p: ModelParams, mesh: Mesh) -> np.ndarray:
    """Eigenvalues of ``Z^T G Z`` with ``Z`` an orthonormal null-space basis of ``A``."""
    G = assemble_tangent(state, p, mesh)
    A = constraint_jacobian(state.active, mesh)
    Z = linalg.null_space(A) if A.shape[0] else np.eye(mesh.n_dof)
    return linalg.eigvalsh(Z.T @ G @ Z)
