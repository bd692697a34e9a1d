"""Cubic-Hermite finite elements for the scaled energy ``J*[lam, u]``.

Each node ``s_k`` carries two unknowns, ``u_k`` and ``u'_k``.  Full nodal
vectors are interleaved ``[u_0, u'_0, u_1, u'_1, ...]`` (length ``2(N+1)``);
the essential conditions ``u_0 = u_N = 0`` are removed by elimination, which
leaves the ``2N`` reduced degrees of freedom used by the solvers.

The integrand of ``J*`` is

    eps/2 (u'')^2 + lam^4 W*((1 + u')/lam) + k lam^5 / 2 u^2

(the null-Lagrangian part ``k lam^5/2 u^2 u'`` integrates to zero and is left
out of energy, residual and tangent alike).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .constitutive import ModelParams, energy_inverse


class InfeasibleStateError(ValueError):
    """The inverse deformation gradient is negative somewhere."""


@dataclass(frozen=True)
class Mesh:
    """Uniform mesh of ``[0, 1]`` with ``n_elements`` cubic-Hermite elements."""

    n_elements: int = 100
    n_gauss: int = 4

    def __post_init__(self):
        if self.n_elements < 1 or self.n_gauss < 1:
            raise ValueError("n_elements and n_gauss must be positive")

    @property
    def h(self) -> float:
        return 1.0 / self.n_elements

    @property
    def n_nodes(self) -> int:
        return self.n_elements + 1

    @property
    def n_dof(self) -> int:
        """Number of reduced unknowns (``2N``)."""
        return 2 * self.n_elements

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_nodes)

    @cached_property
    def _gauss(self):
        xi, w = np.polynomial.legendre.leggauss(self.n_gauss)
        return 0.5 * (xi + 1.0), 0.5 * w

    @cached_property
    def basis(self):
        """Basis values ``(B0, B1, B2)`` at the Gauss points, each ``(n_gauss, 4)``.

        Derivatives are with respect to ``s`` (already scaled by ``h``).
        """
        xi, _ = self._gauss
        return shape_functions(xi, self.h)

    @cached_property
    def weights(self) -> np.ndarray:
        return self._gauss[1] * self.h

    @cached_property
    def gauss_points(self) -> np.ndarray:
        """Physical Gauss-point coordinates, ``(n_elements, n_gauss)``."""
        return self.nodes[:-1, None] + self.h * self._gauss[0][None, :]

    @cached_property
    def element_dofs(self) -> np.ndarray:
        """Full-vector indices of each element's four unknowns."""
        e = np.arange(self.n_elements)
        return np.stack([2 * e, 2 * e + 1, 2 * e + 2, 2 * e + 3], axis=1)

    @cached_property
    def free(self) -> np.ndarray:
        """Full-vector indices of the reduced unknowns."""
        idx = np.arange(2 * self.n_nodes)
        return idx[(idx != 0) & (idx != 2 * self.n_elements)]

    def slope_dof(self, node: int) -> int:
        """Reduced index of ``u'`` at ``node``."""
        # full index 2j+1 loses one slot to u_0, and a second past u_N
        return 2 * node if node < self.n_elements else 2 * node - 1

    def expand(self, x: np.ndarray) -> np.ndarray:
        full = np.zeros(2 * self.n_nodes)
        full[self.free] = x
        return full

    def interpolate(self, func, dfunc) -> np.ndarray:
        """Reduced vector of the Hermite interpolant of ``func`` (values and slopes)."""
        full = np.empty(2 * self.n_nodes)
        full[0::2] = func(self.nodes)
        full[1::2] = dfunc(self.nodes)
        return full[self.free]


def shape_functions(xi, h: float = 1.0):
    """Cubic Hermite basis on an element of length ``h``.

    Returns value, first and second ``s``-derivative arrays of shape
    ``(len(xi), 4)``, ordered (left value, left slope, right value, right slope).
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    x2, x3 = xi * xi, xi**3
    one = np.ones_like(xi)
    B0 = np.stack([1 - 3 * x2 + 2 * x3, h * (xi - 2 * x2 + x3), 3 * x2 - 2 * x3, h * (x3 - x2)], axis=1)
    B1 = np.stack([(-6 * xi + 6 * x2) / h, 1 - 4 * xi + 3 * x2, (6 * xi - 6 * x2) / h, 3 * x2 - 2 * xi], axis=1)
    B2 = np.stack([(-6 * one + 12 * xi) / h**2, (-4 * one + 6 * xi) / h, (6 * one - 12 * xi) / h**2, (6 * xi - 2 * one) / h], axis=1)
    return B0, B1, B2


@dataclass
class NodalState:
    """Discrete equilibrium candidate.

    ``x`` holds the ``2N`` reduced unknowns; ``mu`` holds one multiplier per
    node in ``active`` (sorted node indices where ``u' = -1`` is enforced).
    """

    lam: float
    x: np.ndarray
    active: tuple = ()
    mu: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.active = tuple(sorted(int(a) for a in self.active))
        self.mu = np.asarray(self.mu, dtype=float).reshape(-1)
        if self.mu.size != len(self.active):
            if self.mu.size == 0:
                self.mu = np.zeros(len(self.active))
            else:
                raise ValueError("mu must have one entry per active node")

    @classmethod
    def trivial(cls, mesh: Mesh, lam: float) -> "NodalState":
        return cls(lam=float(lam), x=np.zeros(mesh.n_dof))

    def copy(self, **changes) -> "NodalState":
        base = replace(self, x=self.x.copy(), mu=self.mu.copy())
        return replace(base, **changes) if changes else base

    def full(self, mesh: Mesh) -> np.ndarray:
        return mesh.expand(self.x)

    def u(self, mesh: Mesh) -> np.ndarray:
        return self.full(mesh)[0::2]

    def up(self, mesh: Mesh) -> np.ndarray:
        return self.full(mesh)[1::2]


def constraint_jacobian(active, mesh: Mesh) -> np.ndarray:
    """Rows selecting the slope unknown of each active node (``M x 2N``)."""
    A = np.zeros((len(active), mesh.n_dof))
    for row, node in enumerate(active):
        if not 0 <= node <= mesh.n_elements:
            raise IndexError(f"active node {node} outside mesh")
        A[row, mesh.slope_dof(node)] = 1.0
    return A


def _fields(x, mesh: Mesh):
    U = mesh.expand(x)[mesh.element_dofs]
    B0, B1, B2 = mesh.basis
    return U @ B0.T, U @ B1.T, U @ B2.T


def quadrature_H(state: NodalState, mesh: Mesh) -> np.ndarray:
    """Inverse deformation gradient ``(1 + u')/lam`` at every Gauss point."""
    _, up, _ = _fields(state.x, mesh)
    return (1.0 + up) / state.lam


def assemble_energy(state: NodalState, p: ModelParams, mesh: Mesh, feas_tol: float | None = None):
    """Return ``(J*, I*)`` with ``I* = J*/lam^3``.

    With ``feas_tol`` set, a Gauss point with ``H < -feas_tol`` raises
    :class:`InfeasibleStateError`.
    """
    lam = state.lam
    u, up, upp = _fields(state.x, mesh)
    H = (1.0 + up) / lam
    if feas_tol is not None and H.min() < -feas_tol:
        raise InfeasibleStateError(f"H = {H.min():.3e} < 0 at a quadrature point")
    dens = 0.5 * p.epsilon * upp**2 + lam**4 * energy_inverse(H, p, 0, check=False) + 0.5 * p.k * lam**5 * u**2
    J = float(np.sum(dens @ mesh.weights))
    return J, J / lam**3


def _scatter_vector(local, mesh):
    full = np.zeros(2 * mesh.n_nodes)
    np.add.at(full, mesh.element_dofs, local)
    return full[mesh.free]


def assemble_residual(state: NodalState, p: ModelParams, mesh: Mesh) -> np.ndarray:
    """Gradient of ``J*`` with respect to the reduced unknowns."""
    lam = state.lam
    u, up, upp = _fields(state.x, mesh)
    H = (1.0 + up) / lam
    B0, B1, B2 = mesh.basis
    w = mesh.weights
    c2 = p.epsilon * upp * w
    c1 = lam**3 * energy_inverse(H, p, 1, check=False) * w
    c0 = p.k * lam**5 * u * w
    local = c2 @ B2 + c1 @ B1 + c0 @ B0
    return _scatter_vector(local, mesh)


def assemble_residual_dlam(state: NodalState, p: ModelParams, mesh: Mesh) -> np.ndarray:
    """Partial derivative of the residual with respect to ``lam``."""
    lam = state.lam
    u, up, _ = _fields(state.x, mesh)
    H = (1.0 + up) / lam
    B0, B1, _ = mesh.basis
    w = mesh.weights
    c1 = (3 * lam**2 * energy_inverse(H, p, 1, check=False) - lam * (1.0 + up) * energy_inverse(H, p, 2, check=False)) * w
    c0 = 5 * p.k * lam**4 * u * w
    return _scatter_vector(c1 @ B1 + c0 @ B0, mesh)


def assemble_tangent(state: NodalState, p: ModelParams, mesh: Mesh) -> np.ndarray:
    """Second variation of ``J*`` as a symmetric ``2N x 2N`` matrix."""
    lam = state.lam
    _, up, _ = _fields(state.x, mesh)
    H = (1.0 + up) / lam
    B0, B1, B2 = mesh.basis
    w = mesh.weights
    c2 = np.broadcast_to(p.epsilon * w, up.shape)
    c1 = lam**2 * energy_inverse(H, p, 2, check=False) * w
    c0 = np.broadcast_to(p.k * lam**5 * w, up.shape)
    local = (
        np.einsum("eg,gi,gj->eij", c2, B2, B2)
        + np.einsum("eg,gi,gj->eij", c1, B1, B1)
        + np.einsum("eg,gi,gj->eij", c0, B0, B0)
    )
    n = 2 * mesh.n_nodes
    K = np.zeros((n, n))
    dofs = mesh.element_dofs
    np.add.at(K, (dofs[:, :, None], dofs[:, None, :]), local)
    K = K[np.ix_(mesh.free, mesh.free)]
    return 0.5 * (K + K.T)


def amplitude_vector(n: int, mesh: Mesh, from_right: bool = False) -> np.ndarray:
    """Vector ``c`` with ``c @ x = 2 * integral(u(s) phi(s) ds)``.

    ``phi(s) = sin(n pi s)``, or ``sin(n pi (1 - s))`` when ``from_right``.
    """
    B0 = mesh.basis[0]
    s = 1.0 - mesh.gauss_points if from_right else mesh.gauss_points
    phi = np.sin(n * np.pi * s) * mesh.weights
    return _scatter_vector(2.0 * phi @ B0, mesh)


def mass_matrix(mesh: Mesh) -> np.ndarray:
    """``L2`` Gram matrix of the reduced basis (``x @ M @ x = integral u^2``)."""
    B0 = mesh.basis[0]
    local = np.einsum("g,gi,gj->ij", mesh.weights, B0, B0)
    n = 2 * mesh.n_nodes
    K = np.zeros((n, n))
    dofs = mesh.element_dofs
    np.add.at(K, (dofs[:, :, None], dofs[:, None, :]), np.broadcast_to(local, (mesh.n_elements, 4, 4)))
    return K[np.ix_(mesh.free, mesh.free)]


def null_lagrangian(x: np.ndarray, mesh: Mesh, n_gauss: int | None = None) -> float:
    """Quadrature value of ``integral(u^2 u')`` (zero when ``u(0) = u(1) = 0``).

    The integrand has degree 8 on each element, so the default 4-point rule
    leaves an ``O(h^8)`` remainder; ``n_gauss = 5`` integrates it exactly.
    """
    if n_gauss is not None and n_gauss != mesh.n_gauss:
        mesh = Mesh(mesh.n_elements, n_gauss)
    u, up, _ = _fields(x, mesh)
    return float(np.sum((u * u * up) @ mesh.weights))


def gram_matrix(mesh: Mesh) -> np.ndarray:
    """``H^2`` Gram matrix of the reduced basis: ``integral(u''^2 + u'^2 + u^2)``."""
    B0, B1, B2 = mesh.basis
    w = mesh.weights
    local = sum(np.einsum("g,gi,gj->ij", w, B, B) for B in (B0, B1, B2))
    n = 2 * mesh.n_nodes
    K = np.zeros((n, n))
    dofs = mesh.element_dofs
    np.add.at(K, (dofs[:, :, None], dofs[:, None, :]), np.broadcast_to(local, (mesh.n_elements, 4, 4)))
    return K[np.ix_(mesh.free, mesh.free)]
