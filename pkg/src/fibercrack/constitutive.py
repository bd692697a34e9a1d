"""Stored energy of the brittle layer in direct and inverse form.

The direct energy is ``W(F) = beta/6 (1 - 1/F)^2``; the inverse-form energy is
``W*(H) = H W(1/H) = beta/6 H (1 - H)^2``, a two-well potential with wells at
``H = 0`` (broken) and ``H = 1`` (undeformed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# round-off slack tolerated for H before it counts as inadmissible
H_CLAMP = 1e-12


class DomainError(ValueError):
    """Raised when a constitutive function is evaluated outside its domain."""


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the reduced (pseudo-rigid core) model.

    Attributes
    ----------
    epsilon : float
        Coefficient of the strain-gradient interfacial energy.
    beta : float
        Apparent elastic modulus of the brittle layer.
    k : float
        Interface spring stiffness per unit length.
    """

    epsilon: float = 0.03
    beta: float = 3.0
    k: float = 2.0

    def __post_init__(self):
        for name in ("epsilon", "beta", "k"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be positive, got {value!r}")

    def with_k(self, k: float) -> "ModelParams":
        return ModelParams(epsilon=self.epsilon, beta=self.beta, k=k)


def energy_direct(F, p: ModelParams):
    """Direct stored energy ``W(F)`` for deformation gradient ``F > 0``."""
    F = np.asarray(F, dtype=float)
    if np.any(F <= 0):
        raise DomainError("deformation gradient must be positive")
    out = p.beta / 6.0 * (1.0 - 1.0 / F) ** 2
    return out if out.ndim else float(out)


def energy_inverse(H, p: ModelParams, order: int = 0, check: bool = True):
    """Inverse-form energy ``W*(H)`` or its derivative of the given order.

    Parameters
    ----------
    H : float or ndarray
        Inverse deformation gradient.
    order : {0, 1, 2, 3}
        Derivative order.
    check : bool
        When True, ``H < 0`` raises :class:`DomainError` (values within
        round-off of zero are clamped). Assembly routines pass ``False``
        because nodal constraints do not control H between nodes.
    """
    H = np.asarray(H, dtype=float)
    if check:
        if np.any(H < -H_CLAMP):
            raise DomainError("inverse deformation gradient must be non-negative")
        H = np.maximum(H, 0.0)
    b = p.beta
    if order == 0:
        out = b / 6.0 * H * (1.0 - H) ** 2
    elif order == 1:
        out = b / 6.0 * (1.0 - 4.0 * H + 3.0 * H * H)
    elif order == 2:
        out = b / 3.0 * (3.0 * H - 2.0)
    elif order == 3:
        out = np.full_like(H, b)
    else:
        raise ValueError(f"order must be 0..3, got {order}")
    return out if out.ndim else float(out)


def stress_direct(F, p: ModelParams):
    """Uniform-stretch stress ``dW/dF = beta/3 (1 - 1/F) / F^2``."""
    F = np.asarray(F, dtype=float)
    if np.any(F <= 0):
        raise DomainError("deformation gradient must be positive")
    out = p.beta / 3.0 * (1.0 - 1.0 / F) / F**2
    return out if out.ndim else float(out)
