"""Crack patterns in a brittle layer bonded to an elastic core.

A one-dimensional strain-gradient model of a brittle coating on a
pseudo-rigid fiber, discretized with cubic-Hermite elements.  The package
covers linear analysis of the homogeneous state, an active-set solver for
the non-interpenetration constraint, arclength continuation with pitchfork
switching, KKT-inertia stability and post-processing of the equilibria.
"""

from .constitutive import DomainError, ModelParams, energy_direct, energy_inverse, stress_direct
from .continuation import Branch, BranchPoint, StepPolicy, branch_switch, trace_branch, trace_pitchfork, trace_trivial
from .fem import InfeasibleStateError, Mesh, NodalState
from .linearized import BifurcationRoot, NonGenericParameterError, critical_root, find_roots
from .postprocess import crack_census, energy_crossover, reconstruct_fields, stress_along_branch
from .solver import CyclingError, NonConvergenceError, SolverOptions, active_set_solve
from .stability import classify, inertia

__version__ = "0.1.0"
