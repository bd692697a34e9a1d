"""KKT inertia along a fractured branch compared with the reduced Hessian spectrum."""

from fibercrack.constitutive import ModelParams
from fibercrack.continuation import trace_pitchfork
from fibercrack.fem import Mesh
from fibercrack.linearized import critical_root, find_roots
from fibercrack.stability import classify_state, reduced_hessian_eigenvalues

p = ModelParams(k=2.0)
mesh = Mesh(60)
branch = trace_pitchfork(critical_root(find_roots(p)), +1, p, mesh)
prev = None
for pt in branch.visible():
    label, inert = classify_state(pt.state, p, mesh)
    if label != prev:
        ev = reduced_hessian_eigenvalues(pt.state, p, mesh)
        print(f"lambda={pt.lam:.4f}: {label:8s} inertia={inert} smallest reduced eigenvalue={ev.min():+.3e}")
        prev = label
