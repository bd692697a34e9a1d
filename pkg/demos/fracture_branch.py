"""Trace the trivial branch and one pitchfork side at k = 2 and locate the energy crossover."""

from scipy import interpolate

from fibercrack.constitutive import ModelParams
from fibercrack.continuation import trace_pitchfork, trace_trivial
from fibercrack.fem import Mesh
from fibercrack.linearized import critical_root, find_roots
from fibercrack.postprocess import crack_census, energy_crossover, fixed_load_refiner, stress_along_branch

p = ModelParams(k=2.0)
mesh = Mesh(100)
root = critical_root(find_roots(p))
trivial = stress_along_branch(trace_trivial(p, mesh, (1.05, 3.5)))
branch = stress_along_branch(trace_pitchfork(root, +1, p, mesh))

print(f"bifurcation at lambda={root.lambda_n:.4f} (mode n={root.n}), branch ended by {branch.termination}")
print(f"{'lambda':>9} {'stress':>9} {'energy':>10} {'stable':>7} cracks")
for pt in branch.visible()[::4]:
    print(f"{pt.lam:9.4f} {pt.stress:9.4f} {pt.energy:10.5f} {str(pt.stable):>7} {len(crack_census(pt.state, mesh))}")

spline = interpolate.CubicSpline(trivial.lams, trivial.energies)
cross = energy_crossover(trivial, branch, refine=fixed_load_refiner(p, mesh, spline))
print(f"\nfractured state has lower energy beyond lambda_E={cross.lam:.5f}")
