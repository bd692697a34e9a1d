"""Reconstruct H(y) and f(x) on a stable fractured state and list its cracks."""

from fibercrack.constitutive import ModelParams
from fibercrack.continuation import trace_pitchfork
from fibercrack.fem import Mesh
from fibercrack.linearized import critical_root, find_roots
from fibercrack.postprocess import crack_census, plateau_count, reconstruct_fields

for k in (2.0, 2.5):
    p = ModelParams(k=k)
    mesh = Mesh(100)
    root = critical_root(find_roots(p))
    for side in (+1, -1):
        branch = trace_pitchfork(root, side, p, mesh)
        final = [pt for pt in branch.visible() if pt.stable][-1]
        fields = reconstruct_fields(final.state, mesh)
        cracks = crack_census(final.state, mesh)
        print(f"k={k} side {'+' if side > 0 else '-'} at lambda={final.lam:.4f}: "
              f"{len(cracks)} cracks ({plateau_count(fields)} plateaus of H)")
        for c in cracks:
            print(f"    x={c.position:.4f} width={c.width:.4f}{' (end)' if c.end else ''}")
