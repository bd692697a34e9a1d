"""Characteristic roots of the homogeneous state and the neutral curves k(lam)."""

import numpy as np

from fibercrack.constitutive import ModelParams
from fibercrack.linearized import critical_root, find_roots, k_of_lambda, trivial_stability

for k in (2.0, 2.5, 10.0):
    p = ModelParams(k=k)
    roots = find_roots(p)
    crit = critical_root(roots)
    print(f"k={k}: {len(roots)} roots", end="")
    print(f", critical n={crit.n} at lambda={crit.lambda_n:.4f}" if crit else ", homogeneous state never loses stability")

p = ModelParams()
print("\nneutral curves k_n(lambda) for n=1..5")
for lam in np.linspace(1.5, 3.5, 5):
    print(f"  lambda={lam:.2f}  " + "  ".join(f"{k_of_lambda(lam, n, p):8.3f}" for n in range(1, 6)))
for lam in (2.40, 2.50):
    stable, n = trivial_stability(lam, p)
    print(f"lambda={lam:.2f}: trivial state {'stable' if stable else 'unstable'} (softest mode n={n})")
