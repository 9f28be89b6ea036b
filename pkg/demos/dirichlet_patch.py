"""A Dirichlet patch on the Neumann arc of the unit disk.

Shrinks the patch from 2^-4 to 2^-9 and compares u_eps(x) - u_0(x) with the
leading 1/|log eps| term.  The normalized coefficient converges slowly (the
next term is O(1/|log eps|^2)), so it is extrapolated in t = 1/|log eps|.
"""

import numpy as np

from patchasym import harness

cfg = harness.build_config({"scenario": "dirichlet2d", "eps_list": "2^-4..2^-9"})
records = harness.run_sweep(cfg)

print(f"{'eps':>10} {'nodes':>6} {'delta':>12} {'predicted':>12} {'coef':>8}")
for r in records:
    coef = -r.computed_delta * abs(np.log(r.eps)) / (r.value_at_0 * r.kernel_at_0)
    print(f"{r.eps:10.3g} {r.n_nodes:6.0f} {r.computed_delta:12.4e} {r.predicted_delta:12.4e} {coef:8.4f}")

fits, checks = harness.evaluate(cfg, records)
print(f"\nextrapolated coefficient {fits['normalized delta'].coefficient:.4f} (pi = {np.pi:.4f})")
for name, ok, detail in checks:
    print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
