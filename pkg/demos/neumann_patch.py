"""A Neumann patch on the Dirichlet arc of the unit disk.

The perturbation is O(eps^2) and its coefficient is pi/2 times
du_0/dn(0) dN/dn_y(x, 0).  Both normal derivatives come from residual flux
recovery, so the patch neighbourhood is meshed finely.
"""

import numpy as np

from patchasym import harness

cfg = harness.build_config({"scenario": "neumann2d", "eps_list": "2^-4..2^-9"})
records = harness.run_sweep(cfg)

print(f"{'eps':>10} {'delta':>12} {'predicted':>12} {'ratio':>8} {'zeta/e':>8}")
for r in records:
    print(f"{r.eps:10.3g} {r.computed_delta:12.4e} {r.predicted_delta:12.4e} "
          f"{r.computed_delta / r.predicted_delta:8.4f} {r.zeta_energy / r.e_value:8.4f}")

fits, _ = harness.evaluate(cfg, records)
f = fits["normalized delta"]
print(f"\nfitted exponent {f.exponent:.4f}, coefficient {f.coefficient:.4f} (pi/2 = {np.pi / 2:.4f})")
