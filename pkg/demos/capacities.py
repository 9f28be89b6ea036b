"""Capacities of small segments and the boundary surrogates of an arc.

cap(eps) behaves like 2 pi / |log eps|, the Neumann capacity like pi eps^2,
and D(arc) / int dist tends to 2/3.
"""

import numpy as np

from patchasym import capacity

print(f"{'eps':>8} {'cap':>9} {'cap|log|':>9} {'gap':>9} {'e':>10} {'e/eps^2':>8} {'D/dist':>8}")
for eps in 2.0 ** -np.arange(3, 9):
    c = capacity.cap(eps)
    e = capacity.neumann_capacity(eps)
    arc = (np.pi / 2 - eps, np.pi / 2 + eps)
    ratio = capacity.d_surrogate(arc) / capacity.dist_integral(arc)
    print(f"{eps:8.4f} {c.value:9.5f} {c.value * abs(np.log(eps)):9.4f} {c.upper - c.lower:9.1e} "
          f"{e.value:10.3e} {e.value / eps**2:8.4f} {ratio:8.5f}")
