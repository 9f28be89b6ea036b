"""Equilibrium densities of S1 and R1 on the unit disk.

S1 phi = 1 has phi = 4 / (pi sqrt(1 - r^2)) with mean 8.  For R1 the
solution is -(4/pi) sqrt(1 - r^2) with mean -8/3: at the center the finite
part of int sqrt(1 - |y|^2) / |y|^3 dy is -pi^2, so R1 sqrt(1 - r^2) = -pi/4.
The frequently quoted constant -2/3 is smaller by a factor 4.
"""

import time

import numpy as np

from patchasym import layer_ops as lo

for n in (16, 32, 64):
    t0 = time.perf_counter()
    s1, r1 = lo.op_S1("disk", n), lo.op_R1("disk", n)
    ms, mr = lo.solve_S1(s1, 1.0).mean(), lo.solve_R1(r1, 1.0).mean()
    print(f"n = {n:3d}: <S1^-1 1, 1> = {ms:.12f}  <R1^-1 1, 1> = {mr:.12f}  "
          f"cond(S1) = {s1.cond():.1f}  ({time.perf_counter() - t0:.1f} s)")

print(f"\n-8/3 = {-8 / 3:.12f}; three-dimensional coefficients: "
      f"Dirichlet {0.5 * ms:.6f}, Neumann {-0.5 * mr:.6f}")
