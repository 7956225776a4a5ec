"""
Vacant paths of random interlacements
=====================================

A geodesic of n edges from x0 is vacant at level u with probability
exp(-u cap{x0}) * exp(-n u (d-1)^2 / d).  Against d^n paths this balances
exactly at u* = d log d / (d-1)^2.
"""
import math

from treegff import TreeParams
from treegff.critical import u_star
from treegff.simulate import interlacement_path_prob

for d in (2, 3, 5):
    p = TreeParams(d)
    us = u_star(p)
    print(f"d={d}  u*={us:.6f}  sqrt(2u*)={math.sqrt(2 * us):.6f}")
    for u in (0.8 * us, us, 1.2 * us):
        expected = [d**n * interlacement_path_prob(u, n, p) for n in (0, 5, 10)]
        print(f"   u={u:.4f}  d^n P(vacant path), n=0,5,10: " + "  ".join(f"{e:.4g}" for e in expected))
