"""
The principal eigenvalue as a function of the barrier
======================================================

Killing the chain below h turns L into L_h, whose top eigenvalue lambda_h
decreases from d (no barrier) to 0.  The tree-indexed front grows like
lambda_h^n, so the crossing lambda_h = 1 is the percolation threshold.
"""
import numpy as np

from treegff import TreeParams
from treegff.critical import lower_bound, upper_bound
from treegff.spectral import lambda_h

p = TreeParams(2)
lam0 = lambda_h(0.0, p).lambda_h
print(f"lambda_0 = {lam0:.15f}")

print(f"{'h':>6} {'lower':>10} {'lambda_h':>10} {'upper':>10}")
for h in np.arange(-1.0, 2.01, 0.25):
    res = lambda_h(h, p)
    up = upper_bound(h, p, lam0) if h >= 0 else float("nan")
    print(f"{h:6.2f} {lower_bound(h, p):10.6f} {res.lambda_h:10.6f} {up:10.6f}")

# the truncation schedule behind one value
res = lambda_h(0.5, p)
for hp, lam in res.truncation_sequence:
    print(f"  h' = {hp:7.3f}   lambda_(h,h') = {lam:.15f}")
