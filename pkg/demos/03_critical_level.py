"""
Critical level and its brackets
===============================

h* solves lambda_h = 1.  Two explicit levels bracket it: h_delta from the
lower bound and h_square from the Gaussian upper bound; both sit below the
level sqrt(2 u*) obtained from the random interlacement comparison.
"""
from treegff import TreeParams
from treegff.critical import bound_chain

print(f"{'d':>3} {'h_delta':>10} {'h*':>10} {'h_square':>10} {'sqrt(2u*)':>10}  ok")
for d in range(2, 11):
    r = bound_chain(TreeParams(d))
    print(f"{d:3d} {r.h_delta:10.6f} {r.h_star:10.6f} {r.h_square:10.6f} {r.sqrt_2u_star:10.6f}  {r.chain_ok}")
