"""
Spectrum of the one-step operator
=================================

Without a barrier the operator L = d Q_{t1} acts on L^2(nu) with the Hermite
functions as eigenbasis and eigenvalues d, 1, 1/d, ...  The Nystrom matrix on
a wide Gauss-Legendre grid should reproduce the ladder.
"""
import numpy as np

from treegff import TreeParams
from treegff.spectral import assemble_operator, build_grid, top_eigenvalues

for d in (2, 3, 10):
    p = TreeParams(d)
    s = p.sigma
    op = assemble_operator(build_grid(-12 * s, 12 * s, 400, p), p)
    ev = top_eigenvalues(op, 6)
    exact = d ** (1.0 - np.arange(6))
    print(f"d={d:2d}  computed {np.array2string(ev, precision=6)}")
    print(f"       error    {np.abs(ev - exact).max():.2e}")

# the trace of L is the geometric sum d + 1 + 1/d + ... = d^2/(d-1)
p = TreeParams(2)
op = assemble_operator(build_grid(-12 * p.sigma, 12 * p.sigma, 400, p), p)
print("trace at d=2:", np.trace(op.matrix), "(expected 4)")
