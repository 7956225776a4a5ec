"""
Sign clusters on the cable system
=================================

On the cable system the probability that the field keeps its sign along a
geodesic of n edges is (2/pi) arcsin(d^-n).  The estimator multiplies the
exact per-edge bridge probabilities 1 - exp(-2ab) along a sampled path.
"""
from treegff import TreeParams
from treegff.simulate import SimConfig, arcsine_check, expected_sign_front_bound

p = TreeParams(2)
cfg = SimConfig(p, 0.0, 0, replicas=200_000, seed=7)
for n in range(1, 6):
    c = arcsine_check(n, cfg)
    print(f"n={n}  MC {c.mc_estimate:.6f} +- {c.se:.6f}   exact {c.exact:.6f}   z {c.z_score:+.2f}")

# the expected sign front stays bounded: d^n (2/pi) arcsin(d^-n) -> 2/pi
for n in (1, 5, 20):
    print(f"n={n:2d}  bound {expected_sign_front_bound(n, p):.6f}")
