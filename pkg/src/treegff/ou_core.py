"""Scalar building blocks for the Gaussian free field on the (d+1)-regular tree.

Everything here is a closed-form function: the stationary Gaussian law ``nu``
of the field, the Gaussian upper tail, the Hermite eigenbasis of the
Ornstein-Uhlenbeck semigroup, the kernel of ``L = d * Q_{log d}`` with respect
to ``nu`` and the tree Green function.

All functions accept numpy arrays wherever a real argument is expected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

MAX_HERMITE_ORDER = 20


@dataclass(frozen=True)
class TreeParams:
    """Degree parameter ``d`` (tree degree ``d + 1``) and derived constants."""

    d: int
    sigma2: float = field(init=False)
    t1: float = field(init=False)
    cap_point: float = field(init=False)

    def __post_init__(self):
        if isinstance(self.d, bool) or int(self.d) != self.d or self.d < 2:
            raise ValueError(f"d must be an integer >= 2, got {self.d!r}")
        d = int(self.d)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "sigma2", d / (d * d - 1))
        object.__setattr__(self, "t1", math.log(d))
        object.__setattr__(self, "cap_point", (d * d - 1) / d)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @property
    def kernel_prefactor(self) -> float:
        """``d^2 / sqrt(d^2 - 1)``."""
        return self.d**2 / math.sqrt(self.d**2 - 1)


def log_nu_density(a, p: TreeParams):
    a = np.asarray(a, dtype=float)
    return -0.5 * math.log(2 * math.pi * p.sigma2) - a * a / (2 * p.sigma2)


def nu_density(a, p: TreeParams):
    """Density of the centred Gaussian law with variance ``sigma^2 = d/(d^2-1)``."""
    out = np.exp(log_nu_density(a, p))
    return out if out.ndim else float(out)


def phi_bar(a):
    """Standard Gaussian upper tail ``P[N(0,1) > a]``.

    ``ndtr(-a)`` goes through ``erfc`` and keeps full relative accuracy deep
    in the upper tail.
    """
    out = special.ndtr(-np.asarray(a, dtype=float))
    return out if np.ndim(out) else float(out)


def phi_bar_inv(q):
    """Inverse of :func:`phi_bar` on ``(0, 1)``."""
    q = np.asarray(q, dtype=float)
    if np.any(~((q > 0.0) & (q < 1.0))):
        raise ValueError("phi_bar_inv requires 0 < q < 1")
    # ndtri(q) is accurate for small q, unlike ndtri(1 - q)
    out = -special.ndtri(q)
    return out if out.ndim else float(out)


def hermite_basis(n: int, a, p: TreeParams, max_order: int = MAX_HERMITE_ORDER):
    """Orthonormal Hermite function ``sqrt(n!) H_n(a / sigma)`` in ``L^2(nu)``.

    ``H_n`` is the probabilists' polynomial scaled by ``1/n!``
    (``H_1(x) = x``, ``H_2(x) = (x^2 - 1)/2``).  The normalised values obey
    ``e_{k+1} = (x e_k - sqrt(k) e_{k-1}) / sqrt(k+1)``, which is what we run.
    """
    if int(n) != n or n < 0:
        raise ValueError(f"order must be a nonnegative integer, got {n!r}")
    if n > max_order:
        raise ValueError(f"order {n} exceeds the maximum {max_order}")
    x = np.asarray(a, dtype=float) / p.sigma
    prev = np.zeros_like(x)
    cur = np.ones_like(x)
    for k in range(int(n)):
        prev, cur = cur, (x * cur - math.sqrt(k) * prev) / math.sqrt(k + 1)
    return cur if cur.ndim else float(cur)


def log_ou_kernel(a, b, p: TreeParams):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = p.d
    return math.log(p.kernel_prefactor) - (a * a + b * b) / (2 * d) + a * b


def ou_kernel(a, b, p: TreeParams):
    """Kernel of ``L`` with respect to ``nu``.

    ``K(a, b) = d^2/sqrt(d^2-1) * exp(-a^2/(2d) + a b - b^2/(2d))``, so that
    ``L f(a) = int K(a, b) f(b) nu(db)``.
    """
    out = np.exp(log_ou_kernel(a, b, p))
    return out if out.ndim else float(out)


def ou_kernel_lebesgue(a, b, p: TreeParams):
    """Same operator written against Lebesgue measure in ``b``.

    ``d * sqrt(d/(2 pi)) * exp(-(d/2) (b - a/d)^2)``: ``d`` times the density
    of a child value ``b`` given its parent ``a``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = p.d
    out = d * math.sqrt(d / (2 * math.pi)) * np.exp(-0.5 * d * (b - a / d) ** 2)
    return out if out.ndim else float(out)


def tree_green(n: int, p: TreeParams) -> float:
    """Green function between two vertices at tree distance ``n``."""
    if int(n) != n or n < 0:
        raise ValueError("tree distance must be a nonnegative integer")
    return p.sigma2 * float(p.d) ** (-int(n))


def apply_L_to_indicator(a, h, p: TreeParams):
    """``L 1_{[h, inf)}`` at ``a``: ``d * P[a/d + xi >= h]`` with ``xi ~ N(0, 1/d)``."""
    a = np.asarray(a, dtype=float)
    d = p.d
    out = d * special.ndtr(-(h - a / d) * math.sqrt(d))
    return out if np.ndim(out) else float(out)
