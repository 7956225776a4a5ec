"""Critical level ``h*`` (where ``lambda_h = 1``) and its explicit brackets."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize

from .ou_core import TreeParams, phi_bar, phi_bar_inv
from .spectral import SolverControls, lambda_h

# "a < b" is read as b - a > STRICT_REL * max(1, |b|)
STRICT_REL = 1e-9


class BracketError(RuntimeError):
    """The closed-form bracket for ``h*`` does not straddle ``lambda_h = 1``."""


def strictly_less(a: float, b: float, rel: float = STRICT_REL) -> bool:
    return b - a > rel * max(1.0, abs(b))


def u_star(p: TreeParams) -> float:
    """Critical interlacement level, ``d exp(-u (d-1)^2 / d) = 1``."""
    d = p.d
    return d * math.log(d) / (d - 1) ** 2


def h_delta(p: TreeParams) -> float:
    """Root of ``d * phi_bar(h (d-1)/sqrt(d)) = 1``; zero at ``d = 2``."""
    d = p.d
    if d == 2:
        return 0.0
    return math.sqrt(d) / (d - 1) * phi_bar_inv(1.0 / d)


def h_square(p: TreeParams, lambda_0: float) -> float:
    """Root of ``lambda_0 * exp(-h^2 (d-1)^2 / (2d)) = 1``."""
    if not lambda_0 > 1.0:
        raise ValueError(f"h_square needs lambda_0 > 1, got {lambda_0!r}")
    d = p.d
    return math.sqrt(2 * d * math.log(lambda_0)) / (d - 1)


def lower_bound(h, p: TreeParams):
    """``d * phi_bar(h (d-1)/sqrt(d))``, a strict lower bound on ``lambda_h``."""
    d = p.d
    return d * phi_bar(np.asarray(h, dtype=float) * (d - 1) / math.sqrt(d))


def upper_bound(h, p: TreeParams, lambda_0: float):
    """``lambda_0 exp(-h^2 (d-1)^2 / (2d))``, an upper bound on ``lambda_h`` for ``h >= 0``."""
    d = p.d
    h = np.asarray(h, dtype=float)
    out = lambda_0 * np.exp(-h * h * (d - 1) ** 2 / (2 * d))
    return out if out.ndim else float(out)


def h_star(p: TreeParams, ctrl: SolverControls = SolverControls()) -> float:
    """Bisection for ``lambda_h = 1`` on ``[h_delta, h_square]``."""
    return _h_star_details(p, ctrl)[0]


def _h_star_details(p, ctrl):
    lam0 = lambda_h(0.0, p, ctrl).lambda_h
    lo, hi = h_delta(p), h_square(p, lam0)
    f = lambda h: lambda_h(h, p, ctrl).lambda_h - 1.0
    f_lo, f_hi = f(lo), f(hi)
    if abs(f_lo) <= ctrl.root_tol:
        return lo, lam0
    if abs(f_hi) <= ctrl.root_tol:
        return hi, lam0
    if not (f_lo > 0 > f_hi):
        raise BracketError(
            f"lambda_h - 1 does not change sign on [{lo:.6g}, {hi:.6g}] "
            f"(values {f_lo:.3e}, {f_hi:.3e}, d={p.d})"
        )
    root = optimize.bisect(f, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)
    if abs(f(root)) > ctrl.root_tol:
        raise BracketError(f"bisection ended with |lambda_h* - 1| = {abs(f(root)):.3e}")
    return float(root), lam0


@dataclass
class BoundCheck:
    h: float
    lambda_h: float
    lower: float
    lower_ok: bool
    upper: float | None
    upper_ok: bool | None

    @property
    def lower_margin(self) -> float:
        return self.lambda_h - self.lower

    @property
    def upper_margin(self) -> float | None:
        return None if self.upper is None else self.upper - self.lambda_h


def verify_bounds(p: TreeParams, h_grid, ctrl: SolverControls = SolverControls(),
                  slack: float = 1e-9) -> list[BoundCheck]:
    """Check ``d phi_bar(h(d-1)/sqrt d) < lambda_h`` and, for ``h >= 0``,
    ``lambda_h <= lambda_0 exp(-h^2 (d-1)^2/(2d))``.

    Failures are returned in the per-point records, never raised.
    """
    lam0 = lambda_h(0.0, p, ctrl).lambda_h
    out = []
    for h in h_grid:
        h = float(h)
        lam = lambda_h(h, p, ctrl).lambda_h
        lo = float(lower_bound(h, p))
        lower_ok = lam - lo > slack * max(1.0, abs(lam))
        if h >= 0:
            up = upper_bound(h, p, lam0)
            upper_ok = lam <= up * (1 + slack)
        else:
            up, upper_ok = None, None
        out.append(BoundCheck(h, lam, lo, bool(lower_ok), up, upper_ok))
    return out


@dataclass
class CriticalReport:
    d: int
    h_star: float
    h_delta: float
    h_square: float
    u_star: float
    sqrt_2u_star: float
    lambda_0: float
    chain_ok: bool
    violations: list = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)

    JSON_KEYS = ("d", "h_star", "h_delta", "h_square", "u_star", "sqrt_2u_star",
                 "lambda_0", "chain_ok")

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.JSON_KEYS}
        out["violations"] = list(self.violations)
        out["tolerances"] = dict(self.tolerances)
        return out


def bound_chain(p: TreeParams, ctrl: SolverControls = SolverControls()) -> CriticalReport:
    """All quantities of ``0 <= h_delta < h* <= h_square < sqrt(2 u*)`` for one ``d``.

    ``h_delta = 0`` is allowed (it is exact at ``d = 2``).  ``h* <= h_square``
    is checked up to the root tolerance, the strict links with ``STRICT_REL``.
    """
    hs, lam0 = _h_star_details(p, ctrl)
    hd = h_delta(p)
    hsq = h_square(p, lam0)
    us = u_star(p)
    s2u = math.sqrt(2 * us)

    violations = []
    if hd < 0:
        violations.append({"pair": "0 <= h_delta", "margin": hd})
    if not strictly_less(hd, hs):
        violations.append({"pair": "h_delta < h_star", "margin": hs - hd})
    if hs > hsq + 1e-12:
        violations.append({"pair": "h_star <= h_square", "margin": hsq - hs})
    if not strictly_less(hsq, s2u):
        violations.append({"pair": "h_square < sqrt_2u_star", "margin": s2u - hsq})

    tols = asdict(ctrl)
    tols["strict_rel"] = STRICT_REL
    return CriticalReport(p.d, hs, hd, hsq, us, s2u, lam0, not violations, violations, tols)
