"""Exit criteria of the package, runnable as one suite.

Each check returns a :class:`Criterion`; the numbers in ``detail`` are
deterministic for a given profile and seed.  Wall-clock times are kept apart
from the details so the serialized results are byte-reproducible.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import critical, simulate, spectral
from .ou_core import TreeParams, phi_bar
from .spectral import SolverControls

DEFAULT_SEED = 1

# runtime limits in seconds, where one is stated
RUNTIME_LIMITS = {1: 5.0, 2: 1.0, 3: 120.0, 4: 120.0, 8: 180.0, 10: 120.0}


@dataclass(frozen=True)
class Profile:
    name: str
    m: int
    front_replicas: int
    arcsine_replicas: int
    split_replicas: int


PROFILES = {
    "fast": Profile("fast", m=200, front_replicas=10**4, arcsine_replicas=10**4, split_replicas=10**4),
    "full": Profile("full", m=400, front_replicas=10**5, arcsine_replicas=10**6, split_replicas=10**4),
}


@dataclass
class Criterion:
    number: int
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    runtime: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d}. {self.name}"

    def to_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": bool(self.passed),
                "detail": self.detail}


def _ctrl(profile: Profile) -> SolverControls:
    return SolverControls(m=profile.m)


def spectrum_ladder(profile: Profile, seed: int) -> Criterion:
    rows = {}
    ok = True
    for d in (2, 3):
        p = TreeParams(d)
        s = p.sigma
        op = spectral.assemble_operator(spectral.build_grid(-12 * s, 12 * s, profile.m, p), p)
        ev = spectral.top_eigenvalues(op, 4)
        exact = np.array([float(d) ** (1 - n) for n in range(4)])
        err = float(np.max(np.abs(ev - exact)))
        ok &= err <= 1e-6
        rows[str(d)] = {"eigenvalues": ev, "max_abs_error": err}
    return Criterion(1, "spectrum ladder d^(1-n) within 1e-6 (d=2,3)", bool(ok), rows)


def closed_forms(profile: Profile, seed: int) -> Criterion:
    ctrl = _ctrl(profile)
    worst = 0.0
    per_d = {}
    for d in range(2, 11):
        p = TreeParams(d)
        us = critical.u_star(p)
        hd = critical.h_delta(p)
        lam0 = spectral.lambda_h(0.0, p, ctrl).lambda_h
        hsq = critical.h_square(p, lam0)
        e_u = abs(d * math.exp(-us * (d - 1) ** 2 / d) - 1)
        e_hd = abs(d * phi_bar(hd * (d - 1) / math.sqrt(d)) - 1)
        e_hsq = abs(lam0 * math.exp(-hsq**2 * (d - 1) ** 2 / (2 * d)) - 1)
        per_d[str(d)] = {"u_star": e_u, "h_delta": e_hd, "h_square": e_hsq}
        worst = max(worst, e_u, e_hd, e_hsq)
    hd2 = critical.h_delta(TreeParams(2))
    ok = worst <= 1e-12 and abs(hd2) <= 1e-12
    return Criterion(2, "closed-form identities to 1e-12 (d=2..10), h_delta(2)=0", ok,
                     {"worst_relative_error": worst, "h_delta_d2": hd2, "per_d": per_d})


def chain(profile: Profile, seed: int) -> Criterion:
    ctrl = _ctrl(profile)
    reports = {}
    ok = True
    for d in range(2, 11):
        r = critical.bound_chain(TreeParams(d), ctrl)
        margins = {
            "h_delta": r.h_delta,
            "h_star-h_delta": r.h_star - r.h_delta,
            "h_square-h_star": r.h_square - r.h_star,
            "sqrt_2u_star-h_square": r.sqrt_2u_star - r.h_square,
        }
        good = r.chain_ok and all(v > 1e-6 for k, v in margins.items() if k != "h_delta")
        good &= (abs(r.h_delta) <= 1e-12) if d == 2 else (r.h_delta > 1e-6)
        ok &= good
        reports[str(d)] = {**r.to_dict(), "margins": margins}
        reports[str(d)].pop("tolerances")
    return Criterion(3, "bound chain 0 <= h_delta < h* <= h_square < sqrt(2u*) (d=2..10)", bool(ok), reports)


LOWER_GRID = (-2.0, -1.0, 0.0, 0.5, 1.0, 1.5, 2.0)
UPPER_GRID = tuple(0.25 * k for k in range(9))


def explicit_bounds(profile: Profile, seed: int) -> Criterion:
    ctrl = _ctrl(profile)
    out = {}
    ok = True
    for d in (2, 3, 5):
        p = TreeParams(d)
        lows = critical.verify_bounds(p, LOWER_GRID, ctrl)
        ups = critical.verify_bounds(p, UPPER_GRID, ctrl)
        ok &= all(c.lower_ok for c in lows) and all(c.upper_ok for c in ups)
        out[str(d)] = {
            "lower_margins": [c.lower_margin for c in lows],
            "upper_margins": [c.upper_margin for c in ups],
            "min_lower_margin": min(c.lower_margin for c in lows),
            "min_upper_margin": min(c.upper_margin for c in ups),
        }
    return Criterion(4, "lower bound d*Phibar(h(d-1)/sqrt d) < lambda_h, upper bound for h >= 0 (d=2,3,5)",
                     bool(ok), out)


def monotone_limits(profile: Profile, seed: int) -> Criterion:
    ctrl = _ctrl(profile)
    grid = np.arange(-2.0, 2.0 + 1e-9, 0.25)
    out = {}
    ok = True
    for d in (2, 3, 5):
        p = TreeParams(d)
        s = p.sigma
        low = spectral.lambda_h(-12 * s, p, ctrl).lambda_h
        high = spectral.lambda_h(8 * s, p, ctrl).lambda_h
        lams = np.array([spectral.lambda_h(h, p, ctrl).lambda_h for h in grid])
        dec = bool(np.all(np.diff(lams) < 0))
        ok &= abs(low - d) <= 1e-3 and high < 0.05 and dec
        out[str(d)] = {"lambda_minus_12sigma": low, "lambda_plus_8sigma": high,
                       "strictly_decreasing": dec, "lambda_grid": lams}
    return Criterion(5, "lambda_(-12 sigma) ~ d, lambda_(8 sigma) < 0.05, strictly decreasing", bool(ok), out)


def eigen_quality(profile: Profile, seed: int) -> Criterion:
    ctrl = _ctrl(profile)
    worst_res, worst_norm, min_gap, min_chi = 0.0, 0.0, math.inf, math.inf
    hs = sorted(set(LOWER_GRID) | set(UPPER_GRID) | set(np.arange(-2.0, 2.0 + 1e-9, 0.25).tolist()))
    for d in (2, 3, 5):
        p = TreeParams(d)
        for h in hs + [-12 * p.sigma, 8 * p.sigma]:
            r = spectral.lambda_h(h, p, ctrl)
            e = r.eigenpair
            worst_res = max(worst_res, e.residual)
            worst_norm = max(worst_norm, abs(e.norm2 - 1))
            min_gap = min(min_gap, e.gap)
            min_chi = min(min_chi, float(e.vector.min()))
    p = TreeParams(2)
    hyper = {}
    hyper_ok = True
    for label, h in (("0", 0.0), ("h_star", critical.h_star(p, ctrl))):
        r = spectral.lambda_h(h, p, ctrl)
        for k in (0, 1, 2):
            lhs, rhs, good = spectral.hypercontractivity_check(r, k)
            hyper[f"{label}/k={k}"] = {"lhs": lhs, "rhs": rhs, "ok": good}
            hyper_ok &= good
    ok = worst_res <= 1e-10 and worst_norm <= 1e-12 and min_gap > 0 and min_chi >= 0 and hyper_ok
    return Criterion(6, "eigen residual, positivity, unit norm, gap; hypercontractivity k=0,1,2",
                     bool(ok), {"max_residual": worst_res, "max_norm_error": worst_norm,
                                "min_gap": min_gap, "min_chi": min_chi, "hypercontractivity": hyper})


def growth_rate(profile: Profile, seed: int) -> Criterion:
    ctrl = _ctrl(profile)
    out = {}
    ok = True
    for d, h in ((2, 0.0), (2, 1.0), (3, 0.5)):
        p = TreeParams(d)
        r = spectral.lambda_h(h, p, ctrl)
        seq = simulate.expected_front_sequence(h, 30, p, r.grid)
        ratio = seq[30] / seq[29]
        rel = abs(ratio / r.lambda_h - 1)
        ok &= rel <= 5e-3
        out[f"{d}/{h}"] = {"ratio_30": ratio, "lambda_h": r.lambda_h, "relative_error": rel}
    return Criterion(7, "E|Z_30|/E|Z_29| within 0.5% of lambda_h", bool(ok), out)


def _front_sample(profile, seed, ctrl):
    p = TreeParams(2)
    res = spectral.lambda_h(0.0, p, ctrl)
    cfg = simulate.SimConfig(p, 0.0, 10, profile.front_replicas, seed=seed)
    return cfg, res, simulate.sample_front(cfg, res)


def mc_front(profile: Profile, seed: int, sample=None) -> Criterion:
    cfg, res, stats = sample or _front_sample(profile, seed, _ctrl(profile))
    fc = simulate.front_check(cfg, res, stats)
    z = fc.z
    ok = bool(np.all(np.abs(z) <= 3) and fc.n_censored == 0)
    return Criterion(8, "MC mean |Z_n| within 3 SE of quadrature (d=2, h=0, n<=10)", ok, fc.to_dict())


def martingale(profile: Profile, seed: int, sample=None) -> Criterion:
    cfg, res, stats = sample or _front_sample(profile, seed, _ctrl(profile))
    cut = simulate.GenerationStats(stats.replica, stats.stream, stats.front_count[:, :9],
                                   stats.martingale[:, :9], stats.censored, stats.lambda_h)
    cfg8 = simulate.SimConfig(cfg.params, cfg.h, 8, cfg.replicas, seed=cfg.seed)
    mm = simulate.martingale_moments(cfg8, res, cut)
    ok = bool(np.all(np.abs(mm.drift_z) <= 3) and np.all(np.abs(mm.q_second_z) <= 3))
    return Criterion(9, "E[M_n] flat and E^Q[M_n^2] matches closed form within 3 SE (n<=8)", ok, mm.to_dict())


def arcsine(profile: Profile, seed: int) -> Criterion:
    p = TreeParams(2)
    cfg = simulate.SimConfig(p, 0.0, 0, profile.arcsine_replicas, seed=seed)
    rows = [simulate.arcsine_check(n, cfg) for n in range(1, 5)]
    ok = all(abs(r.z_score) <= 3 for r in rows) and abs(rows[0].exact - 1 / 3) <= 1e-15
    return Criterion(10, "arcsine identity (2/pi) arcsin(2^-n), n=1..4, |z| <= 3", bool(ok),
                     {"rows": [r.to_dict() for r in rows]})


def sub_super_split(profile: Profile, seed: int) -> Criterion:
    ctrl = _ctrl(profile)
    p = TreeParams(2)
    hs = critical.h_star(p, ctrl)
    above = simulate.sample_front(simulate.SimConfig(p, hs + 0.3, 40, profile.split_replicas, seed=seed))
    below = simulate.sample_front(simulate.SimConfig(p, hs - 0.3, 20, profile.split_replicas, seed=seed))
    surv_above = int(np.count_nonzero(above.front_count[:, 40]))
    freq_below = below.survival_frequency(20)
    ok = surv_above == 0 and freq_below > 0.01 and above.n_censored == 0 and below.n_censored == 0
    return Criterion(11, "no survival to depth 40 at h*+0.3; survival > 1% to depth 20 at h*-0.3",
                     bool(ok), {"h_star": hs, "survivors_above": surv_above,
                                "survival_frequency_below": freq_below})


def run_suite(profile: str | Profile = "full", seed: int = DEFAULT_SEED, echo=None) -> list[Criterion]:
    """Criteria 1-11.  Criterion 12 (rerun reproducibility) lives in the CLI."""
    prof = PROFILES[profile] if isinstance(profile, str) else profile
    ctrl = _ctrl(prof)
    out = []

    def timed(fn, *args, **kw):
        t = time.perf_counter()
        c = fn(prof, seed, *args, **kw)
        c.runtime = time.perf_counter() - t
        out.append(c)
        if echo:
            echo(f"{c.line()}  ({c.runtime:.1f} s)")
        return c

    timed(spectrum_ladder)
    timed(closed_forms)
    timed(chain)
    timed(explicit_bounds)
    timed(monotone_limits)
    timed(eigen_quality)
    timed(growth_rate)
    t = time.perf_counter()
    sample = _front_sample(prof, seed, ctrl)
    shared = time.perf_counter() - t
    timed(mc_front, sample=sample).runtime += shared
    timed(martingale, sample=sample).runtime += shared
    timed(arcsine)
    timed(sub_super_split)
    return out


def clear_caches():
    spectral._lambda_h_cached.cache_clear()
