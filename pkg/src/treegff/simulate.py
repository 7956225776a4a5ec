"""Monte-Carlo checks on the branching Gaussian chain with a barrier.

On the forward tree below a root ``x0``, the field is a branching Markov chain:
the root is ``nu``-distributed and each vertex with value ``a`` has ``d``
children with independent values ``a/d + N(0, 1/d)``.  Vertices below the
barrier ``h`` are removed together with their descendants; the survivors at
depth ``n`` form the front ``Z_n``.  The front is stored one generation at a
time, never as a tree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import interpolate

from . import rng
from .ou_core import TreeParams, log_ou_kernel, phi_bar
from .spectral import QuadratureGrid, SpectralResult, chi_h_eval

CAP_EXPONENT = 6


@dataclass(frozen=True)
class SimConfig:
    params: TreeParams
    h: float
    depth: int
    replicas: int
    seed: int = 0
    population_cap: int = 10**7
    block_size: int = 4096

    def __post_init__(self):
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        floor = self.params.d ** min(self.depth, CAP_EXPONENT)
        if self.population_cap < floor:
            raise ValueError(f"population_cap must be at least {floor}")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")


@dataclass(frozen=True, eq=False)
class GenerationStats:
    """Per-replica, per-generation front statistics.

    Arrays have shape ``(replicas, depth + 1)`` except ``censored``.  A
    censored replica breached ``population_cap``; its counts after the breach
    are zero and it is excluded from every average.
    """

    replica: np.ndarray
    stream: np.ndarray
    front_count: np.ndarray
    martingale: np.ndarray
    censored: np.ndarray
    lambda_h: float

    @property
    def survived(self) -> np.ndarray:
        return self.front_count > 0

    @property
    def depth(self) -> int:
        return self.front_count.shape[1] - 1

    @property
    def n_censored(self) -> int:
        return int(self.censored.sum())

    def survival_frequency(self, n: int) -> float:
        keep = ~self.censored
        return float(np.count_nonzero(self.front_count[keep, n] > 0)) / max(1, int(keep.sum()))


def mean_and_se(x) -> tuple[float, float]:
    """Sample mean and its standard error, with exactly rounded sums."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n == 0:
        return math.nan, math.nan
    mean = math.fsum(x) / n
    if n == 1:
        return mean, math.nan
    var = math.fsum((x - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


class ChiInterpolant:
    """Fast evaluation of ``chi_h`` for the simulator.

    Cubic spline through Nystrom values on ``[h, h']``, exact Nystrom beyond
    ``h'``, zero below ``h``.
    """

    def __init__(self, res: SpectralResult, n_table: int = 8193):
        self.res = res
        self.h = res.h
        self.top = res.grid.h_prime
        xs = np.linspace(self.h, self.top, n_table)
        self._spline = interpolate.CubicSpline(xs, chi_h_eval(res, xs))

    def __call__(self, a):
        a = np.asarray(a, dtype=float)
        out = np.zeros(a.shape)
        inside = (a >= self.h) & (a <= self.top)
        out[inside] = self._spline(a[inside])
        above = a > self.top
        if np.any(above):
            out[above] = chi_h_eval(self.res, a[above])
        return out


def _check_chi(cfg: SimConfig, chi: SpectralResult):
    if chi.params.d != cfg.params.d or not math.isclose(chi.h, cfg.h, rel_tol=0, abs_tol=1e-12):
        raise ValueError(
            f"eigenfunction solved at (d={chi.params.d}, h={chi.h}) cannot serve "
            f"a simulation at (d={cfg.params.d}, h={cfg.h})"
        )


def sample_front(cfg: SimConfig, chi: SpectralResult | None = None) -> GenerationStats:
    """Simulate ``|Z_n|`` and ``M_n = lambda^-n sum_{Z_n} chi(phi_x)`` for every replica.

    Without ``chi`` the martingale column is NaN.
    """
    d = cfg.params.d
    sigma = cfg.params.sigma
    step_sd = math.sqrt(1.0 / d)
    h = cfg.h
    R, N = cfg.replicas, cfg.depth
    counts = np.zeros((R, N + 1), dtype=np.int64)
    mart = np.full((R, N + 1), np.nan) if chi is None else np.zeros((R, N + 1))
    censored = np.zeros(R, dtype=bool)
    if chi is not None:
        _check_chi(cfg, chi)
        chi_fn = ChiInterpolant(chi)
        lam = chi.lambda_h
    else:
        chi_fn, lam = None, math.nan
    js = np.arange(d, dtype=np.uint64)

    for start in range(0, R, cfg.block_size):
        ids = np.arange(start, min(R, start + cfg.block_size))
        B = ids.size
        keys = rng.root_keys(cfg.seed, ids, rng.SALT_FRONT)
        vals = sigma * rng.normals(keys)
        owner = np.arange(B)
        out_c = counts[start:start + B]
        out_m = mart[start:start + B]
        out_cens = censored[start:start + B]
        for n in range(N + 1):
            if n > 0:
                keys = rng.child_keys(np.repeat(keys, d), np.tile(js, keys.size))
                vals = np.repeat(vals, d) / d + step_sd * rng.normals(keys)
                owner = np.repeat(owner, d)
            keep = vals >= h
            keys, vals, owner = keys[keep], vals[keep], owner[keep]
            cnt = np.bincount(owner, minlength=B)
            over = cnt > cfg.population_cap
            if np.any(over):
                out_cens[over] = True
                drop = over[owner]
                keys, vals, owner = keys[~drop], vals[~drop], owner[~drop]
                cnt[over] = 0
            out_c[:, n] = cnt
            if chi_fn is not None:
                out_m[:, n] = np.bincount(owner, weights=chi_fn(vals), minlength=B) * lam**-n
            if vals.size == 0:
                break

    ids = np.arange(R)
    return GenerationStats(ids, ids.copy(), counts, mart, censored, lam)


def expected_front_sequence(h: float, n_max: int, p: TreeParams, grid: QuadratureGrid) -> np.ndarray:
    """``E|Z_n^h|`` for ``n = 0..n_max`` by repeated application of the kernel.

    ``E|Z_n| = <1_{[h,inf)}, L_h^n 1_{[h,inf)}>_nu``; on the grid this is
    ``s^T M^n s`` with ``s_i = sqrt(w_i)``.
    """
    if not math.isclose(grid.h, h, rel_tol=0, abs_tol=1e-12):
        raise ValueError("grid must start at the barrier h")
    a = grid.nodes
    half = 0.5 * grid.log_weights
    mat = np.exp(log_ou_kernel(a[:, None], a[None, :], p) + half[:, None] + half[None, :])
    s = np.exp(half)
    out = np.empty(n_max + 1)
    v = s.copy()
    for n in range(n_max + 1):
        if n:
            v = mat @ v
        out[n] = s @ v
    return out


def expected_front(h: float, n: int, p: TreeParams, grid: QuadratureGrid) -> float:
    return float(expected_front_sequence(h, n, p, grid)[n])


@dataclass
class FrontCheck:
    n: np.ndarray
    mc_mean: np.ndarray
    mc_se: np.ndarray
    oracle: np.ndarray
    n_censored: int

    @property
    def z(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return (self.mc_mean - self.oracle) / self.mc_se

    def to_dict(self) -> dict:
        return {
            "n": self.n.tolist(), "mean": self.mc_mean.tolist(), "se": self.mc_se.tolist(),
            "oracle": self.oracle.tolist(), "z": self.z.tolist(), "censored": self.n_censored,
        }


def front_check(cfg: SimConfig, res: SpectralResult, stats: GenerationStats | None = None) -> FrontCheck:
    """Monte-Carlo ``E|Z_n|`` against the quadrature chain."""
    if stats is None:
        stats = sample_front(cfg)
    keep = ~stats.censored
    ms = [mean_and_se(stats.front_count[keep, n]) for n in range(cfg.depth + 1)]
    oracle = expected_front_sequence(cfg.h, cfg.depth, cfg.params, res.grid)
    return FrontCheck(np.arange(cfg.depth + 1), np.array([m for m, _ in ms]),
                      np.array([s for _, s in ms]), oracle, stats.n_censored)


@dataclass
class MartingaleMoments:
    n: np.ndarray
    mean_per_n: np.ndarray
    mean_se: np.ndarray
    drift: np.ndarray  # E[M_n - M_0]
    drift_se: np.ndarray
    q_second_moment_per_n: np.ndarray
    q_second_se: np.ndarray
    q_second_exact: np.ndarray
    chi_mean: float
    n_censored: int

    @property
    def drift_z(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.n == 0, 0.0, self.drift / self.drift_se)

    @property
    def q_second_z(self):
        return (self.q_second_moment_per_n - self.q_second_exact) / self.q_second_se

    def to_dict(self) -> dict:
        return {
            "n": self.n.tolist(), "mean": self.mean_per_n.tolist(), "mean_se": self.mean_se.tolist(),
            "drift": self.drift.tolist(), "drift_se": self.drift_se.tolist(),
            "drift_z": self.drift_z.tolist(), "chi_mean": self.chi_mean,
            "q_second": self.q_second_moment_per_n.tolist(), "q_second_se": self.q_second_se.tolist(),
            "q_second_exact": self.q_second_exact.tolist(), "q_second_z": self.q_second_z.tolist(),
            "censored": self.n_censored,
        }


def q_second_moment_exact(res: SpectralResult, n_max: int) -> np.ndarray:
    """``E^Q[M_n^2] = (1 + sum_{k<=n} lambda^-k (1 - lambda/d)) <chi^3>/<chi>``."""
    lam, d = res.lambda_h, res.params.d
    ratio = res.chi_moment(3) / res.chi_mean
    k = np.arange(1, n_max + 1)
    partial = np.concatenate([[0.0], np.cumsum(lam ** -k.astype(float) * (1 - lam / d))])
    return (1.0 + partial) * ratio


def martingale_moments(cfg: SimConfig, chi: SpectralResult,
                       stats: GenerationStats | None = None) -> MartingaleMoments:
    """Estimate ``E[M_n]`` and ``E^Q[M_n^2]``, with ``dQ/dP = chi(phi_root)/<chi>``.

    Only meaningful below the critical level, where ``lambda_h > 1``.
    """
    if not chi.lambda_h > 1.0:
        raise ValueError(
            f"martingale moments need h < h* (lambda_h = {chi.lambda_h:.6g} <= 1 at h = {chi.h})"
        )
    if stats is None:
        stats = sample_front(cfg, chi)
    keep = ~stats.censored
    M = stats.martingale[keep]
    mean_chi = chi.chi_mean
    weight = M[:, 0] / mean_chi
    rows = []
    for n in range(cfg.depth + 1):
        m, se = mean_and_se(M[:, n])
        dm, dse = mean_and_se(M[:, n] - M[:, 0])
        q, qse = mean_and_se(weight * M[:, n] ** 2)
        rows.append((m, se, dm, dse, q, qse))
    cols = np.array(rows).T
    return MartingaleMoments(np.arange(cfg.depth + 1), cols[0], cols[1], cols[2], cols[3],
                             cols[4], cols[5], q_second_moment_exact(chi, cfg.depth),
                             mean_chi, stats.n_censored)


def edge_nonvanish_prob(a, b):
    """Probability that the cable field on a unit-weight edge has no zero, given its endpoint values.

    Conditionally on the endpoints the field on the edge (length 1/2) is a
    Brownian bridge run at speed 2, so the no-zero probability is
    ``1 - exp(-2ab)`` for same-sign endpoints and 0 otherwise.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = a * b
    out = np.where(ab > 0, -np.expm1(-2.0 * np.abs(ab)), 0.0)
    return out if out.ndim else float(out)


@dataclass
class ArcsineCheck:
    n: int
    mc_estimate: float
    se: float
    exact: float

    @property
    def z_score(self) -> float:
        return (self.mc_estimate - self.exact) / self.se

    def to_dict(self) -> dict:
        return {"n": self.n, "mc_estimate": self.mc_estimate, "se": self.se,
                "exact": self.exact, "z_score": self.z_score}


def arcsine_exact(n: int, p: TreeParams) -> float:
    return 2.0 / math.pi * math.asin(float(p.d) ** -n)


def arcsine_check(n: int, cfg: SimConfig) -> ArcsineCheck:
    """Probability that the cable field has no zero on a geodesic of ``n`` edges.

    Samples the vertex chain along the path and multiplies the exact per-edge
    bridge probabilities (a Rao-Blackwellised estimator).  ``cfg.h`` and
    ``cfg.depth`` are ignored.
    """
    if n < 1:
        raise ValueError("path length must be >= 1")
    d = cfg.params.d
    est = np.empty(cfg.replicas)
    for start in range(0, cfg.replicas, 1 << 18):
        ids = np.arange(start, min(cfg.replicas, start + (1 << 18)))
        keys = rng.root_keys(cfg.seed, ids, rng.SALT_PATH)
        prev = cfg.params.sigma * rng.normals(keys)
        surv = np.ones(ids.size)
        for _ in range(n):
            keys = rng.child_keys(keys, 0)
            cur = prev / d + math.sqrt(1.0 / d) * rng.normals(keys)
            surv *= edge_nonvanish_prob(prev, cur)
            prev = cur
        est[start:start + ids.size] = surv
    m, se = mean_and_se(est)
    return ArcsineCheck(int(n), m, se, arcsine_exact(n, cfg.params))


def expected_sign_front_bound(n: int, p: TreeParams) -> float:
    """``(2/pi) d^n arcsin(d^-n)``, bounding the expected front of ``{phi > 0}`` on the cable."""
    return float(p.d) ** n * arcsine_exact(n, p)


def interlacement_path_prob(u: float, n: int, p: TreeParams) -> float:
    """Probability that a geodesic of ``n`` edges from ``x0`` is vacant at level ``u``."""
    if not u > 0:
        raise ValueError("interlacement level u must be positive")
    if n < 0:
        raise ValueError("path length must be >= 0")
    d = p.d
    return math.exp(-u * p.cap_point - n * u * (d - 1) ** 2 / d)


def root_mass(h: float, p: TreeParams) -> float:
    """``nu([h, inf))``, the expected size of ``Z_0``."""
    return float(phi_bar(h / p.sigma))
