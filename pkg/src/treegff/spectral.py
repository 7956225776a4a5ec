"""Discretisation of the truncated operator ``L_{h,h'}`` and its top eigenpair.

``L_{h,h'} f(a) = 1_{[h,h']}(a) int_h^h' K(a, b) f(b) nu(db)`` is discretised on
a Gauss-Legendre grid whose weights carry the ``nu`` density.  Writing
``v_i = sqrt(w_i) f(a_i)`` turns the discrete operator into the symmetric
matrix ``M_ij = K(a_i, a_j) sqrt(w_i w_j)``; its Perron pair gives
``lambda_{h,h'}`` and ``chi_{h,h'}``.  Pushing ``h'`` upward gives ``lambda_h``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .ou_core import TreeParams, log_nu_density, log_ou_kernel


class EigenSolverError(RuntimeError):
    """Raised when an eigenpair cannot be certified."""


class TruncationError(RuntimeError):
    """Raised when ``lambda_{h,h'}`` does not settle before the hard cap on ``h'``."""


@dataclass(frozen=True)
class SolverControls:
    """Knobs of the ``lambda_h`` solver.

    ``window``, ``initial_step`` and ``cap`` are in units of ``sigma``.
    ``tol`` bounds successive changes of ``lambda_{h,h'}`` as ``h'`` grows,
    ``eig_tol`` bounds the eigen residual and ``root_tol`` bounds
    ``|lambda_{h*} - 1|``.
    """

    m: int = 400
    tol: float = 1e-9
    eig_tol: float = 1e-10
    window: float = 12.0
    initial_step: float = 2.0
    growth: float = 2.0
    cap: float = 40.0
    root_tol: float = 1e-8

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("need at least two quadrature nodes")
        if self.tol <= 0 or self.eig_tol <= 0 or self.root_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.growth < 1 or self.initial_step <= 0 or self.window <= 0:
            raise ValueError("truncation schedule must move h' upward")


def _frozen(x):
    x = np.array(x, dtype=float)
    x.setflags(write=False)
    return x


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Nodes in ``[h, h']`` with weights approximating ``nu`` restricted there."""

    h: float
    h_prime: float
    nodes: np.ndarray
    log_weights: np.ndarray

    @property
    def m(self) -> int:
        return self.nodes.size

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def validate(self):
        if self.m < 1:
            raise ValueError("empty grid")
        if not self.h < self.h_prime:
            raise ValueError("grid needs h < h'")
        if np.any(np.diff(self.nodes) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        if np.any(self.nodes < self.h) or np.any(self.nodes > self.h_prime):
            raise ValueError("grid nodes must lie in [h, h']")
        if not np.all(np.isfinite(self.log_weights)):
            raise ValueError("grid weights must be positive")
        if self.weights.sum() > 1 + 1e-12:
            raise ValueError("grid weights exceed the mass of a probability law")


def build_grid(h: float, h_prime: float, m: int, p: TreeParams) -> QuadratureGrid:
    """Gauss-Legendre rule on ``[h, h']`` with the ``nu`` density folded in."""
    if m < 2:
        raise ValueError("build_grid needs m >= 2")
    if not h < h_prime:
        raise ValueError(f"build_grid needs h < h', got h={h}, h'={h_prime}")
    x, w = np.polynomial.legendre.leggauss(int(m))
    half = 0.5 * (h_prime - h)
    nodes = h + half * (x + 1.0)
    log_w = np.log(half * w) + log_nu_density(nodes, p)
    grid = QuadratureGrid(float(h), float(h_prime), _frozen(nodes), _frozen(log_w))
    grid.validate()
    return grid


@dataclass(frozen=True, eq=False)
class DiscretizedOperator:
    grid: QuadratureGrid
    matrix: np.ndarray
    params: TreeParams


def assemble_operator(grid: QuadratureGrid, p: TreeParams) -> DiscretizedOperator:
    """Symmetrised Nystrom matrix ``K(a_i, a_j) sqrt(w_i w_j)``.

    The log of each entry is formed first.  Its quadratic part
    ``ab - (d^2+1)(a^2+b^2)/(4d)`` is negative semidefinite, so no entry overflows.
    """
    grid.validate()
    a = grid.nodes
    half_lw = 0.5 * grid.log_weights
    log_m = log_ou_kernel(a[:, None], a[None, :], p) + half_lw[:, None] + half_lw[None, :]
    upper = np.triu(np.exp(log_m))
    matrix = upper + np.triu(upper, 1).T
    matrix.setflags(write=False)
    return DiscretizedOperator(grid, matrix, p)


@dataclass(frozen=True, eq=False)
class EigenPair:
    """Top eigenpair of a discretised operator.

    ``vector`` lives in the symmetrised coordinates ``sqrt(w_i) chi(a_i)``
    and has unit Euclidean norm.  ``values`` are the function values ``chi(a_i)``.
    """

    lam: float
    vector: np.ndarray
    residual: float
    gap: float
    log_weights: np.ndarray

    @property
    def values(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return self.vector * np.exp(-0.5 * self.log_weights)

    @property
    def norm2(self) -> float:
        """Discrete ``L^2(nu)`` norm of ``chi``; 1 by construction."""
        return float(np.sqrt(np.sum(self.vector**2)))


def _sign_fix(v):
    i = int(np.argmax(np.abs(v)))
    if v[i] < 0:
        v = -v
    return v


def principal_eigenpair(op: DiscretizedOperator, tol: float = 1e-10) -> EigenPair:
    """Largest eigenvalue and nonnegative unit eigenvector of ``op.matrix``.

    The eigenvector sign makes its largest-modulus entry positive; entries
    that are negative only by rounding (``> -tol``) are clamped to zero.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    mat = op.matrix
    m = mat.shape[0]
    try:
        if m == 1:
            w, v = np.array([mat[0, 0]]), np.ones((1, 1))
        else:
            w, v = linalg.eigh(mat, subset_by_index=[m - 2, m - 1], check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise EigenSolverError(f"eigensolver failed on a {m}x{m} matrix: {exc}") from exc

    lam = float(w[-1])
    vec = _sign_fix(v[:, -1].copy())
    if np.any(vec < -tol):
        raise EigenSolverError(
            f"top eigenvector changes sign (min entry {vec.min():.3e}); "
            "Perron property violated"
        )
    vec = np.clip(vec, 0.0, None)
    vec /= np.linalg.norm(vec)
    residual = float(np.linalg.norm(mat @ vec - lam * vec))
    if residual > tol * max(1.0, abs(lam)):
        raise EigenSolverError(f"eigen residual {residual:.3e} above tolerance {tol:.1e}")
    gap = float(w[-1] - w[-2]) if m > 1 else lam
    vec.setflags(write=False)
    return EigenPair(lam, vec, residual, gap, op.grid.log_weights)


def top_eigenvalues(op: DiscretizedOperator, k: int) -> np.ndarray:
    """The ``k`` largest eigenvalues of ``op.matrix`` in decreasing order."""
    m = op.matrix.shape[0]
    k = min(int(k), m)
    if k < 1:
        raise ValueError("k must be positive")
    try:
        w = linalg.eigh(op.matrix, eigvals_only=True, subset_by_index=[m - k, m - 1])
    except linalg.LinAlgError as exc:
        raise EigenSolverError(str(exc)) from exc
    return w[::-1].copy()


def lambda_truncated(h: float, h_prime: float, m: int, p: TreeParams, tol: float = 1e-10):
    """``lambda_{h,h'}`` and its eigenpair on an ``m``-node grid."""
    grid = build_grid(h, h_prime, m, p)
    pair = principal_eigenpair(assemble_operator(grid, p), tol)
    return pair.lam, pair


@dataclass(frozen=True, eq=False)
class SpectralResult:
    lambda_h: float
    h: float
    params: TreeParams
    grid: QuadratureGrid
    eigenpair: EigenPair
    truncation_sequence: tuple

    @property
    def h_prime(self) -> float:
        return self.grid.h_prime

    @property
    def chi(self) -> np.ndarray:
        return self.eigenpair.values

    def chi_moment(self, power: float) -> float:
        """``<chi^power>_nu`` by quadrature on the solver grid."""
        return lp_integral(self, power)

    @property
    def chi_mean(self) -> float:
        return self.chi_moment(1)

    @property
    def chi_sup_on_grid(self) -> float:
        return float(self.chi.max())

    def to_dict(self) -> dict:
        return {
            "d": self.params.d,
            "h": self.h,
            "lambda_h": self.lambda_h,
            "h_prime_final": self.h_prime,
            "m": self.grid.m,
            "residual": self.eigenpair.residual,
            "gap": self.eigenpair.gap,
            "chi_mean": self.chi_mean,
            "chi_sup_on_grid": self.chi_sup_on_grid,
            "truncation_sequence": [list(t) for t in self.truncation_sequence],
        }


def lambda_h(h: float, p: TreeParams, ctrl: SolverControls = SolverControls()) -> SpectralResult:
    """``lambda_h = lim_{h' -> inf} lambda_{h,h'}``.

    Starts at ``h' = max(h, 0) + window * sigma`` and moves ``h'`` up by a
    doubling increment until two successive values differ by less than
    ``ctrl.tol``.  Results are memoised per ``(h, d, ctrl)``.
    """
    return _lambda_h_cached(float(h), p, ctrl)


@functools.lru_cache(maxsize=4096)
def _lambda_h_cached(h, p, ctrl):
    sigma = p.sigma
    cap = h + ctrl.cap * sigma
    h_prime = max(h, 0.0) + ctrl.window * sigma
    if h_prime > cap:
        raise TruncationError("initial window already exceeds the cap on h'")
    step = ctrl.initial_step * sigma

    lam, pair = lambda_truncated(h, h_prime, ctrl.m, p, ctrl.eig_tol)
    seq = [(h_prime, lam)]
    while True:
        nxt = h_prime + step
        if nxt > cap:
            raise TruncationError(
                f"lambda_(h,h') did not settle to {ctrl.tol:.1e} before h' = h + {ctrl.cap} sigma "
                f"(d={p.d}, h={h}, last change {abs(seq[-1][1] - seq[-2][1]) if len(seq) > 1 else float('nan'):.3e})"
            )
        lam_new, pair_new = lambda_truncated(h, nxt, ctrl.m, p, ctrl.eig_tol)
        seq.append((nxt, lam_new))
        h_prime, step = nxt, step * ctrl.growth
        settled = abs(lam_new - lam) < ctrl.tol
        lam, pair = lam_new, pair_new
        if settled:
            break

    grid = build_grid(h, h_prime, ctrl.m, p)
    return SpectralResult(lam, h, p, grid, pair, tuple(seq))


def chi_h_eval(res: SpectralResult, a):
    """Nystrom extension of ``chi_h`` off the grid.

    ``chi(a) = lambda^-1 sum_j K(a, a_j) chi(a_j) w_j`` for ``a >= h``, else 0.
    """
    a_arr = np.atleast_1d(np.asarray(a, dtype=float))
    out = np.zeros(a_arr.shape)
    live = a_arr >= res.h
    if np.any(live):
        grid = res.grid
        # chi(a_j) w_j = v_j sqrt(w_j)
        lv = 0.5 * grid.log_weights
        vec = res.eigenpair.vector
        pts = a_arr[live]
        vals = np.empty(pts.size)
        chunk = max(1, 2_000_000 // grid.m)
        for s in range(0, pts.size, chunk):
            blk = pts[s:s + chunk]
            logk = log_ou_kernel(blk[:, None], grid.nodes[None, :], res.params) + lv[None, :]
            vals[s:s + chunk] = np.exp(logk) @ vec
        out[live] = vals / res.lambda_h
    if np.ndim(a) == 0:
        return float(out[0])
    return out.reshape(np.shape(a))


def lp_integral(res: SpectralResult, q: float) -> float:
    """``int chi^q d nu`` on the solver grid."""
    pair = res.eigenpair
    v = pair.vector
    lw = pair.log_weights
    with np.errstate(divide="ignore"):
        logs = q * np.log(v) + (1.0 - 0.5 * q) * lw
    return float(np.sum(np.exp(logs)))


def hypercontractivity_check(res: SpectralResult, k: int):
    """Compare ``||chi_h||_{L^q}`` with ``(d/lambda_h)^k`` for ``q = 1 + d^(2k)``.

    Returns ``(lhs, rhs, ok)``.
    """
    if k not in (0, 1, 2):
        raise ValueError("hypercontractivity check supports k in {0, 1, 2}")
    d = res.params.d
    q = 1 + d ** (2 * k)
    lhs = lp_integral(res, q) ** (1.0 / q)
    rhs = (d / res.lambda_h) ** k
    return lhs, rhs, bool(lhs <= rhs * (1 + 1e-6))
