"""L1-penalized least squares by coordinate descent.

The objective throughout is

    (1/n) ||y - X b||^2  +  2 * lam * ||b||_1

(note the factor 2 on the penalty; every lambda in the package lives on this
scale).  The solver keeps an explicit residual vector and sweeps coordinates
cyclically: a full pass until the support stabilizes, then active-set passes,
and convergence is only ever declared on a full sweep so the exit state is
KKT-grade.  kkt_check is an independent verifier over the stationarity
conditions and shares no state with the solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import (
    ConstantColumn,
    DegenerateResponse,
    DimensionMismatch,
    EmptyPath,
    MaxIterations,
)
from .linalg import as_design, as_vector

CD_TOL = 1e-9           # max coordinate change relative to 1 + ||b||_inf
CD_MAX_SWEEPS = 10_000
KKT_TOL = 1e-6
N_LAMBDA = 100
LAMBDA_MIN_RATIO = 1e-3

_EBIC_FLOOR = np.finfo(np.float64).tiny


# ---- grids ----


def lambda_grid(x, y, n_lambda: int = N_LAMBDA, ratio: float = LAMBDA_MIN_RATIO) -> np.ndarray:
    """Geometric grid from lambda_max down to ratio * lambda_max.

    lambda_max = ||X'y||_inf / n is the smallest penalty with an all-zero
    solution, so the grid starts exactly at the edge of sparsity.
    """
    x = as_design(x)
    y = as_vector(y, rows=x.shape[0])
    if n_lambda < 1:
        raise ValueError("n_lambda must be at least 1")
    if not (0.0 < ratio <= 1.0):
        raise ValueError("ratio must be in (0, 1]")
    if x.shape[1] == 0:
        raise DimensionMismatch("lambda_grid needs at least one column")
    lam_max = float(np.abs(x.T @ y).max()) / x.shape[0]
    if lam_max == 0.0:
        raise DegenerateResponse("X'y is identically zero; no penalized path exists")
    if n_lambda == 1:
        return np.array([lam_max])
    t = np.arange(n_lambda) / (n_lambda - 1)
    return lam_max * ratio**t


# ---- coordinate descent kernel ----


@njit(cache=True, nogil=True)
def _cd_pass(x, y, lam, beta, col_norms, r, active_only):
    """One cyclic pass; returns (max coordinate change, ||beta||_inf seen)."""
    n, q = x.shape
    inv_n = 1.0 / n
    max_delta = 0.0
    max_abs = 0.0
    for j in range(q):
        old = beta[j]
        if active_only and old == 0.0:
            continue
        z = 0.0
        for i in range(n):
            z += x[i, j] * r[i]
        z = z * inv_n + col_norms[j] * old
        if z > lam:
            new = (z - lam) / col_norms[j]
        elif z < -lam:
            new = (z + lam) / col_norms[j]
        else:
            new = 0.0
        if new != old:
            d = new - old
            for i in range(n):
                r[i] -= x[i, j] * d
            beta[j] = new
        delta = abs(new - old)
        if delta > max_delta:
            max_delta = delta
        if abs(new) > max_abs:
            max_abs = abs(new)
    return max_delta, max_abs


@njit(cache=True, nogil=True)
def _cd_kernel(x, y, lam, beta, col_norms, tol, max_sweeps):
    """Full sweeps interleaved with active-set passes.

    max_sweeps caps the number of *full* sweeps; convergence is only declared
    when a full sweep barely moves, so the exit state always reflects every
    coordinate.  The active-set phase carries its own generous pass budget as
    an emergency brake against ill-conditioned crawls.
    """
    n, q = x.shape
    r = y.copy()
    for j in range(q):
        bj = beta[j]
        if bj != 0.0:
            for i in range(n):
                r[i] -= x[i, j] * bj
    full_sweeps = 0
    inner_budget = 40 * max_sweeps
    while True:
        max_delta, max_abs = _cd_pass(x, y, lam, beta, col_norms, r, False)
        full_sweeps += 1
        if max_delta < tol * (1.0 + max_abs):
            return full_sweeps, True
        if full_sweeps >= max_sweeps:
            return full_sweeps, False
        while True:
            if inner_budget <= 0:
                return full_sweeps, False
            max_delta, max_abs = _cd_pass(x, y, lam, beta, col_norms, r, True)
            inner_budget -= 1
            if max_delta < tol * (1.0 + max_abs):
                break


def cd_fit(
    x,
    y,
    lam: float,
    warm_start: np.ndarray | None = None,
    tol: float = CD_TOL,
    max_sweeps: int = CD_MAX_SWEEPS,
) -> np.ndarray:
    """Minimize (1/n)||y - Xb||^2 + 2*lam*||b||_1 by cyclic coordinate descent.

    Parameters
    ----------
    x : array_like, shape (n, q)
        No column may be identically zero.
    y : array_like, shape (n,)
    lam : float, nonnegative
    warm_start : ndarray, shape (q,), optional
        Starting point (copied, never mutated).
    tol : float
        Converged when the largest coordinate move in a full sweep is below
        tol * (1 + ||b||_inf).
    max_sweeps : int
        Hard cap; hitting it raises MaxIterations rather than returning a
        half-converged vector.
    """
    x = as_design(x)
    n, q = x.shape
    y = as_vector(y, rows=n)
    if lam < 0.0:
        raise ValueError("lam must be nonnegative")
    col_norms = np.einsum("ij,ij->j", x, x) / n
    for j in range(q):
        if col_norms[j] == 0.0:
            raise ConstantColumn(j, f"column {j} is identically zero")
    if warm_start is None:
        beta = np.zeros(q)
    else:
        beta = np.asarray(warm_start, dtype=np.float64).copy()
        if beta.shape != (q,):
            raise DimensionMismatch("warm_start length does not match column count")
    if q == 0:
        return beta
    _, converged = _cd_kernel(x, y, lam, beta, col_norms, tol, max_sweeps)
    if not converged:
        raise MaxIterations(f"coordinate descent exceeded {max_sweeps} sweeps at lam={lam:g}")
    return beta


# ---- path + information criterion ----


@dataclass
class LassoPath:
    """Solutions along a descending penalty grid.

    betas has one row per grid point; df counts exact nonzeros; rss is the
    unnormalized squared residual ||y - Xb||^2.
    """

    lambdas: np.ndarray
    betas: np.ndarray
    df: np.ndarray
    rss: np.ndarray
    n: int


SATURATION_DEV_RATIO = 0.999

EBIC_PATIENCE = 15


def lasso_path(
    x,
    y,
    lambdas=None,
    n_lambda: int = N_LAMBDA,
    ratio: float = LAMBDA_MIN_RATIO,
    tol: float = CD_TOL,
    max_sweeps: int = CD_MAX_SWEEPS,
    dev_ratio_max: float = SATURATION_DEV_RATIO,
    df_stop: float | None = None,
    ebic_patience: int | None = None,
    p_total: int | None = None,
    gamma: float = 0.5,
) -> LassoPath:
    """Fit the path over a descending grid, warm-starting each point.

    The walk stops early once the fit saturates, mirroring reference path
    solvers: either the explained-variance fraction 1 - rss/||y||^2 exceeds
    dev_ratio_max, or the support size reaches df_stop (default n - 1, the
    sample dimension after centering — only reachable when q >= n - 1).
    Past either point solutions head toward interpolation, where coordinate
    descent grinds against a near-singular active Gram and the likelihood
    term of any information criterion degenerates.  The triggering entry is
    kept, deeper lambdas are dropped.  dev_ratio_max=1.0 together with
    df_stop=inf disables the stops.

    When the caller will pick a grid point by extended BIC, passing
    ebic_patience (with p_total, and gamma as used for selection) adds a
    selection-aware stop: the walk ends once the running EBIC minimum has
    not improved for that many consecutive grid points.  Ill-conditioned
    designs spend most of their time past the EBIC minimum, where each
    point is both the slowest to fit and irrelevant to selection.
    """
    x = as_design(x)
    n, q = x.shape
    y = as_vector(y, rows=n)
    if lambdas is None:
        lambdas = lambda_grid(x, y, n_lambda=n_lambda, ratio=ratio)
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if lambdas.size == 0:
        raise EmptyPath("empty penalty grid")
    lambdas = np.sort(lambdas)[::-1].copy()
    stop_df = float(n - 1) if df_stop is None else float(df_stop)
    df_penalty = None
    if ebic_patience is not None:
        if ebic_patience < 1:
            raise ValueError("ebic_patience must be at least 1")
        if p_total is None:
            raise ValueError("ebic_patience needs p_total for the EBIC penalty")
        df_penalty = np.log(n) + 2.0 * gamma * np.log(p_total)
    best_score = np.inf
    best_k = 0
    rss_null = float(y @ y)
    betas = np.zeros((lambdas.size, q))
    df = np.zeros(lambdas.size, dtype=np.int64)
    rss = np.zeros(lambdas.size)
    beta = np.zeros(q)
    kept = lambdas.size
    for k, lam in enumerate(lambdas):
        beta = cd_fit(x, y, float(lam), warm_start=beta, tol=tol, max_sweeps=max_sweeps)
        betas[k] = beta
        df[k] = int(np.count_nonzero(beta))
        r = y - x @ beta
        rss[k] = float(r @ r)
        saturated = rss_null > 0.0 and 1.0 - rss[k] / rss_null > dev_ratio_max
        stalled = False
        if df_penalty is not None:
            score = n * np.log(max(rss[k] / n, _EBIC_FLOOR)) + df[k] * df_penalty
            if score < best_score:
                best_score = score
                best_k = k
            else:
                stalled = k - best_k >= ebic_patience
        if saturated or df[k] >= stop_df or stalled:
            kept = k + 1
            break
    return LassoPath(lambdas[:kept], betas[:kept], df[:kept], rss[:kept], n)


@dataclass
class KKTReport:
    max_violation: float
    ok: bool


def kkt_check(x, y, beta, lam: float, tol: float = KKT_TOL) -> KKTReport:
    """Verify the stationarity conditions of the penalized objective.

    For g = X'(y - Xb)/n the conditions are |g_j| <= lam off the support and
    g_j = lam * sign(b_j) on it; the report carries the worst absolute
    violation.  Deliberately a direct transcription of those conditions with
    no solver state.
    """
    x = as_design(x)
    y = as_vector(y, rows=x.shape[0])
    beta = as_vector(beta, rows=x.shape[1])
    g = x.T @ (y - x @ beta) / x.shape[0]
    active = beta != 0.0
    viol_inactive = np.maximum(np.abs(g[~active]) - lam, 0.0)
    viol_active = np.abs(g[active] - lam * np.sign(beta[active]))
    worst = 0.0
    if viol_inactive.size:
        worst = max(worst, float(viol_inactive.max()))
    if viol_active.size:
        worst = max(worst, float(viol_active.max()))
    return KKTReport(max_violation=worst, ok=worst <= tol)


def ebic_scores(path: LassoPath, p_total: int, gamma: float = 0.5) -> np.ndarray:
    """Extended BIC along the path.

    n*ln(RSS/n) + df*ln(n) + 2*gamma*df*ln(p_total), with p_total always the
    column count of the original full design, not of whatever subset the path
    was fit on.
    """
    if p_total < 1:
        raise ValueError("p_total must be positive")
    if gamma < 0.0:
        raise ValueError("gamma must be nonnegative")
    n = path.n
    mean_rss = np.maximum(path.rss / n, _EBIC_FLOOR)
    return n * np.log(mean_rss) + path.df * (np.log(n) + 2.0 * gamma * np.log(p_total))


def ebic_select(path: LassoPath, p_total: int, gamma: float = 0.5) -> int:
    """Index of the EBIC-minimizing grid point; ties go to the larger penalty."""
    scores = ebic_scores(path, p_total, gamma)
    # grid is descending, so the first minimum is the largest lambda
    return int(np.argmin(scores))
