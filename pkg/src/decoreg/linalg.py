"""Dense symmetric linear algebra used by the decorrelation pipeline.

Conventions
-----------
Matrices are float64 numpy arrays held in column-major (Fortran) order so that
column slices and Gram products stride contiguously.  All public operations
validate shape; construction sites (data generation, CSV ingestion, the
service boundary) are responsible for rejecting non-finite entries, so the hot
paths here do not re-scan their inputs.

The eigensolver is a hand-written cyclic-by-row Jacobi iteration compiled with
numba.  It converges when the off-diagonal Frobenius norm falls below 1e-12
times its initial value and treats a 100-sweep exit as failure, never as a
result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.linalg import cho_factor, cho_solve

from .errors import (
    ConstantColumn,
    DimensionMismatch,
    NoConvergence,
    NotPositiveSemidefinite,
    NotSymmetric,
    SingularWithoutRidge,
)

# ---- tolerances (shared with the test-suite; change only with care) ----

SYM_REL_TOL = 1e-10        # admissible relative asymmetry max|A - A'| / max|A|
JACOBI_REL_TOL = 1e-12     # off-diagonal Frobenius reduction target
JACOBI_MAX_SWEEPS = 100
EIG_CLAMP_REL = 1e-14      # eigenvalues below this * lambda_max are treated as 0
RANK_REL_TOL = 1e-12       # r1 == 0 requires lambda_min > this * lambda_max
PSD_REL_TOL = 1e-8         # eigenvalues below -this * lambda_max reject the input


def as_design(x) -> np.ndarray:
    """Coerce to a float64 column-major 2-D array."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D array, got ndim={a.ndim}")
    return np.asfortranarray(a)


def as_vector(y, rows: int | None = None) -> np.ndarray:
    a = np.asarray(y, dtype=np.float64)
    if a.ndim != 1:
        raise DimensionMismatch(f"expected a 1-D array, got ndim={a.ndim}")
    if rows is not None and a.shape[0] != rows:
        raise DimensionMismatch(f"vector has {a.shape[0]} entries, expected {rows}")
    return a


# ---- standardization ----


@dataclass
class Standardization:
    """Centered (optionally scaled) copies of a regression problem.

    Attributes
    ----------
    x : ndarray, shape (n, p)
        Column-major design with exact column means 0; sample sd 1 per column
        when scaling was requested.
    y : ndarray, shape (n,)
        Centered response.
    col_means, col_scales : ndarray, shape (p,)
        What was subtracted / divided per column.  col_scales is all ones when
        scale=False.
    y_mean : float
    """

    x: np.ndarray
    y: np.ndarray
    col_means: np.ndarray
    col_scales: np.ndarray
    y_mean: float


def center_scale(x, y, scale: bool = True) -> Standardization:
    """Center columns of x and y to mean zero; optionally scale to unit sd.

    Parameters
    ----------
    x : array_like, shape (n, p)
    y : array_like, shape (n,)
    scale : bool
        When true, divide each column by its sample standard deviation
        (ddof=1).  A zero-variance column raises ConstantColumn rather than
        silently producing NaNs.

    Returns
    -------
    Standardization

    Raises
    ------
    DimensionMismatch
        On ragged shapes or fewer than two rows.
    ConstantColumn
        If scaling is requested and some column has zero sample variance.
    """
    x = as_design(x)
    n, p = x.shape
    y = as_vector(y, rows=n)
    if n < 2:
        raise DimensionMismatch("need at least two rows to standardize")
    col_means = x.mean(axis=0)
    xc = np.asfortranarray(x - col_means)
    if scale:
        col_scales = xc.std(axis=0, ddof=1)
        for j in range(p):
            if col_scales[j] < 1e-13 * (1.0 + abs(col_means[j])):
                raise ConstantColumn(j)
        xc = np.asfortranarray(xc / col_scales)
    else:
        col_scales = np.ones(p)
    y_mean = float(y.mean())
    return Standardization(xc, y - y_mean, col_means, col_scales, y_mean)


# ---- symmetric eigendecomposition (cyclic Jacobi) ----


@dataclass
class EigenDecomposition:
    """Eigenvalues in descending order with matching orthonormal columns."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]


@njit(cache=True, nogil=True)
def _offdiag_frobenius(a):
    n = a.shape[0]
    s = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            s += 2.0 * a[i, j] * a[i, j]
    return np.sqrt(s)


@njit(cache=True, nogil=True)
def _jacobi_sweeps(a, v, rel_tol, max_sweeps):
    """Cyclic-by-row Jacobi rotations, in place.

    Returns the number of sweeps used, or -1 if the off-diagonal mass did not
    drop below rel_tol times its initial value within max_sweeps.
    """
    n = a.shape[0]
    off0 = _offdiag_frobenius(a)
    if off0 == 0.0:
        return 0
    threshold = rel_tol * off0
    for sweep in range(1, max_sweeps + 1):
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                tau = (aqq - app) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                # the pivot pair is zero by construction of t; writing the
                # closed forms avoids accumulating the rotation's roundoff
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
        if _offdiag_frobenius(a) < threshold:
            return sweep
    return -1


def _check_symmetric(a: np.ndarray, what: str) -> None:
    scale = np.abs(a).max() if a.size else 0.0
    if scale == 0.0:
        return
    asym = np.abs(a - a.T).max()
    if asym > SYM_REL_TOL * scale:
        raise NotSymmetric(f"{what}: relative asymmetry {asym / scale:.3e} exceeds {SYM_REL_TOL}")


def sym_eig(a) -> EigenDecomposition:
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi.

    Parameters
    ----------
    a : array_like, shape (n, n)
        Symmetric within 1e-10 relative asymmetry; symmetrized exactly before
        iterating.

    Returns
    -------
    EigenDecomposition
        values sorted descending; vectors[:, i] is the eigenvector for
        values[i], orthonormal to working precision.

    Raises
    ------
    NotSymmetric
        If max|a - a'| exceeds 1e-10 * max|a|.
    NoConvergence
        If 100 sweeps do not reduce the off-diagonal Frobenius norm below
        1e-12 times its initial value.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch("sym_eig expects a square matrix")
    _check_symmetric(a, "sym_eig")
    work = np.ascontiguousarray((a + a.T) / 2.0)
    v = np.eye(a.shape[0])
    sweeps = _jacobi_sweeps(work, v, JACOBI_REL_TOL, JACOBI_MAX_SWEEPS)
    if sweeps < 0:
        raise NoConvergence(f"Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps")
    values = np.diag(work).copy()
    order = np.argsort(-values, kind="stable")
    return EigenDecomposition(values[order], v[:, order])


# ---- ridged inverse square root ----


def _inv_sqrt_weights(values: np.ndarray, r1: float, pseudo: bool) -> np.ndarray:
    lam_max = float(values.max(initial=0.0))
    floor = -PSD_REL_TOL * max(lam_max, 1.0)
    if values.min(initial=0.0) < floor:
        raise NotPositiveSemidefinite(
            f"eigenvalue {values.min():.3e} below tolerance {floor:.3e}"
        )
    clamped = np.where(values > EIG_CLAMP_REL * lam_max, values, 0.0)
    if r1 > 0.0:
        return 1.0 / np.sqrt(clamped + r1)
    deficient = (lam_max == 0.0) or (clamped.min() <= RANK_REL_TOL * lam_max)
    if deficient and not pseudo:
        raise SingularWithoutRidge(
            "matrix is numerically rank-deficient and no ridge was supplied"
        )
    w = np.zeros_like(clamped)
    keep = clamped > RANK_REL_TOL * lam_max
    w[keep] = 1.0 / np.sqrt(clamped[keep])
    return w


def spd_inv_sqrt(f, r1: float, p: int, pseudo: bool = False) -> np.ndarray:
    """sqrt(p) * (F + r1*I)^(-1/2) for symmetric positive semidefinite F.

    Parameters
    ----------
    f : array_like, shape (n, n)
    r1 : float
        Ridge added to every eigenvalue before inversion.  With r1 = 0 the
        matrix must be numerically full rank (lambda_min > 1e-12 lambda_max)
        unless pseudo=True, in which case zero modes map to zero
        (Moore-Penrose behaviour).
    p : int
        Column count of the design the factor will multiply; contributes the
        sqrt(p) scaling.
    pseudo : bool

    Raises
    ------
    SingularWithoutRidge
        r1 = 0, pseudo = False, and F is numerically rank-deficient — the
        expected state after centering, where one exact null direction is
        introduced.
    NotPositiveSemidefinite
        An eigenvalue falls below -1e-8 * max(lambda_max, 1).
    """
    f = np.asarray(f, dtype=np.float64)
    if r1 < 0.0:
        raise ValueError("r1 must be nonnegative")
    if p < 1:
        raise DimensionMismatch("p must be positive")
    eig = sym_eig(f)
    w = _inv_sqrt_weights(eig.values, r1, pseudo)
    b = (eig.vectors * w) @ eig.vectors.T
    b *= np.sqrt(float(p))
    return (b + b.T) / 2.0


def spd_inv_sqrt_rows(f, r1: float, p: int, pseudo: bool = False) -> np.ndarray:
    """Row form sqrt(p) * (Lambda + r1*I)^(-1/2) U' of the same factor.

    Built from the identical eigendecomposition as spd_inv_sqrt; applying it
    expresses the transformed problem in the eigenbasis rather than the
    original coordinates, leaving all inner products unchanged.
    """
    f = np.asarray(f, dtype=np.float64)
    if r1 < 0.0:
        raise ValueError("r1 must be nonnegative")
    if p < 1:
        raise DimensionMismatch("p must be positive")
    eig = sym_eig(f)
    w = _inv_sqrt_weights(eig.values, r1, pseudo)
    return np.sqrt(float(p)) * (w[:, None] * eig.vectors.T)


# ---- ridge solve ----


def ridge_solve(x, y, r2: float) -> np.ndarray:
    """Solve (X'X + r2*I) b = X'y through a Cholesky factorization.

    Parameters
    ----------
    x : array_like, shape (n, q)
    y : array_like, shape (n,)
    r2 : float, nonnegative

    Returns
    -------
    ndarray, shape (q,)

    Raises
    ------
    SingularWithoutRidge
        If r2 = 0 and X'X is not positive definite.
    """
    x = as_design(x)
    y = as_vector(y, rows=x.shape[0])
    if r2 < 0.0:
        raise ValueError("r2 must be nonnegative")
    q = x.shape[1]
    if q == 0:
        return np.empty(0)
    g = x.T @ x
    g[np.diag_indices_from(g)] += r2
    rhs = x.T @ y
    try:
        factor = cho_factor(g, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularWithoutRidge(f"Gram-plus-ridge matrix is not positive definite: {exc}") from exc
    return cho_solve(factor, rhs, check_finite=False)
