"""Estimation metrics and design diagnostics.

A coefficient counts as selected iff it is exactly nonzero; mse is the
squared l2 distance between coefficient vectors (no 1/p).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import DimensionMismatch
from .linalg import as_design, as_vector

EXACT_PAIR_LIMIT = 2_000_000


@dataclass
class Metrics:
    mse: float
    fp: int
    fn: int
    sign_consistent: bool
    pred_mse: float | None = None

    def to_json(self) -> dict:
        return {
            "mse": self.mse,
            "fp": self.fp,
            "fn": self.fn,
            "sign_consistent": self.sign_consistent,
            "pred_mse": self.pred_mse,
        }


def compute_metrics(beta_hat, beta_true, pred_mse: float | None = None) -> Metrics:
    beta_hat = as_vector(beta_hat)
    beta_true = as_vector(beta_true)
    if beta_hat.shape != beta_true.shape:
        raise DimensionMismatch("coefficient vectors differ in length")
    diff = beta_hat - beta_true
    selected = beta_hat != 0.0
    truth = beta_true != 0.0
    fp = int(np.count_nonzero(selected & ~truth))
    fn = int(np.count_nonzero(~selected & truth))
    sign_ok = fp == 0 and fn == 0 and bool(
        np.all(np.sign(beta_hat[truth]) == np.sign(beta_true[truth]))
    )
    return Metrics(
        mse=float(diff @ diff),
        fp=fp,
        fn=fn,
        sign_consistent=sign_ok,
        pred_mse=pred_mse,
    )


@dataclass
class DiagnosticsReport:
    """Summary of the (scaled) Gram geometry of a design.

    diag entries are x_j'x_j / n; max_offdiag is over |x_i'x_j| / n for
    distinct pairs — exhaustive when the pair count is small enough,
    otherwise over a seeded sample of pairs (sampled=True).  noise_corr is
    ||X'w||_inf / n for a supplied noise vector w.
    """

    n: int
    p: int
    min_diag: float
    max_diag: float
    max_offdiag: float
    sampled: bool
    pairs_checked: int
    noise_corr: float | None = None

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "min_diag": self.min_diag,
            "max_diag": self.max_diag,
            "max_offdiag": self.max_offdiag,
            "sampled": self.sampled,
            "pairs_checked": self.pairs_checked,
            "noise_corr": self.noise_corr,
        }


def design_diagnostics(
    x,
    noise=None,
    max_pairs: int = EXACT_PAIR_LIMIT,
    seed: int = 0,
) -> DiagnosticsReport:
    x = as_design(x)
    n, p = x.shape
    diag = np.einsum("ij,ij->j", x, x) / n
    total_pairs = p * (p - 1) // 2
    if total_pairs <= max_pairs:
        g = (x.T @ x) / n
        np.fill_diagonal(g, 0.0)
        max_off = float(np.abs(g).max()) if p > 1 else 0.0
        sampled = False
        checked = total_pairs
    else:
        gen = rng.stream(seed, "pairs", 0)
        i = gen.integers(0, p, size=max_pairs)
        j = gen.integers(0, p - 1, size=max_pairs)
        j = np.where(j >= i, j + 1, j)  # distinct pairs
        prods = np.abs(np.einsum("ki,ki->i", x[:, i], x[:, j])) / n
        max_off = float(prods.max())
        sampled = True
        checked = max_pairs
    noise_corr = None
    if noise is not None:
        w = as_vector(noise, rows=n)
        noise_corr = float(np.abs(x.T @ w).max()) / n
    return DiagnosticsReport(
        n=n,
        p=p,
        min_diag=float(diag.min()),
        max_diag=float(diag.max()),
        max_offdiag=max_off,
        sampled=sampled,
        pairs_checked=checked,
        noise_corr=noise_corr,
    )
