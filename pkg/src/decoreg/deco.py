"""Feature-split decorrelated regression.

The pipeline standardizes (X, y), splits columns into m groups, accumulates
the row-space Gram F = sum_i X_i X_i', forms Fbar = sqrt(p) (F + r1 I)^(-1/2),
and hands every worker the same transformed response Fbar y together with its
own transformed block Fbar X_i.  Workers solve independent lasso problems,
their coefficients are concatenated and mapped back to raw units, and an
optional refinement stage re-estimates the selected coefficients by ridge on
the untransformed design.

Two transform modes exist: "gram_inv_sqrt" applies the symmetric n x n factor
above; "svd_rows" applies sqrt(p) (Lambda + r1 I)^(-1/2) U' from the same
eigendecomposition, which expresses the problem in the eigenbasis and leaves
every inner product (hence every fit) equivalent.

With r1 = 0 the factor is the Moore-Penrose inverse square root, so the
pipeline stays defined after centering introduces one exact null direction.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng
from .datagen import Dataset
from .errors import (
    CoverageGap,
    DegenerateResponse,
    DimensionMismatch,
    InvalidM,
    InvalidSpec,
)
from .lasso import (
    EBIC_PATIENCE,
    KKT_TOL,
    LAMBDA_MIN_RATIO,
    N_LAMBDA,
    cd_fit,
    ebic_select,
    kkt_check,
    lambda_grid,
    lasso_path,
)
from .linalg import (
    Standardization,
    center_scale,
    ridge_solve,
    spd_inv_sqrt,
    spd_inv_sqrt_rows,
)

METHODS = ("deco2", "deco3", "lasso_full", "lasso_refine", "lasso_naive")

STAGES = ("gram", "eig", "decorrelate", "worker_fit", "merge", "refine")

# EBIC plateau patience for paths over raw (correlated) designs.  Across 200
# desk-scale equicorrelated block paths the EBIC minimum never reappeared more
# than 25 grid points after the previous best; 40 keeps a 1.6x margin.
RAW_EBIC_PATIENCE = 40


# ---- configuration ----


@dataclass
class DecoConfig:
    """Tunables for one fit.

    r1 defaults to 1 when refinement is on and 10 otherwise; r2_grid defaults
    to 10 log-spaced values in [1e-4, 1e2] scaled by n.  lambda_rule is one of
    "ebic" (per-worker path + extended BIC, gamma as given), "theoretical"
    (lam = A * sd(y) * sqrt(log p / n), shared by all workers), or "fixed"
    (lambda_value verbatim, shared).
    """

    m: int = 1
    r1: float | None = None
    r2_grid: tuple[float, ...] | None = None
    cv_folds: int = 5
    lambda_rule: str = "ebic"
    gamma: float = 0.5
    A: float = 2.0
    lambda_value: float | None = None
    refine: bool = True
    scale_columns: bool = True
    seed: int = 0
    mode: str = "gram_inv_sqrt"
    n_lambda: int = N_LAMBDA
    lambda_min_ratio: float = LAMBDA_MIN_RATIO

    def validate(self) -> None:
        if self.m < 1:
            raise InvalidM(f"m must be at least 1, got {self.m}")
        if self.r1 is not None and self.r1 < 0:
            raise InvalidSpec("r1 must be nonnegative")
        if self.cv_folds < 2:
            raise InvalidSpec("cv_folds must be at least 2")
        if self.lambda_rule not in ("ebic", "theoretical", "fixed"):
            raise InvalidSpec(f"unknown lambda_rule {self.lambda_rule!r}")
        if self.lambda_rule == "fixed" and (self.lambda_value is None or self.lambda_value < 0):
            raise InvalidSpec("lambda_rule='fixed' needs a nonnegative lambda_value")
        if self.gamma < 0:
            raise InvalidSpec("gamma must be nonnegative")
        if self.A <= 0:
            raise InvalidSpec("A must be positive")
        if self.mode not in ("gram_inv_sqrt", "svd_rows"):
            raise InvalidSpec(f"unknown mode {self.mode!r}")
        if self.n_lambda < 1 or not (0 < self.lambda_min_ratio <= 1):
            raise InvalidSpec("bad lambda grid parameters")

    def resolved_r1(self) -> float:
        if self.r1 is not None:
            return float(self.r1)
        return 1.0 if self.refine else 10.0

    def resolved_r2_grid(self, n: int) -> np.ndarray:
        if self.r2_grid is not None:
            g = np.asarray(self.r2_grid, dtype=np.float64)
            if g.size == 0 or np.any(g < 0):
                raise InvalidSpec("r2_grid must be nonempty and nonnegative")
            return g
        return np.geomspace(1e-4, 1e2, 10) * n


# ---- partition ----


@dataclass
class Partition:
    """Disjoint exhaustive grouping of column indices 0..p-1."""

    p: int
    groups: list[np.ndarray]

    def validate(self) -> None:
        seen = np.concatenate([np.asarray(g, dtype=np.int64) for g in self.groups]) if self.groups else np.empty(0, np.int64)
        if seen.size != self.p or np.unique(seen).size != self.p or (
            seen.size and (seen.min() < 0 or seen.max() >= self.p)
        ):
            raise CoverageGap("groups do not cover columns 0..p-1 exactly once")
        sizes = [len(g) for g in self.groups]
        if sizes and max(sizes) - min(sizes) > 1:
            raise CoverageGap("group sizes differ by more than one")

    @property
    def m(self) -> int:
        return len(self.groups)

    def to_text(self) -> str:
        # one group per line, comma-separated ascending indices
        return "\n".join(",".join(str(int(j)) for j in g) for g in self.groups) + "\n"

    @classmethod
    def from_text(cls, text: str, p: int) -> "Partition":
        groups = []
        for line in text.strip().splitlines():
            line = line.strip()
            if not line:
                continue
            groups.append(np.array([int(tok) for tok in line.split(",")], dtype=np.int64))
        part = cls(p=p, groups=groups)
        part.validate()
        return part


def partition_columns(p: int, m: int, seed: int = 0) -> Partition:
    """Randomly assign p columns to m groups with sizes differing by <= 1."""
    if m < 1 or m > p:
        raise InvalidM(f"m must lie in [1, {p}], got {m}")
    perm = rng.stream(seed, "partition", 0).permutation(p)
    groups = [np.sort(g).astype(np.int64) for g in np.array_split(perm, m)]
    part = Partition(p=p, groups=groups)
    part.validate()
    return part


# ---- pipeline operations ----


def accumulate_gram(blocks) -> np.ndarray:
    """F = sum_i B_i B_i', reduced in the given (ascending group) order."""
    if not blocks:
        raise DimensionMismatch("no blocks to accumulate")
    n = blocks[0].shape[0]
    f = np.zeros((n, n))
    for b in blocks:
        if b.shape[0] != n:
            raise DimensionMismatch("blocks disagree on row count")
        f += b @ b.T
    return f


def decorrelate(fbar: np.ndarray, block: np.ndarray, y: np.ndarray | None = None):
    """Apply the whitening factor to a block (and optionally the response)."""
    bt = np.asfortranarray(fbar @ block)
    if y is None:
        return bt
    return fbar @ y, bt


@dataclass
class WorkerReport:
    worker: int
    lam: float
    support_size: int
    kkt_max_violation: float
    duration_ms: float

    def to_json(self) -> dict:
        return {
            "worker": self.worker,
            "lam": self.lam,
            "support_size": self.support_size,
            "kkt_max_violation": self.kkt_max_violation,
            "duration_ms": self.duration_ms,
        }


def fit_worker(
    y_tilde: np.ndarray,
    block_tilde: np.ndarray,
    config: DecoConfig,
    p_total: int,
    sigma0: float | None = None,
    worker_id: int = 0,
    patience: int | None = EBIC_PATIENCE,
) -> tuple[np.ndarray, WorkerReport]:
    """Solve one block's lasso under the configured penalty rule.

    p_total is the column count of the full design; the EBIC penalty always
    uses it, never the block width.  sigma0 (sample sd of the raw response)
    is required by the theoretical rule.  patience bounds how far past the
    running EBIC minimum the path descends (None keeps the full path); the
    default suits decorrelated blocks, where the minimum resurfaces within a
    few grid points — raw correlated designs need the longer
    RAW_EBIC_PATIENCE leash.
    """
    t0 = time.perf_counter()
    n = y_tilde.shape[0]
    q = block_tilde.shape[1]
    if config.lambda_rule == "ebic":
        try:
            grid = lambda_grid(
                block_tilde, y_tilde, n_lambda=config.n_lambda, ratio=config.lambda_min_ratio
            )
        except DegenerateResponse:
            # block carries no signal at all: the solution is zero at any penalty
            beta = np.zeros(q)
            ms = (time.perf_counter() - t0) * 1e3
            return beta, WorkerReport(worker_id, 0.0, 0, 0.0, ms)
        path = lasso_path(
            block_tilde,
            y_tilde,
            lambdas=grid,
            ebic_patience=patience,
            p_total=p_total,
            gamma=config.gamma,
        )
        k = ebic_select(path, p_total=p_total, gamma=config.gamma)
        lam = float(path.lambdas[k])
        beta = path.betas[k].copy()
    elif config.lambda_rule == "theoretical":
        if sigma0 is None:
            raise InvalidSpec("theoretical lambda rule needs sigma0 = sd of the response")
        lam = config.A * sigma0 * float(np.sqrt(np.log(p_total) / n))
        beta = cd_fit(block_tilde, y_tilde, lam)
    else:  # fixed
        lam = float(config.lambda_value)
        beta = cd_fit(block_tilde, y_tilde, lam)
    report = kkt_check(block_tilde, y_tilde, beta, lam, tol=KKT_TOL)
    ms = (time.perf_counter() - t0) * 1e3
    return beta, WorkerReport(
        worker_id, lam, int(np.count_nonzero(beta)), report.max_violation, ms
    )


def merge(
    worker_betas, partition: Partition, std: Standardization
) -> tuple[np.ndarray, float]:
    """Scatter per-block coefficients into place and undo the standardization."""
    if len(worker_betas) != partition.m:
        raise CoverageGap(
            f"{len(worker_betas)} worker results for {partition.m} groups"
        )
    p = partition.p
    beta_std = np.zeros(p)
    for g, b in zip(partition.groups, worker_betas):
        if len(g) != len(b):
            raise CoverageGap("worker coefficient length does not match its group")
        beta_std[g] = b
    beta = beta_std / std.col_scales
    intercept = std.y_mean - float(std.col_means @ beta)
    return beta, intercept


# ---- refinement ----


@dataclass
class RefineReport:
    r2: float | None = None
    sparsified: bool = False
    empty_support: bool = False
    support_size: int = 0

    def to_json(self) -> dict:
        return {
            "r2": self.r2,
            "sparsified": self.sparsified,
            "empty_support": self.empty_support,
            "support_size": self.support_size,
        }


def _cv_folds(n: int, folds: int, seed: int) -> list[np.ndarray]:
    perm = rng.stream(seed, "cv", 0).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, folds)]


def _ridge_cv(x_m: np.ndarray, y: np.ndarray, grid: np.ndarray, folds: list[np.ndarray]) -> float:
    n = y.shape[0]
    all_idx = np.arange(n)
    best = (np.inf, 0.0)
    for r2 in grid:
        sse = 0.0
        for test in folds:
            train = np.setdiff1d(all_idx, test, assume_unique=True)
            xt = x_m[train]
            bt = ridge_solve(xt, y[train], float(r2))
            b0 = y[train].mean() - xt.mean(axis=0) @ bt
            pred = b0 + x_m[test] @ bt
            err = y[test] - pred
            sse += float(err @ err)
        mse = sse / n
        if mse < best[0]:
            best = (mse, float(r2))
    return best[1]


def refine(
    dataset: Dataset,
    beta: np.ndarray,
    config: DecoConfig,
    sparsify_response: np.ndarray | None = None,
    sparsify_design: np.ndarray | None = None,
    patience: int | None = None,
) -> tuple[np.ndarray, float, RefineReport]:
    """Re-estimate the selected coefficients by ridge on the raw design.

    If the incoming support has n or more columns it is first thinned by a
    lasso(+EBIC) on the supplied (response, design) pair — the decorrelated
    data in the distributed pipeline, the standardized data for the plain
    baseline.  patience (see fit_worker) may shorten that path; leave it None
    unless the supplied design is decorrelated.  The ridge penalty is chosen
    by k-fold cross-validated
    prediction error over config's r2 grid, and the final coefficients come
    from the full raw data at that penalty.  An empty support short-circuits
    to the null model (flagged, not an error).
    """
    n, p = dataset.x.shape
    y_mean = float(dataset.y.mean())
    support = np.flatnonzero(beta)
    report = RefineReport()
    if support.size == 0:
        report.empty_support = True
        return np.zeros(p), y_mean, report
    if support.size >= n:
        if sparsify_response is None or sparsify_design is None:
            std = center_scale(dataset.x, dataset.y, scale=config.scale_columns)
            sparsify_response, sparsify_design = std.y, std.x
        sub = np.asfortranarray(sparsify_design[:, support])
        path = lasso_path(
            sub,
            sparsify_response,
            n_lambda=config.n_lambda,
            ratio=config.lambda_min_ratio,
            ebic_patience=patience,
            p_total=p,
            gamma=config.gamma,
        )
        k = ebic_select(path, p_total=p, gamma=config.gamma)
        keep = np.flatnonzero(path.betas[k])
        report.sparsified = True
        support = support[keep]
        if support.size == 0:
            report.empty_support = True
            return np.zeros(p), y_mean, report
    x_m = np.asfortranarray(dataset.x[:, support])
    grid = config.resolved_r2_grid(n)
    folds = _cv_folds(n, min(config.cv_folds, n), config.seed)
    r2 = _ridge_cv(x_m, dataset.y, grid, folds)
    beta_m = ridge_solve(x_m, dataset.y, r2)
    out = np.zeros(p)
    out[support] = beta_m
    intercept = y_mean - float(dataset.x[:, support].mean(axis=0) @ beta_m)
    report.r2 = r2
    report.support_size = int(support.size)
    return out, intercept, report


# ---- results ----


@dataclass
class FitResult:
    beta: np.ndarray
    intercept: float
    support: np.ndarray
    stage_times: dict[str, float]
    worker_reports: list[WorkerReport] = field(default_factory=list)
    refine_report: RefineReport | None = None
    method: str = ""

    def predict(self, x) -> np.ndarray:
        return self.intercept + np.asarray(x, dtype=np.float64) @ self.beta

    @property
    def runtime_s(self) -> float:
        """Preprocessing plus the longest single worker, merge and refine."""
        return sum(self.stage_times.get(k, 0.0) for k in STAGES)

    def to_json(self) -> dict:
        out = {
            "beta": [float(v) for v in self.beta],
            "intercept": float(self.intercept),
            "support": [int(j) for j in self.support],
            "stage_times_ms": {k: 1e3 * self.stage_times.get(k, 0.0) for k in STAGES},
            "worker_reports": [w.to_json() for w in self.worker_reports],
        }
        if self.method:
            out["method"] = self.method
        if self.refine_report is not None:
            out["refine"] = self.refine_report.to_json()
        return out

    @classmethod
    def from_json(cls, d: dict) -> "FitResult":
        reports = [WorkerReport(**w) for w in d.get("worker_reports", [])]
        rr = d.get("refine")
        return cls(
            beta=np.asarray(d["beta"], dtype=np.float64),
            intercept=float(d["intercept"]),
            support=np.asarray(d["support"], dtype=np.int64),
            stage_times={k: v / 1e3 for k, v in d["stage_times_ms"].items()},
            worker_reports=reports,
            refine_report=RefineReport(**rr) if rr else None,
            method=d.get("method", ""),
        )


# ---- drivers ----


def _fit_blocks(tiles, y_t, config, p, sigma0, threads, patience):
    jobs = list(enumerate(tiles))
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(
                pool.map(
                    lambda job: fit_worker(
                        y_t, job[1], config, p, sigma0,
                        worker_id=job[0], patience=patience,
                    ),
                    jobs,
                )
            )
    else:
        results = [
            fit_worker(y_t, t, config, p, sigma0, worker_id=i, patience=patience)
            for i, t in jobs
        ]
    betas = [b for b, _ in results]
    reports = [r for _, r in results]
    return betas, reports


def _run_pipeline(
    dataset: Dataset,
    config: DecoConfig,
    threads: int | None,
    whiten: bool,
    allow_refine: bool,
    method: str,
) -> FitResult:
    config.validate()
    n, p = dataset.x.shape
    times = dict.fromkeys(STAGES, 0.0)

    t0 = time.perf_counter()
    std = center_scale(dataset.x, dataset.y, scale=config.scale_columns)
    part = partition_columns(p, config.m, seed=config.seed)
    blocks = [np.asfortranarray(std.x[:, g]) for g in part.groups]
    t1 = time.perf_counter()
    times["gram"] = t1 - t0  # standardization + partition billed with the Gram stage

    if whiten:
        f = accumulate_gram(blocks)
        t2 = time.perf_counter()
        times["gram"] += t2 - t1
        r1 = config.resolved_r1()
        if config.mode == "svd_rows":
            fbar = spd_inv_sqrt_rows(f, r1=r1, p=p, pseudo=(r1 == 0.0))
        else:
            fbar = spd_inv_sqrt(f, r1=r1, p=p, pseudo=(r1 == 0.0))
        t3 = time.perf_counter()
        times["eig"] = t3 - t2
        y_t = fbar @ std.y
        tiles = [decorrelate(fbar, b) for b in blocks]
        times["decorrelate"] = time.perf_counter() - t3
    else:
        fbar = None
        y_t = std.y
        tiles = blocks

    # Early stopping on the EBIC plateau: decorrelated paths revisit the
    # minimum within a handful of grid points, but raw correlated paths can
    # dip again up to ~25 points later, so they get a much longer leash.
    patience = EBIC_PATIENCE if whiten else RAW_EBIC_PATIENCE
    sigma0 = float(np.std(dataset.y, ddof=1))
    betas, reports = _fit_blocks(tiles, y_t, config, p, sigma0, threads, patience)
    times["worker_fit"] = max(r.duration_ms for r in reports) / 1e3 if reports else 0.0

    t4 = time.perf_counter()
    beta, intercept = merge(betas, part, std)
    times["merge"] = time.perf_counter() - t4

    refine_report = None
    if allow_refine and config.refine:
        t5 = time.perf_counter()
        if whiten and np.count_nonzero(beta) >= n:
            x_t = np.empty((y_t.shape[0], p), order="F")
            for g, tile in zip(part.groups, tiles):
                x_t[:, g] = tile
            beta, intercept, refine_report = refine(
                dataset, beta, config,
                sparsify_response=y_t, sparsify_design=x_t,
                patience=EBIC_PATIENCE,
            )
        else:
            beta, intercept, refine_report = refine(dataset, beta, config)
        times["refine"] = time.perf_counter() - t5

    return FitResult(
        beta=beta,
        intercept=intercept,
        support=np.flatnonzero(beta),
        stage_times=times,
        worker_reports=reports,
        refine_report=refine_report,
        method=method,
    )


def run_deco(dataset: Dataset, config: DecoConfig, threads: int | None = None) -> FitResult:
    """Full decorrelated pipeline; config.refine picks two- vs three-stage."""
    method = "deco3" if config.refine else "deco2"
    return _run_pipeline(dataset, config, threads, whiten=True, allow_refine=True, method=method)


def run_baseline(
    dataset: Dataset, method: str, config: DecoConfig, threads: int | None = None
) -> FitResult:
    """Single-machine lasso baselines plus the no-whitening ablation.

    lasso_full: path + EBIC on the standardized full design.
    lasso_refine: lasso_full followed by the same ridge refinement stage.
    lasso_naive: the distributed pipeline with the whitening replaced by the
    identity and no refinement — what splitting features costs on its own.
    """
    config.validate()
    if method == "lasso_naive":
        cfg = replace(config, refine=False)
        return _run_pipeline(
            dataset, cfg, threads, whiten=False, allow_refine=False, method=method
        )
    if method not in ("lasso_full", "lasso_refine"):
        raise InvalidSpec(f"unknown baseline {method!r}")
    cfg = replace(config, m=1, refine=(method == "lasso_refine"))
    return _run_pipeline(
        dataset, cfg, threads, whiten=False, allow_refine=True, method=method
    )


def run_method(
    dataset: Dataset, method: str, config: DecoConfig, threads: int | None = None
) -> FitResult:
    """Dispatch a method name from METHODS to the right driver."""
    if method == "deco2":
        return run_deco(dataset, replace(config, refine=False), threads)
    if method == "deco3":
        return run_deco(dataset, replace(config, refine=True), threads)
    if method in ("lasso_full", "lasso_refine", "lasso_naive"):
        return run_baseline(dataset, method, config, threads)
    raise InvalidSpec(f"unknown method {method!r}; expected one of {METHODS}")
