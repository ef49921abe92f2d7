"""Pydantic models for the service wire format.

Requests validate shape and types here; domain rules (p >= 5 for sparse
models, m <= p, ...) stay in the core dataclasses' validate() methods so the
service and the library cannot drift apart.  Exactly one of model / csv /
dataset_id identifies the data in any request that needs some.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict

from ..datagen import KINDS, ModelSpec
from ..deco import METHODS, DecoConfig
from ..experiments import ExperimentConfig


class ModelSpecIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: str
    n: int
    p: int
    rho: float = 0.6
    n_factors: int = 5
    group_noise_sd: float = 0.1
    target_r2: float = 0.9
    seed: int = 0

    def to_spec(self) -> ModelSpec:
        return ModelSpec(**self.model_dump())


class DecoConfigIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    m: int = 1
    r1: float | None = None
    r2_grid: list[float] | None = None
    cv_folds: int = 5
    lambda_rule: str = "ebic"
    gamma: float = 0.5
    A: float = 2.0
    lambda_value: float | None = None
    refine: bool = True
    scale_columns: bool = True
    seed: int = 0
    mode: str = "gram_inv_sqrt"
    n_lambda: int = 100
    lambda_min_ratio: float = 1e-3

    def to_config(self) -> DecoConfig:
        d = self.model_dump()
        if d["r2_grid"] is not None:
            d["r2_grid"] = tuple(d["r2_grid"])
        return DecoConfig(**d)


class CsvDataIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    text: str
    response: str = "y"


class _DataCarrier(BaseModel):
    """Mixin fields naming the dataset a request operates on."""

    model_config = ConfigDict(extra="forbid")

    model: ModelSpecIn | None = None
    csv: CsvDataIn | None = None
    dataset_id: str | None = None

    def source_count(self) -> int:
        return sum(v is not None for v in (self.model, self.csv, self.dataset_id))


class FitRequest(_DataCarrier):
    method: str = "deco3"
    config: DecoConfigIn = DecoConfigIn()
    threads: int = 1


class DiagnosticsRequest(_DataCarrier):
    config: DecoConfigIn = DecoConfigIn()
    identity: bool = False


class ExperimentRequest(_DataCarrier):
    methods: list[str] = ["deco3"]
    replications: int = 1
    m_values: list[int] = [1]
    response: str = "y"
    deco: DecoConfigIn = DecoConfigIn()
    seed: int = 0
    threads: int = 1
    holdout_fraction: float = 0.0

    def to_config(self, csv_path: str | None) -> ExperimentConfig:
        return ExperimentConfig(
            methods=list(self.methods),
            replications=self.replications,
            m_values=list(self.m_values),
            model=self.model.to_spec() if self.model else None,
            csv=csv_path,
            response=self.csv.response if self.csv else self.response,
            deco=self.deco.to_config(),
            seed=self.seed,
            threads=self.threads,
            holdout_fraction=self.holdout_fraction,
        )


# ---- responses ----


class VersionResponse(BaseModel):
    name: str
    version: str
    methods: list[str] = list(METHODS)
    model_kinds: list[str] = list(KINDS)


class DatasetInfo(BaseModel):
    id: str
    n: int
    p: int
    kind: str | None = None
    has_truth: bool = False


class WorkerReportOut(BaseModel):
    worker: int
    lam: float
    support_size: int
    kkt_max_violation: float
    duration_ms: float


class RefineReportOut(BaseModel):
    r2: float | None = None
    sparsified: bool = False
    empty_support: bool = False
    support_size: int = 0


class MetricsOut(BaseModel):
    mse: float
    fp: int
    fn: int
    sign_consistent: bool
    pred_mse: float | None = None


class FitResponse(BaseModel):
    method: str
    beta: list[float]
    intercept: float
    support: list[int]
    stage_times_ms: dict[str, float]
    worker_reports: list[WorkerReportOut]
    refine: RefineReportOut | None = None
    metrics: MetricsOut | None = None


class ExperimentResponse(BaseModel):
    columns: list[str]
    rows: list[dict]
    aggregates: list[dict]
    n_units: int
    n_failed: int
    exit_status: int


class DiagnosticsSide(BaseModel):
    n: int
    p: int
    min_diag: float
    max_diag: float
    max_offdiag: float
    sampled: bool
    pairs_checked: int
    noise_corr: float | None = None


class DiagnosticsResponse(BaseModel):
    n: int
    p: int
    r1: float
    identity: bool
    raw: DiagnosticsSide
    decorrelated: DiagnosticsSide
