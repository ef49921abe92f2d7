"""FastAPI application: dataset generation and storage, fits, experiment
sweeps and design diagnostics over HTTP.

Domain errors (DecoError and subclasses) map to 422 responses with the
exception class named in the detail string; unknown dataset ids map to 404.
Datasets live in an in-memory store keyed by short ids — this is a desk-scale
tool, not a database.
"""

from __future__ import annotations

import itertools
import os
import tempfile
import threading

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from .. import __version__
from ..datagen import Dataset, csv_text, generate, import_csv_text, sidecar
from ..deco import run_method
from ..errors import DecoError
from ..experiments import CSV_COLUMNS, run_diagnostics, run_experiment
from ..metrics import compute_metrics
from .schemas import (
    CsvDataIn,
    DatasetInfo,
    DiagnosticsRequest,
    DiagnosticsResponse,
    ExperimentRequest,
    ExperimentResponse,
    FitRequest,
    FitResponse,
    MetricsOut,
    ModelSpecIn,
    RefineReportOut,
    VersionResponse,
    WorkerReportOut,
)


class DatasetStore:
    """Thread-safe in-memory dataset registry with sequential ids."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._data: dict[str, Dataset] = {}
        self._ids = itertools.count(1)

    def add(self, ds: Dataset) -> str:
        with self._lock:
            key = f"ds-{next(self._ids):04d}"
            self._data[key] = ds
            return key

    def get(self, key: str) -> Dataset:
        with self._lock:
            ds = self._data.get(key)
        if ds is None:
            raise HTTPException(status_code=404, detail=f"no dataset {key!r}")
        return ds

    def infos(self) -> list[DatasetInfo]:
        with self._lock:
            items = list(self._data.items())
        return [_info(key, ds) for key, ds in items]


def _info(key: str, ds: Dataset) -> DatasetInfo:
    return DatasetInfo(
        id=key,
        n=ds.n,
        p=ds.p,
        kind=ds.spec.kind if ds.spec is not None else None,
        has_truth=ds.beta_true is not None,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="decoreg", version=__version__)
    store = DatasetStore()

    @app.exception_handler(DecoError)
    async def _domain_error(_: Request, exc: DecoError) -> JSONResponse:
        return JSONResponse(
            status_code=422, content={"detail": f"{type(exc).__name__}: {exc}"}
        )

    def resolve(req) -> Dataset:
        if req.source_count() != 1:
            raise HTTPException(
                status_code=422,
                detail="exactly one of model, csv, dataset_id must be given",
            )
        if req.model is not None:
            return generate(req.model.to_spec())
        if req.csv is not None:
            return import_csv_text(req.csv.text, response=req.csv.response)
        return store.get(req.dataset_id)

    @app.get("/version", response_model=VersionResponse)
    def version() -> VersionResponse:
        return VersionResponse(name="decoreg", version=__version__)

    @app.post("/datasets", response_model=DatasetInfo)
    def create_dataset(spec: ModelSpecIn) -> DatasetInfo:
        ds = generate(spec.to_spec())
        return _info(store.add(ds), ds)

    @app.post("/datasets/import", response_model=DatasetInfo)
    def import_dataset(body: CsvDataIn) -> DatasetInfo:
        ds = import_csv_text(body.text, response=body.response)
        return _info(store.add(ds), ds)

    @app.get("/datasets", response_model=list[DatasetInfo])
    def list_datasets() -> list[DatasetInfo]:
        return store.infos()

    @app.get("/datasets/{dataset_id}", response_model=DatasetInfo)
    def dataset_info(dataset_id: str) -> DatasetInfo:
        return _info(dataset_id, store.get(dataset_id))

    @app.get("/datasets/{dataset_id}/csv", response_class=PlainTextResponse)
    def dataset_csv(dataset_id: str) -> PlainTextResponse:
        return PlainTextResponse(csv_text(store.get(dataset_id)), media_type="text/csv")

    @app.get("/datasets/{dataset_id}/sidecar")
    def dataset_sidecar(dataset_id: str) -> dict:
        return sidecar(store.get(dataset_id))

    @app.post("/fit", response_model=FitResponse)
    def fit(req: FitRequest) -> FitResponse:
        ds = resolve(req)
        result = run_method(ds, req.method, req.config.to_config(), threads=req.threads)
        metrics = None
        if ds.beta_true is not None:
            metrics = MetricsOut(**compute_metrics(result.beta, ds.beta_true).to_json())
        payload = result.to_json()
        return FitResponse(
            method=result.method,
            beta=payload["beta"],
            intercept=payload["intercept"],
            support=payload["support"],
            stage_times_ms=payload["stage_times_ms"],
            worker_reports=[WorkerReportOut(**w) for w in payload["worker_reports"]],
            refine=RefineReportOut(**payload["refine"]) if "refine" in payload else None,
            metrics=metrics,
        )

    @app.post("/experiments", response_model=ExperimentResponse)
    def experiments(req: ExperimentRequest) -> ExperimentResponse:
        if req.dataset_id is not None:
            raise HTTPException(
                status_code=422,
                detail="experiments redraw data per replication; pass model or csv",
            )
        if req.csv is not None:
            with tempfile.TemporaryDirectory() as td:
                path = os.path.join(td, "data.csv")
                with open(path, "w") as f:
                    f.write(req.csv.text)
                result = run_experiment(req.to_config(csv_path=path))
        else:
            result = run_experiment(req.to_config(csv_path=None))
        if result.all_failed:
            status = 2
        elif result.n_failed:
            status = 3
        else:
            status = 0
        return ExperimentResponse(
            columns=CSV_COLUMNS,
            rows=result.rows,
            aggregates=result.aggregates,
            n_units=result.n_units,
            n_failed=result.n_failed,
            exit_status=status,
        )

    @app.post("/diagnostics", response_model=DiagnosticsResponse)
    def diagnostics(req: DiagnosticsRequest) -> DiagnosticsResponse:
        ds = resolve(req)
        out = run_diagnostics(ds, req.config.to_config(), identity=req.identity)
        return DiagnosticsResponse(**out)

    return app


app = create_app()
