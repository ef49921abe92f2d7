"""Replication harness: run methods over datasets, emit metric CSVs.

A run is described by an ExperimentConfig: a data source (synthetic model or
CSV file), the methods to fit, how many replications, and which partition
counts m to sweep.  Per-replication rows and their per-(method, m) arithmetic
means land in one CSV; failures become rows with an error tag and are
excluded from the means.  Timing columns are the only nondeterministic ones.

Config files are flat `key = value` text with dotted sections (model.*,
deco.*) or, equivalently, a JSON object with those sections nested.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import rng
from .datagen import Dataset, ModelSpec, generate, import_csv
from .deco import METHODS, DecoConfig, run_method
from .errors import ConfigError, DecoError
from .linalg import center_scale, spd_inv_sqrt
from .metrics import compute_metrics, design_diagnostics

CSV_COLUMNS = [
    "method",
    "m",
    "rep",
    "mse",
    "fp",
    "fn",
    "sign_consistent",
    "pred_mse",
    "runtime_ms",
    "gram_ms",
    "eig_ms",
    "decorrelate_ms",
    "worker_fit_ms",
    "merge_ms",
    "refine_ms",
    "error",
]

TIMING_COLUMNS = [c for c in CSV_COLUMNS if c.endswith("_ms")]

_M_FREE_METHODS = ("lasso_full", "lasso_refine")


@dataclass
class ExperimentConfig:
    methods: list[str] = field(default_factory=lambda: ["deco3"])
    replications: int = 1
    m_values: list[int] = field(default_factory=lambda: [1])
    model: ModelSpec | None = None
    csv: str | None = None
    response: str = "y"
    deco: DecoConfig = field(default_factory=DecoConfig)
    seed: int = 0
    threads: int = 1
    output: str | None = None
    holdout_fraction: float = 0.0

    def validate(self) -> None:
        if not self.methods:
            raise ConfigError("no methods requested")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; expected one of {METHODS}")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if not self.m_values or any(m < 1 for m in self.m_values):
            raise ConfigError("m_values must be a nonempty list of positive integers")
        if (self.model is None) == (self.csv is None):
            raise ConfigError("exactly one data source (model or csv) must be given")
        if not (0.0 <= self.holdout_fraction < 1.0):
            raise ConfigError("holdout_fraction must lie in [0, 1)")
        if self.threads < 1:
            raise ConfigError("threads must be positive")
        if self.model is not None:
            try:
                self.model.validate()
            except DecoError as exc:
                raise ConfigError(str(exc)) from exc
        try:
            self.deco.validate()
        except DecoError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass
class ExperimentResult:
    rows: list[dict]
    aggregates: list[dict]
    n_units: int
    n_failed: int

    @property
    def all_failed(self) -> bool:
        return self.n_units > 0 and self.n_failed == self.n_units


# ---- dataset plumbing ----


def _rep_dataset(config: ExperimentConfig, rep: int, csv_cache: Dataset | None) -> Dataset:
    if config.model is not None:
        seed = rng.derive_seed(config.model.seed, "replication", rep)
        return generate(replace(config.model, seed=seed))
    return csv_cache


def _holdout_split(ds: Dataset, fraction: float, seed: int, rep: int):
    n = ds.n
    k = int(round(fraction * n))
    if k == 0:
        return ds, None, None
    if n - k < 2:
        raise ConfigError("holdout fraction leaves fewer than two training rows")
    perm = rng.stream(seed, "holdout", rep).permutation(n)
    test = np.sort(perm[:k])
    train = np.sort(perm[k:])
    train_ds = Dataset(
        x=np.asfortranarray(ds.x[train]),
        y=ds.y[train],
        beta_true=ds.beta_true,
        sigma=ds.sigma,
        support=ds.support,
        spec=ds.spec,
    )
    return train_ds, ds.x[test], ds.y[test]


# ---- the run loop ----


def _unit_row(config, dataset, x_test, y_test, method, m, rep) -> dict:
    row = dict.fromkeys(CSV_COLUMNS, "")
    row.update(method=method, m=m, rep=rep, error="")
    deco_seed = rng.derive_seed(config.seed, "replication", rep)
    cfg = replace(config.deco, m=m, seed=deco_seed)
    try:
        fit = run_method(dataset, method, cfg, threads=config.threads)
    except DecoError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    if dataset.beta_true is not None:
        mt = compute_metrics(fit.beta, dataset.beta_true)
        row.update(
            mse=mt.mse, fp=mt.fp, fn=mt.fn, sign_consistent=int(mt.sign_consistent)
        )
    if x_test is not None:
        err = y_test - fit.predict(x_test)
        row["pred_mse"] = float(err @ err / err.size)
    row["runtime_ms"] = int(round(fit.runtime_s * 1e3))
    for stage, seconds in fit.stage_times.items():
        row[f"{stage}_ms"] = int(round(seconds * 1e3))
    return row


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Execute the full replication sweep described by the config."""
    config.validate()
    csv_cache = import_csv(config.csv, response=config.response) if config.csv else None
    rows = []
    n_failed = 0
    for rep in range(config.replications):
        base = _rep_dataset(config, rep, csv_cache)
        dataset, x_test, y_test = _holdout_split(
            base, config.holdout_fraction, config.seed, rep
        )
        for method in config.methods:
            ms = [0] if method in _M_FREE_METHODS else config.m_values
            for m in ms:
                row = _unit_row(config, dataset, x_test, y_test, method, max(m, 1), rep)
                row["m"] = m
                if row["error"]:
                    n_failed += 1
                rows.append(row)
    aggregates = aggregate_rows(rows)
    return ExperimentResult(
        rows=rows, aggregates=aggregates, n_units=len(rows), n_failed=n_failed
    )


def aggregate_rows(rows: list[dict]) -> list[dict]:
    """Arithmetic means of the numeric columns, grouped by (method, m)."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        if row["error"]:
            continue
        groups.setdefault((row["method"], row["m"]), []).append(row)
    out = []
    mean_cols = [c for c in CSV_COLUMNS if c not in ("method", "m", "rep", "error")]
    for (method, m), members in groups.items():
        agg = dict.fromkeys(CSV_COLUMNS, "")
        agg.update(method=method, m=m, rep="mean", error="")
        for col in mean_cols:
            vals = [r[col] for r in members if r[col] != ""]
            if vals:
                agg[col] = float(np.mean(vals))
        out.append(agg)
    return out


# ---- CSV emission ----


def _cell(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_rows_csv(path, rows: list[dict], aggregates: list[dict] | None = None) -> None:
    with open(path, "w") as f:
        f.write(",".join(CSV_COLUMNS) + "\n")
        for row in rows:
            f.write(",".join(_cell(row[c]) for c in CSV_COLUMNS) + "\n")
        for row in aggregates or []:
            f.write(",".join(_cell(row[c]) for c in CSV_COLUMNS) + "\n")


def read_rows_csv(path) -> list[dict]:
    with open(path) as f:
        header = f.readline().rstrip("\n").split(",")
        out = []
        for line in f:
            if line.strip():
                out.append(dict(zip(header, line.rstrip("\n").split(","))))
    return out


# ---- diagnostics runner ----


def run_diagnostics(dataset: Dataset, config: DecoConfig, identity: bool = False) -> dict:
    """Raw-vs-decorrelated Gram geometry, plus noise correlation when the
    truth is known.

    The raw side is the standardized design (so its Gram entries are sample
    correlations).  With identity=True the whitening factor is replaced by I,
    making both sides coincide — a null check for the transform plumbing.
    """
    config.validate()
    std = center_scale(dataset.x, dataset.y, scale=config.scale_columns)
    eps = None
    if dataset.beta_true is not None:
        eps = dataset.y - dataset.x @ dataset.beta_true
        eps = eps - eps.mean()
    raw = design_diagnostics(std.x, noise=eps, seed=config.seed)
    r1 = config.resolved_r1()
    if identity:
        fbar = np.eye(dataset.n)
    else:
        f = std.x @ std.x.T
        fbar = spd_inv_sqrt(f, r1=r1, p=dataset.p, pseudo=(r1 == 0.0))
    eps_t = fbar @ eps if eps is not None else None
    deco_rep = design_diagnostics(
        np.asfortranarray(fbar @ std.x), noise=eps_t, seed=config.seed
    )
    return {
        "n": dataset.n,
        "p": dataset.p,
        "r1": r1,
        "identity": identity,
        "raw": raw.to_json(),
        "decorrelated": deco_rep.to_json(),
    }


# ---- config files ----


_TOP_SCHEMA = {
    "methods": "strlist",
    "m_values": "intlist",
    "replications": "int",
    "seed": "int",
    "threads": "int",
    "output": "str",
    "csv": "str",
    "response": "str",
    "holdout_fraction": "float",
}

_MODEL_SCHEMA = {
    "kind": "str",
    "n": "int",
    "p": "int",
    "rho": "float",
    "n_factors": "int",
    "group_noise_sd": "float",
    "target_r2": "float",
    "seed": "int",
}

_DECO_SCHEMA = {
    "m": "int",
    "r1": "float",
    "r2_grid": "floatlist",
    "cv_folds": "int",
    "lambda_rule": "str",
    "gamma": "float",
    "A": "float",
    "lambda_value": "float",
    "refine": "bool",
    "scale_columns": "bool",
    "seed": "int",
    "mode": "str",
    "n_lambda": "int",
    "lambda_min_ratio": "float",
}


def _convert(key: str, raw, kind: str):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            if isinstance(raw, bool):
                return raw
            if str(raw).lower() in ("true", "1", "yes", "on"):
                return True
            if str(raw).lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "str":
            return str(raw)
        if kind == "strlist":
            if isinstance(raw, (list, tuple)):
                return [str(v) for v in raw]
            return [tok.strip() for tok in str(raw).split(",") if tok.strip()]
        if kind == "intlist":
            if isinstance(raw, (list, tuple)):
                return [int(v) for v in raw]
            return [int(tok) for tok in str(raw).split(",") if tok.strip()]
        if kind == "floatlist":
            if isinstance(raw, (list, tuple)):
                return tuple(float(v) for v in raw)
            return tuple(float(tok) for tok in str(raw).split(",") if tok.strip())
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    raise ConfigError(f"unhandled kind {kind}")  # pragma: no cover


def _parse_flat_text(text: str) -> dict:
    nested: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if "." in key:
            section, _, sub = key.partition(".")
            nested.setdefault(section, {})[sub] = value
        else:
            nested[key] = value
    return nested


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from a (possibly string-valued) mapping."""
    known = set(_TOP_SCHEMA) | {"model", "deco"}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
    kwargs = {}
    for key, kind in _TOP_SCHEMA.items():
        if key in data and data[key] is not None:
            kwargs[key] = _convert(key, data[key], kind)
    model_data = data.get("model")
    if model_data:
        for key in model_data:
            if key not in _MODEL_SCHEMA:
                raise ConfigError(f"unknown config key model.{key!r}")
        mkw = {
            k: _convert(f"model.{k}", v, _MODEL_SCHEMA[k])
            for k, v in model_data.items()
            if v is not None
        }
        if "kind" not in mkw or "n" not in mkw or "p" not in mkw:
            raise ConfigError("model section needs at least kind, n and p")
        kwargs["model"] = ModelSpec(**mkw)
    deco_data = data.get("deco")
    deco_kwargs = {}
    if deco_data:
        for key in deco_data:
            if key not in _DECO_SCHEMA:
                raise ConfigError(f"unknown config key deco.{key!r}")
        deco_kwargs = {
            k: _convert(f"deco.{k}", v, _DECO_SCHEMA[k])
            for k, v in deco_data.items()
            if v is not None
        }
    kwargs["deco"] = DecoConfig(**deco_kwargs)
    cfg = ExperimentConfig(**kwargs)
    if "m_values" not in kwargs and "m" in deco_kwargs:
        cfg.m_values = [deco_kwargs["m"]]
    return cfg


def load_config(path) -> ExperimentConfig:
    """Read a config file; JSON when it looks like JSON, flat text otherwise."""
    with open(path) as f:
        text = f.read()
    body = text.lstrip()
    if str(path).endswith(".json") or body.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top-level JSON value must be an object")
    else:
        data = _parse_flat_text(text)
    return config_from_dict(data)
