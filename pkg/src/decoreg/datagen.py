"""Synthetic regression designs and CSV import/export.

Five design families are supported, all with y = X b + eps and the noise
level calibrated so the population signal fraction hits a target R^2:

independent         iid N(0,1) columns
compound_symmetry   x_j = sqrt(rho) z0 + sqrt(1-rho) z_j, shared z0 per row
group               three latent variables, each echoed by five noisy copies
                    (columns 0..14, within-group correlation 1/(1+sd^2)),
                    remaining columns iid N(0,1)
factor              x_j = loadings_j . factors + noise, k latent factors
l1_ball             compound-symmetry design, coefficients drawn from a flat
                    Dirichlet scaled to ||b||_1 = 10 (dense, not sparse)

The sparse families put the signal on the first five columns with
coefficients (-1)^Ber(0.5) * (|N(0,1)| + 5 sqrt(log p / n)); the group family
uses b = 3 on its fifteen structured columns.

Every random quantity reads its own substream (per column, per stage), so a
dataset is a pure function of its spec and columns do not move when p grows.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, asdict

import numpy as np

from . import rng
from .errors import ConfigError, DegenerateSignal, InvalidSpec
from .linalg import as_vector

KINDS = ("independent", "compound_symmetry", "group", "factor", "l1_ball")

_SPARSE_KINDS = ("independent", "compound_symmetry", "factor")


@dataclass
class ModelSpec:
    kind: str
    n: int
    p: int
    rho: float = 0.6
    n_factors: int = 5
    group_noise_sd: float = 0.1
    target_r2: float = 0.9
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if self.n < 2:
            raise InvalidSpec("n must be at least 2")
        if self.p < 1:
            raise InvalidSpec("p must be positive")
        if self.kind in _SPARSE_KINDS and self.p < 5:
            raise InvalidSpec(f"{self.kind} needs p >= 5 for the five signal columns")
        if self.kind == "group" and self.p < 15:
            raise InvalidSpec("group needs p >= 15 for the structured block")
        if not (0.0 <= self.rho < 1.0):
            raise InvalidSpec("rho must lie in [0, 1)")
        if self.n_factors < 1:
            raise InvalidSpec("n_factors must be positive")
        if self.group_noise_sd <= 0.0:
            raise InvalidSpec("group_noise_sd must be positive")
        if not (0.0 < self.target_r2 < 1.0):
            raise InvalidSpec("target_r2 must lie strictly between 0 and 1")


@dataclass
class Dataset:
    x: np.ndarray
    y: np.ndarray
    beta_true: np.ndarray | None = None
    sigma: float | None = None
    support: np.ndarray | None = None
    spec: ModelSpec | None = None

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


def _column(spec: ModelSpec, j: int, size: int) -> np.ndarray:
    return rng.normals(rng.stream(spec.seed, "column", j), size)


def _design(spec: ModelSpec) -> np.ndarray:
    n, p = spec.n, spec.p
    x = np.empty((n, p), order="F")
    if spec.kind == "independent":
        for j in range(p):
            x[:, j] = _column(spec, j, n)
    elif spec.kind in ("compound_symmetry", "l1_ball"):
        z0 = rng.normals(rng.stream(spec.seed, "shared", 0), n)
        a = np.sqrt(spec.rho)
        b = np.sqrt(1.0 - spec.rho)
        for j in range(p):
            x[:, j] = a * z0 + b * _column(spec, j, n)
    elif spec.kind == "group":
        z = [rng.normals(rng.stream(spec.seed, "latent", k), n) for k in range(3)]
        for j in range(15):
            x[:, j] = z[j % 3] + spec.group_noise_sd * _column(spec, j, n)
        for j in range(15, p):
            x[:, j] = _column(spec, j, n)
    elif spec.kind == "factor":
        k = spec.n_factors
        factors = np.empty((n, k))
        for a_ in range(k):
            factors[:, a_] = rng.normals(rng.stream(spec.seed, "factor", a_), n)
        for j in range(p):
            draws = _column(spec, j, k + n)
            x[:, j] = factors @ draws[:k] + draws[k:]
    else:  # pragma: no cover - validate() fences this
        raise InvalidSpec(spec.kind)
    return x


def _coefficients(spec: ModelSpec) -> np.ndarray:
    p = spec.p
    beta = np.zeros(p)
    if spec.kind in _SPARSE_KINDS:
        u = rng.uniforms(rng.stream(spec.seed, "coef_sign", 0), 5)
        signs = 1.0 - 2.0 * (u < 0.5)
        mags = np.abs(rng.normals(rng.stream(spec.seed, "coef_mag", 0), 5))
        beta[:5] = signs * (mags + 5.0 * np.sqrt(np.log(p) / spec.n))
    elif spec.kind == "group":
        beta[:15] = 3.0
    elif spec.kind == "l1_ball":
        w = rng.dirichlet_symmetric(rng.stream(spec.seed, "dirichlet", 0), 1.0 / p, p)
        beta = 10.0 * w
    return beta


def calibrate_noise(signal, target_r2: float) -> float:
    """Noise sd so that var(signal) / (var(signal) + sigma^2) = target_r2.

    Uses the sample variance (ddof=1) of the realized signal vector.
    """
    signal = as_vector(signal)
    if not (0.0 < target_r2 < 1.0):
        raise InvalidSpec("target_r2 must lie strictly between 0 and 1")
    v = float(signal.var(ddof=1))
    if v <= 0.0:
        raise DegenerateSignal("X b is constant; cannot calibrate noise to a target R^2")
    return float(np.sqrt(v * (1.0 - target_r2) / target_r2))


def generate(spec: ModelSpec) -> Dataset:
    """Draw one dataset; bitwise reproducible for a given ModelSpec."""
    spec.validate()
    x = _design(spec)
    beta = _coefficients(spec)
    signal = x @ beta
    sigma = calibrate_noise(signal, spec.target_r2)
    eps = sigma * rng.normals(rng.stream(spec.seed, "noise", 0), spec.n)
    y = signal + eps
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
        raise DegenerateSignal("generated dataset contains non-finite values")
    if spec.kind == "l1_ball":
        support = None  # dense truth: not exactly sparse
    else:
        support = np.flatnonzero(beta)
    return Dataset(x=x, y=y, beta_true=beta, sigma=sigma, support=support, spec=spec)


def noise_vector(spec: ModelSpec) -> np.ndarray:
    """The exact eps used by generate() for this spec (for diagnostics)."""
    ds = generate(spec)
    return ds.y - ds.x @ ds.beta_true


# ---- CSV + sidecar ----


def csv_text(dataset: Dataset) -> str:
    """y,x1,...,xp rows with shortest round-trip decimal formatting."""
    n, p = dataset.x.shape
    lines = ["y," + ",".join(f"x{j + 1}" for j in range(p))]
    for i in range(n):
        row = [repr(float(dataset.y[i]))]
        row.extend(repr(float(v)) for v in dataset.x[i])
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def export_csv(dataset: Dataset, path) -> None:
    with open(path, "w") as f:
        f.write(csv_text(dataset))


def sidecar(dataset: Dataset) -> dict:
    out = {
        "n": int(dataset.n),
        "p": int(dataset.p),
        "sigma": dataset.sigma,
        "beta_true": None if dataset.beta_true is None else [float(v) for v in dataset.beta_true],
        "support": None if dataset.support is None else [int(j) for j in dataset.support],
        "seed": None if dataset.spec is None else dataset.spec.seed,
    }
    if dataset.spec is not None:
        out["model"] = asdict(dataset.spec)
    return out


def write_sidecar(dataset: Dataset, path) -> None:
    with open(path, "w") as f:
        json.dump(sidecar(dataset), f, indent=2)
        f.write("\n")


def _parse_csv(f, label: str, response: str) -> Dataset:
    header_line = f.readline()
    if not header_line:
        raise ConfigError(f"{label}: empty file, expected a header row")
    header = [h.strip() for h in header_line.rstrip("\n").split(",")]
    if response not in header:
        raise ConfigError(f"{label}: no column named {response!r} in header {header}")
    y_col = header.index(response)
    width = len(header)
    ys = []
    rows = []
    for lineno, line in enumerate(f, start=2):
        if not line.strip():
            continue
        cells = line.rstrip("\n").split(",")
        if len(cells) != width:
            raise ConfigError(f"{label}:{lineno}: expected {width} cells, found {len(cells)}")
        vals = np.empty(width)
        for k, cell in enumerate(cells):
            try:
                vals[k] = float(cell)
            except ValueError:
                raise ConfigError(f"{label}:{lineno}: non-numeric cell {cell!r}") from None
        if not np.all(np.isfinite(vals)):
            raise ConfigError(f"{label}:{lineno}: non-finite value")
        ys.append(vals[y_col])
        rows.append(np.delete(vals, y_col))
    if not rows:
        raise ConfigError(f"{label}: no data rows")
    x = np.asfortranarray(np.vstack(rows))
    return Dataset(x=x, y=np.asarray(ys))


def import_csv(path, response: str = "y") -> Dataset:
    """Load a dataset written by export_csv (or any headered numeric CSV).

    The response column is located by name; every cell must parse as a finite
    float.  Anything else is a hard error, never a silent NaN.
    """
    with open(path) as f:
        return _parse_csv(f, str(path), response)


def import_csv_text(text: str, response: str = "y", label: str = "<inline csv>") -> Dataset:
    """import_csv for CSV content already in memory."""
    return _parse_csv(io.StringIO(text), label, response)


def load_sidecar(path) -> dict:
    with open(path) as f:
        return json.load(f)
