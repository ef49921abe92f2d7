"""Deterministic random streams.

All randomness in the package flows through keyed substreams of the Philox
4x64 counter-based generator.  A substream is addressed by (seed, stage, index)
so that e.g. column j of a design matrix always reads the same stream no matter
how many columns surround it, and the noise stream never moves when p changes.

Normal variates are produced by Box-Muller on the counter stream rather than
numpy's ziggurat, and Gamma variates by Marsaglia-Tsang, so the exact draw
sequence is pinned by this module and not by the numpy version's sampler
internals.
"""

from __future__ import annotations

import numpy as np

# ---- substream addressing ----

# Fixed stage codes.  Never renumber: doing so silently changes every dataset.
STAGES = {
    "column": 1,
    "shared": 2,
    "latent": 3,
    "factor": 4,
    "coef_sign": 5,
    "coef_mag": 6,
    "noise": 7,
    "dirichlet": 8,
    "partition": 9,
    "cv": 10,
    "replication": 11,
    "pairs": 12,
    "holdout": 13,
}

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def stream(seed: int, stage: str, index: int = 0) -> np.random.Generator:
    """Return the (seed, stage, index) substream as a numpy Generator.

    The Philox key is 128 bits: the low word is the user seed, the high word
    packs the stage code above the index, so distinct (stage, index) pairs can
    never collide for a fixed seed.
    """
    code = STAGES[stage]
    if index < 0 or index >= (1 << 48):
        raise ValueError("substream index out of range")
    key = np.empty(2, dtype=np.uint64)
    key[0] = np.uint64(seed) & _MASK64
    key[1] = (np.uint64(code) << np.uint64(48)) | np.uint64(index)
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(seed: int, stage: str, index: int = 0) -> int:
    """Fold (seed, stage, index) into a fresh 63-bit seed for a child task."""
    g = stream(seed, stage, index)
    return int(g.integers(0, 2**63 - 1))


# ---- samplers on a substream ----


def uniforms(gen: np.random.Generator, size: int) -> np.ndarray:
    return gen.random(size)


def normals(gen: np.random.Generator, size: int) -> np.ndarray:
    """Standard normals via Box-Muller on the counter stream.

    Draws ceil(size/2) uniform pairs and interleaves the cosine/sine legs;
    u1 is reflected to (0, 1] so the log never sees zero.
    """
    if size == 0:
        return np.empty(0)
    m = (size + 1) // 2
    u1 = 1.0 - gen.random(m)
    u2 = gen.random(m)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * m)
    z[0::2] = r * np.cos(2.0 * np.pi * u2)
    z[1::2] = r * np.sin(2.0 * np.pi * u2)
    return z[:size]


def _gamma_ge1(gen: np.random.Generator, shape: float, size: int) -> np.ndarray:
    # Marsaglia-Tsang squeeze/rejection, valid for shape >= 1.
    d = shape - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty(size)
    filled = 0
    while filled < size:
        k = size - filled
        x = normals(gen, k)
        v = (1.0 + c * x) ** 3
        u = gen.random(k)
        with np.errstate(invalid="ignore", divide="ignore"):
            ok = (v > 0.0) & (
                np.log(u) < 0.5 * x * x + d - d * v + d * np.log(np.where(v > 0.0, v, 1.0))
            )
        acc = d * v[ok]
        take = min(acc.size, size - filled)
        out[filled : filled + take] = acc[:take]
        filled += take
    return out


def log_gammas(gen: np.random.Generator, shape: float, size: int) -> np.ndarray:
    """log of Gamma(shape, 1) draws.

    shape < 1 uses the boost identity G(a) = G(a+1) * U^(1/a) applied in log
    space, which stays finite even for the tiny shapes (1/p) the Dirichlet
    sampler feeds in, where U^(1/a) itself would underflow.
    """
    if shape <= 0.0:
        raise ValueError("gamma shape must be positive")
    if shape >= 1.0:
        return np.log(_gamma_ge1(gen, shape, size))
    g = _gamma_ge1(gen, shape + 1.0, size)
    u = 1.0 - gen.random(size)
    return np.log(g) + np.log(u) / shape


def gammas(gen: np.random.Generator, shape: float, size: int) -> np.ndarray:
    return np.exp(log_gammas(gen, shape, size))


def dirichlet_symmetric(gen: np.random.Generator, alpha: float, k: int) -> np.ndarray:
    """One draw from Dirichlet(alpha, ..., alpha) on the k-simplex.

    Normalized Gamma(alpha, 1) construction carried out in log space: for very
    small alpha nearly all mass sits on a handful of coordinates and the raw
    gamma draws underflow, but log-draws shifted by their maximum normalize
    exactly.
    """
    lg = log_gammas(gen, alpha, k)
    lg -= lg.max()
    w = np.exp(lg)
    return w / w.sum()
