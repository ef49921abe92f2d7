import numpy as np
import pytest

from decoreg import datagen
from decoreg.datagen import Dataset, ModelSpec
from decoreg.errors import ConfigError, DegenerateSignal, InvalidSpec


def spec(kind="independent", n=100, p=20, **kw):
    return ModelSpec(kind=kind, n=n, p=p, **kw)


# ---- determinism and stream isolation ----


@pytest.mark.parametrize("kind", datagen.KINDS)
def test_generate_bitwise_deterministic(kind):
    a = datagen.generate(spec(kind=kind, seed=42))
    b = datagen.generate(spec(kind=kind, seed=42))
    assert np.array_equal(a.x, b.x)
    assert np.array_equal(a.y, b.y)
    assert np.array_equal(a.beta_true, b.beta_true)
    assert a.sigma == b.sigma


def test_different_seeds_differ():
    a = datagen.generate(spec(seed=1))
    b = datagen.generate(spec(seed=2))
    assert not np.array_equal(a.x, b.x)


@pytest.mark.parametrize("kind", ["independent", "compound_symmetry", "factor", "group"])
def test_columns_stable_under_wider_p(kind):
    small = datagen.generate(spec(kind=kind, p=20, seed=7))
    large = datagen.generate(spec(kind=kind, p=40, seed=7))
    assert np.array_equal(small.x, large.x[:, :20])


def test_l1_ball_shares_compound_design():
    a = datagen.generate(spec(kind="compound_symmetry", n=50, p=30, seed=3))
    b = datagen.generate(spec(kind="l1_ball", n=50, p=30, seed=3))
    assert np.array_equal(a.x, b.x)


# ---- design distributions ----


def test_independent_columns_nearly_uncorrelated():
    ds = datagen.generate(spec(n=400, p=30, seed=11))
    c = np.corrcoef(ds.x, rowvar=False)
    off = np.abs(c - np.diag(np.diag(c)))
    assert off.max() <= 4.0 / np.sqrt(400)
    assert np.abs(np.diag(c) - 1.0).max() < 1e-12


def test_compound_symmetry_pairwise_correlation():
    ds = datagen.generate(spec(kind="compound_symmetry", n=2000, p=10, seed=5))
    c = np.corrcoef(ds.x, rowvar=False)
    off = c[~np.eye(10, dtype=bool)]
    assert abs(off.mean() - 0.6) < 0.05
    assert np.all(off > 0.4)


def test_group_structure():
    ds = datagen.generate(spec(kind="group", n=500, p=25, seed=9))
    # columns 0 and 3 echo the same latent variable
    c = np.corrcoef(ds.x[:, 0], ds.x[:, 3])[0, 1]
    assert c >= 0.98
    # different latents are nearly uncorrelated
    c01 = np.corrcoef(ds.x[:, 0], ds.x[:, 1])[0, 1]
    assert abs(c01) < 0.2
    assert np.array_equal(ds.beta_true[:15], np.full(15, 3.0))
    assert np.count_nonzero(ds.beta_true) == 15
    assert np.array_equal(ds.support, np.arange(15))


def test_group_population_within_correlation():
    # corr of two copies z + sd*e is 1/(1 + sd^2)
    sd = 0.1
    expected = 1.0 / (1.0 + sd * sd)
    ds = datagen.generate(spec(kind="group", n=4000, p=15, seed=2, group_noise_sd=sd))
    c = np.corrcoef(ds.x[:, 1], ds.x[:, 4])[0, 1]
    assert c == pytest.approx(expected, abs=0.01)


def test_factor_column_variance():
    ds = datagen.generate(spec(kind="factor", n=1500, p=50, seed=13))
    # var(x_j) = ||loadings_j||^2 + 1, averaging to n_factors + 1
    mean_var = ds.x.var(axis=0, ddof=1).mean()
    assert abs(mean_var - 6.0) < 1.2


def test_factor_low_rank_structure():
    ds = datagen.generate(spec(kind="factor", n=800, p=40, seed=4))
    cov = np.cov(ds.x, rowvar=False)
    w = np.linalg.eigvalsh(cov)[::-1]
    # five factor directions dominate the remaining noise floor
    assert w[4] > 2.0 * w[5]


# ---- coefficients ----


@pytest.mark.parametrize("kind", ["independent", "compound_symmetry", "factor"])
def test_sparse_coefficients(kind):
    ds = datagen.generate(spec(kind=kind, n=100, p=500, seed=21))
    assert np.array_equal(ds.support, np.arange(5))
    assert np.count_nonzero(ds.beta_true) == 5
    floor = 5.0 * np.sqrt(np.log(500) / 100)
    assert np.abs(ds.beta_true[:5]).min() >= floor


def test_signs_vary():
    signs = set()
    for seed in range(10):
        ds = datagen.generate(spec(n=50, p=10, seed=seed))
        signs.update(np.sign(ds.beta_true[:5]).astype(int))
    assert signs == {-1, 1}


def test_l1_ball_coefficients():
    ds = datagen.generate(spec(kind="l1_ball", n=50, p=2000, seed=6))
    assert ds.beta_true.min() >= 0.0
    assert abs(np.abs(ds.beta_true).sum() - 10.0) <= 1e-9
    assert ds.support is None


# ---- noise calibration ----


def test_calibrate_noise_formula():
    g = np.random.default_rng(1)
    signal = g.standard_normal(500) * 3.0
    s = datagen.calibrate_noise(signal, 0.9)
    v = signal.var(ddof=1)
    assert s == pytest.approx(np.sqrt(v * 0.1 / 0.9), rel=1e-12)


def test_calibrate_noise_degenerate():
    with pytest.raises(DegenerateSignal):
        datagen.calibrate_noise(np.full(10, 2.0), 0.9)


def test_realized_r2_near_target():
    ds = datagen.generate(spec(kind="compound_symmetry", n=4000, p=50, seed=3))
    signal = ds.x @ ds.beta_true
    resid = ds.y - signal
    r2 = signal.var(ddof=1) / (signal.var(ddof=1) + resid.var(ddof=1))
    assert r2 == pytest.approx(0.9, abs=0.02)


def test_noise_vector_consistency():
    sp = spec(n=60, p=12, seed=8)
    ds = datagen.generate(sp)
    eps = datagen.noise_vector(sp)
    assert np.allclose(ds.y, ds.x @ ds.beta_true + eps, atol=1e-12)


# ---- validation ----


@pytest.mark.parametrize(
    "bad",
    [
        dict(kind="nope"),
        dict(n=1),
        dict(p=0),
        dict(p=4),
        dict(kind="group", p=14),
        dict(rho=1.0),
        dict(rho=-0.1),
        dict(target_r2=0.0),
        dict(target_r2=1.0),
        dict(n_factors=0, kind="factor"),
        dict(group_noise_sd=0.0, kind="group", p=20),
    ],
)
def test_invalid_specs(bad):
    base = dict(kind="independent", n=50, p=20)
    base.update(bad)
    with pytest.raises(InvalidSpec):
        datagen.generate(ModelSpec(**base))


# ---- CSV round trip ----


def test_csv_round_trip(tmp_path):
    ds = datagen.generate(spec(n=17, p=6, seed=99))
    path = tmp_path / "data.csv"
    datagen.export_csv(ds, path)
    back = datagen.import_csv(path)
    assert np.array_equal(back.x, ds.x)
    assert np.array_equal(back.y, ds.y)
    assert back.x.flags.f_contiguous


def test_csv_same_seed_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    datagen.export_csv(datagen.generate(spec(seed=5)), a)
    datagen.export_csv(datagen.generate(spec(seed=5)), b)
    assert a.read_bytes() == b.read_bytes()


def test_csv_response_by_name(tmp_path):
    path = tmp_path / "odd.csv"
    path.write_text("a,resp,b\n1.0,2.0,3.0\n4.0,5.0,6.0\n")
    ds = datagen.import_csv(path, response="resp")
    assert np.array_equal(ds.y, [2.0, 5.0])
    assert np.array_equal(ds.x, [[1.0, 3.0], [4.0, 6.0]])


def test_csv_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("")
    with pytest.raises(ConfigError):
        datagen.import_csv(p)
    p.write_text("a,b\n1.0,2.0\n")
    with pytest.raises(ConfigError):
        datagen.import_csv(p, response="y")
    p.write_text("y,b\n1.0,oops\n")
    with pytest.raises(ConfigError):
        datagen.import_csv(p)
    p.write_text("y,b\n1.0\n")
    with pytest.raises(ConfigError):
        datagen.import_csv(p)
    p.write_text("y,b\n1.0,inf\n")
    with pytest.raises(ConfigError):
        datagen.import_csv(p)
    p.write_text("y,b\n")
    with pytest.raises(ConfigError):
        datagen.import_csv(p)


def test_sidecar_contents(tmp_path):
    ds = datagen.generate(spec(n=10, p=7, seed=31))
    path = tmp_path / "meta.json"
    datagen.write_sidecar(ds, path)
    meta = datagen.load_sidecar(path)
    assert meta["seed"] == 31
    assert meta["sigma"] == ds.sigma
    assert meta["beta_true"] == [float(v) for v in ds.beta_true]
    assert meta["support"] == [0, 1, 2, 3, 4]
    assert meta["model"]["kind"] == "independent"
