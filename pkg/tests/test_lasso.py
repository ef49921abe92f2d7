import numpy as np
import pytest

from decoreg import lasso
from decoreg.errors import (
    ConstantColumn,
    DegenerateResponse,
    EmptyPath,
    MaxIterations,
)

from conftest import rand_gen, random_orthogonal


def soft(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def orthonormal_design(seed, n, q):
    # columns scaled so x_j'x_j / n == 1 exactly in structure
    u = random_orthogonal(rand_gen(seed), n)[:, :q]
    return u * np.sqrt(n)


# ---- lambda_grid ----


def test_grid_three_point_example():
    x = np.ones((2, 1))
    y = np.ones(2)  # x'y/n = 1
    g = lasso.lambda_grid(x, y, n_lambda=3, ratio=0.01)
    assert np.allclose(g, [1.0, 0.1, 0.01], rtol=1e-12)


def test_grid_geometry():
    g = rand_gen(1)
    x = g.standard_normal((30, 8))
    y = g.standard_normal(30)
    grid = lasso.lambda_grid(x, y, n_lambda=25, ratio=1e-3)
    lam_max = np.abs(x.T @ y).max() / 30
    assert grid[0] == pytest.approx(lam_max, rel=1e-14)
    assert grid[-1] == pytest.approx(lam_max * 1e-3, rel=1e-12)
    steps = grid[1:] / grid[:-1]
    assert np.allclose(steps, steps[0], rtol=1e-10)
    assert np.all(np.diff(grid) < 0)


def test_grid_degenerate_response():
    with pytest.raises(DegenerateResponse):
        lasso.lambda_grid(np.eye(3), np.zeros(3))


# ---- cd_fit against closed forms ----


@pytest.mark.parametrize("seed", range(6))
def test_orthonormal_soft_threshold(seed):
    n, q = 40, 10
    x = orthonormal_design(seed, n, q)
    y = rand_gen(seed + 500).standard_normal(n) * 2.0
    z = x.T @ y / n
    for lam in (0.0, 0.05, 0.3, 1.0):
        beta = lasso.cd_fit(x, y, lam)
        assert np.abs(beta - soft(z, lam)).max() <= 1e-8


def test_lambda_above_max_gives_exact_zero():
    g = rand_gen(3)
    x = g.standard_normal((25, 12))
    y = g.standard_normal(25)
    lam_max = np.abs(x.T @ y).max() / 25
    beta = lasso.cd_fit(x, y, lam_max * 1.0001)
    assert np.count_nonzero(beta) == 0
    beta_at = lasso.cd_fit(x, y, lam_max)
    assert np.count_nonzero(beta_at) == 0


def test_zero_penalty_recovers_least_squares():
    g = rand_gen(11)
    x = g.standard_normal((60, 5))
    y = g.standard_normal(60)
    beta = lasso.cd_fit(x, y, 0.0)
    expected = np.linalg.lstsq(x, y, rcond=None)[0]
    assert np.abs(beta - expected).max() <= 1e-6


@pytest.mark.parametrize("seed", range(8))
def test_kkt_holds_on_random_instances(seed):
    g = rand_gen(seed * 13 + 1)
    n = int(g.integers(15, 100))
    q = int(g.integers(2, 200))
    x = g.standard_normal((n, q))
    # correlate some columns to make the problem non-trivial
    if q > 3:
        x[:, 1] = 0.7 * x[:, 0] + 0.3 * x[:, 1]
    y = g.standard_normal(n) * 3.0
    grid = lasso.lambda_grid(x, y, n_lambda=8, ratio=1e-2)
    beta = np.zeros(q)
    for lam in grid:
        beta = lasso.cd_fit(x, y, float(lam), warm_start=beta)
        report = lasso.kkt_check(x, y, beta, float(lam))
        assert report.ok, f"KKT violation {report.max_violation:.2e} at lam={lam:g}"


def test_warm_start_agrees_with_cold_start():
    g = rand_gen(21)
    x = g.standard_normal((50, 30))
    y = g.standard_normal(50)
    grid = lasso.lambda_grid(x, y, n_lambda=5, ratio=0.05)
    warm = np.zeros(30)
    for lam in grid:
        warm = lasso.cd_fit(x, y, float(lam), warm_start=warm)
        cold = lasso.cd_fit(x, y, float(lam))
        assert np.abs(warm - cold).max() <= 1e-7


def test_max_iterations_is_raised():
    g = rand_gen(5)
    base = g.standard_normal(40)
    x = np.column_stack([base + 1e-4 * g.standard_normal(40) for _ in range(6)])
    y = g.standard_normal(40)
    with pytest.raises(MaxIterations):
        lasso.cd_fit(x, y, 1e-8, max_sweeps=2)


def test_zero_column_rejected():
    x = np.column_stack([np.zeros(10), np.arange(10.0)])
    with pytest.raises(ConstantColumn):
        lasso.cd_fit(x, np.arange(10.0), 0.1)


def test_cd_deterministic():
    g = rand_gen(77)
    x = g.standard_normal((30, 40))
    y = g.standard_normal(30)
    a = lasso.cd_fit(x, y, 0.05)
    b = lasso.cd_fit(x, y, 0.05)
    assert np.array_equal(a, b)


# ---- path ----


def test_path_shapes_and_monotone_rss():
    g = rand_gen(8)
    x = g.standard_normal((40, 60))
    y = x[:, 0] * 2.0 + g.standard_normal(40)
    path = lasso.lasso_path(
        x, y, n_lambda=20, ratio=1e-3, dev_ratio_max=1.0, df_stop=np.inf
    )
    assert path.betas.shape == (20, 60)
    assert path.n == 40
    # rss never increases as the penalty shrinks
    assert np.all(np.diff(path.rss) <= 1e-8 * (1 + path.rss[0]))
    # at lambda_max the solution is empty
    assert path.df[0] == 0
    assert np.all(path.df >= 0)


def test_path_stops_at_saturation():
    # q > n: deep in the path the fit approaches interpolation; the walk
    # must stop right after crossing either saturation ceiling
    g = rand_gen(8)
    x = g.standard_normal((40, 60))
    y = x[:, 0] * 2.0 + g.standard_normal(40)
    full = lasso.lasso_path(
        x, y, n_lambda=20, ratio=1e-3, dev_ratio_max=1.0, df_stop=np.inf
    )
    stopped = lasso.lasso_path(x, y, n_lambda=20, ratio=1e-3)
    dev = 1.0 - full.rss / float(y @ y)
    trigger = (dev > lasso.SATURATION_DEV_RATIO) | (full.df >= 39)
    expected = int(np.argmax(trigger)) + 1
    assert trigger.any()  # instance really saturates
    assert stopped.lambdas.size == expected < full.lambdas.size
    assert np.array_equal(stopped.betas, full.betas[:expected])
    # entries before the stop are untouched
    assert np.array_equal(stopped.rss, full.rss[:expected])


def test_path_df_stop_semantics():
    g = rand_gen(3)
    x = g.standard_normal((30, 50))
    y = x[:, :4] @ np.array([3.0, -2.0, 1.5, 1.0]) + g.standard_normal(30)
    path = lasso.lasso_path(x, y, df_stop=3)
    assert path.df[-1] >= 3
    assert np.all(path.df[:-1] < 3)


def test_path_keeps_full_grid_without_saturation():
    # q < n cannot interpolate a noisy response: no early stop
    g = rand_gen(9)
    x = g.standard_normal((50, 10))
    y = x[:, 0] + g.standard_normal(50)
    path = lasso.lasso_path(x, y, n_lambda=25, ratio=1e-3)
    assert path.lambdas.size == 25


def test_path_rejects_empty_grid():
    with pytest.raises(EmptyPath):
        lasso.lasso_path(np.eye(3), np.ones(3), lambdas=[])


def test_path_sorts_grid_descending():
    g = rand_gen(2)
    x = g.standard_normal((20, 4))
    y = g.standard_normal(20)
    path = lasso.lasso_path(x, y, lambdas=[0.01, 1.0, 0.1])
    assert np.array_equal(path.lambdas, [1.0, 0.1, 0.01])


# ---- EBIC ----


def _naive_ebic(path, p_total, gamma):
    # independent transcription of the criterion
    out = []
    for k in range(path.lambdas.size):
        rss_term = path.n * np.log(max(path.rss[k] / path.n, np.finfo(float).tiny))
        out.append(rss_term + path.df[k] * np.log(path.n) + 2 * gamma * path.df[k] * np.log(p_total))
    return np.array(out)


@pytest.mark.parametrize("gamma", [0.0, 0.5, 1.0])
def test_ebic_matches_naive_formula(gamma):
    g = rand_gen(31)
    x = g.standard_normal((50, 80))
    y = x[:, :3] @ np.array([3.0, -2.0, 1.5]) + g.standard_normal(50)
    path = lasso.lasso_path(x, y, n_lambda=30)
    scores = lasso.ebic_scores(path, p_total=80, gamma=gamma)
    assert np.allclose(scores, _naive_ebic(path, 80, gamma), rtol=1e-12)
    k = lasso.ebic_select(path, p_total=80, gamma=gamma)
    assert scores[k] == scores.min()


def test_ebic_tie_prefers_larger_lambda():
    # two grid points above lambda_max produce identical empty fits
    g = rand_gen(4)
    x = g.standard_normal((20, 3))
    y = g.standard_normal(20)
    lam_max = np.abs(x.T @ y).max() / 20
    path = lasso.lasso_path(x, y, lambdas=[lam_max * 4, lam_max * 2])
    k = lasso.ebic_select(path, p_total=3)
    assert k == 0
    assert path.lambdas[k] == lam_max * 4


def test_ebic_penalizes_with_full_p():
    # the same subproblem judged against a wider original design selects
    # no more variables
    g = rand_gen(12)
    x = g.standard_normal((40, 30))
    y = x[:, 0] * 1.5 + g.standard_normal(40) * 2.0
    path = lasso.lasso_path(x, y, n_lambda=40)
    k_small = lasso.ebic_select(path, p_total=30)
    k_large = lasso.ebic_select(path, p_total=100_000)
    assert path.df[k_large] <= path.df[k_small]


def test_ebic_select_on_recoverable_signal():
    g = rand_gen(9)
    x = g.standard_normal((100, 50))
    beta = np.zeros(50)
    beta[:3] = [4.0, -3.0, 2.0]
    y = x @ beta + g.standard_normal(100) * 0.5
    path = lasso.lasso_path(x, y)
    k = lasso.ebic_select(path, p_total=50)
    support = np.flatnonzero(path.betas[k])
    assert set(support) == {0, 1, 2}
