import numpy as np
import pytest

# Filled by the acceptance battery; replayed after the run so the scoreboard
# is visible even though pytest hides stdout of passing tests.
SCOREBOARD = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if SCOREBOARD:
        terminalreporter.write_sep("-", "acceptance scoreboard")
        for line in SCOREBOARD:
            terminalreporter.write_line(line)


def rand_gen(seed):
    return np.random.default_rng(seed)


def random_spd(gen, n, jitter=1e-3):
    b = gen.standard_normal((n, n))
    return b.T @ b + jitter * np.eye(n)


def random_orthogonal(gen, n):
    q, r = np.linalg.qr(gen.standard_normal((n, n)))
    # fix signs so the factor is unique
    return q * np.sign(np.diag(r))


@pytest.fixture
def gen():
    return rand_gen(0)
