import numpy as np
import pytest

from gaussflow import Partition2, Partition3, constant_model

# lines collected by test_acceptance.py, printed after the run
ACCEPTANCE_LINES = []

SCALAR_B = np.array([[-1.0, 1.0], [0.0, -1.0]])
CHAIN_B = np.array([[-1.0, 1.0, 0.0], [0.0, -1.0, 1.0], [0.0, 0.0, -1.0]])


@pytest.fixture
def scalar_pair():
    return constant_model(SCALAR_B, np.eye(2)), Partition2(1, 1)


@pytest.fixture
def chain3():
    return constant_model(CHAIN_B, np.eye(3)), Partition3(1, 1, 1)


def random_psd(rng, n, rank=None, ridge=0.0):
    rank = n if rank is None else rank
    L = rng.normal(size=(n, rank))
    m = L @ L.T + ridge * np.eye(n)
    return 0.5 * (m + m.T)


def random_model(rng, n=4, n1=2, stable=True, v_scale=1.0):
    """Random constant model with full-rank noise (so H1 and H2 hold)."""
    b = rng.normal(size=(n, n))
    if stable:
        b -= (np.max(np.linalg.eigvals(b).real) + 0.5) * np.eye(n)
    a = random_psd(rng, n, ridge=0.1)
    v = v_scale * random_psd(rng, n)
    mu = rng.normal(size=n)
    return constant_model(b, a, v, mu), Partition2(n1, n - n1)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def h5_model(rng, n1, nt2, nt3, stable=True):
    """Random constant model whose X~2 and X~3 blocks satisfy H5.

    ``a`` and ``v`` are assembled from their block factorizations with a
    block-diagonal residual (``alpha``, ``phi``), so ``alpha23 = phi23 = 0``.
    """
    n2 = nt2 + nt3
    n = n1 + n2

    def assemble(ridge):
        s11 = rng.normal(size=(n1, n1)) + 2 * np.eye(n1)
        s21 = rng.normal(size=(n2, n1))
        resid = np.zeros((n2, n2))
        resid[:nt2, :nt2] = random_psd(rng, nt2, ridge=ridge)
        resid[nt2:, nt2:] = random_psd(rng, nt3, ridge=ridge)
        m = np.zeros((n, n))
        m[:n1, :n1] = s11 @ s11.T
        m[n1:, :n1] = s21 @ s11.T
        m[:n1, n1:] = m[n1:, :n1].T
        m[n1:, n1:] = s21 @ s21.T + resid
        return 0.5 * (m + m.T)

    b = rng.normal(size=(n, n))
    if stable:
        b -= (np.max(np.linalg.eigvals(b).real) + 0.5) * np.eye(n)
    return constant_model(b, assemble(0.1), assemble(0.0), rng.normal(size=n))
