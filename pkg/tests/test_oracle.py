import numpy as np
import pytest

from gaussflow import (
    CoefficientMap,
    DegenerateBeyondJitter,
    ModelSpec,
    Partition2,
    Partition3,
    SizeCap,
    StepMisaligned,
    constant_model,
    te_split_w,
    transfer_entropy,
    validate_model,
)
from gaussflow.oracle import (
    PastSet,
    block_cmi,
    conservation_terms,
    discrete_noise_transfer_entropy,
    discrete_split_w_part,
    discrete_split_x_part,
    discrete_transfer_entropy,
    discrete_transfer_entropy_curve,
    discretize,
    gaussian_cmi,
    path_covariance,
    sequential_cmi,
)

from conftest import random_psd


def ou_pair(v=None):
    return constant_model(-np.eye(2), np.eye(2), v=v)


# -- discretization ---------------------------------------------------------------------


def test_brownian_step():
    ch = discretize(constant_model(np.zeros((2, 2)), np.eye(2)), 0.1, 1.0)
    np.testing.assert_allclose(ch.A[0], np.eye(2), atol=1e-15)
    np.testing.assert_allclose(ch.Q[0], 0.1 * np.eye(2), atol=1e-15)
    assert ch.N == 10


@pytest.mark.parametrize("dt", [1e-3, 0.01, 0.3])
def test_scalar_ou_exact(dt):
    ch = discretize(ou_pair(), dt, 10 * dt)
    np.testing.assert_allclose(ch.A[0], np.exp(-dt) * np.eye(2), rtol=1e-14)
    np.testing.assert_allclose(ch.Q[0], 0.5 * (1 - np.exp(-2 * dt)) * np.eye(2), rtol=1e-12)


def test_ou_stationary_variance():
    ch = discretize(ou_pair(), 0.1, 30.0)
    np.testing.assert_allclose(ch.marginal_covariances()[-1], 0.5 * np.eye(2), atol=1e-12)


def test_marginal_moments_match_lyapunov():
    rng = np.random.default_rng(4)
    b = rng.normal(size=(3, 3)) - 2 * np.eye(3)
    a, v = random_psd(rng, 3), random_psd(rng, 3)
    ch = discretize(constant_model(b, a, v=v), 0.25, 2.0)
    # exact covariance from the Lyapunov ODE via one big step of Van Loan
    from scipy.integrate import solve_ivp

    def rhs(_, p):
        P = p.reshape(3, 3)
        return (b @ P + P @ b.T + a).ravel()

    sol = solve_ivp(rhs, (0, 2.0), v.ravel(), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(ch.marginal_covariances()[-1], sol.y[:, -1].reshape(3, 3),
                               rtol=1e-8)


def test_piecewise_discretization_and_alignment():
    bmap = CoefficientMap.piecewise([0.5], [-np.eye(2), -3 * np.eye(2)])
    m = validate_model(ModelSpec(2, np.zeros(2), np.zeros((2, 2)), bmap,
                                 CoefficientMap.constant(np.eye(2))))
    ch = discretize(m, 0.1, 1.0)
    np.testing.assert_allclose(ch.A[4], np.exp(-0.1) * np.eye(2))
    np.testing.assert_allclose(ch.A[5], np.exp(-0.3) * np.eye(2))
    with pytest.raises(StepMisaligned):
        discretize(m, 0.3, 0.9)
    with pytest.raises(StepMisaligned):
        discretize(ou_pair(), 0.1, 0.95)


# -- path covariance ----------------------------------------------------------------------


def test_path_covariance_n0():
    v = np.array([[1.0, 0.2], [0.2, 2.0]])
    pc = path_covariance(discretize(ou_pair(v), 0.1, 0.0))
    np.testing.assert_array_equal(pc.matrix, v)


def test_brownian_path_covariance():
    ch = discretize(constant_model(np.zeros((2, 2)), np.eye(2)), 0.1, 0.5)
    pc = path_covariance(ch)
    for j in range(6):
        for k in range(6):
            block = pc.matrix[np.ix_(pc.x(j), pc.x(k))]
            np.testing.assert_allclose(block, min(j, k) * 0.1 * np.eye(2), atol=1e-14)


def test_ou_autocorrelation():
    ch = discretize(ou_pair(0.5 * np.eye(2)), 0.1, 1.0)
    pc = path_covariance(ch)
    for j, k in [(0, 10), (3, 7), (5, 5)]:
        c = pc.matrix[pc.x(j, [0])[0], pc.x(k, [0])[0]]
        assert c / 0.5 == pytest.approx(np.exp(-abs(j - k) * 0.1), rel=1e-12)


def test_size_cap():
    ch = discretize(ou_pair(), 0.01, 1.0)
    with pytest.raises(SizeCap):
        path_covariance(ch, cap=100)


# -- Gaussian CMI --------------------------------------------------------------------------


def test_cmi_independent_blocks():
    rng = np.random.default_rng(0)
    cov = np.zeros((4, 4))
    cov[:2, :2] = random_psd(rng, 2, ridge=0.1)
    cov[2:, 2:] = random_psd(rng, 2, ridge=0.1)
    assert gaussian_cmi(cov, [0, 1], [2, 3]) == pytest.approx(0.0, abs=1e-14)


def test_cmi_bivariate():
    cov = np.array([[1.0, 0.5], [0.5, 1.0]])
    assert gaussian_cmi(cov, [0], [1]) == pytest.approx(-0.5 * np.log(0.75), abs=1e-12)
    assert gaussian_cmi(cov, [0], [1]) == pytest.approx(0.143841, abs=1e-6)


def test_cmi_chain_rule():
    rng = np.random.default_rng(1)
    for _ in range(10):
        cov = random_psd(rng, 6, ridge=0.05)
        U, V, W, Z = [0], [1, 2], [3], [4, 5]
        lhs = gaussian_cmi(cov, U, V + W, Z)
        rhs = gaussian_cmi(cov, U, V, Z) + gaussian_cmi(cov, U, W, Z + V)
        assert lhs == pytest.approx(rhs, abs=1e-10)


def test_cmi_disjoint_required():
    with pytest.raises(ValueError):
        gaussian_cmi(np.eye(3), [0], [0, 1])


def test_cmi_indefinite_raises():
    cov = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(DegenerateBeyondJitter):
        gaussian_cmi(cov, [0], [1])


def test_cmi_nonnegative_random():
    rng = np.random.default_rng(2)
    for _ in range(50):
        cov = random_psd(rng, 5, rank=rng.integers(3, 6), ridge=1e-3)
        assert gaussian_cmi(cov, [0, 1], [2], [3, 4]) >= 0.0


# -- transfer entropy of the chain -----------------------------------------------------------


def test_decoupled_zero():
    m = constant_model([[-1, 0], [0.5, -1]], np.eye(2), v=np.eye(2))
    ch = discretize(m, 0.01, 2.0)
    assert discrete_transfer_entropy(ch, Partition2(1, 1), 50, 200) == pytest.approx(0, abs=1e-9)


def test_empty_window():
    ch = discretize(ou_pair(), 0.1, 1.0)
    assert discrete_transfer_entropy(ch, Partition2(1, 1), 5, 5) == 0.0


def test_routes_agree(scalar_pair):
    m, p = scalar_pair
    ch = discretize(m, 0.05, 1.0, p)
    blk = discrete_transfer_entropy(ch, p, 10, 20, method="block")
    seq = discrete_transfer_entropy(ch, p, 10, 20, method="sequential")
    assert blk == pytest.approx(seq, rel=1e-10)
    blk = discrete_noise_transfer_entropy(ch, p, 10, 20, method="block")
    seq = discrete_noise_transfer_entropy(ch, p, 10, 20, method="sequential")
    assert blk == pytest.approx(seq, rel=1e-10)


def test_routes_agree_three_blocks(chain3):
    m, p = chain3
    ch = discretize(m, 0.05, 1.0, p)
    for fn in (discrete_split_x_part, discrete_split_w_part):
        blk = fn(ch, p, 10, 20, method="block")
        seq = fn(ch, p, 10, 20, method="sequential")
        assert blk == pytest.approx(seq, rel=1e-9)


def test_curve_is_cumulative(scalar_pair):
    m, p = scalar_pair
    ch = discretize(m, 0.01, 2.0)
    curve = discrete_transfer_entropy_curve(ch, p, 100, 200)
    assert curve[0] == 0.0 and np.all(np.diff(curve) >= 0)
    assert curve[-1] == pytest.approx(discrete_transfer_entropy(ch, p, 100, 200), rel=1e-9)


def test_scalar_pair_matches_continuous(scalar_pair):
    m, p = scalar_pair
    ch = discretize(m, 1e-3, 7.0)
    disc = discrete_transfer_entropy(ch, p, 6000, 7000)
    cont = transfer_entropy(m, p, 6.0, 7.0)
    assert abs(disc - cont) / cont < 0.02


def test_noise_form_matches_continuous(scalar_pair):
    # continuous-time transfer entropy equals the noise-conditioned version
    m, p = scalar_pair
    ch = discretize(m, 1e-2, 3.0, p)
    disc = discrete_noise_transfer_entropy(ch, p, 100, 300)
    assert disc == pytest.approx(transfer_entropy(m, p, 1.0, 3.0), rel=1e-3)


def test_w_split_oracle(chain3):
    m, p = chain3
    ch = discretize(m, 1e-2, 4.0, p)
    disc = discrete_split_w_part(ch, p, 300, 400)
    cont = te_split_w(m, p, 3.0, 4.0).part_3to1_given2
    assert abs(disc - cont) / cont < 0.02


def test_markov_history_irrelevance():
    # conditioning on the full X2 past or on X2(s) alone gives the same CMI
    m = constant_model([[-1, 1], [0.2, -1]], np.array([[1.0, 0.3], [0.3, 1.0]]),
                       v=np.eye(2))
    p = Partition2(1, 1)
    ch = discretize(m, 0.05, 1.5)
    pc = path_covariance(ch)
    s, t = 15, 30
    x1_past = [i for j in range(s + 1) for i in pc.x(j, [0])]
    x1_future = [i for j in range(s + 1, t + 1) for i in pc.x(j, [0])]
    x2_full = [i for j in range(s + 1) for i in pc.x(j, [1])]
    full = gaussian_cmi(pc, x2_full, x1_future, x1_past)
    last = gaussian_cmi(pc, pc.x(s, [1]), x1_future, x1_past)
    assert full == pytest.approx(last, rel=1e-8, abs=1e-12)
    assert full == pytest.approx(discrete_transfer_entropy(ch, p, s, t), rel=1e-10)


def test_conservation_law():
    m = constant_model([[-1, 1], [0.3, -1]], np.eye(2), v=np.eye(2))
    pc = path_covariance(discretize(m, 0.1, 1.0))
    terms = conservation_terms(pc, Partition2(1, 1))
    total = terms["d_2to1"] + terms["d_1to2"] + terms["instantaneous"]
    assert total == pytest.approx(terms["mutual"], abs=1e-8)
    assert min(terms.values()) >= 0


def test_zero_variance_start_excluded(scalar_pair):
    # v = 0 makes X(0) deterministic; the CMI must still be finite and agree
    m, p = scalar_pair
    ch = discretize(m, 0.05, 1.0)
    pc = path_covariance(ch)
    val = block_cmi(pc, 5, 20, PastSet(x=(1,)), PastSet(x=(0,)), (0,))
    seq = sequential_cmi(ch, 5, 20, PastSet(x=(1,)), PastSet(x=(0,)), (0,))[-1]
    assert np.isfinite(val) and val == pytest.approx(seq, rel=1e-9)


def test_oracle_convergence_order(scalar_pair):
    m, p = scalar_pair
    ref = transfer_entropy(m, p, 1.0, 2.0, step=2e-5)
    dts = np.array([0.1, 0.05, 0.02, 0.01])
    errs = []
    for dt in dts:
        ch = discretize(m, dt, 2.0)
        errs.append(abs(discrete_transfer_entropy(ch, p, round(1 / dt), round(2 / dt)) - ref))
    assert np.polyfit(np.log(dts), np.log(errs), 1)[0] >= 0.9


def test_three_block_partition_accepted(chain3):
    m, p = chain3
    ch = discretize(m, 0.1, 1.0, p)
    assert ch.dw == 3 and ch.k == 1
    assert discrete_transfer_entropy(ch, p, 5, 10) >= 0.0
    assert isinstance(p, Partition3)
