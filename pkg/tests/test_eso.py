import numpy as np
import pytest

from quartz import DataMatrix
from quartz.eso import (
    SeparabilityError,
    active_cells,
    eso_params,
    eso_rhs,
    exact_eso_lhs,
    importance_probs,
    theta,
    v_distributed,
    v_for,
    v_product,
    v_serial,
    v_tau_nice,
)
from quartz.sampling import (
    DistributedSampling,
    ProductSampling,
    SerialSampling,
    TauNiceSampling,
)
from quartz.verify import eso_certification, schemes_for

from conftest import EXAMPLE_A, random_dense


def brute_v_tau_nice(M, tau):
    d, n = M.shape
    omega = np.count_nonzero(M, axis=1)
    v = np.zeros(n)
    for i in range(n):
        for j in range(d):
            v[i] += (1 + (omega[j] - 1) * (tau - 1) / (n - 1)) * M[j, i] ** 2
    return v


# ---------------------------------------------------------------- closed forms

def test_v_serial_example(example_matrix):
    assert v_serial(example_matrix).tolist() == [1.0, 73.0, 45.0, 16.0, 82.0]


def test_v_serial_unit_and_zero_columns():
    M = np.array([[0.6, 0.0, 0.0], [0.8, 1.0, 0.0]])
    assert np.allclose(v_serial(DataMatrix(M)), [1.0, 1.0, 0.0])


def test_v_tau_nice_example(example_matrix):
    v = v_tau_nice(example_matrix, 2)
    assert v[4] == 122.75
    assert np.allclose(v, brute_v_tau_nice(EXAMPLE_A, 2))


def test_v_tau_nice_matches_brute_force(rng):
    for _ in range(30):
        d, n = rng.integers(1, 9), rng.integers(2, 11)
        M = random_dense(rng, d, n, 0.5)
        tau = int(rng.integers(1, n + 1))
        assert np.allclose(v_tau_nice(DataMatrix(M), tau), brute_v_tau_nice(M, tau), rtol=1e-13)


def test_v_tau_nice_sparsity_extremes(rng):
    sparse_m = DataMatrix(np.diag(rng.uniform(1, 2, 6)))
    dense = DataMatrix(rng.uniform(1, 2, (3, 6)))
    for tau in range(1, 7):
        assert np.allclose(v_tau_nice(sparse_m, tau), v_serial(sparse_m))
        assert np.allclose(v_tau_nice(dense, tau), tau * v_serial(dense), rtol=1e-14)


def test_v_tau_nice_range_checks(example_matrix):
    with pytest.raises(ValueError):
        v_tau_nice(example_matrix, 0)
    with pytest.raises(ValueError):
        v_tau_nice(example_matrix, 6)
    single = DataMatrix(np.array([[2.0], [1.0]]))
    assert v_tau_nice(single, 1).tolist() == [5.0]


def test_v_tau_nice_monotone_in_tau(rng):
    m = DataMatrix(random_dense(rng, 8, 10, 0.4))
    vs = np.array([v_tau_nice(m, t) for t in range(1, 11)])
    assert np.all(np.diff(vs, axis=0) >= 0)


def test_v_product_example(example_matrix):
    assert v_product(example_matrix, [(0, 1), (2, 3, 4)]).tolist() == [1.0, 73.0, 45.0, 16.0, 82.0]
    assert np.array_equal(v_product(example_matrix, [tuple(range(5))]), v_serial(example_matrix))


def test_v_product_rejects_non_separable(example_matrix):
    with pytest.raises(SeparabilityError) as info:
        v_product(example_matrix, [(0, 3), (1, 2, 4)])
    # row 0 holds nonzeros in columns 2, 3, 4, which fall in both groups
    assert info.value.row == 0
    assert "row 0" in str(info.value)


def test_v_distributed_hand_examples():
    M = np.array([[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0]])
    m = DataMatrix(M)
    assert active_cells(m, [(0, 1), (2, 3)]).tolist() == [1, 1]
    assert v_distributed(m, 2, 1, [(0, 1), (2, 3)]).tolist() == [1.0, 1.0, 1.0, 1.0]
    row = DataMatrix(np.ones((1, 4)))
    assert active_cells(row, [(0, 1), (2, 3)]).tolist() == [2]
    assert v_distributed(row, 2, 1, [(0, 1), (2, 3)]).tolist() == [2.0, 2.0, 2.0, 2.0]


def test_v_distributed_range_checks(example_matrix):
    with pytest.raises(ValueError):
        v_distributed(example_matrix, 2, 1)
    m = DataMatrix(np.ones((2, 6)))
    with pytest.raises(ValueError):
        v_distributed(m, 2, 4)


# ---------------------------------------------------------------- reductions

def test_reductions_are_exact(rng, example_matrix):
    mats = [example_matrix] + [DataMatrix(random_dense(rng, 7, 9, 0.35)) for _ in range(20)]
    for m in mats:
        assert np.array_equal(v_tau_nice(m, 1), v_serial(m))
        for tau in range(1, m.n + 1):
            assert np.array_equal(v_distributed(m, 1, tau), v_tau_nice(m, tau))
        one_group = [tuple(range(m.n))]
        assert np.array_equal(v_product(m, one_group), v_serial(m))
        assert np.allclose(ProductSampling(one_group).pair_probs(),
                           SerialSampling.uniform(m.n).pair_probs())
    # singleton groups need feature-disjoint columns
    m = DataMatrix(np.diag(rng.uniform(1, 2, 5)))
    assert np.array_equal(v_product(m, [(i,) for i in range(5)]), v_serial(m))


# ---------------------------------------------------------------- theta / importance

def test_theta_examples():
    v = np.array([1.0, 73.0, 45.0, 16.0, 82.0])
    assert theta(np.full(5, 0.2), v, 82 / 5, 1.0, 5) == pytest.approx(0.1, abs=1e-15)
    p = np.array([0.1, 0.2, 0.3, 0.4])
    assert theta(p, np.zeros(4), 0.3, 2.0, 4) == pytest.approx(0.1)
    assert theta(np.array([1.0]), np.array([0.7]), 0.7, 1.0, 1) == pytest.approx(0.5)


def test_theta_bounds(rng):
    for _ in range(100):
        n = int(rng.integers(1, 20))
        p = rng.uniform(0.01, 1, n)
        v = rng.uniform(0, 100, n)
        th = theta(p, v, rng.uniform(1e-3, 1), rng.uniform(0.1, 2), n)
        assert 0 < th <= p.min() <= 1


def test_importance_examples():
    p = importance_probs(np.full(7, 3.3), 0.1, 1.0, 7)
    assert np.allclose(p, 1 / 7)
    v = np.array([1.0, 73.0, 45.0, 16.0, 82.0])
    p = importance_probs(v, 83 / 5, 1.0, 5)
    assert np.allclose(p, np.array([84, 156, 128, 99, 165]) / 632)
    assert p.sum() == pytest.approx(1.0)


def test_importance_never_worse(rng):
    for _ in range(100):
        n = int(rng.integers(2, 30))
        v = rng.exponential(5.0, n)
        lam, gamma = rng.uniform(1e-3, 1), rng.uniform(0.2, 2)
        p_star = importance_probs(v, lam, gamma, n)
        t_star = theta(p_star, v, lam, gamma, n)
        t_unif = theta(np.full(n, 1 / n), v, lam, gamma, n)
        assert t_star >= t_unif
        lgn = lam * gamma * n
        assert t_star == pytest.approx(lgn / np.sum(v + lgn), rel=1e-12)


def test_eso_params_bundle(example_matrix):
    scheme = TauNiceSampling(5, 2)
    eso = eso_params(example_matrix, scheme, 0.5, 1.0)
    assert np.array_equal(eso.v, v_tau_nice(example_matrix, 2))
    assert eso.theta == theta(scheme.inclusion_probs(), eso.v, 0.5, 1.0, 5)
    assert eso.lambda_gamma_n == 2.5
    assert np.allclose(eso.p, 0.4)


# ---------------------------------------------------------------- exact lhs oracle

def test_lhs_serial_uniform(rng):
    M = random_dense(rng, 5, 6, 0.5)
    m = DataMatrix(M)
    h = rng.standard_normal(6)
    expected = np.mean((M ** 2).sum(axis=0) * h ** 2)
    assert exact_eso_lhs(m, SerialSampling.uniform(6), h) == pytest.approx(expected, rel=1e-13)


def test_lhs_full_set(rng):
    M = random_dense(rng, 5, 6, 0.5)
    h = rng.standard_normal(6)
    u = M @ h
    assert exact_eso_lhs(DataMatrix(M), TauNiceSampling(6, 6), h) == pytest.approx(u @ u, rel=1e-13)


def test_lhs_product_example(example_matrix):
    scheme = ProductSampling([(0, 1), (2, 3, 4)])
    h = np.ones(5)
    a = exact_eso_lhs(example_matrix, scheme, h, "pairwise")
    b = exact_eso_lhs(example_matrix, scheme, h, "enumerate")
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))
    # independent hand enumeration over the six support sets
    total = sum(np.sum((EXAMPLE_A[:, i] + EXAMPLE_A[:, k]) ** 2)
                for i in (0, 1) for k in (2, 3, 4)) / 6
    assert a == pytest.approx(total, rel=1e-14)


def test_lhs_unknown_method(example_matrix):
    with pytest.raises(ValueError):
        exact_eso_lhs(example_matrix, SerialSampling.uniform(5), np.ones(5), "guess")


def test_eso_holds_on_random_instances():
    worst, count = eso_certification(n_instances=30, n_h=20, seed=11)
    assert count > 0
    assert worst >= -1e-10


def test_eso_holds_for_importance_and_distributed(rng):
    for _ in range(20):
        M = random_dense(rng, 6, 8, 0.5)
        m = DataMatrix(M)
        for scheme in schemes_for(m, rng):
            v = v_for(m, scheme)
            p = scheme.inclusion_probs()
            for _ in range(10):
                h = rng.standard_normal(8)
                lhs = exact_eso_lhs(m, scheme, h, "enumerate")
                assert lhs <= eso_rhs(p, v, h) + 1e-10


def test_balanced_product_groups_still_certify(rng):
    M = np.zeros((8, 8))
    for i in range(8):
        M[i, i] = rng.uniform(1, 3)
        M[(i + 1) % 8 if i % 2 == 0 else i, i] = rng.uniform(1, 3)
    m = DataMatrix(M)
    from quartz.sampling import detect_product_partition
    groups = detect_product_partition(m, n_groups=2)
    scheme = ProductSampling(groups)
    v = v_product(m, groups)
    for _ in range(50):
        h = rng.standard_normal(8)
        assert exact_eso_lhs(m, scheme, h) <= eso_rhs(scheme.inclusion_probs(), v, h) + 1e-10
