import numpy as np
import pytest

from ddkoop.errors import DimensionError, DivergenceError
from ddkoop.lifting import evaluate
from ddkoop.systems import (UNOBSERVABLE, AffineModel, NonlinearSystem, StateSpaceModel,
                            affine_to_embedding, benchmark_system, controllability_matrix,
                            lti_as_nonlinear, observability_index, observability_matrix,
                            random_affine, random_lti, simulate_affine, simulate_lti,
                            simulate_nonlinear, simulate_nonlinear_batch, toeplitz_response)
from ddkoop.trajectory import stack


@pytest.fixture(scope="module")
def bench():
    return benchmark_system()


def test_benchmark_fixed_point(bench):
    sys, _, _ = bench
    tr = simulate_nonlinear(sys, [0, 0], np.zeros(10))
    assert np.all(tr.y == 0)


def test_benchmark_one_step(bench):
    sys, _, _ = bench
    tr = simulate_nonlinear(sys, [1, 0], np.zeros(2))
    np.testing.assert_allclose(tr.x[1], [0.99, 3.0])


def test_benchmark_length(bench):
    sys, _, _ = bench
    tr = simulate_nonlinear(sys, [0.1, 0.2], np.random.default_rng(0).uniform(-5, 5, 52))
    assert tr.T == 52 and tr.y.shape == (52, 2)


def test_benchmark_embedding_matrices(bench):
    _, model, _ = bench
    assert model.A[2, 2] == pytest.approx(0.9801)
    rank = np.linalg.matrix_rank(controllability_matrix(model))
    assert rank < 5
    assert observability_index(model) == 4


def test_benchmark_cross_simulation(bench):
    sys, model, dic = bench
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        x0 = rng.uniform(-1, 1, 2)
        u = rng.uniform(-5, 5, 30)
        y_nl = simulate_nonlinear(sys, x0, u).y
        y_lin = simulate_lti(model, evaluate(dic, x0), u).y
        worst = max(worst, np.max(np.abs(y_nl - y_lin)))
    assert worst <= 1e-9


def test_batch_matches_loop(bench):
    sys = bench[0]
    rng = np.random.default_rng(2)
    x0s = rng.uniform(-1, 1, (5, 2))
    us = rng.uniform(-5, 5, (5, 20, 1))
    batch = simulate_nonlinear_batch(sys, x0s, us)
    for i, tr in enumerate(batch):
        ref = simulate_nonlinear(sys, x0s[i], us[i])
        np.testing.assert_array_equal(tr.x, ref.x)
        np.testing.assert_array_equal(tr.y, ref.y)


def test_batch_non_vectorized_fallback():
    model = random_lti(np.random.default_rng(3), 2, 1, 1)
    sys = lti_as_nonlinear(model)
    out = simulate_nonlinear_batch(sys, np.zeros((2, 2)), np.ones((2, 5, 1)))
    assert len(out) == 2 and out[0].T == 5


def test_divergence_guard(bench):
    sys = NonlinearSystem(1, 1, 1, lambda x, u: 1e7 * x, lambda x, u: x)
    with pytest.raises(DivergenceError) as info:
        simulate_nonlinear(sys, [1.0], np.zeros(5))
    assert info.value.step == 2
    with pytest.raises(DivergenceError):
        simulate_nonlinear_batch(bench[0], [[2000.0, 0.0]], np.zeros((1, 5, 1)))


def test_lti_simple_cases():
    v = np.array([1.0, -2.0])
    m = StateSpaceModel(np.eye(2), np.zeros((2, 1)), np.eye(2), np.zeros((2, 1)))
    tr = simulate_lti(m, v, np.ones(5))
    np.testing.assert_array_equal(tr.y, np.tile(v, (5, 1)))
    m = StateSpaceModel(np.eye(2), np.zeros((2, 1)), np.zeros((1, 2)), np.eye(1))
    u = np.arange(4.0)
    np.testing.assert_array_equal(simulate_lti(m, v, u).y[:, 0], u)


def test_model_validation():
    with pytest.raises(DimensionError):
        StateSpaceModel(np.zeros((2, 3)), np.zeros((2, 1)), np.zeros((1, 2)), np.zeros((1, 1)))
    with pytest.raises(DimensionError):
        StateSpaceModel(np.eye(2), np.zeros((2, 1)), np.zeros((1, 2)), np.zeros((2, 1)))
    with pytest.raises(DimensionError):
        AffineModel(np.eye(2), np.zeros((2, 1)), np.zeros((1, 2)), np.zeros((1, 1)),
                    np.zeros(3), np.zeros(1))


def test_affine_embedding():
    rng = np.random.default_rng(4)
    aff = random_affine(rng, 3, 2, 2)
    emb = affine_to_embedding(aff)
    x0 = rng.standard_normal(3)
    u = rng.standard_normal((15, 2))
    lin = simulate_lti(emb, np.append(x0, 1.0), u)
    np.testing.assert_allclose(lin.y, simulate_affine(aff, x0, u).y, atol=1e-10)
    assert np.all(lin.x[:, -1] == 1.0)
    zero = AffineModel(aff.A, aff.B, aff.C, aff.D, np.zeros(3), np.zeros(2))
    emb0 = affine_to_embedding(zero)
    np.testing.assert_array_equal(emb0.A[:3, :3], aff.A)


def test_affine_through_generic_simulator():
    rng = np.random.default_rng(5)
    aff = random_affine(rng, 2, 1, 1)
    u = rng.standard_normal(8)
    a = simulate_affine(aff, [0.3, -0.1], u)
    b = simulate_nonlinear(lti_as_nonlinear(aff), [0.3, -0.1], u)
    np.testing.assert_allclose(a.y, b.y, atol=1e-12)


def test_toeplitz_simple():
    rng = np.random.default_rng(6)
    m = random_lti(rng, 3, 2, 2)
    np.testing.assert_array_equal(toeplitz_response(m, 1), m.D)
    z = StateSpaceModel(np.zeros((3, 3)), m.B, m.C, m.D)
    T = toeplitz_response(z, 4)
    CB = m.C @ m.B
    for i in range(4):
        for j in range(4):
            blk = T[2 * i:2 * i + 2, 2 * j:2 * j + 2]
            if i == j:
                np.testing.assert_array_equal(blk, m.D)
            elif i == j + 1:
                np.testing.assert_allclose(blk, CB)
            else:
                assert np.all(blk == 0)


def test_decomposition_identity():
    rng = np.random.default_rng(7)
    m = random_lti(rng, 4, 2, 3)
    z0 = rng.standard_normal(4)
    u = rng.standard_normal((6, 2))
    y = simulate_lti(m, z0, u).y
    pred = toeplitz_response(m, 6) @ stack(u) + observability_matrix(m, 6) @ z0
    np.testing.assert_allclose(pred, stack(y), rtol=1e-10, atol=1e-12)


def test_observability_index_cases():
    rng = np.random.default_rng(8)
    m = random_lti(rng, 3, 1, 3)
    full = StateSpaceModel(m.A, m.B, np.eye(3), np.zeros((3, 1)))
    assert observability_index(full) == 1
    blind = StateSpaceModel(m.A, m.B, np.zeros((1, 3)), np.zeros((1, 1)))
    assert observability_index(blind) == UNOBSERVABLE


def test_cayley_hamilton_null_spaces():
    rng = np.random.default_rng(9)
    for _ in range(10):
        n = int(rng.integers(2, 7))
        m = random_lti(rng, n, 1, 1)
        C = m.C.copy()
        C[:, : n // 2] = 0.0
        A = m.A.copy()
        A[n // 2:, : n // 2] = 0.0  # leading block decoupled and invisible
        mod = StateSpaceModel(A, m.B, C, m.D)
        On = observability_matrix(mod, n)
        r = np.linalg.matrix_rank(On)
        assert r < n
        for L in range(n, n + 4):
            OL = observability_matrix(mod, L)
            assert np.linalg.matrix_rank(np.vstack([On, OL])) == r
