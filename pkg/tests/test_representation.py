import numpy as np
import pytest

from ddkoop.experiments import collect_excited
from ddkoop.errors import DimensionError, ParameterError
from ddkoop.lifting import evaluate
from ddkoop.representation import (APPROXIMATE, EXACT, PredictionProblem, dda_predict,
                                   ddk_predict, embedding_nonexistence_certificate,
                                   koopman_predict, membership_residual)
from ddkoop.systems import (StateSpaceModel, benchmark_system, random_affine, random_lti,
                            simulate_affine, simulate_lti, simulate_nonlinear)
from ddkoop.trajectory import Trajectory, library_from_multiple, library_from_single, stack

SEED = 0


@pytest.fixture(scope="module")
def bench():
    return benchmark_system()


def _sinusoid(N):
    return 5 * np.sin(np.pi * np.arange(N) / 4)


def _benchmark_case(bench, T_ini, seed=SEED):
    # library from seeded data, test window from a fresh state
    sys, _, dic = bench
    rng = np.random.default_rng(seed)
    data = collect_excited(sys, rng, 52, 24, dic).traj
    lib = library_from_single(data, T_ini + 20, T_ini, 20)
    u_F = _sinusoid(20)
    u_past = rng.uniform(-5, 5, T_ini)
    test = simulate_nonlinear(sys, rng.uniform(-1, 1, 2), np.concatenate([u_past, u_F]))
    prob = PredictionProblem.from_trajectory(test.window(0, T_ini), u_F)
    return lib, prob, test.y[T_ini:]


def test_ddk_benchmark_exact(bench):
    lib, prob, truth = _benchmark_case(bench, 4)
    assert lib.l == 29
    res = ddk_predict(lib, prob)
    assert res.exact
    assert np.max(np.abs(res.y_F.reshape(-1, 2) - truth)) <= 1e-6


def test_ddk_benchmark_shallow_depth_deviates(bench):
    lib, prob, truth = _benchmark_case(bench, 2)
    res = ddk_predict(lib, prob)
    assert np.max(np.abs(res.y_F.reshape(-1, 2) - truth)) >= 1e-3


def test_dda_on_benchmark_deviates(bench):
    lib, prob, truth = _benchmark_case(bench, 2)
    res = dda_predict(lib, prob)
    assert np.max(np.abs(res.y_F.reshape(-1, 2) - truth)) >= 1e-3


def test_memoryless_system():
    rng = np.random.default_rng(1)
    u = rng.standard_normal(30)
    lib = library_from_single(Trajectory(u, u), 6, 2, 4)
    prob = PredictionProblem(rng.standard_normal(2), rng.standard_normal(2), rng.standard_normal(4))
    res = ddk_predict(lib, prob)
    # inconsistent past (y != u) is flagged, but the future still follows u_F
    prob2 = PredictionProblem(prob.u_ini, prob.u_ini, prob.u_F)
    res2 = ddk_predict(lib, prob2)
    assert res2.exact
    np.testing.assert_allclose(res2.y_F, prob.u_F, atol=1e-10)
    assert res.verdict == APPROXIMATE


def test_problem_dimension_check(bench):
    lib, prob, _ = _benchmark_case(bench, 4)
    with pytest.raises(DimensionError):
        ddk_predict(lib, PredictionProblem(prob.u_ini[:3], prob.y_ini, prob.u_F))


def test_affine_predictions():
    rng = np.random.default_rng(2)
    aff = random_affine(rng, 3, 1, 1)
    data = simulate_affine(aff, rng.standard_normal(3), rng.standard_normal(200))
    N = 8
    x0 = rng.standard_normal(3)
    u = rng.standard_normal(4 + N)
    test = simulate_affine(aff, x0, u)
    for T_ini, fn in ((3, dda_predict), (4, ddk_predict)):
        lib = library_from_single(data, T_ini + N, T_ini, N)
        prob = PredictionProblem.from_trajectory(test.window(4 - T_ini, T_ini), u[4:])
        res = fn(lib, prob)
        assert res.verdict == EXACT
        np.testing.assert_allclose(res.y_F, stack(test.y[4:]), atol=1e-8)


def test_dda_ddk_agree_on_lti():
    rng = np.random.default_rng(3)
    model = random_lti(rng, 3, 1, 2)
    data = simulate_lti(model, rng.standard_normal(3), rng.standard_normal(150))
    lib = library_from_single(data, 3 + 10, 3, 10)
    test = simulate_lti(model, rng.standard_normal(3), rng.standard_normal(13))
    prob = PredictionProblem.from_trajectory(test.window(0, 3), test.u[3:])
    a, b = ddk_predict(lib, prob), dda_predict(lib, prob)
    assert a.exact and b.exact
    np.testing.assert_allclose(a.y_F, b.y_F, atol=1e-8)


def test_koopman_predict(bench):
    sys, model, dic = bench
    rng = np.random.default_rng(4)
    x0 = rng.uniform(-1, 1, 2)
    u = rng.uniform(-5, 5, 15)
    y = koopman_predict(model, dic, x0, u)
    np.testing.assert_allclose(y, stack(simulate_nonlinear(sys, x0, u).y), atol=1e-9)
    zero = StateSpaceModel(np.zeros((5, 5)), np.zeros((5, 1)), np.zeros((2, 5)), np.zeros((2, 1)))
    assert np.all(koopman_predict(zero, dic, x0, u) == 0)
    assert koopman_predict(model, dic, x0, np.zeros(0)).size == 0


def test_membership(bench):
    sys, model, dic = bench
    rng = np.random.default_rng(5)
    lib = library_from_single(simulate_nonlinear(sys, [0.7, 0.1], rng.uniform(-5, 5, 80)), 8, 4, 4)
    assert membership_residual(lib, lib.H_d[:, 3]) <= 1e-12
    assert membership_residual(lib, rng.standard_normal(lib.H_d.shape[0])) > 0
    with pytest.raises(DimensionError):
        membership_residual(lib, np.zeros(3))


def test_nonexistence_certificate(bench):
    sys = bench[0]
    rng = np.random.default_rng(6)
    tr = simulate_nonlinear(sys, [0.9, 0.0], rng.uniform(-5, 5, 400))
    lib = library_from_single(tr, 24, 24, 0)
    assert embedding_nonexistence_certificate(lib, 3).certified
    rep = embedding_nonexistence_certificate(lib, 5)
    assert not rep.certified and rep.rank <= rep.bound == 29


def test_certificate_lti_never_certifies():
    rng = np.random.default_rng(7)
    model = random_lti(rng, 2, 1, 1)
    lib = library_from_single(simulate_lti(model, rng.standard_normal(2),
                                           rng.standard_normal(200)), 10, 10, 0)
    assert not embedding_nonexistence_certificate(lib, 2).certified


def test_certificate_needs_single_hankel():
    rng = np.random.default_rng(8)
    trs = [Trajectory(rng.standard_normal(20), rng.standard_normal(20)) for _ in range(2)]
    with pytest.raises(ParameterError):
        embedding_nonexistence_certificate(library_from_multiple(trs, 5, 5, 0), 1)
    lib = library_from_multiple(trs[:1], 5, 5, 0)
    with pytest.raises(ParameterError):
        embedding_nonexistence_certificate(lib, -1)


def test_hk_factorization(bench):
    # H_d = [[I, 0], [T_L, O_L]] [U_d; Z_0] on the known embedding
    from ddkoop.systems import observability_matrix, toeplitz_response
    sys, model, dic = bench
    rng = np.random.default_rng(9)
    tr = simulate_nonlinear(sys, [0.5, 0.2], rng.uniform(-5, 5, 40))
    L = 6
    lib = library_from_single(tr, L, L, 0)
    Z0 = np.column_stack([evaluate(dic, x) for x in tr.x[: lib.l]])
    Y = toeplitz_response(model, L) @ lib.U_d + observability_matrix(model, L) @ Z0
    np.testing.assert_allclose(Y, lib.Y_d, atol=1e-9)
