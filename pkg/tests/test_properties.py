"""Randomized invariants. ``CASES`` counts executed examples per property."""

from collections import Counter

import numpy as np
from hypothesis import HealthCheck, given, settings, strategies as st

from ddkoop._linalg import null_space
from ddkoop.control import ControllerConfig, ddk_mpc_step
from ddkoop.systems import observability_matrix, random_lti, simulate_lti, toeplitz_response
from ddkoop.trajectory import Trajectory, build_hankel, library_from_single, stack

CASES = Counter()
EXAMPLES = 200
PROPS = settings(max_examples=EXAMPLES, deadline=None, derandomize=True,
                 suppress_health_check=[HealthCheck.too_slow])
seeds = st.integers(0, 2 ** 32 - 1)


def _pe_data(rng, model, T):
    return simulate_lti(model, rng.standard_normal(model.n_z),
                        rng.uniform(-1, 1, (T, model.m)))


@PROPS
@given(seeds, st.integers(1, 3), st.integers(2, 30), st.floats(-10, 10), st.floats(-10, 10))
def test_hankel_linearity(seed, q, T, a, b):
    CASES["hankel_linearity"] += 1
    rng = np.random.default_rng(seed)
    w1, w2 = rng.standard_normal((T, q)), rng.standard_normal((T, q))
    L = int(rng.integers(1, T + 1))
    lhs = build_hankel(a * w1 + b * w2, L)
    rhs = a * build_hankel(w1, L) + b * build_hankel(w2, L)
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-11 * (1 + abs(a) + abs(b)))


@PROPS
@given(seeds, st.integers(1, 3), st.integers(1, 3), st.integers(0, 6), st.integers(0, 6))
def test_partition_reassembly(seed, m, p, T_ini, N):
    CASES["partition_reassembly"] += 1
    if T_ini + N == 0:
        N = 1
    rng = np.random.default_rng(seed)
    L = T_ini + N
    tr = Trajectory(rng.standard_normal((L + 5, m)), rng.standard_normal((L + 5, p)))
    lib = library_from_single(tr, L, T_ini, N)
    assert np.array_equal(np.vstack([lib.U_P, lib.U_F, lib.Y_P, lib.Y_F]), lib.H_d)
    # each column is the stacked window it came from
    j = int(rng.integers(lib.l))
    assert np.array_equal(lib.U_d[:, j], stack(tr.u[j:j + L]))
    assert np.array_equal(lib.Y_d[:, j], stack(tr.y[j:j + L]))


@PROPS
@given(seeds, st.integers(1, 5), st.integers(1, 2), st.integers(1, 3), st.integers(1, 12))
def test_decomposition_identity(seed, n, m, p, L):
    CASES["decomposition_identity"] += 1
    rng = np.random.default_rng(seed)
    model = random_lti(rng, n, m, p)
    z0 = rng.standard_normal(n)
    u = rng.standard_normal((L, m))
    y = simulate_lti(model, z0, u).y
    pred = toeplitz_response(model, L) @ stack(u) + observability_matrix(model, L) @ z0
    np.testing.assert_allclose(pred, stack(y), rtol=1e-10, atol=1e-10)


@PROPS
@given(seeds, st.integers(1, 3), st.integers(1, 2), st.integers(1, 2), st.integers(1, 5))
def test_future_output_independent_of_g(seed, n, m, p, N):
    CASES["g_independence"] += 1
    rng = np.random.default_rng(seed)
    model = random_lti(rng, n, m, p)
    T_ini = n
    L = T_ini + N
    data = _pe_data(rng, model, (m + 1) * L + n + 10)
    lib = library_from_single(data, L, T_ini, N)
    test = simulate_lti(model, rng.standard_normal(n), rng.uniform(-1, 1, (L, m)))
    M = np.vstack([lib.U_P, lib.Y_P, lib.U_F])
    b = np.concatenate([stack(test.u[:T_ini]), stack(test.y[:T_ini]), stack(test.u[T_ini:])])
    g0 = np.linalg.lstsq(M, b, rcond=None)[0]
    Z = null_space(M)
    g1 = g0 + Z @ rng.standard_normal(Z.shape[1]) * 10
    np.testing.assert_allclose(lib.Y_F @ g1, lib.Y_F @ g0, atol=1e-7 * (1 + np.abs(g1).sum()))
    np.testing.assert_allclose(lib.Y_F @ g0, stack(test.y[T_ini:]), atol=1e-6)


@PROPS
@given(seeds, st.floats(1e-3, 1e3))
def test_argmin_invariant_under_weight_scaling(seed, factor):
    CASES["scaling_invariance"] += 1
    rng = np.random.default_rng(seed)
    n, N = int(rng.integers(1, 4)), int(rng.integers(2, 7))
    model = random_lti(rng, n, 1, 1)
    lib = library_from_single(_pe_data(rng, model, 3 * (n + N) + n + 10), n + N, n, N)
    warm = simulate_lti(model, rng.standard_normal(n), rng.uniform(-1, 1, (n, 1)))
    cfg = ControllerConfig(N=N, T_ini=n, R_step=[[rng.uniform(0.1, 2)]],
                           Q_step=[[rng.uniform(0, 10)]], u_min=[-0.5], u_max=[0.5],
                           reference=[rng.uniform(-5, 5)])
    a = ddk_mpc_step(lib, warm.u.ravel(), warm.y.ravel(), cfg)
    b = ddk_mpc_step(lib, warm.u.ravel(), warm.y.ravel(), cfg.scaled(factor))
    assert a.ok and b.ok
    np.testing.assert_allclose(b.u_F, a.u_F, rtol=0, atol=1e-6)
