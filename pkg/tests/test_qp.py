import numpy as np
import pytest

from oracles import brute_force_qp, random_qp
from ddkoop.qp import (INFEASIBLE, MAX_ITER, OPTIMAL, UNBOUNDED, kkt_residuals,
                       solve_eq_box_qp)


def test_min_norm_with_equality():
    n = 5
    A = np.zeros((1, n))
    A[0, 0] = 1.0
    r = solve_eq_box_qp(2 * np.eye(n), np.zeros(n), A, [1.0])
    assert r.status == OPTIMAL
    np.testing.assert_allclose(r.z, [1, 0, 0, 0, 0], atol=1e-12)


def test_scalar_clipping():
    # (z - 3)^2 = z^2 - 6z + 9
    r = solve_eq_box_qp([[2.0]], [-6.0], G=[[1.0]], lo=[-5.0], hi=[5.0], const=9.0)
    assert r.z[0] == pytest.approx(3.0) and r.objective == pytest.approx(0.0)
    r = solve_eq_box_qp([[2.0]], [-6.0], G=[[1.0]], lo=[-5.0], hi=[2.0], const=9.0)
    assert r.z[0] == 2.0 and r.objective == pytest.approx(1.0)
    assert r.mu_upper[0] == pytest.approx(2.0)


def test_against_enumeration_small():
    rng = np.random.default_rng(0)
    for _ in range(25):
        P, q, A, b, G, lo, hi = random_qp(rng, max_vars=10)
        r = solve_eq_box_qp(P, q, A, b, G, lo, hi)
        best, _ = brute_force_qp(P, q, A, b, G, lo, hi)
        assert r.status == OPTIMAL
        assert abs(r.objective - best) <= 1e-6 * (1 + abs(best))
        assert r.kkt_residual <= 1e-6


def test_infeasible_equalities():
    A = np.array([[1.0, 0.0], [1.0, 0.0]])
    r = solve_eq_box_qp(np.eye(2), np.zeros(2), A, [1.0, 2.0])
    assert r.status == INFEASIBLE and r.equality_residual > 1e-6


def test_infeasible_box():
    # z1 = 3 forced, but 0 <= z1 <= 1
    r = solve_eq_box_qp(np.eye(2), np.zeros(2), [[1.0, 0.0]], [3.0], G=np.eye(2),
                        lo=[0, 0], hi=[1, 1])
    assert r.status == INFEASIBLE
    # box contradiction among free rows, detected by phase 1
    G = np.array([[1.0, 1.0], [1.0, 1.0]])
    r = solve_eq_box_qp(np.eye(2), np.zeros(2), G=G, lo=[2.0, -np.inf], hi=[np.inf, 1.0])
    assert r.status == INFEASIBLE


def test_nonzero_start_via_phase_one():
    G = np.eye(2)
    r = solve_eq_box_qp(np.eye(2), np.zeros(2), G=G, lo=[1.0, 2.0], hi=[3.0, 4.0])
    assert r.status == OPTIMAL
    np.testing.assert_allclose(r.z, [1.0, 2.0])


def test_psd_with_flat_direction():
    # minimize z1^2 + z2, z2 in [-1, 1]: flat along z2 until the bound
    P = np.diag([2.0, 0.0])
    r = solve_eq_box_qp(P, [0.0, 1.0], G=np.eye(2)[1:], lo=[-1.0], hi=[1.0])
    assert r.status == OPTIMAL
    np.testing.assert_allclose(r.z, [0.0, -1.0], atol=1e-12)


def test_unbounded():
    r = solve_eq_box_qp(np.zeros((2, 2)), [1.0, 0.0])
    assert r.status == UNBOUNDED


def test_iteration_cap():
    rng = np.random.default_rng(1)
    n = 8
    M = rng.standard_normal((n, n))
    r = solve_eq_box_qp(M @ M.T, 50 * rng.standard_normal(n), G=np.eye(n),
                        lo=-np.ones(n), hi=np.ones(n), max_iter=1)
    assert r.status == MAX_ITER


def test_simple_bounds_are_exact():
    rng = np.random.default_rng(2)
    for _ in range(20):
        n = 6
        M = rng.standard_normal((n, n))
        A = rng.standard_normal((2, n))
        r = solve_eq_box_qp(M @ M.T + np.eye(n), 30 * rng.standard_normal(n), A, np.zeros(2),
                            np.eye(n), -np.ones(n), np.ones(n))
        assert r.ok
        assert np.all(r.z >= -1.0) and np.all(r.z <= 1.0)


def test_kkt_verifier_flags_bad_points():
    P, q = np.eye(2), np.array([-1.0, -1.0])
    G, lo, hi = np.eye(2), np.zeros(2), np.full(2, 0.5)
    good = kkt_residuals(P, q, None, None, G, lo, hi, np.full(2, 0.5), None,
                         np.zeros(2), np.full(2, 0.5))
    assert good.max <= 1e-14
    # multiplier attached to the inactive bound
    bad = kkt_residuals(P, q, None, None, G, lo, hi, np.full(2, 0.5), None,
                        np.full(2, 0.5), np.zeros(2))
    assert bad.stationarity > 0.1 and bad.complementarity > 0.01
    # negative multiplier
    bad = kkt_residuals(P, q, None, None, G, lo, hi, np.full(2, 0.5), None,
                        np.zeros(2), np.full(2, -0.5))
    assert bad.dual > 0.1
    # infeasible primal point
    bad = kkt_residuals(P, q, None, None, G, lo, hi, np.full(2, 1.0), None, None, None)
    assert bad.primal > 0.1


def test_no_constraints():
    r = solve_eq_box_qp(np.diag([2.0, 4.0]), [-2.0, -4.0])
    np.testing.assert_allclose(r.z, [1.0, 1.0])
    assert r.ok and r.kkt_residual <= 1e-12
