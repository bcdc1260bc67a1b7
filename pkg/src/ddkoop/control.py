"""Predictive-control steps (DD-K, DD-A, EDMD-K) and the receding-horizon loop."""

from dataclasses import dataclass, field
from typing import Callable, List

import numpy as np

from ._linalg import lstsq_min_norm
from .errors import DimensionError, DivergenceError, InfeasibleError, ParameterError
from .lifting import LiftingDictionary, evaluate
from .qp import INFEASIBLE, OPTIMAL, QPResult, solve_eq_box_qp
from .systems import (NonlinearSystem, StateSpaceModel, observability_matrix,
                      simulate_nonlinear, toeplitz_response)
from .trajectory import Trajectory, TrajectoryLibrary, stack

EQ_FEAS_TOL = 1e-6


class StepReference:
    """Constant reference ``y_r,k = value``."""

    def __init__(self, value):
        self.value = np.asarray(value, dtype=float).reshape(-1)

    def __call__(self, k: int) -> np.ndarray:
        return self.value.copy()


class SinusoidReference:
    """``y_r,k`` zero except ``amplitude * sin(omega * k)`` on one channel."""

    def __init__(self, p: int, channel: int, amplitude: float, omega: float):
        self.p, self.channel, self.amplitude, self.omega = p, channel, amplitude, omega

    def __call__(self, k: int) -> np.ndarray:
        r = np.zeros(self.p)
        r[self.channel] = self.amplitude * np.sin(self.omega * k)
        return r


@dataclass
class ControllerConfig:
    """Weights, horizon and constraints shared by all controllers.

    Full-horizon weights are ``R = I_N kron R_step`` and ``Q = I_N kron Q_step``.
    ``lambda_g``/``lambda_y`` only affect DD-A; ``lambda_y == 0`` keeps the past
    output equality hard instead of adding a slack.
    """

    N: int
    T_ini: int
    R_step: np.ndarray
    Q_step: np.ndarray
    u_min: np.ndarray
    u_max: np.ndarray
    reference: Callable[[int], np.ndarray]
    lambda_g: float = 0.0
    lambda_y: float = 0.0

    def __post_init__(self):
        self.R_step = np.atleast_2d(np.asarray(self.R_step, dtype=float))
        self.Q_step = np.atleast_2d(np.asarray(self.Q_step, dtype=float))
        self.u_min = np.asarray(self.u_min, dtype=float).reshape(-1)
        self.u_max = np.asarray(self.u_max, dtype=float).reshape(-1)
        if self.N < 1 or self.T_ini < 0:
            raise ParameterError("need N >= 1 and T_ini >= 0")
        try:
            np.linalg.cholesky(0.5 * (self.R_step + self.R_step.T))
        except np.linalg.LinAlgError:
            raise ParameterError("R_step must be positive definite") from None
        ev = np.linalg.eigvalsh(0.5 * (self.Q_step + self.Q_step.T))
        if ev.size and ev.min() < -1e-12 * max(1.0, abs(ev).max()):
            raise ParameterError("Q_step must be positive semidefinite")
        if self.u_min.size != self.R_step.shape[0] or self.u_max.size != self.u_min.size:
            raise DimensionError("input bounds must match R_step")
        if np.any(self.u_min > self.u_max):
            raise ParameterError("u_min must not exceed u_max")
        if self.lambda_g < 0 or self.lambda_y < 0:
            raise ParameterError("regularization weights must be non-negative")
        if not callable(self.reference):
            self.reference = StepReference(self.reference)

    @property
    def m(self) -> int:
        return self.R_step.shape[0]

    @property
    def p(self) -> int:
        return self.Q_step.shape[0]

    @property
    def R(self) -> np.ndarray:
        return np.kron(np.eye(self.N), self.R_step)

    @property
    def Q(self) -> np.ndarray:
        return np.kron(np.eye(self.N), self.Q_step)

    def reference_window(self, k: int) -> np.ndarray:
        return np.concatenate([np.asarray(self.reference(k + i), dtype=float).reshape(-1)
                               for i in range(self.N)])

    def scaled(self, factor: float) -> "ControllerConfig":
        return ControllerConfig(self.N, self.T_ini, factor * self.R_step, factor * self.Q_step,
                                self.u_min, self.u_max, self.reference,
                                factor * self.lambda_g, factor * self.lambda_y)


@dataclass
class ControlSolution:
    u_F: np.ndarray
    y_F: np.ndarray
    g: np.ndarray
    sigma_y: np.ndarray
    objective: float
    kkt_residual: float
    status: str
    equality_residual: float = 0.0
    iterations: int = 0

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def _box(cfg: ControllerConfig):
    return np.tile(cfg.u_min, cfg.N), np.tile(cfg.u_max, cfg.N)


def _condensed_qp(y0, K, cfg: ControllerConfig, y_r) -> QPResult:
    """QP in ``u_F`` for an affine predictor ``y_F = y0 + K u_F``."""
    R, Q = cfg.R, cfg.Q
    e = y0 - y_r
    P = 2.0 * (R + K.T @ Q @ K)
    q = 2.0 * K.T @ Q @ e
    lo, hi = _box(cfg)
    return solve_eq_box_qp(P, q, G=np.eye(K.shape[1]), lo=lo, hi=hi, const=float(e @ Q @ e))


def _check_window(lib: TrajectoryLibrary, cfg: ControllerConfig, u_ini, y_ini):
    if cfg.T_ini != lib.T_ini or cfg.N != lib.N:
        raise ParameterError(f"config (T_ini={cfg.T_ini}, N={cfg.N}) does not match library "
                             f"(T_ini={lib.T_ini}, N={lib.N})")
    u_ini = np.asarray(u_ini, dtype=float).reshape(-1)
    y_ini = np.asarray(y_ini, dtype=float).reshape(-1)
    if u_ini.size != lib.m * lib.T_ini or y_ini.size != lib.p * lib.T_ini:
        raise DimensionError("initial window does not match the library")
    return u_ini, y_ini


def ddk_mpc_step(lib: TrajectoryLibrary, u_ini, y_ini, cfg: ControllerConfig,
                 k: int = 0) -> ControlSolution:
    """One DD-K predictive-control step.

    Minimizes ``||u_F||_R^2 + ||y_F - y_r||_Q^2`` over ``g`` subject to
    ``U_P g = u_ini``, ``Y_P g = y_ini``, ``u_F = U_F g``, ``y_F = Y_F g`` and
    the input box. Every ``g`` in the null space of ``col(U_P, Y_P, U_F)``
    leaves ``y_F`` unchanged, so the problem is solved in ``u_F`` with the
    exact predictor ``y_F = Y_F pinv(col(U_P, Y_P, U_F)) col(u_ini, y_ini, u_F)``
    and ``g`` is recovered as the minimum-norm solution.
    """
    return DDKController(lib, cfg).step(u_ini, y_ini, None, k)


def dda_mpc_step(lib: TrajectoryLibrary, u_ini, y_ini, cfg: ControllerConfig,
                 k: int = 0) -> ControlSolution:
    """One DD-A step: affine constraint ``sum(g) == 1`` and regularization.

    Adds ``lambda_g ||g||^2 + lambda_y ||sigma_y||^2`` with the relaxed past
    output ``Y_P g = y_ini + sigma_y`` (squared norms keep the problem a QP).
    Decision vector is ``(g, u_F, sigma_y)`` with ``u_F = U_F g`` imposed as
    an equality so the input box acts on plain variables.
    """
    u_ini, y_ini = _check_window(lib, cfg, u_ini, y_ini)
    l = lib.l
    nu = lib.U_F.shape[0]
    ns = lib.p * lib.T_ini if cfg.lambda_y > 0 else 0
    nv = l + nu + ns
    R, Q = cfg.R, cfg.Q
    y_r = cfg.reference_window(k)
    ig, iu, isg = slice(0, l), slice(l, l + nu), slice(l + nu, nv)

    P = np.zeros((nv, nv))
    P[ig, ig] = 2.0 * (lib.Y_F.T @ Q @ lib.Y_F + cfg.lambda_g * np.eye(l))
    P[iu, iu] = 2.0 * R
    P[isg, isg] = 2.0 * cfg.lambda_y * np.eye(ns)
    q = np.zeros(nv)
    q[ig] = -2.0 * lib.Y_F.T @ Q @ y_r

    mT, pT = lib.U_P.shape[0], lib.Y_P.shape[0]
    A = np.zeros((mT + pT + 1 + nu, nv))
    A[:mT, ig] = lib.U_P
    A[mT:mT + pT, ig] = lib.Y_P
    if ns:
        A[mT:mT + pT, isg] = -np.eye(ns)
    A[mT + pT, ig] = 1.0
    A[mT + pT + 1:, ig] = lib.U_F
    A[mT + pT + 1:, iu] = -np.eye(nu)
    b = np.concatenate([u_ini, y_ini, [1.0], np.zeros(nu)])

    G = np.zeros((nu, nv))
    G[:, iu] = np.eye(nu)
    lo, hi = _box(cfg)
    sol = solve_eq_box_qp(P, q, A, b, G, lo, hi, const=float(y_r @ Q @ y_r),
                          feas_tol=EQ_FEAS_TOL)
    g = sol.z[ig]
    sigma = sol.z[isg] if ns else np.zeros(pT)
    return ControlSolution(sol.z[iu], lib.Y_F @ g, g, sigma, sol.objective, sol.kkt_residual,
                           sol.status, sol.equality_residual, sol.iterations)


def edmd_mpc_step(model: StateSpaceModel, dictionary: LiftingDictionary, x_now,
                  cfg: ControllerConfig, k: int = 0) -> ControlSolution:
    """One step with the lifted linear model rolled from ``Phi(x_now)``."""
    return EDMDController(model, dictionary, cfg).step(None, None, x_now, k)


class DDKController:
    name = "dd-k"

    def __init__(self, lib: TrajectoryLibrary, cfg: ControllerConfig):
        self.lib, self.cfg = lib, cfg
        # the predictor only depends on the library
        M = np.vstack([lib.U_P, lib.Y_P, lib.U_F])
        self._M = M
        self._K_all = lib.Y_F @ np.linalg.pinv(M)

    @property
    def T_ini(self):
        return self.cfg.T_ini

    def step(self, u_ini, y_ini, x_now, k) -> ControlSolution:
        lib, cfg = self.lib, self.cfg
        u_ini, y_ini = _check_window(lib, cfg, u_ini, y_ini)
        b_ini = np.concatenate([u_ini, y_ini])
        n_ini = b_ini.size
        y0 = self._K_all[:, :n_ini] @ b_ini
        sol = _condensed_qp(y0, self._K_all[:, n_ini:], cfg, cfg.reference_window(k))
        b = np.concatenate([b_ini, sol.z])
        g, res, _ = lstsq_min_norm(self._M, b)
        eq_res = res / (1.0 + np.linalg.norm(b))
        status = sol.status if eq_res <= EQ_FEAS_TOL else INFEASIBLE
        return ControlSolution(sol.z, lib.Y_F @ g, g, np.zeros(lib.p * lib.T_ini),
                               sol.objective, sol.kkt_residual, status, eq_res, sol.iterations)


class DDAController:
    name = "dd-a"

    def __init__(self, lib: TrajectoryLibrary, cfg: ControllerConfig):
        self.lib, self.cfg = lib, cfg

    @property
    def T_ini(self):
        return self.cfg.T_ini

    def step(self, u_ini, y_ini, x_now, k) -> ControlSolution:
        return dda_mpc_step(self.lib, u_ini, y_ini, self.cfg, k)


class EDMDController:
    name = "edmd-k"

    def __init__(self, model: StateSpaceModel, dictionary: LiftingDictionary,
                 cfg: ControllerConfig):
        if model.n_z != dictionary.n_z:
            raise DimensionError("model and dictionary dimensions differ")
        self.model, self.dictionary, self.cfg = model, dictionary, cfg
        self._O = observability_matrix(model, cfg.N)
        self._K = toeplitz_response(model, cfg.N)

    @property
    def T_ini(self):
        return self.cfg.T_ini

    def step(self, u_ini, y_ini, x_now, k) -> ControlSolution:
        z0 = evaluate(self.dictionary, x_now)
        y0 = self._O @ z0
        sol = _condensed_qp(y0, self._K, self.cfg, self.cfg.reference_window(k))
        return ControlSolution(sol.z, y0 + self._K @ sol.z, np.zeros(0), np.zeros(0),
                               sol.objective, sol.kkt_residual, sol.status, 0.0, sol.iterations)


def realized_cost(u_applied, y_observed, y_r, R_step, Q_step) -> float:
    """``sum_k ||u_k||^2_R + ||y_k - y_r,k||^2_Q`` over the recorded steps."""
    u = np.atleast_2d(np.asarray(u_applied, dtype=float))
    y = np.atleast_2d(np.asarray(y_observed, dtype=float))
    r = np.atleast_2d(np.asarray(y_r, dtype=float))
    if u.shape[0] != y.shape[0] or y.shape != r.shape:
        raise DimensionError("u, y and y_r need equal lengths")
    e = y - r
    R_step = np.atleast_2d(R_step)
    Q_step = np.atleast_2d(Q_step)
    return float(np.einsum("ki,ij,kj->", u, R_step, u) + np.einsum("ki,ij,kj->", e, Q_step, e))


@dataclass
class ClosedLoopResult:
    trajectory: Trajectory          # controlled steps only
    warm_start: Trajectory
    references: np.ndarray          # (steps, p)
    realized_cost: float
    objectives: np.ndarray
    kkt_residuals: np.ndarray
    statuses: List[str]
    predicted_first: np.ndarray     # controller's one-step-ahead output prediction
    iterations: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))


def zero_input_warm_start(system: NonlinearSystem, x0, T_ini: int) -> Trajectory:
    """Drive the plant with zero input for ``max(T_ini, 1)`` steps."""
    return simulate_nonlinear(system, x0, np.zeros((max(T_ini, 1), system.m)))


def run_receding_horizon(system: NonlinearSystem, controller, steps: int,
                         warm_start: Trajectory) -> ClosedLoopResult:
    """Closed loop: solve, apply the first input, advance the plant, slide the window.

    Raises:
        InfeasibleError: when a controller step does not return an optimal
            solution; ``step`` carries the time index.
    """
    cfg = controller.cfg
    T_ini, m, p = cfg.T_ini, system.m, system.p
    if warm_start.T < T_ini or warm_start.x is None:
        raise ParameterError(f"warm start needs states and at least T_ini = {T_ini} samples")
    x = np.asarray(system.f(warm_start.x[-1], warm_start.u[-1]), dtype=float).reshape(-1)
    u_hist = list(warm_start.u[warm_start.T - T_ini:])
    y_hist = list(warm_start.y[warm_start.T - T_ini:])
    U = np.empty((steps, m))
    Y = np.empty((steps, p))
    X = np.empty((steps, system.n))
    refs = np.empty((steps, p))
    pred = np.empty((steps, p))
    objs, kkts, iters, statuses = np.empty(steps), np.empty(steps), np.zeros(steps, int), []
    for k in range(steps):
        u_ini = stack(u_hist) if T_ini else np.zeros(0)
        y_ini = stack(y_hist) if T_ini else np.zeros(0)
        sol = controller.step(u_ini, y_ini, x, k)
        statuses.append(sol.status)
        if not sol.ok:
            raise InfeasibleError(f"{controller.name} step failed at k={k}: {sol.status}",
                                  step=k, residual=sol.equality_residual)
        u_k = sol.u_F[:m]
        assert np.all(u_k >= cfg.u_min) and np.all(u_k <= cfg.u_max), "input left the box"
        X[k] = x
        U[k] = u_k
        Y[k] = np.asarray(system.g(x, u_k), dtype=float).reshape(-1)
        refs[k] = cfg.reference(k)
        pred[k] = sol.y_F[:p]
        objs[k], kkts[k], iters[k] = sol.objective, sol.kkt_residual, sol.iterations
        x = np.asarray(system.f(x, u_k), dtype=float).reshape(-1)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"plant diverged at k={k}", step=k)
        if T_ini:
            u_hist = u_hist[1:] + [u_k]
            y_hist = y_hist[1:] + [Y[k]]
    traj = Trajectory(U, Y, X)
    cost = realized_cost(U, Y, refs, cfg.R_step, cfg.Q_step)
    return ClosedLoopResult(traj, warm_start, refs, cost, objs, kkts, statuses, pred, iters)
