"""Data-driven predictors and trajectory-space diagnostics.

DD-K predicts with ``col(U_P, Y_P, U_F, Y_F) g = col(u_ini, y_ini, u_F, y_F)``;
DD-A adds ``sum(g) == 1``. Both pick the minimum-norm ``g``; any consistent
``g`` gives the same ``y_F`` when the library is rich and ``T_ini`` is deep
enough, so the tie-break does not matter.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._linalg import lstsq_min_norm, numerical_rank
from .errors import DimensionError, ParameterError
from .lifting import LiftingDictionary, evaluate
from .systems import StateSpaceModel, simulate_lti
from .trajectory import Trajectory, TrajectoryLibrary, stack

DEFAULT_FEAS_TOL = 1e-6

EXACT = "exact"
APPROXIMATE = "approximate"


@dataclass(frozen=True)
class PredictionProblem:
    """Stacked past window and future inputs."""

    u_ini: np.ndarray
    y_ini: np.ndarray
    u_F: np.ndarray

    def __post_init__(self):
        for k in ("u_ini", "y_ini", "u_F"):
            object.__setattr__(self, k, np.asarray(getattr(self, k), dtype=float).reshape(-1))

    @classmethod
    def from_trajectory(cls, past: Trajectory, u_future) -> "PredictionProblem":
        return cls(stack(past.u), stack(past.y), stack(u_future) if len(u_future) else [])

    def check(self, lib: TrajectoryLibrary) -> None:
        exp = (lib.m * lib.T_ini, lib.p * lib.T_ini, lib.m * lib.N)
        got = (self.u_ini.size, self.y_ini.size, self.u_F.size)
        if exp != got:
            raise DimensionError(f"(u_ini, y_ini, u_F) sizes {got} do not match library {exp}")


@dataclass(frozen=True)
class PredictionResult:
    y_F: np.ndarray
    g: np.ndarray
    equality_residual: float
    verdict: str

    @property
    def exact(self) -> bool:
        return self.verdict == EXACT


def _predict(lib, prob, feas_tol, affine):
    prob.check(lib)
    M = np.vstack([lib.U_P, lib.Y_P, lib.U_F])
    b = np.concatenate([prob.u_ini, prob.y_ini, prob.u_F])
    if affine:
        M = np.vstack([M, np.ones((1, lib.l))])
        b = np.append(b, 1.0)
    g, res, _ = lstsq_min_norm(M, b)
    y_F = lib.Y_F @ g
    return PredictionResult(y_F, g, res, EXACT if res <= feas_tol else APPROXIMATE)


def ddk_predict(lib: TrajectoryLibrary, prob: PredictionProblem,
                feas_tol: float = DEFAULT_FEAS_TOL) -> PredictionResult:
    """Predict ``y_F`` from the Koopman data-driven representation.

    An ``approximate`` verdict means the stacked equalities could not be met
    to ``feas_tol``; ``y_F`` is still the least-squares prediction.
    """
    return _predict(lib, prob, feas_tol, affine=False)


def dda_predict(lib: TrajectoryLibrary, prob: PredictionProblem,
                feas_tol: float = DEFAULT_FEAS_TOL) -> PredictionResult:
    """Affine variant of :func:`ddk_predict` with ``sum(g) == 1``."""
    return _predict(lib, prob, feas_tol, affine=True)


def koopman_predict(model: StateSpaceModel, dictionary: LiftingDictionary, x_now, u_F) -> np.ndarray:
    """Roll the lifted linear model from ``Phi(x_now)``; returns stacked ``y_F``."""
    if dictionary.n_z != model.n_z:
        raise DimensionError(f"dictionary has {dictionary.n_z} observables, model {model.n_z} states")
    u = np.asarray(u_F, dtype=float).reshape(-1, model.m)
    if u.shape[0] == 0:
        return np.zeros(0)
    z0 = evaluate(dictionary, x_now)
    return stack(simulate_lti(model, z0, u).y)


def membership_residual(lib: TrajectoryLibrary, traj_column) -> float:
    """Distance from ``col(u, y)`` to the column span of ``H_d``."""
    v = np.asarray(traj_column, dtype=float).reshape(-1)
    H = lib.H_d
    if v.size != H.shape[0]:
        raise DimensionError(f"vector has length {v.size}, expected {H.shape[0]}")
    _, res, _ = lstsq_min_norm(H, v)
    return res


@dataclass(frozen=True)
class NonexistenceReport:
    verdict: str  # "nonexistent" or "inconclusive"
    rank: int
    bound: int    # m*L + nz_bar
    nz_bar: int
    tol: float

    @property
    def certified(self) -> bool:
        return self.verdict == "nonexistent"


def embedding_nonexistence_certificate(lib: TrajectoryLibrary, nz_bar: int,
                                       rank_tol: Optional[float] = None) -> NonexistenceReport:
    """Rank test ruling out embeddings of order ``<= nz_bar``.

    Any embedding of order ``n_z`` forces ``rank(H_d) <= m L + n_z``, so a
    larger rank certifies that no embedding of order ``<= nz_bar`` exists.
    Only valid for a sliding-window library from a single trajectory.
    """
    if not lib.single_hankel:
        raise ParameterError("certificate requires a single-trajectory Hankel library")
    if nz_bar < 0:
        raise ParameterError("nz_bar must be non-negative")
    rank, tol = numerical_rank(lib.H_d, rank_tol)
    bound = lib.m * lib.L + nz_bar
    return NonexistenceReport("nonexistent" if rank > bound else "inconclusive",
                              rank, bound, nz_bar, tol)
