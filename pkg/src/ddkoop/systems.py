"""Discrete-time simulators, Toeplitz/observability oracles and the benchmark."""

from dataclasses import dataclass
from typing import Callable, List, Optional, Union

import numpy as np

from ._linalg import as_sequence, numerical_rank
from .errors import DimensionError, DivergenceError
from .trajectory import Trajectory

#: States larger than this in magnitude abort a simulation.
DIVERGENCE_LIMIT = 1e12

UNOBSERVABLE = "unobservable"


def _mat(a, name):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.ndim != 2:
        raise DimensionError(f"{name} must be a matrix")
    return a


@dataclass(frozen=True)
class StateSpaceModel:
    """``z+ = A z + B u``, ``y = C z + D u``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A, B, C, D = (_mat(getattr(self, k), k) for k in "ABCD")
        nz = A.shape[0]
        if A.shape != (nz, nz):
            raise DimensionError(f"A must be square, got {A.shape}")
        if B.shape[0] != nz or C.shape[1] != nz:
            raise DimensionError("B rows / C columns must match the state dimension")
        if D.shape != (C.shape[0], B.shape[1]):
            raise DimensionError(f"D must be {(C.shape[0], B.shape[1])}, got {D.shape}")
        for k, v in zip("ABCD", (A, B, C, D)):
            object.__setattr__(self, k, v)

    @property
    def n_z(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class AffineModel:
    """``x+ = A x + B u + e``, ``y = C x + D u + r``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    e: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        lin = StateSpaceModel(self.A, self.B, self.C, self.D)
        e = np.asarray(self.e, dtype=float).reshape(-1)
        r = np.asarray(self.r, dtype=float).reshape(-1)
        if e.size != lin.n_z or r.size != lin.p:
            raise DimensionError("offset dimensions do not match the model")
        for k in "ABCD":
            object.__setattr__(self, k, getattr(lin, k))
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "r", r)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class NonlinearSystem:
    """``x+ = f(x, u)``, ``y = g(x, u)`` with fixed dimensions.

    ``f`` and ``g`` take 1-D arrays and must be free of side effects. With
    ``vectorized=True`` they also accept ``(n, k)`` / ``(m, k)`` batches.
    """

    n: int
    m: int
    p: int
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    g: Callable[[np.ndarray, np.ndarray], np.ndarray]
    name: str = "nonlinear"
    vectorized: bool = False


def simulate_nonlinear(sys: NonlinearSystem, x0, u_seq) -> Trajectory:
    """Roll out ``sys`` from ``x0`` under ``u_seq``; returns states as well."""
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.size != sys.n:
        raise DimensionError(f"x0 has dimension {x.size}, expected {sys.n}")
    u = as_sequence(u_seq, "u_seq")
    if u.shape[1] != sys.m:
        raise DimensionError(f"inputs have dimension {u.shape[1]}, expected {sys.m}")
    T = u.shape[0]
    X = np.empty((T, sys.n))
    Y = np.empty((T, sys.p))
    for k in range(T):
        if not np.all(np.isfinite(x)) or np.max(np.abs(x), initial=0.0) > DIVERGENCE_LIMIT:
            raise DivergenceError(f"state diverged at step {k}", step=k)
        X[k] = x
        Y[k] = np.asarray(sys.g(x, u[k]), dtype=float).reshape(-1)
        x = np.asarray(sys.f(x, u[k]), dtype=float).reshape(-1)
    return Trajectory(u, Y, X)


def simulate_nonlinear_batch(sys: NonlinearSystem, x0s, u_seqs) -> List[Trajectory]:
    """Simulate ``k`` trajectories of equal length.

    ``x0s`` is ``(k, n)`` and ``u_seqs`` is ``(k, T, m)``. Steps all
    trajectories together when the system is vectorized.
    """
    X0 = np.asarray(x0s, dtype=float).reshape(-1, sys.n)
    U = np.asarray(u_seqs, dtype=float)
    if U.ndim == 2:
        U = U[:, :, None]
    if U.shape[0] != X0.shape[0] or U.shape[2] != sys.m:
        raise DimensionError("x0s and u_seqs disagree in count or input dimension")
    if not sys.vectorized:
        return [simulate_nonlinear(sys, x0, u) for x0, u in zip(X0, U)]
    k, T, _ = U.shape
    X = np.empty((T, sys.n, k))
    Y = np.empty((T, sys.p, k))
    x = X0.T.copy()
    for t in range(T):
        bad = ~np.all(np.isfinite(x), axis=0) | (np.max(np.abs(x), axis=0) > DIVERGENCE_LIMIT)
        if bad.any():
            raise DivergenceError(f"trajectory {int(np.argmax(bad))} diverged at step {t}", step=t)
        X[t] = x
        Y[t] = sys.g(x, U[:, t, :].T)
        x = sys.f(x, U[:, t, :].T)
    return [Trajectory(U[i], Y[:, :, i], X[:, :, i]) for i in range(k)]


def simulate_lti(model: StateSpaceModel, z0, u_seq) -> Trajectory:
    """Roll out the linear model; the returned ``x`` holds the lifted states."""
    z = np.asarray(z0, dtype=float).reshape(-1)
    if z.size != model.n_z:
        raise DimensionError(f"z0 has dimension {z.size}, expected {model.n_z}")
    u = as_sequence(u_seq, "u_seq")
    if u.shape[1] != model.m:
        raise DimensionError(f"inputs have dimension {u.shape[1]}, expected {model.m}")
    T = u.shape[0]
    Z = np.empty((T, model.n_z))
    for k in range(T):
        if not np.all(np.isfinite(z)) or np.max(np.abs(z), initial=0.0) > DIVERGENCE_LIMIT:
            raise DivergenceError(f"state diverged at step {k}", step=k)
        Z[k] = z
        z = model.A @ z + model.B @ u[k]
    Y = Z @ model.C.T + u @ model.D.T
    return Trajectory(u, Y, Z)


def simulate_affine(model: AffineModel, x0, u_seq) -> Trajectory:
    x = np.asarray(x0, dtype=float).reshape(-1)
    u = as_sequence(u_seq, "u_seq")
    if x.size != model.n or u.shape[1] != model.m:
        raise DimensionError("x0 or input dimension does not match the affine model")
    T = u.shape[0]
    X = np.empty((T, model.n))
    for k in range(T):
        if not np.all(np.isfinite(x)) or np.max(np.abs(x), initial=0.0) > DIVERGENCE_LIMIT:
            raise DivergenceError(f"state diverged at step {k}", step=k)
        X[k] = x
        x = model.A @ x + model.B @ u[k] + model.e
    Y = X @ model.C.T + u @ model.D.T + model.r
    return Trajectory(u, Y, X)


def lti_as_nonlinear(model: Union[StateSpaceModel, AffineModel], name="lti") -> NonlinearSystem:
    """Wrap a linear or affine model so the generic simulator can drive it."""
    if isinstance(model, AffineModel):
        A, B, C, D, e, r = model.A, model.B, model.C, model.D, model.e, model.r
        n = model.n
    else:
        A, B, C, D = model.A, model.B, model.C, model.D
        e, r = np.zeros(model.n_z), np.zeros(model.p)
        n = model.n_z
    return NonlinearSystem(n, B.shape[1], C.shape[0],
                           _AffineMap(A, B, e), _AffineMap(C, D, r), name)


class _AffineMap:
    # picklable (x, u) -> M x + N u + c
    def __init__(self, M, N, c):
        self.M, self.N, self.c = M, N, c

    def __call__(self, x, u):
        return self.M @ x + self.N @ np.atleast_1d(u) + self.c


def affine_to_embedding(aff: AffineModel) -> StateSpaceModel:
    """Linear embedding of an affine model on the augmented state ``col(x, 1)``."""
    n, m = aff.n, aff.m
    A = np.block([[aff.A, aff.e[:, None]], [np.zeros((1, n)), np.ones((1, 1))]])
    B = np.vstack([aff.B, np.zeros((1, m))])
    C = np.hstack([aff.C, aff.r[:, None]])
    return StateSpaceModel(A, B, C, aff.D.copy())


def toeplitz_response(model: StateSpaceModel, L: int) -> np.ndarray:
    """Block lower-triangular input-to-output map over ``L`` steps.

    Diagonal blocks are ``D``; block ``(i, j)`` with ``i > j`` is
    ``C A^(i-j-1) B``.
    """
    p, m = model.p, model.m
    markov = [model.D]
    AkB = model.B
    for _ in range(L - 1):
        markov.append(model.C @ AkB)
        AkB = model.A @ AkB
    T = np.zeros((p * L, m * L))
    for i in range(L):
        for j in range(i + 1):
            T[i * p:(i + 1) * p, j * m:(j + 1) * m] = markov[i - j]
    return T


def observability_matrix(model: StateSpaceModel, L: int) -> np.ndarray:
    """``col(C, CA, ..., CA^(L-1))``."""
    blocks = []
    CA = model.C
    for _ in range(L):
        blocks.append(CA)
        CA = CA @ model.A
    return np.vstack(blocks)


def controllability_matrix(model: StateSpaceModel) -> np.ndarray:
    blocks = []
    AkB = model.B
    for _ in range(model.n_z):
        blocks.append(AkB)
        AkB = model.A @ AkB
    return np.hstack(blocks)


def observability_index(model: StateSpaceModel,
                        rank_tol: Optional[float] = None) -> Union[int, str]:
    """Smallest ``l`` with ``rank(O_l) == rank(O_{n_z})``.

    Returns :data:`UNOBSERVABLE` when that common rank is below ``n_z``.
    """
    nz = model.n_z
    full, _ = numerical_rank(observability_matrix(model, nz), rank_tol)
    if full < nz:
        return UNOBSERVABLE
    for l in range(1, nz + 1):
        r, _ = numerical_rank(observability_matrix(model, l), rank_tol)
        if r == full:
            return l
    return nz  # pragma: no cover


def benchmark_system():
    """The two-state polynomial benchmark and its exact order-5 embedding.

    ``x1+ = 0.99 x1``, ``x2+ = 0.9 x2 + x1^2 + x1^3 + x1^4 + u``, ``y = x``.
    The embedding uses ``z = col(x1, x2, x1^2, x1^3, x1^4)``.

    Returns:
        ``(NonlinearSystem, StateSpaceModel, LiftingDictionary)``
    """
    from .lifting import monomial_dictionary

    sys = NonlinearSystem(2, 1, 2, _benchmark_f, _benchmark_g, name="benchmark", vectorized=True)
    lam = 0.99
    A = np.array([
        [lam, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.9, 1.0, 1.0, 1.0],
        [0.0, 0.0, lam ** 2, 0.0, 0.0],
        [0.0, 0.0, 0.0, lam ** 3, 0.0],
        [0.0, 0.0, 0.0, 0.0, lam ** 4],
    ])
    B = np.array([[0.0], [1.0], [0.0], [0.0], [0.0]])
    C = np.eye(2, 5)
    D = np.zeros((2, 1))
    dictionary = monomial_dictionary(2, [(0, 1), (1, 1), (0, 2), (0, 3), (0, 4)])
    return sys, StateSpaceModel(A, B, C, D), dictionary


def _benchmark_f(x, u):
    # x: (2,) or (2, k); u: (1,) or (1, k)
    x1, x2 = x[0], x[1]
    return np.array([0.99 * x1, 0.9 * x2 + x1 ** 2 + x1 ** 3 + x1 ** 4 + np.atleast_1d(u)[0]])


def _benchmark_g(x, u):
    return np.array(x, dtype=float, copy=True)


def random_lti(rng: np.random.Generator, n: int, m: int, p: int,
               spectral_radius: float = 0.9) -> StateSpaceModel:
    """Random stable model with ``rho(A) == spectral_radius``."""
    A = rng.standard_normal((n, n))
    rho = max(np.abs(np.linalg.eigvals(A)))
    A *= spectral_radius / rho
    return StateSpaceModel(A, rng.standard_normal((n, m)), rng.standard_normal((p, n)),
                           rng.standard_normal((p, m)))


def random_affine(rng: np.random.Generator, n: int, m: int, p: int,
                  spectral_radius: float = 0.9) -> AffineModel:
    lin = random_lti(rng, n, m, p, spectral_radius)
    return AffineModel(lin.A, lin.B, lin.C, lin.D, rng.standard_normal(n), rng.standard_normal(p))
