"""Lifting dictionaries, EDMD fitting and lifted-excitation certificates."""

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from ._linalg import lstsq_min_norm, numerical_rank
from .errors import DimensionError, ParameterError
from .systems import StateSpaceModel
from .trajectory import RankReport, Trajectory


class Monomial:
    """``x[i] ** power``."""

    def __init__(self, index: int, power: int = 1):
        self.index = index
        self.power = power

    def __call__(self, X):
        return X[self.index] ** self.power

    def __repr__(self):
        return f"x{self.index + 1}" + (f"^{self.power}" if self.power != 1 else "")


class ThinPlate:
    """Thin-plate spline ``r^2 log r`` with ``r = ||x - center||``; 0 at ``r = 0``."""

    def __init__(self, center):
        self.center = np.asarray(center, dtype=float).reshape(-1)

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        diff = X - (self.center if X.ndim == 1 else self.center[:, None])
        r2 = np.sum(diff * diff, axis=0)
        return _thin_plate(r2)

    def __repr__(self):
        return f"tps({np.array2string(self.center, precision=3)})"


def _thin_plate(r2):
    # r^2 log r = 0.5 r^2 log r^2, continuous extension 0 at r = 0
    r2 = np.asarray(r2, dtype=float)
    out = np.zeros_like(r2)
    np.log(r2, out=out, where=r2 > 0)
    out *= 0.5 * r2
    return out


class LiftingDictionary:
    """Ordered scalar observables ``Phi(x) = col(phi_1(x), ..., phi_nz(x))``.

    Each observable accepts either one state (shape ``(n,)``) or a batch of
    states as columns (shape ``(n, k)``) and returns a scalar or ``(k,)``.
    """

    def __init__(self, n: int, observables: Sequence[Callable], include_state: bool = False):
        if len(observables) < 1:
            raise ParameterError("a dictionary needs at least one observable")
        self.n = n
        self.observables: List[Callable] = list(observables)
        self.include_state = include_state
        # thin-plate tail evaluated in one shot when the dictionary was built by
        # thin_plate_dictionary
        self._centers: Optional[np.ndarray] = None

    @property
    def n_z(self) -> int:
        return len(self.observables)

    def __len__(self):
        return self.n_z

    def __repr__(self):
        return f"LiftingDictionary(n={self.n}, n_z={self.n_z})"

    def __call__(self, x) -> np.ndarray:
        return evaluate(self, x)

    def batch(self, X) -> np.ndarray:
        """Lift states given as columns of ``X`` (``(n, k)``) to ``(n_z, k)``."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] != self.n:
            raise DimensionError(f"expected states as columns of an ({self.n}, k) array")
        if self._centers is not None:
            head = X if self.include_state else np.empty((0, X.shape[1]))
            c = self._centers
            r2 = np.zeros((c.shape[0], X.shape[1]))
            for i in range(self.n):
                r2 += (X[i][None, :] - c[:, i][:, None]) ** 2
            Z = np.vstack([head, _thin_plate(r2)])
        else:
            Z = np.vstack([np.broadcast_to(phi(X), (X.shape[1],)) for phi in self.observables])
        if not np.all(np.isfinite(Z)):
            raise FloatingPointError("non-finite observable value")
        return Z


def evaluate(dictionary: LiftingDictionary, x) -> np.ndarray:
    """Lifted state ``Phi(x)`` for a single state ``x``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != dictionary.n:
        raise DimensionError(f"state has dimension {x.size}, expected {dictionary.n}")
    return dictionary.batch(x[:, None])[:, 0]


def monomial_dictionary(n: int, terms) -> LiftingDictionary:
    """Dictionary of monomials given as ``(state index, power)`` pairs."""
    return LiftingDictionary(n, [Monomial(i, k) for i, k in terms])


def thin_plate_dictionary(centers, include_state: bool = True) -> LiftingDictionary:
    """State coordinates (optional) followed by one thin-plate RBF per center."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.shape[0] < 1:
        raise ParameterError("need at least one center")
    n = centers.shape[1]
    obs: List[Callable] = [Monomial(i) for i in range(n)] if include_state else []
    obs += [ThinPlate(c) for c in centers]
    d = LiftingDictionary(n, obs, include_state=include_state)
    d._centers = centers.copy()
    return d


def random_centers(rng: np.random.Generator, count: int, n: int,
                   low: float = -1.0, high: float = 1.0) -> np.ndarray:
    return rng.uniform(low, high, size=(count, n))


@dataclass(frozen=True)
class SnapshotSet:
    """Snapshot pairs as columns: ``X_plus[:, i] = f(X[:, i], U[:, i])``."""

    X: np.ndarray
    X_plus: np.ndarray
    U: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        cols = {a.shape[1] for a in (self.X, self.X_plus, self.U, self.Y)}
        if len(cols) != 1:
            raise DimensionError("snapshot matrices need equal column counts")

    @property
    def n_s(self) -> int:
        return self.X.shape[1]

    @classmethod
    def from_trajectories(cls, trajs: Sequence[Trajectory]) -> "SnapshotSet":
        """Consecutive pairs ``(x_k, x_{k+1})`` from state-carrying trajectories."""
        Xs, Xp, Us, Ys = [], [], [], []
        for tr in trajs:
            if tr.x is None:
                raise ParameterError("snapshot extraction needs recorded states")
            Xs.append(tr.x[:-1].T)
            Xp.append(tr.x[1:].T)
            Us.append(tr.u[:-1].T)
            Ys.append(tr.y[:-1].T)
        return cls(np.hstack(Xs), np.hstack(Xp), np.hstack(Us), np.hstack(Ys))


@dataclass(frozen=True)
class EdmdResult:
    model: StateSpaceModel
    dynamics_residual: float  # ||Z+ - A Z - B U||_F
    output_residual: float    # ||Y - C Z - D U||_F
    rank: int
    rank_deficient: bool

    @property
    def residual(self) -> float:
        return float(np.hypot(self.dynamics_residual, self.output_residual))


def edmd_fit(snapshots: SnapshotSet, dictionary: LiftingDictionary,
             rcond: Optional[float] = None, residuals: bool = True) -> EdmdResult:
    """Least-squares Koopman model on the lifted snapshots.

    ``[A B]`` and ``[C D]`` are the minimum-Frobenius-norm minimizers of
    ``||Z+ - A Z - B U||_F`` and ``||Y - C Z - D U||_F``. With
    ``residuals=False`` the two fit residuals are skipped and reported as nan.
    """
    if snapshots.n_s == 0:
        raise ParameterError("empty snapshot set")
    # consecutive snapshots share states; lift each distinct state once
    ns = snapshots.n_s
    both = np.hstack([snapshots.X, snapshots.X_plus])
    uniq, inv = np.unique(both, axis=1, return_inverse=True)
    inv = inv.reshape(-1)
    lifted_T = dictionary.batch(uniq).T
    nz = lifted_T.shape[1]
    # regressors as rows: W' = [Z' U'], targets [Z+' Y']
    WT = np.hstack([lifted_T[inv[:ns]], snapshots.U.T])
    rhs = np.hstack([lifted_T[inv[ns:]], snapshots.Y.T])
    sol, _, rank = lstsq_min_norm(WT, rhs, rcond, residual=False)
    AB = sol[:, :nz].T
    CD = sol[:, nz:].T
    A, B = AB[:, :nz], AB[:, nz:]
    C, D = CD[:, :nz], CD[:, nz:]
    dyn_res = out_res = float("nan")
    if residuals:
        E = WT @ sol - rhs
        dyn_res = float(np.linalg.norm(E[:, :nz]))
        out_res = float(np.linalg.norm(E[:, nz:]))
    return EdmdResult(StateSpaceModel(A, B, C, D), dyn_res, out_res, rank,
                      rank < WT.shape[1])


def lifted_excitation_matrix(u_columns, initial_states, dictionary: LiftingDictionary) -> np.ndarray:
    """``H_K = [U_d; Phi(x_0^1) ... Phi(x_0^l)]``."""
    U = np.atleast_2d(np.asarray(u_columns, dtype=float))
    X0 = np.asarray(initial_states, dtype=float).reshape(len(initial_states), -1).T
    if X0.shape[1] != U.shape[1]:
        raise DimensionError(f"{X0.shape[1]} initial states for {U.shape[1]} columns")
    return np.vstack([U, dictionary.batch(X0)])


def lifted_excitation_report(u_columns, initial_states, dictionary: LiftingDictionary,
                             rank_tol: Optional[float] = None) -> RankReport:
    """Check that the input columns and lifted initial states have full row rank.

    Needs the true initial states and dictionary, so it certifies simulated
    data-collection campaigns rather than running on measured data.
    """
    H_K = lifted_excitation_matrix(u_columns, initial_states, dictionary)
    required = H_K.shape[0]
    rank, tol = numerical_rank(H_K, rank_tol)
    if H_K.shape[1] < required:
        return RankReport(False, rank, required, tol,
                          f"insufficient columns: l = {H_K.shape[1]} < mL + n_z = {required}")
    if rank < required:
        return RankReport(False, rank, required, tol, "rank deficient")
    return RankReport(True, rank, required, tol)


def augment_initial_states(dictionary: LiftingDictionary, states, sampler: Callable,
                           rank_tol: Optional[float] = None, max_draws: int = 10_000):
    """Grow a set of states until their lifted images span ``R^{n_z}``.

    A candidate from ``sampler()`` is kept only when its lifted image leaves
    the span of the current columns, so each kept state raises the rank by
    one. Returns the augmented list.

    Raises:
        RuntimeError: if ``max_draws`` candidates fail to complete the span.
    """
    states = [np.asarray(s, dtype=float).reshape(-1) for s in states]
    nz = dictionary.n_z
    M = dictionary.batch(np.array(states).T) if states else np.empty((nz, 0))
    rank, _ = numerical_rank(M, rank_tol) if states else (0, 0.0)
    draws = 0
    while rank < nz:
        if draws >= max_draws:
            raise RuntimeError(f"rank stuck at {rank} < {nz} after {max_draws} draws")
        draws += 1
        x = np.asarray(sampler(), dtype=float).reshape(-1)
        cand = np.hstack([M, evaluate(dictionary, x)[:, None]])
        new_rank, _ = numerical_rank(cand, rank_tol)
        if new_rank > rank:
            states.append(x)
            M, rank = cand, new_rank
    return states


def excitation_design(dictionary: LiftingDictionary, m: int, L: int, sampler: Callable,
                      rank_tol: Optional[float] = None):
    """Input columns and initial states that give lifted excitation by construction.

    The first ``n_z`` columns use zero input and states whose lifted images
    span ``R^{n_z}``; the next ``mL`` columns apply a unit input in one slot
    from the first state. ``H_K`` is then block triangular with full rank.

    Returns ``(U_d, states)`` with ``U_d`` of shape ``(mL, mL + n_z)``.
    """
    states = augment_initial_states(dictionary, [], sampler, rank_tol)
    nz = dictionary.n_z
    U = np.zeros((m * L, nz + m * L))
    U[:, nz:] = np.eye(m * L)
    states = states + [states[0]] * (m * L)
    return U, states
