"""Hankel matrices, persistent-excitation tests and trajectory libraries.

Stacked vectors follow the ``col(w_0, ..., w_{L-1})`` convention: the block
for time step ``t`` occupies rows ``t*q:(t+1)*q``.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ._linalg import as_sequence, numerical_rank
from .errors import DimensionError, LengthError, ParameterError


@dataclass(frozen=True)
class Trajectory:
    """Paired input/output (and optionally state) samples.

    Arrays are stored time-major: ``u`` is ``(T, m)``, ``y`` is ``(T, p)`` and
    ``x``, when present, is ``(T, n)``.
    """

    u: np.ndarray
    y: np.ndarray
    x: Optional[np.ndarray] = None

    def __post_init__(self):
        u = as_sequence(self.u, "u")
        y = as_sequence(self.y, "y")
        if u.shape[0] != y.shape[0]:
            raise DimensionError(f"u has {u.shape[0]} samples but y has {y.shape[0]}")
        if u.shape[0] < 1:
            raise LengthError("a trajectory needs at least one sample")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)
        if self.x is not None:
            x = as_sequence(self.x, "x")
            if x.shape[0] != u.shape[0]:
                raise DimensionError(f"x has {x.shape[0]} samples, expected {u.shape[0]}")
            object.__setattr__(self, "x", x)

    @property
    def T(self) -> int:
        return self.u.shape[0]

    @property
    def m(self) -> int:
        return self.u.shape[1]

    @property
    def p(self) -> int:
        return self.y.shape[1]

    @property
    def n(self) -> Optional[int]:
        return None if self.x is None else self.x.shape[1]

    def window(self, start: int, length: int) -> "Trajectory":
        """Sub-trajectory of ``length`` samples beginning at ``start``."""
        if start < 0 or start + length > self.T:
            raise LengthError(f"window [{start}, {start + length}) outside length {self.T}")
        sl = slice(start, start + length)
        return Trajectory(self.u[sl], self.y[sl], None if self.x is None else self.x[sl])


@dataclass(frozen=True)
class RankReport:
    """Outcome of a rank test. Truthy iff the tested matrix has full row rank."""

    full: bool
    rank: int
    required: int
    tol: float
    reason: str = ""

    def __bool__(self):
        return self.full


def build_hankel(w, L: int) -> np.ndarray:
    """Block-Hankel matrix of order ``L``.

    Args:
        w: sequence of ``T`` vectors of dimension ``q`` (``(T, q)`` array or a
            1-D scalar sequence).
        L: number of block rows.

    Returns:
        ``(q*L, T-L+1)`` array whose column ``j`` is ``col(w_j, ..., w_{j+L-1})``.

    Raises:
        LengthError: if ``T < L``.

    Example:
        >>> build_hankel([1, 2, 3, 4], 2)
        array([[1., 2., 3.],
               [2., 3., 4.]])
    """
    w = as_sequence(w)
    if L < 1:
        raise ParameterError("Hankel order L must be >= 1")
    T, q = w.shape
    if T < L:
        raise LengthError(f"sequence length {T} is shorter than Hankel order {L}")
    cols = T - L + 1
    # windows[j] is the (L, q) block w[j:j+L]; ravel row-major gives col(.)
    windows = np.lib.stride_tricks.sliding_window_view(w, (L, q))[:, 0]
    return np.ascontiguousarray(windows.reshape(cols, L * q).T)


def is_persistently_exciting(w, L: int, rank_tol: Optional[float] = None) -> RankReport:
    """Test whether ``w`` is persistently exciting of order ``L``."""
    H = build_hankel(w, L)
    rank, tol = numerical_rank(H, rank_tol)
    return RankReport(rank == H.shape[0], rank, H.shape[0], tol)


def is_collectively_pe(trajectory_inputs: Sequence, order: int,
                       rank_tol: Optional[float] = None) -> RankReport:
    """Collective persistent excitation of several input sequences.

    The per-sequence order-``order`` Hankel matrices are concatenated
    horizontally and tested for full row rank ``m * order``.
    """
    if len(trajectory_inputs) == 0:
        raise ParameterError("need at least one input sequence")
    blocks = [build_hankel(u, order) for u in trajectory_inputs]
    rows = {b.shape[0] for b in blocks}
    if len(rows) != 1:
        raise DimensionError("input sequences have different dimensions")
    H = np.hstack(blocks)
    rank, tol = numerical_rank(H, rank_tol)
    return RankReport(rank == H.shape[0], rank, H.shape[0], tol)


@dataclass(frozen=True)
class TrajectoryLibrary:
    """Columns of length-``L`` input/output trajectories, ``H_d = col(U_d, Y_d)``.

    ``sources`` records ``(trajectory index, window start)`` for every column so
    that columns can be replayed against the generating system.
    """

    U_d: np.ndarray
    Y_d: np.ndarray
    m: int
    p: int
    T_ini: int
    N: int
    sources: Tuple[Tuple[int, int], ...] = field(default=())
    single_hankel: bool = False

    def __post_init__(self):
        if self.T_ini < 0 or self.N < 0:
            raise ParameterError("T_ini and N must be non-negative")
        L = self.T_ini + self.N
        if self.U_d.shape[0] != self.m * L or self.Y_d.shape[0] != self.p * L:
            raise DimensionError("U_d/Y_d row counts do not match m*L and p*L")
        if self.U_d.shape[1] != self.Y_d.shape[1] or self.U_d.shape[1] < 1:
            raise DimensionError("U_d and Y_d need the same positive number of columns")

    @property
    def L(self) -> int:
        return self.T_ini + self.N

    @property
    def l(self) -> int:
        return self.U_d.shape[1]

    @property
    def H_d(self) -> np.ndarray:
        return np.vstack([self.U_d, self.Y_d])

    @property
    def U_P(self) -> np.ndarray:
        return self.U_d[: self.m * self.T_ini]

    @property
    def U_F(self) -> np.ndarray:
        return self.U_d[self.m * self.T_ini:]

    @property
    def Y_P(self) -> np.ndarray:
        return self.Y_d[: self.p * self.T_ini]

    @property
    def Y_F(self) -> np.ndarray:
        return self.Y_d[self.p * self.T_ini:]

    def repartition(self, T_ini: int, N: int) -> "TrajectoryLibrary":
        """Same columns, different past/future split (``T_ini + N == L``)."""
        if T_ini + N != self.L:
            raise ParameterError(f"T_ini + N = {T_ini + N} != L = {self.L}")
        return TrajectoryLibrary(self.U_d, self.Y_d, self.m, self.p, T_ini, N,
                                 self.sources, self.single_hankel)


def _check_split(L: int, T_ini: int, N: int) -> None:
    if L < 1:
        raise ParameterError("L must be >= 1")
    if T_ini < 0 or N < 0 or T_ini + N != L:
        raise ParameterError(f"need T_ini + N == L, got {T_ini} + {N} != {L}")


def library_from_single(traj: Trajectory, L: int, T_ini: int, N: int) -> TrajectoryLibrary:
    """Sliding-window library from one trajectory, ``l = T - L + 1`` columns."""
    _check_split(L, T_ini, N)
    U_d = build_hankel(traj.u, L)
    Y_d = build_hankel(traj.y, L)
    sources = tuple((0, j) for j in range(U_d.shape[1]))
    return TrajectoryLibrary(U_d, Y_d, traj.m, traj.p, T_ini, N, sources, single_hankel=True)


def library_from_multiple(trajs: Sequence[Trajectory], L: int, T_ini: int,
                          N: int) -> TrajectoryLibrary:
    """Union of the sliding windows of several trajectories.

    Windows never straddle two trajectories; ``l = sum_i (T_i - L + 1)``.
    """
    if len(trajs) == 0:
        raise ParameterError("need at least one trajectory")
    _check_split(L, T_ini, N)
    m, p = trajs[0].m, trajs[0].p
    U_blocks: List[np.ndarray] = []
    Y_blocks: List[np.ndarray] = []
    sources: List[Tuple[int, int]] = []
    for i, tr in enumerate(trajs):
        if tr.m != m or tr.p != p:
            raise DimensionError(f"trajectory {i} has dimensions (m={tr.m}, p={tr.p}), "
                                 f"expected (m={m}, p={p})")
        U_blocks.append(build_hankel(tr.u, L))
        Y_blocks.append(build_hankel(tr.y, L))
        sources.extend((i, j) for j in range(tr.T - L + 1))
    return TrajectoryLibrary(np.hstack(U_blocks), np.hstack(Y_blocks), m, p, T_ini, N,
                             tuple(sources), single_hankel=len(trajs) == 1)


def stack(seq) -> np.ndarray:
    """``(T, q)`` sequence to the stacked vector ``col(w_0, ..., w_{T-1})``."""
    return as_sequence(seq).reshape(-1)


def unstack(vec, q: int) -> np.ndarray:
    """Inverse of :func:`stack`."""
    vec = np.asarray(vec, dtype=float).reshape(-1)
    if vec.size % q:
        raise DimensionError(f"vector of length {vec.size} is not a multiple of {q}")
    return vec.reshape(-1, q)
