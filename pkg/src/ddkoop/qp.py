"""Convex QP with equalities and two-sided bounds on linear images.

    minimize    0.5 z'Pz + q'z + const
    subject to  A_eq z = b_eq,   lo <= G z <= hi

Equalities are eliminated with a null-space parametrization
``z = z_eq + N w``; the remaining bounds are handled by a primal active-set
method. ``P`` only needs to be positive semidefinite: flat directions of
the reduced Hessian are followed until a bound blocks them.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import linprog

from ._linalg import lstsq_min_norm, null_space

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITER = "max_iter"
UNBOUNDED = "unbounded"
INACCURATE = "inaccurate"

KKT_TOL = 1e-6


@dataclass
class QPResult:
    z: np.ndarray
    objective: float
    status: str
    kkt_residual: float
    nu: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mu_lower: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mu_upper: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0
    active: List[Tuple[int, int]] = field(default_factory=list)
    equality_residual: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


@dataclass(frozen=True)
class KKTResiduals:
    stationarity: float
    primal: float
    dual: float
    complementarity: float

    @property
    def max(self) -> float:
        return max(self.stationarity, self.primal, self.dual, self.complementarity)


def _prep(P, q, A_eq, b_eq, G, lo, hi):
    q = np.asarray(q, dtype=float).reshape(-1)
    n = q.size
    P = np.asarray(P, dtype=float).reshape(n, n)
    if A_eq is None or np.size(A_eq) == 0:
        A_eq, b_eq = np.zeros((0, n)), np.zeros(0)
    A_eq = np.asarray(A_eq, dtype=float).reshape(-1, n)
    b_eq = np.asarray(b_eq, dtype=float).reshape(-1)
    if G is None or np.size(G) == 0:
        G, lo, hi = np.zeros((0, n)), np.zeros(0), np.zeros(0)
    G = np.asarray(G, dtype=float).reshape(-1, n)
    nb = G.shape[0]
    lo = np.full(nb, -np.inf) if lo is None else np.broadcast_to(np.asarray(lo, float), (nb,)).copy()
    hi = np.full(nb, np.inf) if hi is None else np.broadcast_to(np.asarray(hi, float), (nb,)).copy()
    return P, q, A_eq, b_eq, G, lo, hi


def kkt_residuals(P, q, A_eq, b_eq, G, lo, hi, z, nu, mu_lower, mu_upper) -> KKTResiduals:
    """Scaled KKT residuals of a candidate primal-dual point.

    Independent of the solver: it only evaluates the optimality conditions
    ``P z + q + A_eq' nu + G' (mu_upper - mu_lower) = 0``, feasibility,
    ``mu >= 0`` and complementary slackness.
    """
    P, q, A_eq, b_eq, G, lo, hi = _prep(P, q, A_eq, b_eq, G, lo, hi)
    z = np.asarray(z, dtype=float)
    nu = np.zeros(A_eq.shape[0]) if nu is None else np.asarray(nu, float)
    ml = np.zeros(G.shape[0]) if mu_lower is None else np.asarray(mu_lower, float)
    mu = np.zeros(G.shape[0]) if mu_upper is None else np.asarray(mu_upper, float)
    Pz = P @ z
    s_scale = 1.0 + max(np.max(np.abs(Pz), initial=0.0), np.max(np.abs(q), initial=0.0))
    grad_L = Pz + q + A_eq.T @ nu + G.T @ (mu - ml)
    stat = np.max(np.abs(grad_L), initial=0.0) / s_scale

    eq = np.max(np.abs(A_eq @ z - b_eq), initial=0.0) / (1.0 + np.max(np.abs(b_eq), initial=0.0))
    Gz = G @ z
    finite = np.concatenate([lo[np.isfinite(lo)], hi[np.isfinite(hi)]])
    b_scale = 1.0 + np.max(np.abs(finite), initial=0.0)
    with np.errstate(invalid="ignore"):
        viol = np.concatenate([lo - Gz, Gz - hi])
    box = max(0.0, np.max(np.nan_to_num(viol, nan=0.0, neginf=0.0), initial=0.0)) / b_scale

    dual = max(0.0, -min(np.min(ml, initial=0.0), np.min(mu, initial=0.0))) / s_scale
    slack_lo = np.where(np.isfinite(lo), Gz - lo, 0.0)
    slack_hi = np.where(np.isfinite(hi), hi - Gz, 0.0)
    comp = np.max(np.abs(np.concatenate([ml * slack_lo, mu * slack_hi])), initial=0.0)
    comp /= s_scale * b_scale
    # multipliers on infinite bounds must vanish
    comp = max(comp, np.max(np.abs(ml[~np.isfinite(lo)]), initial=0.0) / s_scale,
               np.max(np.abs(mu[~np.isfinite(hi)]), initial=0.0) / s_scale)
    return KKTResiduals(float(stat), float(max(eq, box)), float(dual), float(comp))


def _feasible_start(Gr, lo_r, hi_r, tol):
    """A point with ``lo_r <= Gr w <= hi_r``, or ``None``."""
    d = Gr.shape[1]
    w = np.zeros(d)
    if Gr.shape[0] == 0 or (np.all(lo_r <= tol) and np.all(hi_r >= -tol)):
        return w
    rows, rhs = [], []
    fin_hi, fin_lo = np.isfinite(hi_r), np.isfinite(lo_r)
    if fin_hi.any():
        rows.append(Gr[fin_hi])
        rhs.append(hi_r[fin_hi])
    if fin_lo.any():
        rows.append(-Gr[fin_lo])
        rhs.append(-lo_r[fin_lo])
    res = linprog(np.zeros(d), A_ub=np.vstack(rows), b_ub=np.concatenate(rhs),
                  bounds=[(None, None)] * d, method="highs")
    if res.status != 0:
        return None
    return np.asarray(res.x, dtype=float)


def _unit_index(row):
    # index j if row == +-e_j exactly, else None
    nz = np.flatnonzero(row)
    if nz.size == 1 and abs(row[nz[0]]) == 1.0:
        return int(nz[0])
    return None


def solve_eq_box_qp(P, q, A_eq=None, b_eq=None, G=None, lo=None, hi=None, *,
                    const: float = 0.0, feas_tol: float = 1e-6,
                    max_iter: Optional[int] = None) -> QPResult:
    """Solve the equality- and bound-constrained convex QP.

    Args:
        P: ``(n, n)`` symmetric positive semidefinite matrix.
        q: linear term.
        A_eq, b_eq: equality constraints (may be rank deficient but must be
            consistent to ``feas_tol`` in scaled residual).
        G, lo, hi: bounds ``lo <= G z <= hi``; infinite entries are ignored.
        const: constant added to the reported objective.
        feas_tol: scaled infeasibility threshold for the equality system.
        max_iter: active-set iteration cap, default ``50 * n``.

    Returns:
        :class:`QPResult`; ``status`` is ``"optimal"`` only when the
        independent KKT check passes at ``1e-6``.
    """
    P, q, A_eq, b_eq, G, lo, hi = _prep(P, q, A_eq, b_eq, G, lo, hi)
    P = 0.5 * (P + P.T)
    n = q.size
    if max_iter is None:
        max_iter = 50 * max(n, 1)

    def result(z, status, it=0, nu=None, ml=None, mu=None, active=(), eq_res=0.0):
        nb = G.shape[0]
        ml = np.zeros(nb) if ml is None else ml
        mu = np.zeros(nb) if mu is None else mu
        nu = np.zeros(A_eq.shape[0]) if nu is None else nu
        obj = float(0.5 * z @ P @ z + q @ z + const)
        kkt = kkt_residuals(P, q, A_eq, b_eq, G, lo, hi, z, nu, ml, mu).max
        if status == OPTIMAL and kkt > KKT_TOL:
            status = INACCURATE
        return QPResult(z, obj, status, kkt, nu, ml, mu, it, list(active), eq_res)

    # equality elimination
    if A_eq.shape[0]:
        z_eq, res, _ = lstsq_min_norm(A_eq, b_eq)
        eq_res = res / (1.0 + np.linalg.norm(b_eq))
        if eq_res > feas_tol:
            return result(z_eq, INFEASIBLE, eq_res=eq_res)
        N = null_space(A_eq)
    else:
        z_eq, eq_res, N = np.zeros(n), 0.0, np.eye(n)
    d = N.shape[1]

    H = N.T @ P @ N
    H = 0.5 * (H + H.T)
    c = N.T @ (P @ z_eq + q)
    Gr = G @ N
    base = G @ z_eq
    lo_r, hi_r = lo - base, hi - base

    # bounds that do not depend on w are either satisfied or fatal
    row_norm = np.linalg.norm(Gr, axis=1) if Gr.size else np.zeros(G.shape[0])
    g_scale = max(1.0, np.max(np.linalg.norm(G, axis=1), initial=0.0))
    const_rows = row_norm <= 1e-12 * g_scale
    b_scale = 1.0 + np.max(np.abs(np.concatenate([lo[np.isfinite(lo)], hi[np.isfinite(hi)]])),
                           initial=0.0)
    if np.any(const_rows & ((lo_r > feas_tol * b_scale) | (hi_r < -feas_tol * b_scale))):
        return result(z_eq, INFEASIBLE, eq_res=eq_res)
    live = np.flatnonzero(~const_rows & (np.isfinite(lo_r) | np.isfinite(hi_r)))

    w = _feasible_start(Gr[live], lo_r[live], hi_r[live], 1e-12 * b_scale)
    if w is None:
        return result(z_eq, INFEASIBLE, eq_res=eq_res)

    working: List[Tuple[int, int]] = []  # (constraint index, -1 lower / +1 upper)
    h_scale = 1.0 + np.max(np.abs(H), initial=0.0)
    status = MAX_ITER
    lam_signed = np.zeros(0)
    it = 0
    for it in range(1, max_iter + 1):
        grad = H @ w + c
        g_norm = 1.0 + np.max(np.abs(c), initial=0.0) + h_scale * np.max(np.abs(w), initial=0.0)
        if working:
            AW = Gr[[i for i, _ in working]]
            Nw = null_space(AW)
        else:
            AW = np.zeros((0, d))
            Nw = np.eye(d)
        gr = Nw.T @ grad
        newton = True
        if Nw.shape[1] == 0 or np.max(np.abs(gr), initial=0.0) <= 1e-13 * g_norm:
            p = np.zeros(d)
        else:
            Hr = Nw.T @ H @ Nw
            pz, res, _ = lstsq_min_norm(Hr, -gr)
            if res > 1e-10 * (1.0 + np.linalg.norm(gr)):
                # inconsistent: descend along a zero-curvature direction
                nH = null_space(Hr, tol=1e-12 * h_scale * max(Hr.shape))
                pz = -nH @ (nH.T @ gr)
                newton = False
            p = Nw @ pz

        if np.max(np.abs(p), initial=0.0) <= 1e-14 * (1.0 + np.max(np.abs(w), initial=0.0)):
            # stationary on the working face: inspect multipliers
            if working:
                lam, _, _ = lstsq_min_norm(AW.T, -grad)
                sides = np.array([s for _, s in working], dtype=float)
                lam_signed = lam * sides  # >= 0 at a KKT point
                j = int(np.argmin(lam_signed))
                if lam_signed[j] < -1e-10 * g_norm:
                    working.pop(j)
                    continue
            else:
                lam_signed = np.zeros(0)
            status = OPTIMAL
            break

        # ratio test
        alpha = 1.0 if newton else np.inf
        block = None
        in_w = {i for i, _ in working}
        Gp = Gr @ p
        Gw = Gr @ w
        p_norm = np.linalg.norm(p)
        for i in live:
            if i in in_w:
                continue
            a = Gp[i]
            if abs(a) <= 1e-12 * row_norm[i] * p_norm:
                continue
            if a > 0 and np.isfinite(hi_r[i]):
                step, side = (hi_r[i] - Gw[i]) / a, 1
            elif a < 0 and np.isfinite(lo_r[i]):
                step, side = (lo_r[i] - Gw[i]) / a, -1
            else:
                continue
            step = max(step, 0.0)
            if step < alpha:
                alpha, block = step, (int(i), side)
        if not np.isfinite(alpha):
            status = UNBOUNDED
            break
        w = w + alpha * p
        if block is not None:
            i, side = block
            working.append(block)
            j = _unit_index(Gr[i])
            if j is not None:
                # land exactly on simple bounds
                w[j] = (hi_r[i] if side > 0 else lo_r[i]) * Gr[i, j]

    z = z_eq + N @ w
    for i, side in working:
        # simple bounds on a variable are met exactly, not up to round-off
        j = _unit_index(G[i])
        if j is not None:
            target = (hi[i] if side > 0 else lo[i]) * G[i, j]
            if abs(z[j] - target) <= 1e-9 * (1.0 + abs(target)):
                z[j] = target
    nb = G.shape[0]
    ml, mu = np.zeros(nb), np.zeros(nb)
    for (i, side), lam in zip(working, lam_signed if status == OPTIMAL else []):
        if side > 0:
            mu[i] = max(lam, 0.0)
        else:
            ml[i] = max(lam, 0.0)
    nu = None
    if A_eq.shape[0]:
        r = P @ z + q + G.T @ (mu - ml)
        nu, _, _ = lstsq_min_norm(A_eq.T, -r)
    return result(z, status, it, nu, ml, mu, working, eq_res)
