"""Dense bounded-variable primal simplex.

Solves::

    min  c.x
    s.t. A_eq x  = b_eq
         G x    <= h
         lo <= x <= hi

and returns a basic (vertex) optimal solution together with Lagrange
multipliers.  Sign convention for the multipliers: the Lagrangian is

    L(x, lam, mu) = c.x + lam.(A_eq x - b_eq) + mu.(G x - h),   mu >= 0

so ``c + A_eq^T lam + G^T mu = r`` where ``r`` (``dual_bounds``) is the
reduced-cost vector: ``r_j >= 0`` at a lower bound, ``r_j <= 0`` at an
upper bound, ``0`` for basic variables.  With this convention the
derivative of the optimal value with respect to ``b_eq`` is ``-lam`` and
with respect to ``h`` is ``-mu``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg.blas import dger

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

TOL_FEAS = 1e-9
TOL_OPT = 1e-8
PIVOT_TOL = 1e-10
TIE_TOL = 1e-12


def _rank1_update(T, col, row):
    """In-place ``T -= outer(col, row)`` for a C-contiguous ``T``."""
    if T.size:
        out = dger(-1.0, row, col, a=T.T, overwrite_a=1)
        if not np.shares_memory(out, T):
            T[...] = out.T


class CyclingError(RuntimeError):
    """Raised when the pivot budget is exhausted."""


@dataclass
class LpProblem:
    c: np.ndarray
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    G: Optional[np.ndarray] = None
    h: Optional[np.ndarray] = None
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    name: str = "lp"

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A_eq = _as_matrix(self.A_eq, n)
        self.G = _as_matrix(self.G, n)
        self.b_eq = _as_vector(self.b_eq, self.A_eq.shape[0])
        self.h = _as_vector(self.h, self.G.shape[0])
        self.lo = np.full(n, -np.inf) if self.lo is None else np.asarray(self.lo, dtype=float).ravel().copy()
        self.hi = np.full(n, np.inf) if self.hi is None else np.asarray(self.hi, dtype=float).ravel().copy()
        if self.b_eq.size != self.A_eq.shape[0]:
            raise ValueError(f"{self.name}: b_eq has length {self.b_eq.size}, expected {self.A_eq.shape[0]}")
        if self.h.size != self.G.shape[0]:
            raise ValueError(f"{self.name}: h has length {self.h.size}, expected {self.G.shape[0]}")
        if self.lo.size != n or self.hi.size != n:
            raise ValueError(f"{self.name}: bounds must have length {n}")
        if np.any(self.lo > self.hi):
            raise ValueError(f"{self.name}: lo > hi for some variable")

    @property
    def n(self) -> int:
        return self.c.size


def _as_matrix(M, n):
    if M is None:
        return np.zeros((0, n))
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return np.zeros((0, n))
    if M.ndim == 1:
        M = M.reshape(1, -1)
    if M.shape[1] != n:
        raise ValueError(f"matrix has {M.shape[1]} columns, expected {n}")
    return M


def _as_vector(v, m):
    if v is None:
        return np.zeros(m)
    return np.asarray(v, dtype=float).ravel()


@dataclass
class LpSolution:
    status: str
    x: Optional[np.ndarray] = None
    obj: float = np.nan
    dual_eq: Optional[np.ndarray] = None
    dual_ineq: Optional[np.ndarray] = None
    dual_bounds: Optional[np.ndarray] = None
    basis: Optional[np.ndarray] = None
    ray: Optional[np.ndarray] = None
    pivots: int = 0
    bland: bool = field(default=False, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _crash(lp: LpProblem) -> np.ndarray:
    """Starting point: bounded variables at a bound, free variables moved to cut down violations.

    A free variable outside the equality rows whose inequality column has a
    single sign is shifted just far enough to satisfy every row it can
    help; no row gets worse, so phase 1 starts with fewer artificials.
    """
    x0 = np.where(np.isfinite(lp.lo), lp.lo, np.where(np.isfinite(lp.hi), lp.hi, 0.0))
    free = np.flatnonzero(~np.isfinite(lp.lo) & ~np.isfinite(lp.hi))
    if not free.size or not lp.G.shape[0]:
        return x0
    res = lp.h - lp.G @ x0
    for j in free:
        if lp.A_eq.shape[0] and np.any(lp.A_eq[:, j] != 0):
            continue
        g = lp.G[:, j]
        if np.all(g <= 0):
            need = np.max(np.where((g < 0) & (res < 0), res / np.where(g < 0, g, 1.0), 0.0))
        elif np.all(g >= 0):
            need = np.min(np.where((g > 0) & (res < 0), res / np.where(g > 0, g, 1.0), 0.0))
        else:
            continue
        if need != 0.0:
            x0[j] += need
            res -= g * need
    return x0


class _Tableau:
    """Working state of one solve.  Columns: structurals, slacks, artificials."""

    def __init__(self, lp: LpProblem, tol_feas: float, tol_opt: float, max_pivots: Optional[int]):
        self.lp = lp
        self.tol_feas = tol_feas
        self.tol_opt = tol_opt
        n = lp.n
        me, mi = lp.A_eq.shape[0], lp.G.shape[0]
        m = me + mi
        self.n, self.me, self.mi, self.m = n, me, mi, m

        x0 = _crash(lp)
        rhs = np.concatenate([lp.b_eq, lp.h])
        res = rhs.copy()
        if me:
            res[:me] -= lp.A_eq @ x0
        if mi:
            res[me:] -= lp.G @ x0

        art_rows = list(range(me)) + [me + i for i in range(mi) if res[me + i] < -tol_feas]
        na = len(art_rows)
        ncol = n + mi + na
        self.ncol = ncol
        self.n_art = na
        self.art_start = n + mi

        M = np.zeros((m, ncol))
        if me:
            M[:me, :n] = lp.A_eq
        if mi:
            M[me:, :n] = lp.G
            M[me:, n:n + mi] = np.eye(mi)
        sign = np.ones(m)
        for k, r in enumerate(art_rows):
            sign[r] = 1.0 if res[r] >= 0 else -1.0
            M[r, self.art_start + k] = sign[r]
        self.M = M
        self.rhs = rhs

        self.lo = np.concatenate([lp.lo, np.zeros(mi), np.zeros(na)])
        self.hi = np.concatenate([lp.hi, np.full(mi, np.inf), np.full(na, np.inf)])
        self.x = np.concatenate([x0, np.zeros(mi), np.zeros(na)])

        basis = np.empty(m, dtype=np.int64)
        for i in range(mi):
            basis[me + i] = n + i
        for k, r in enumerate(art_rows):
            basis[r] = self.art_start + k
        self.basis = basis
        self.is_basic = np.zeros(ncol, dtype=bool)
        self.is_basic[basis] = True
        # B0^{-1} = diag(sign) since each basic column is sign_i * e_i
        self.T = sign[:, None] * M
        self.x[basis] = sign * res
        self.pivots = 0
        self.max_pivots = max_pivots if max_pivots is not None else 50 * (m + ncol) + 10_000
        self.stall_limit = max(50, 3 * ncol)
        self.bland = False
        self.ray = None

    def _entering(self, d):
        tol = self.tol_opt
        x, lo, hi = self.x, self.lo, self.hi
        up = (d < -tol) & (x < hi)
        down = (d > tol) & (x > lo)
        elig = (up | down) & ~self.is_basic
        idx = np.flatnonzero(elig)
        if idx.size == 0:
            return -1
        if self.bland:
            return int(idx[0])
        return int(idx[np.argmax(np.abs(d[idx]))])

    def _ratio(self, q, dirn):
        """Return (step, row) with row = -1 for a bound flip and -2 for unbounded."""
        alpha = dirn * self.T[:, q]
        basis = self.basis
        xb = self.x[basis]
        lob = self.lo[basis]
        hib = self.hi[basis]
        step = np.full(self.m, np.inf)
        pos = alpha > PIVOT_TOL
        neg = alpha < -PIVOT_TOL
        with np.errstate(invalid="ignore"):
            fin = pos & np.isfinite(lob)
            step[fin] = (xb[fin] - lob[fin]) / alpha[fin]
            fin = neg & np.isfinite(hib)
            step[fin] = (hib[fin] - xb[fin]) / (-alpha[fin])
        np.maximum(step, 0.0, out=step)
        flip = self.hi[q] - self.lo[q]
        if self.m:
            tmin = step.min()
        else:
            tmin = np.inf
        if flip <= tmin:
            if np.isinf(flip):
                return np.inf, -2
            return flip, -1
        ties = np.flatnonzero(step <= tmin + TIE_TOL * (1.0 + tmin))
        # lowest basic variable index among ties
        row = int(ties[np.argmin(basis[ties])])
        return step[row], row

    def iterate(self, cost):
        T = self.T
        d = cost - cost[self.basis] @ T
        obj = float(cost @ self.x)
        stall = 0
        while True:
            q = self._entering(d)
            if q < 0:
                return True
            dirn = 1.0 if d[q] < 0 else -1.0
            t, r = self._ratio(q, dirn)
            if r == -2:
                ray = np.zeros(self.ncol)
                ray[q] = dirn
                ray[self.basis] = -dirn * T[:, q]
                self.ray = ray
                return False
            self.pivots += 1
            if self.pivots > self.max_pivots:
                raise CyclingError(f"pivot limit {self.max_pivots} exceeded on '{self.lp.name}'")
            col = T[:, q].copy()
            if t > 0:
                self.x[self.basis] -= (t * dirn) * col
                self.x[q] += t * dirn
            if r == -1:
                # bound flip, basis unchanged
                self.x[q] = self.hi[q] if dirn > 0 else self.lo[q]
            else:
                leave = self.basis[r]
                self.x[leave] = self.lo[leave] if dirn * col[r] > 0 else self.hi[leave]
                piv = col[r]
                T[r, :] /= piv
                col[r] = 0.0
                _rank1_update(T, col, T[r, :])
                d -= d[q] * T[r, :]
                d[q] = 0.0
                self.is_basic[leave] = False
                self.is_basic[q] = True
                self.basis[r] = q
            new_obj = float(cost @ self.x)
            if new_obj < obj - 1e-12 * (1.0 + abs(obj)):
                stall = 0
            else:
                stall += 1
                if stall > self.stall_limit:
                    self.bland = True
            obj = new_obj

    def basic_free_push(self, cost):
        """Pivot nonbasic free variables into the basis (zero-cost moves)."""
        T = self.T
        for q in range(self.n):
            if self.is_basic[q] or np.isfinite(self.lo[q]) or np.isfinite(self.hi[q]):
                continue
            t, r = self._ratio(q, 1.0)
            if r < 0:
                t, r = self._ratio(q, -1.0)
                dirn = -1.0
            else:
                dirn = 1.0
            if r < 0:
                continue
            col = T[:, q].copy()
            self.x[self.basis] -= (t * dirn) * col
            self.x[q] += t * dirn
            leave = self.basis[r]
            self.x[leave] = self.lo[leave] if dirn * col[r] > 0 else self.hi[leave]
            T[r, :] /= col[r]
            col[r] = 0.0
            _rank1_update(T, col, T[r, :])
            self.is_basic[leave] = False
            self.is_basic[q] = True
            self.basis[r] = q
            self.pivots += 1

    def refine(self, cost):
        """Recompute basic values and duals from the original columns.

        Rows whose own slack is basic drop out: their dual is zero and
        their slack follows by substitution, so only the square block of
        the remaining rows and basic columns is factorised.
        """
        lo_s, hi_s = self.n, self.n + self.mi
        slack_basic = (self.basis >= lo_s) & (self.basis < hi_s)
        rows_s = self.basis[slack_basic] - lo_s + self.me
        tight = np.ones(self.m, dtype=bool)
        tight[rows_s] = False
        cols_p = self.basis[~slack_basic]
        nb = ~self.is_basic
        r = self.rhs - self.M[:, nb] @ self.x[nb]
        y = np.zeros(self.m)
        try:
            Bp = self.M[np.ix_(tight, cols_p)]
            xp = np.linalg.solve(Bp, r[tight]) if cols_p.size else np.zeros(0)
            y[tight] = np.linalg.solve(Bp.T, cost[cols_p]) if cols_p.size else 0.0
        except np.linalg.LinAlgError:
            # singular basis should not happen; fall back to tableau quantities
            return cost[self.basis] @ self._binv()
        self.x[cols_p] = xp
        self.x[self.basis[slack_basic]] = r[rows_s] - self.M[np.ix_(rows_s, cols_p)] @ xp
        return y

    def _binv(self):
        # columns of B^{-1}: slack columns for inequality rows, artificial columns
        # for the rest (their original column is sign * e_i)
        binv = np.zeros((self.m, self.m))
        for i in range(self.mi):
            binv[:, self.me + i] = self.T[:, self.n + i]
        for k in range(self.n_art):
            col = self.art_start + k
            r = int(np.flatnonzero(self.M[:, col])[0])
            binv[:, r] = self.T[:, col] * self.M[r, col]
        return binv


def solve_lp(lp: LpProblem, tol_feas: float = TOL_FEAS, tol_opt: float = TOL_OPT,
             max_pivots: Optional[int] = None) -> LpSolution:
    """Solve ``lp`` with a two-phase bounded-variable primal simplex.

    Dantzig pricing is used until the objective stalls for
    ``max(50, 3 * ncols)`` pivots, after which Bland's rule takes over.
    Ratio-test ties go to the lowest variable index, so the result is a
    deterministic function of the input.
    """
    tab = _Tableau(lp, tol_feas, tol_opt, max_pivots)
    n = lp.n

    if tab.n_art:
        cost1 = np.zeros(tab.ncol)
        cost1[tab.art_start:] = 1.0
        tab.iterate(cost1)
        infeas = float(tab.x[tab.art_start:].sum())
        scale = max(1.0, float(np.abs(tab.rhs).max(initial=0.0)))
        if infeas > tol_feas * scale:
            y = tab.refine(cost1)
            return LpSolution(INFEASIBLE, ray=y, pivots=tab.pivots, bland=tab.bland)
        # artificials are pinned at zero from now on
        tab.lo[tab.art_start:] = 0.0
        tab.hi[tab.art_start:] = 0.0
        tab.x[tab.art_start:] = np.where(tab.is_basic[tab.art_start:], tab.x[tab.art_start:], 0.0)
        tab.bland = False

    cost = np.zeros(tab.ncol)
    cost[:n] = lp.c
    if not tab.iterate(cost):
        return LpSolution(UNBOUNDED, ray=tab.ray[:n], pivots=tab.pivots, bland=tab.bland)
    tab.basic_free_push(cost)
    y = tab.refine(cost)

    x = tab.x[:n].copy()
    me = tab.me
    lam = -y[:me]
    mu = -y[me:]
    red = lp.c.copy()
    if me:
        red += lp.A_eq.T @ lam
    if tab.mi:
        red += lp.G.T @ mu
    red[tab.is_basic[:n]] = 0.0
    return LpSolution(
        OPTIMAL,
        x=x,
        obj=float(lp.c @ x),
        dual_eq=lam,
        dual_ineq=mu,
        dual_bounds=red,
        basis=np.sort(tab.basis.copy()),
        pivots=tab.pivots,
        bland=tab.bland,
    )


def dual_objective(lp: LpProblem, sol: LpSolution) -> float:
    """Dual objective value of the multipliers in ``sol``."""
    r = sol.dual_bounds
    bound = np.where(r > 0, lp.lo, np.where(r < 0, lp.hi, 0.0))
    terms = np.where(r != 0, r * bound, 0.0)
    return float(-lp.b_eq @ sol.dual_eq - lp.h @ sol.dual_ineq + terms.sum())


def is_vertex(lp: LpProblem, x, tol: float = 1e-7) -> bool:
    """True iff the constraints active at ``x`` have full column rank."""
    x = np.asarray(x, dtype=float)
    n = lp.n
    scale = 1.0 + np.abs(x).max(initial=0.0)
    if lp.A_eq.shape[0] and np.abs(lp.A_eq @ x - lp.b_eq).max() > tol * scale:
        raise ValueError("x violates an equality constraint")
    slack = lp.h - lp.G @ x if lp.G.shape[0] else np.zeros(0)
    if slack.size and slack.min() < -tol * scale:
        raise ValueError("x violates an inequality constraint")
    if np.any(x < lp.lo - tol * scale) or np.any(x > lp.hi + tol * scale):
        raise ValueError("x violates a bound")
    rows = [lp.A_eq]
    if slack.size:
        rows.append(lp.G[np.abs(slack) <= tol * scale])
    at_bound = (np.abs(x - lp.lo) <= tol * scale) | (np.abs(x - lp.hi) <= tol * scale)
    rows.append(np.eye(n)[at_bound])
    active = np.vstack(rows)
    if active.shape[0] < n:
        return False
    return int(np.linalg.matrix_rank(active)) == n
