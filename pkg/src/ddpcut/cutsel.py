"""Cut pools and cut-selection strategies.

A pool approximates one cost-to-go function by the pointwise maximum of
its *selected* affine cuts ``C(x) = alpha + beta.x``.  Selection is driven
by the trial points at which cuts were generated:

* ``none``: every cut is selected.
* ``level1``: keep every cut that is highest at some trial point; all
  cuts stay in storage and may be selected again later.
* ``territory``: like ``level1`` but the comparison only involves the
  previously selected cuts plus the new one; the rest are deleted.
* ``limited_memory``: keep exactly one highest cut per trial point, the
  oldest one.
* ``level_h``: keep the ``H`` highest cuts at each trial point.

Any of these can be combined with a periodic usefulness test that drops
cuts which are nowhere strictly active over the state box.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .simplex import LpProblem, solve_lp, TOL_OPT

TIE_REL = 1e-12
TRIAL_MATCH = 1e-9

NONE = "none"
LEVEL1 = "level1"
TERRITORY = "territory"
LIMITED_MEMORY = "limited_memory"
LEVEL_H = "level_h"
KINDS = (NONE, LEVEL1, TERRITORY, LIMITED_MEMORY, LEVEL_H)


class EmptyPoolError(LookupError):
    """The pool has no selected cut, i.e. no lower model yet."""


@dataclass(frozen=True, eq=False)
class Cut:
    id: int
    x_ref: np.ndarray
    theta: float
    beta: np.ndarray
    alpha: float

    @classmethod
    def make(cls, id, x_ref, theta, beta) -> "Cut":
        x_ref = np.asarray(x_ref, dtype=float).ravel()
        beta = np.asarray(beta, dtype=float).ravel()
        if x_ref.size != beta.size:
            raise ValueError("x_ref and beta must have the same length")
        if not np.all(np.isfinite(beta)) or not np.isfinite(theta):
            raise ValueError(f"cut {id} has non-finite coefficients")
        return cls(int(id), x_ref, float(theta), beta, float(theta - beta @ x_ref))


def eval_cut(cut: Cut, x) -> float:
    x = np.asarray(x, dtype=float).ravel()
    if x.size != cut.beta.size:
        raise ValueError(f"point has length {x.size}, cut expects {cut.beta.size}")
    return float(cut.alpha + cut.beta @ x)


@dataclass(frozen=True)
class Strategy:
    kind: str = NONE
    H: int = 1
    usefulness_period: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}")
        if self.H < 1:
            raise ValueError("H must be >= 1")
        if self.usefulness_period is not None and self.usefulness_period < 1:
            raise ValueError("usefulness period must be >= 1")

    @property
    def label(self) -> str:
        s = self.kind if self.kind != LEVEL_H else f"level_h(H={self.H})"
        if self.usefulness_period:
            s += f"+usefulness({self.usefulness_period})"
        return s


def _ties(vals, top):
    return vals >= top - TIE_REL * (1.0 + abs(top))


class CutPool:
    """Cuts for one cost-to-go function plus selection bookkeeping.

    ``best_idx[i]`` and ``best_val[i]`` refer to trial slot ``i``; trial
    points closer than 1e-9 (max-norm) to an existing slot reuse it.
    """

    def __init__(self, t: int, dim: int, strategy: Strategy = Strategy()):
        self.t = t
        self.dim = dim
        self.strategy = strategy
        self.cuts: List[Cut] = []
        self._ids = np.empty(0, dtype=np.int64)
        self._alpha = np.empty(0)
        self._beta = np.empty((0, dim))
        self._active = np.empty(0, dtype=bool)
        self.trial_points = np.empty((0, dim))
        self.best_idx: List[List[int]] = []
        self.best_val = np.empty(0)
        self.selected: List[int] = []
        self.n_computed = 0
        self.n_pruned = 0
        self._sel_cache = None
        self._pos_cache: Optional[Dict[int, int]] = None

    # -- queries ------------------------------------------------------------

    @property
    def empty(self) -> bool:
        return not self.selected

    def _pos(self) -> Dict[int, int]:
        if self._pos_cache is None:
            self._pos_cache = {c.id: k for k, c in enumerate(self.cuts)}
        return self._pos_cache

    def cut_by_id(self, cid: int) -> Cut:
        return self.cuts[self._pos()[cid]]

    def selected_arrays(self):
        """``(alpha, beta)`` of the selected cuts, in id order."""
        if self._sel_cache is None:
            pos = self._pos()
            k = np.array([pos[i] for i in self.selected], dtype=np.int64)
            self._sel_cache = (self._alpha[k], self._beta[k])
        return self._sel_cache

    def value(self, x) -> float:
        """Height of the lower model at ``x``."""
        if self.empty:
            raise EmptyPoolError(f"pool for stage {self.t} has no cuts")
        a, B = self.selected_arrays()
        return float((a + B @ np.asarray(x, dtype=float).ravel()).max())

    def values(self, X) -> np.ndarray:
        """Lower-model heights at the rows of ``X``."""
        if self.empty:
            raise EmptyPoolError(f"pool for stage {self.t} has no cuts")
        a, B = self.selected_arrays()
        return (np.atleast_2d(X) @ B.T + a).max(axis=1)

    def values_at_trials(self) -> np.ndarray:
        if self.empty:
            return np.full(len(self.trial_points), -np.inf)
        return self.values(self.trial_points)

    # -- update -------------------------------------------------------------

    def _slot(self, x) -> int:
        if len(self.trial_points):
            dist = np.abs(self.trial_points - x).max(axis=1)
            i = int(np.argmin(dist))
            if dist[i] <= TRIAL_MATCH:
                return i
        self.trial_points = np.vstack([self.trial_points, x[None, :]])
        self.best_idx.append([])
        self.best_val = np.append(self.best_val, -np.inf)
        return len(self.trial_points) - 1

    def _store(self, cut: Cut):
        self.cuts.append(cut)
        if self._pos_cache is not None:
            self._pos_cache[cut.id] = len(self.cuts) - 1
        self._ids = np.append(self._ids, cut.id)
        self._alpha = np.append(self._alpha, cut.alpha)
        self._beta = np.vstack([self._beta, cut.beta[None, :]])
        self._active = np.append(self._active, True)
        self.n_computed += 1

    def _value_matrix(self):
        """Heights of every stored cut at every trial slot (inactive: -inf)."""
        V = self.trial_points @ self._beta.T + self._alpha
        V[:, ~self._active] = -np.inf
        return V

    def insert(self, cut: Cut, new_trial) -> int:
        """Store ``cut`` generated at ``new_trial`` and reselect; returns the slot."""
        x = np.asarray(new_trial, dtype=float).ravel()
        if x.size != self.dim or cut.beta.size != self.dim:
            raise ValueError(f"stage {self.t}: dimension mismatch (pool dim {self.dim})")
        n_old = len(self.trial_points)
        slot = self._slot(x)
        self._store(cut)
        kind = self.strategy.kind
        if kind == LIMITED_MEMORY:
            self._select_limited_memory(slot, slot >= n_old)
        elif kind == LEVEL_H:
            self._select_level_h()
        else:
            self._update_level1(slot, slot >= n_old)
        if kind == TERRITORY:
            self._discard_unselected()
        if kind == NONE:
            self.selected = [c.id for c, a in zip(self.cuts, self._active) if a]
        self._sel_cache = None
        return slot

    def _select_level1(self):
        V = self._value_matrix()
        ids = self._ids
        top = V.max(axis=1)
        self.best_val = top
        self.best_idx = [ids[_ties(V[i], top[i])].tolist() for i in range(len(V))]
        self._union()

    def _update_level1(self, slot: int, is_new: bool):
        """Incremental ``_select_level1`` after appending one cut.

        Only rows where the new cut reaches the tie band of the current top
        (and a new slot's row) can change; those are recomputed in full.
        """
        cut = self.cuts[-1]
        vals = self.trial_points @ cut.beta + cut.alpha
        top = self.best_val
        touched = vals >= top - TIE_REL * (1.0 + np.abs(top))
        if is_new:
            touched[slot] = True
        rows = np.flatnonzero(touched)
        if not rows.size:
            return
        ids = self._ids
        V = self.trial_points[rows] @ self._beta.T + self._alpha
        V[:, ~self._active] = -np.inf
        for i, row in zip(rows, V):
            m = row.max()
            self.best_val[i] = m
            self.best_idx[i] = ids[_ties(row, m)].tolist()
        self._union()

    def _select_level_h(self):
        V = self._value_matrix()
        ids = self._ids
        H = self.strategy.H
        self.best_val = V.max(axis=1)
        best = []
        for row in V:
            order = np.argsort(-row, kind="stable")
            order = [k for k in order[:H] if np.isfinite(row[k])]
            best.append(ids[order].tolist())
        self.best_idx = best
        self._union()

    def _select_limited_memory(self, slot: int, is_new: bool):
        cut = self.cuts[-1]
        # old slots: the new cut replaces the incumbent only if strictly higher
        vals = self.trial_points @ cut.beta + cut.alpha
        m = self.best_val
        with np.errstate(invalid="ignore"):
            better = vals > m + TIE_REL * (1.0 + np.abs(m))
        if is_new:
            better[slot] = False
        for i in np.flatnonzero(better):
            self.best_idx[i] = [cut.id]
        self.best_val[better] = vals[better]
        if is_new:
            # oldest highest cut at the new point: first strict improvement wins
            col = (self.trial_points[slot] @ self._beta.T + self._alpha).tolist()
            best_id, m = None, -np.inf
            for c, a, v in zip(self.cuts, self._active.tolist(), col):
                if not a:
                    continue
                if best_id is None or v > m + TIE_REL * (1.0 + abs(m)):
                    best_id, m = c.id, v
            self.best_idx[slot] = [best_id]
            self.best_val[slot] = m
        self._union()

    def _union(self):
        sel = set()
        for b in self.best_idx:
            sel.update(b)
        self.selected = sorted(sel)

    def _discard_unselected(self):
        keep = set(self.selected)
        mask = np.array([c.id in keep for c in self.cuts], dtype=bool)
        self.cuts = [c for c, k in zip(self.cuts, mask) if k]
        self._pos_cache = None
        self._ids = self._ids[mask]
        self._alpha = self._alpha[mask]
        self._beta = self._beta[mask]
        self._active = self._active[mask]

    def prune(self, ids) -> None:
        """Deselect cuts found redundant and repair the per-slot bookkeeping."""
        ids = set(ids)
        if not ids:
            return
        if self.strategy.kind == TERRITORY:
            self.selected = [i for i in self.selected if i not in ids]
            self.best_idx = [[i for i in b if i not in ids] for b in self.best_idx]
            self._discard_unselected()
        else:
            pos = self._pos()
            for i in ids:
                self._active[pos[i]] = False
        # slots that lost every incumbent get the best remaining cut
        V = None
        ids_arr = self._ids
        for s, b in enumerate(self.best_idx):
            b = [i for i in b if i not in ids]
            if not b:
                if V is None:
                    V = self._value_matrix()
                row = V[s]
                top = row.max()
                hits = np.flatnonzero(_ties(row, top))
                b = [int(ids_arr[hits[0]])] if self.strategy.kind in (LIMITED_MEMORY, LEVEL_H) \
                    else ids_arr[hits].tolist()
            self.best_idx[s] = b
        if self.strategy.kind == NONE:
            self.selected = [c.id for c, a in zip(self.cuts, self._active) if a]
        else:
            self._union()
        self.n_pruned += len(ids)
        self._sel_cache = None

    def dump(self) -> list:
        """JSON-ready list of stored cuts."""
        sel = set(self.selected)
        return [{"id": c.id, "x_ref": c.x_ref.tolist(), "theta": c.theta,
                 "beta": c.beta.tolist(), "selected": c.id in sel} for c in self.cuts]


def insert_and_select(pool: CutPool, cut: Cut, new_trial, strategy: Strategy = None) -> CutPool:
    if strategy is not None and strategy != pool.strategy:
        raise ValueError("strategy differs from the pool's strategy")
    pool.insert(cut, new_trial)
    return pool


def pool_value(pool: CutPool, x) -> float:
    return pool.value(x)


def redundancy_gap(alpha_j, beta_j, alphas, betas, box_lo, box_hi, name="usefulness") -> float:
    """``max_{x in box} C_j(x) - max_l C_l(x)`` via one LP over ``(x, s)``."""
    box_lo = np.asarray(box_lo, dtype=float)
    box_hi = np.asarray(box_hi, dtype=float)
    n = box_lo.size
    betas = np.atleast_2d(betas)
    c = np.concatenate([-np.asarray(beta_j, dtype=float), [1.0]])
    G = np.hstack([betas, -np.ones((betas.shape[0], 1))])
    lp = LpProblem(c, G=G, h=-np.asarray(alphas, dtype=float),
                   lo=np.append(box_lo, -np.inf), hi=np.append(box_hi, np.inf), name=name)
    sol = solve_lp(lp)
    if not sol.optimal:
        raise RuntimeError(f"{name}: redundancy LP is {sol.status}")
    return float(alpha_j - sol.obj)


def usefulness_test(pool: CutPool, box_lo, box_hi, tol: float = TOL_OPT) -> set:
    """Ids of selected cuts that can be dropped without changing the model.

    Cuts are examined in id order, each against the cuts still kept, so two
    identical cuts never eliminate each other.  A cut that is strictly on
    top at some trial point inside the box is useful without further
    work; only the others need the redundancy LP.
    """
    box_lo = np.asarray(box_lo, dtype=float)
    box_hi = np.asarray(box_hi, dtype=float)
    if not (np.all(np.isfinite(box_lo)) and np.all(np.isfinite(box_hi))):
        raise ValueError("usefulness test needs a finite state box")
    pos = pool._pos()
    sel = list(pool.selected)
    if len(sel) < 2:
        return set()
    rows = np.array([pos[i] for i in sel])
    P = np.clip(pool.trial_points, box_lo, box_hi) if len(pool.trial_points) else np.empty((0, box_lo.size))
    V = P @ pool._beta[rows].T + pool._alpha[rows]          # points x selected cuts
    kept = np.ones(len(sel), dtype=bool)
    redundant = set()
    for j, cid in enumerate(sel):
        others = kept.copy()
        others[j] = False
        if not others.any():
            break
        if P.shape[0]:
            lead = V[:, j] - V[:, others].max(axis=1)
            if lead.max() > tol:
                continue
        ko = rows[others]
        k = rows[j]
        gap = redundancy_gap(pool._alpha[k], pool._beta[k], pool._alpha[ko], pool._beta[ko],
                             box_lo, box_hi, name=f"usefulness-t{pool.t}-cut{cid}")
        if gap <= tol:
            redundant.add(cid)
            kept[j] = False
    return redundant
