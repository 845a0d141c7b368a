"""Dual dynamic programming with cut selection.

Each iteration is a single forward pass.  Stage ``t`` is solved at the
current trial state with the cost-to-go of stage ``t + 1`` replaced by
its cut model; the optimal value and the multipliers of that LP then give
a new cut for the cost-to-go of stage ``t``, generated at the incoming
trial state.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field, asdict, replace
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .cutsel import LEVEL_H, LIMITED_MEMORY, Cut, CutPool, Strategy, usefulness_test
from .model import MultistageProblem, StageLp, stage_cost, validate
from .simplex import TOL_FEAS, UNBOUNDED, LpProblem, LpSolution, solve_lp

CONVERGED = "Converged"
ITER_LIMIT = "IterLimit"
ERROR = "Error"

H2_TOL = 1e-9


class StageError(RuntimeError):
    def __init__(self, t: int, status: str, name: str = ""):
        super().__init__(f"{name}: stage {t} subproblem is {status}")
        self.t = t
        self.status = status


def build_stage_subproblem(stage: StageLp, x_prev, pool: Optional[CutPool], rows=None) -> LpProblem:
    """Stage LP at ``x_prev``; a free variable ``theta`` is appended when the pool has cuts.

    ``rows`` restricts the cut rows to those positions of the selected
    cuts (all of them by default).  The constant ``d.x_prev`` is not part
    of the LP objective.
    """
    x_prev = np.asarray(x_prev, dtype=float).ravel()
    if x_prev.size != stage.n_prev:
        raise ValueError(f"stage {stage.t}: x_prev has length {x_prev.size}, expected {stage.n_prev}")
    b = stage.b - stage.B @ x_prev
    h = stage.h - stage.H @ x_prev
    name = f"stage{stage.t}"
    if pool is None or pool.empty:
        return LpProblem(stage.c, stage.A, b, stage.G, h, stage.lo, stage.hi, name=name)
    alpha, beta = pool.selected_arrays()
    if rows is not None:
        alpha, beta = alpha[rows], beta[rows]
    nd, ns = stage.n_dec, stage.n_state
    K = alpha.size
    c = np.append(stage.c, 1.0)
    A = np.hstack([stage.A, np.zeros((stage.A.shape[0], 1))])
    G = np.zeros((stage.G.shape[0] + K, nd + 1))
    G[:stage.G.shape[0], :nd] = stage.G
    G[stage.G.shape[0]:, :ns] = beta
    G[stage.G.shape[0]:, nd] = -1.0
    h = np.concatenate([h, -alpha])
    lo = np.append(stage.lo, -np.inf)
    hi = np.append(stage.hi, np.inf)
    return LpProblem(c, A, b, G, h, lo, hi, name=name)


def solve_stage(stage: StageLp, x_prev, pool: Optional[CutPool], working=()):
    """Solve the stage LP, adding cut rows only as they are needed.

    Starts from the cuts in ``working`` (ids) and repeatedly adds the most
    violated selected cuts until the solution satisfies all of them.  The
    result is a vertex and optimal for the LP with every selected cut;
    omitted cuts get zero multipliers.  Returns the solution, with duals
    and basis indexed as in the full LP, and the ids of the binding cuts.
    """
    if pool is None or pool.empty:
        return solve_lp(build_stage_subproblem(stage, x_prev, pool)), ()
    alpha, beta = pool.selected_arrays()
    ids = np.asarray(pool.selected)
    K, nd, ns, p = alpha.size, stage.n_dec, stage.n_state, stage.G.shape[0]
    rows = np.flatnonzero(np.isin(ids, list(working)))
    if not rows.size:
        rows = np.array([K - 1])
    while True:
        sol = solve_lp(build_stage_subproblem(stage, x_prev, pool, rows))
        if sol.status == UNBOUNDED and rows.size < K:
            rows = np.arange(K)
            continue
        if not sol.optimal:
            return sol, ()
        theta = sol.x[nd]
        viol = alpha + beta @ sol.x[:ns] - theta
        viol[rows] = -np.inf
        bad = np.flatnonzero(viol > TOL_FEAS * (1.0 + abs(theta)))
        if not bad.size:
            break
        add = bad[np.argsort(-viol[bad], kind="stable")[:5]]
        rows = np.union1d(rows, add)
    mu = np.zeros(p + K)
    mu[:p] = sol.dual_ineq[:p]
    mu[p + rows] = sol.dual_ineq[p:]
    n = nd + 1
    basis = sol.basis.copy()
    cut_slack = (basis >= n + p) & (basis < n + p + rows.size)
    art = basis >= n + p + rows.size
    basis[cut_slack] = n + p + rows[basis[cut_slack] - n - p]
    basis[art] += K - rows.size
    slack = theta - (alpha[rows] + beta[rows] @ sol.x[:ns])
    binding = ids[rows[slack <= TOL_FEAS * (1.0 + abs(theta))]]
    full = replace(sol, dual_ineq=mu, basis=np.sort(basis))
    return full, tuple(binding.tolist())


def compute_cut(stage: StageLp, sol: LpSolution, x_prev, cut_id: int, floor: float = 0.0) -> Cut:
    """Cut for the stage cost-to-go at ``x_prev`` from an optimal stage solve.

    Height: LP value plus ``d.x_prev`` plus ``floor`` (the constant standing
    in for an empty cost-to-go model).  Slope: ``d + B^T lam + H^T mu``
    using the multipliers of the stage's own rows (cut rows do not involve
    ``x_prev``).
    """
    if not sol.optimal:
        raise StageError(stage.t, sol.status)
    x_prev = np.asarray(x_prev, dtype=float).ravel()
    q, p = stage.A.shape[0], stage.G.shape[0]
    beta = stage.d.copy()
    if q:
        beta += stage.B.T @ sol.dual_eq[:q]
    if p:
        beta += stage.H.T @ sol.dual_ineq[:p]
    theta = sol.obj + float(stage.d @ x_prev) + floor
    return Cut.make(cut_id, x_prev, theta, beta)


@dataclass
class IterationRecord:
    k: int
    trajectory: List[list]
    stage_values: List[float]
    lb: float
    running_lb: float
    ub: float
    ub_best: float
    selected_counts: List[int]
    time_s: float
    new_trial_points: int = 0
    selection_changed: bool = True
    model_changed: bool = True
    h2_violations: int = 0
    h2_worst: float = 0.0
    pruned: int = 0
    prune_max_change: float = 0.0
    cardinality_violations: int = 0

    @property
    def gap(self) -> float:
        return self.ub_best - self.running_lb

    @property
    def cuts_selected_total(self) -> int:
        return int(sum(self.selected_counts))


@dataclass
class RunReport:
    problem: str
    strategy: str
    epsilon: float
    status: str
    iterations: List[IterationRecord] = field(default_factory=list)
    value: float = float("nan")
    lower_bound: float = float("nan")
    upper_bound: float = float("nan")
    final_trajectory: List[list] = field(default_factory=list)
    totals: Dict[str, float] = field(default_factory=dict)
    message: str = ""

    @property
    def n_iter(self) -> int:
        return len(self.iterations)

    @property
    def gap(self) -> float:
        return self.iterations[-1].gap if self.iterations else float("inf")

    @property
    def h2_violations(self) -> int:
        return sum(r.h2_violations for r in self.iterations)

    @property
    def cardinality_violations(self) -> int:
        return sum(r.cardinality_violations for r in self.iterations)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_iter"] = self.n_iter
        return d

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), default=_json_default), encoding="utf-8")

    def write_bounds_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["iter", "lb", "running_lb", "ub", "ub_best", "time_s", "cuts_selected_total"])
            for r in self.iterations:
                w.writerow([r.k, repr(r.lb), repr(r.running_lb), repr(r.ub), repr(r.ub_best),
                            f"{r.time_s:.6f}", r.cuts_selected_total])


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _same_model(old, new, tol=1e-9) -> bool:
    """True iff two ``(ids, rows)`` selections describe the same set of distinct cuts.

    ``rows`` holds ``(alpha, beta)`` per id.  Cuts never change, so only
    the rows whose id is in one selection but not the other are matched
    against the other selection.
    """
    if old is None:
        return False
    (ia, a), (ib, b) = old, new
    if a.shape[0] == 0 or b.shape[0] == 0:
        return a.shape[0] == b.shape[0]
    only_a = a[~np.isin(ia, ib)]
    only_b = b[~np.isin(ib, ia)]
    scale = tol * (1.0 + np.maximum(np.abs(a).max(), np.abs(b).max()))

    def covered(X, Y):
        return all((np.abs(Y - x).max(axis=1) <= scale).any() for x in X)

    return covered(only_a, b) and covered(only_b, a)


def cost_to_go_floors(problem: MultistageProblem) -> np.ndarray:
    """Constant lower bounds ``L[t] <= Q_t(x)`` for x in stage t-1's state box.

    ``L[t] = sum_{s >= t} min f_s`` where each minimum is taken over the
    stage constraints with the incoming state relaxed to its box (``x0``
    for stage 1).  ``L[T+1] = 0``; an unbounded relaxation gives ``-inf``.
    """
    T = problem.T
    mins = np.zeros(T + 2)
    for t, st in enumerate(problem.stages, start=1):
        if t == 1:
            plo = phi = problem.x0
        else:
            plo, phi = problem.stages[t - 2].state_box()
        lp = LpProblem(
            np.concatenate([st.c, st.d]),
            np.hstack([st.A, st.B]), st.b, np.hstack([st.G, st.H]), st.h,
            np.concatenate([st.lo, plo]), np.concatenate([st.hi, phi]),
            name=f"floor{t}",
        )
        sol = solve_lp(lp)
        if sol.optimal:
            mins[t] = sol.obj
        elif sol.status == "unbounded":
            mins[t] = -np.inf
        else:
            raise StageError(t, sol.status, problem.name)
    floors = np.zeros(T + 2)
    for t in range(T, 0, -1):
        floors[t] = floors[t + 1] + mins[t]
    return floors


class DDPSolver:
    """Forward-pass DDP engine holding one cut pool per stage ``t = 2..T``.

    With ``check_invariants`` the (H2) relations are checked after every
    cut insertion and usefulness pruning is checked against a 1000-point
    sample of the state box; violations are counted in the records.

    While the pool of stage ``t + 1`` is empty, stage ``t`` is solved
    without a cost-to-go variable and ``floors[t + 1]`` (a constant lower
    bound on that cost-to-go) is added to its value.
    """

    def __init__(self, problem: MultistageProblem, strategy: Strategy = Strategy(),
                 check_invariants: bool = False, track_stability: bool = False,
                 prune_samples: int = 1000, seed: int = 0, floors=None):
        rep = validate(problem)
        if rep.errors:
            raise ValueError(f"invalid problem: {rep.errors[0].message}")
        self.problem = problem
        self.strategy = strategy
        self.check_invariants = check_invariants
        self.track_stability = track_stability
        self.prune_samples = prune_samples
        self._rng = np.random.default_rng(seed)
        self.pools: Dict[int, CutPool] = {
            t: CutPool(t, problem.stages[t - 2].n_state, strategy) for t in range(2, problem.T + 1)
        }
        self.k = 0
        self.records: List[IterationRecord] = []
        self.running_lb = -np.inf
        self.ub_best = np.inf
        self.best_decisions: List[np.ndarray] = []
        self._models = {}
        self._working: Dict[int, tuple] = {}
        self.floors = cost_to_go_floors(problem) if floors is None else np.asarray(floors, dtype=float)

    def step(self) -> IterationRecord:
        """One forward pass, generating and selecting one cut per stage t >= 2."""
        t0 = time.perf_counter()
        self.k += 1
        k = self.k
        prob = self.problem
        x_prev = prob.x0
        states, values, decisions = [], [], []
        ub = 0.0
        new_slots = 0
        sel_changed = False
        viol, worst = 0, 0.0
        for t, stage in enumerate(prob.stages, start=1):
            nxt = self.pools.get(t + 1)
            sol, self._working[t] = solve_stage(stage, x_prev, nxt, self._working.get(t, ()))
            if not sol.optimal:
                raise StageError(t, sol.status, prob.name)
            floor = self.floors[t + 1] if nxt is None or nxt.empty else 0.0
            theta = sol.obj + float(stage.d @ x_prev) + floor
            dec = sol.x[:stage.n_dec]
            ub += stage_cost(stage, dec, x_prev)
            if t >= 2 and np.isfinite(theta):
                pool = self.pools[t]
                cut = compute_cut(stage, sol, x_prev, k, floor)
                n_old = len(pool.trial_points)
                old_sel = list(pool.selected)
                before = pool.values_at_trials() if self.check_invariants else None
                slot = pool.insert(cut, x_prev)
                new_slots += len(pool.trial_points) - n_old
                sel_changed |= pool.selected != old_sel
                if self.check_invariants:
                    v, w = _check_h2(pool, before, slot, theta)
                    viol += v
                    worst = max(worst, w)
            values.append(theta)
            states.append(dec[:stage.n_state].tolist())
            decisions.append(dec.copy())
            x_prev = dec[:stage.n_state]

        pruned, prune_change = 0, 0.0
        period = self.strategy.usefulness_period
        if period and k % period == 0:
            pruned, prune_change = self._usefulness()
            sel_changed |= pruned > 0

        model_changed = True
        if self.track_stability:
            model_changed = False
            for t, pool in self.pools.items():
                a, B = pool.selected_arrays() if not pool.empty else (np.empty(0), np.empty((0, pool.dim)))
                rows = (np.asarray(pool.selected), np.hstack([a[:, None], B]))
                if not _same_model(self._models.get(t), rows):
                    model_changed = True
                self._models[t] = rows

        card = self._cardinality() if self.check_invariants else 0

        lb = values[0]
        self.running_lb = max(self.running_lb, lb)
        if ub < self.ub_best:
            self.ub_best = ub
            self.best_decisions = decisions
        rec = IterationRecord(
            k=k, trajectory=states, stage_values=values, lb=lb, running_lb=self.running_lb,
            ub=ub, ub_best=self.ub_best,
            selected_counts=[len(self.pools[t].selected) for t in sorted(self.pools)],
            time_s=time.perf_counter() - t0, new_trial_points=new_slots,
            selection_changed=sel_changed, model_changed=model_changed,
            h2_violations=viol, h2_worst=worst, pruned=pruned, prune_max_change=prune_change,
            cardinality_violations=card,
        )
        self.records.append(rec)
        return rec

    def _cardinality(self) -> int:
        """Selection-size bounds: one cut per trial point (limited memory), H (Level H)."""
        kind, bad = self.strategy.kind, 0
        for pool in self.pools.values():
            n_trial = len(pool.trial_points)
            if kind == LIMITED_MEMORY:
                bad += sum(len(b) != 1 for b in pool.best_idx)
                bad += len(pool.selected) > n_trial
            elif kind == LEVEL_H:
                bad += len(pool.selected) > self.strategy.H * n_trial
        return int(bad)

    def _usefulness(self):
        total, change = 0, 0.0
        for t, pool in self.pools.items():
            if len(pool.selected) < 2:
                continue
            lo, hi = self.problem.stages[t - 2].state_box()
            red = usefulness_test(pool, lo, hi)
            if not red:
                continue
            if self.check_invariants:
                X = lo + (hi - lo) * self._rng.random((self.prune_samples, lo.size))
                X = np.vstack([X, pool.trial_points])
                before = pool.values(X)
            pool.prune(red)
            total += len(red)
            if self.check_invariants:
                change = max(change, float(np.abs(pool.values(X) - before).max()))
        return total, change

    def run(self, eps: float, max_iter: int = 10_000) -> RunReport:
        if eps <= 0:
            raise ValueError("eps must be positive")
        if max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        status = ITER_LIMIT
        while self.k < max_iter:
            rec = self.step()
            if rec.gap <= eps:
                status = CONVERGED
                break
        return self.report(eps, status)

    def report(self, eps: float, status: str) -> RunReport:
        prob = self.problem
        pools = self.pools.values()
        totals = {
            "time_s": float(sum(r.time_s for r in self.records)),
            "cuts_computed": int(sum(p.n_computed for p in pools)),
            "cuts_stored": int(sum(len(p.cuts) for p in pools)),
            "cuts_selected": int(sum(len(p.selected) for p in pools)),
            "cuts_pruned": int(sum(p.n_pruned for p in pools)),
        }
        lb, ub = prob.to_user_value(self.running_lb), prob.to_user_value(self.ub_best)
        return RunReport(
            problem=prob.name, strategy=self.strategy.label, epsilon=eps, status=status,
            iterations=list(self.records), value=lb,
            lower_bound=min(lb, ub), upper_bound=max(lb, ub),
            final_trajectory=[d.tolist() for d in self.best_decisions], totals=totals,
        )


def _check_h2(pool: CutPool, before, slot: int, theta: float):
    after = pool.values_at_trials()
    viol, worst = 0, 0.0
    # new-cut relation at its own trial point
    d = theta - after[slot]
    if d > H2_TOL * (1.0 + abs(theta)):
        viol += 1
        worst = max(worst, d)
    # monotonicity at previously stored trial points
    if before is not None and before.size:
        prev = before
        fin = np.isfinite(prev)
        drop = prev[fin] - after[:prev.size][fin]
        bad = drop > H2_TOL * (1.0 + np.abs(prev[fin]))
        viol += int(bad.sum())
        if bad.any():
            worst = max(worst, float(drop.max()))
    return viol, worst


def run(problem: MultistageProblem, strategy: Strategy = Strategy(), eps: float = 1e-6,
        max_iter: int = 10_000, **kw) -> RunReport:
    """Iterate forward passes until ``ub_best - running_lb <= eps``."""
    return DDPSolver(problem, strategy, **kw).run(eps, max_iter)
