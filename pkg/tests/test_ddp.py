import csv
import json

import numpy as np
import pytest

from ddpcut.cutsel import (LEVEL1, LEVEL_H, LIMITED_MEMORY, NONE, TERRITORY, Cut, CutPool,
                           Strategy, eval_cut)
from ddpcut.ddp import (CONVERGED, ITER_LIMIT, DDPSolver, StageError, build_stage_subproblem,
                        compute_cut, cost_to_go_floors, run)
from ddpcut.instances import InventoryParams, gen_inventory, gen_portfolio
from ddpcut.model import MultistageProblem, StageLp, trajectory_cost
from ddpcut.oracle import grid_dp, interp, refinement_tolerance
from ddpcut.simplex import solve_lp
from conftest import ef_value, tail_value

ALL = [Strategy(NONE), Strategy(LEVEL1), Strategy(TERRITORY), Strategy(LIMITED_MEMORY),
       Strategy(LEVEL_H, H=2)]


# -- stage subproblem -----------------------------------------------------------

def test_last_stage_has_no_theta():
    prob = gen_inventory(3)
    lp = build_stage_subproblem(prob.stages[-1], [4.0], None)
    assert lp.n == prob.stages[-1].n_dec


def test_one_cut_one_epigraph_row():
    prob = gen_inventory(3)
    st = prob.stages[0]
    pool = CutPool(2, 1)
    pool.insert(Cut.make(1, [0.0], 2.0, [-1.0]), [0.0])
    lp = build_stage_subproblem(st, [10.0], pool)
    assert lp.n == st.n_dec + 1
    assert lp.G.shape[0] == st.G.shape[0] + 1
    assert np.array_equal(lp.G[-1], [-1.0, 0, 0, 0, -1.0]) and lp.h[-1] == -2.0


def test_rhs_linear_in_x_prev():
    st = gen_inventory(2).stages[1]
    a = build_stage_subproblem(st, [3.0], None)
    b = build_stage_subproblem(st, [6.0], None)
    z = build_stage_subproblem(st, [0.0], None)
    assert np.allclose(b.h - z.h, 2 * (a.h - z.h))
    assert np.allclose(b.b_eq - z.b_eq, 2 * (a.b_eq - z.b_eq))


# -- cuts -----------------------------------------------------------------------

def test_uncoupled_stage_gives_flat_cut():
    st = StageLp.build(2, 1, c=[1.0], d=[0.0], lo=[2.0], hi=[5.0])
    sol = solve_lp(build_stage_subproblem(st, [7.0], None))
    cut = compute_cut(st, sol, [7.0], 1)
    assert cut.beta.tolist() == [0.0] and cut.theta == 2.0


def test_one_dimensional_cut_is_exact():
    # min x_t s.t. -x_t + x_prev <= 0, x_t in [0, 10]: Q(x) = x
    st = StageLp.build(2, 1, c=[1.0], d=[0.0], G=[[-1.0]], H=[[1.0]], h=[0.0], lo=[0.0], hi=[10.0])
    sol = solve_lp(build_stage_subproblem(st, [3.0], None))
    assert sol.dual_ineq[0] == pytest.approx(1.0)
    cut = compute_cut(st, sol, [3.0], 1)
    assert cut.theta == pytest.approx(3.0) and cut.beta[0] == pytest.approx(1.0)
    for x in np.linspace(0, 10, 11):
        assert eval_cut(cut, [x]) == pytest.approx(x)


def test_cut_validity_by_resolving():
    prob = gen_inventory(6)
    solver = DDPSolver(prob, Strategy(LEVEL1))
    for _ in range(4):
        solver.step()
    rng = np.random.default_rng(3)
    for t in (2, 4, 6):
        pool = solver.pools[t]
        lo, hi = prob.stages[t - 2].state_box()
        for x in rng.uniform(lo, hi, size=(100, 1)):
            q = tail_value(prob, t, x)
            for c in pool.cuts:
                assert eval_cut(c, x) <= q + 1e-7 * (1 + abs(q))


def test_compute_cut_rejects_non_optimal():
    st = StageLp.build(2, 1, c=[1.0], d=[0.0], A=[[1.0]], B=[[0.0]], b=[20.0], lo=[0.0], hi=[10.0])
    sol = solve_lp(build_stage_subproblem(st, [0.0], None))
    with pytest.raises(StageError):
        compute_cut(st, sol, [0.0], 1)


def test_floors_are_valid_lower_bounds():
    for prob in (gen_inventory(5), gen_portfolio(4, 2, seed=3)):
        L = cost_to_go_floors(prob)
        assert L[prob.T + 1] == 0.0
        rng = np.random.default_rng(0)
        for t in range(2, prob.T + 1):
            lo, hi = prob.stages[t - 2].state_box()
            for x in rng.uniform(lo, hi, size=(20, lo.size)):
                assert L[t] <= tail_value(prob, t, x) + 1e-9


# -- forward pass and run -------------------------------------------------------

def test_single_stage_converges_at_first_iteration():
    prob = gen_inventory(1)
    rep = run(prob, Strategy(), eps=1e-9)
    assert rep.status == CONVERGED and rep.n_iter == 1
    assert rep.lower_bound == pytest.approx(rep.upper_bound)
    assert rep.value == pytest.approx(ef_value(prob))


def test_first_iteration_myopic_and_bounds_ordered():
    prob = gen_inventory(5)
    solver = DDPSolver(prob)
    rec = solver.step()
    assert not any(p.empty for p in solver.pools.values())
    assert rec.ub >= rec.lb
    # stages solved without cost-to-go variable: trajectory is myopic order-up-to-demand
    assert rec.trajectory[0][0] == pytest.approx(10 - 5.5)


@pytest.mark.parametrize("strategy", ALL, ids=lambda s: s.label)
def test_bounds_monotone_and_ub_is_policy_cost(strategy):
    prob = gen_inventory(8)
    solver = DDPSolver(prob, strategy, check_invariants=True)
    rep = solver.run(1e-7, 200)
    assert rep.status == CONVERGED
    lbs = [r.running_lb for r in rep.iterations]
    ubs = [r.ub_best for r in rep.iterations]
    assert all(b >= a for a, b in zip(lbs, lbs[1:]))
    assert all(b <= a for a, b in zip(ubs, ubs[1:]))
    assert trajectory_cost(prob, solver.best_decisions) == pytest.approx(rep.upper_bound)
    assert rep.value == pytest.approx(ef_value(prob), abs=1e-6)
    assert rep.h2_violations == 0


@pytest.mark.parametrize("strategy", ALL, ids=lambda s: s.label)
def test_lower_model_below_true_cost_to_go(strategy):
    prob = gen_portfolio(4, 2, seed=5)
    solver = DDPSolver(prob, strategy)
    for _ in range(6):
        solver.step()
        for t, pool in solver.pools.items():
            if pool.empty:
                continue
            for x in pool.trial_points:
                assert pool.value(x) <= tail_value(prob, t, x) + 1e-7 * (1 + abs(pool.value(x)))


def test_lower_model_below_grid_oracle():
    prob = gen_inventory(30)
    params = InventoryParams(30)
    table, tol = refinement_tolerance(params, 2001)
    solver = DDPSolver(prob, Strategy(LEVEL1))
    solver.run(0.01, 200)
    for t, pool in solver.pools.items():
        for c in pool.cuts:
            cuts = c.alpha + c.beta[0] * table.grid
            assert np.all(cuts <= interp(table, t, table.grid) + tol + 1e-9)


def test_last_stage_cut_is_exact_at_its_trial_point():
    prob = gen_inventory(6)
    solver = DDPSolver(prob, Strategy(LEVEL1))
    for _ in range(5):
        solver.step()
    pool = solver.pools[6]
    for c in pool.cuts:
        assert c.theta == pytest.approx(tail_value(prob, 6, c.x_ref), abs=1e-9)


@pytest.mark.parametrize("seed,T,n", [(1, 5, 2), (3, 10, 5)])
def test_portfolio_strategies_match_extensive_form(seed, T, n):
    prob = gen_portfolio(T, n, seed=seed)
    ref = ef_value(prob)
    eps = 1e-6 * prob.x0.sum()
    vals = {}
    for s in ALL:
        rep = run(prob, s, eps=eps, check_invariants=True)
        assert rep.status == CONVERGED
        assert rep.h2_violations == 0
        vals[s.label] = rep.value
        assert rep.value == pytest.approx(ref, abs=max(1e-6 * abs(ref), eps))
    assert abs(vals["none"] - vals["limited_memory"]) <= 2 * eps


def test_finite_termination_small_inventory():
    prob = gen_inventory(12)
    solver = DDPSolver(prob, Strategy(LIMITED_MEMORY), track_stability=True)
    quiet = 0
    for _ in range(300):
        rec = solver.step()
        quiet = quiet + 1 if rec.new_trial_points == 0 and not rec.model_changed else 0
        if quiet >= 10:
            break
    assert quiet >= 10


def test_iteration_limit_status():
    rep = run(gen_inventory(20), Strategy(), eps=1e-9, max_iter=3)
    assert rep.status == ITER_LIMIT and rep.n_iter == 3


def test_bad_arguments():
    with pytest.raises(ValueError):
        run(gen_inventory(2), eps=0.0)
    with pytest.raises(ValueError):
        run(gen_inventory(2), max_iter=0)
    bad = MultistageProblem.create([0.0], [StageLp.build(1, 1, c=[1.0], d=[0.0, 1.0])])
    with pytest.raises(ValueError):
        DDPSolver(bad)


def test_infeasible_stage_raises_stage_error():
    st1 = StageLp.build(1, 1, c=[1.0], d=[0.0], lo=[0.0], hi=[1.0])
    st2 = StageLp.build(2, 1, c=[1.0], d=[0.0], A=[[1.0]], B=[[1.0]], b=[5.0], lo=[0.0], hi=[1.0])
    with pytest.raises(StageError) as ei:
        run(MultistageProblem.create([0.0], [st1, st2]), eps=1e-6)
    assert ei.value.t == 2 and ei.value.status == "infeasible"


def test_usefulness_period_prunes_without_changing_model():
    prob = gen_inventory(15)
    rep = run(prob, Strategy(LEVEL1, usefulness_period=5), eps=0.01, check_invariants=True)
    assert rep.status == CONVERGED
    assert sum(r.pruned for r in rep.iterations) > 0
    assert max(r.prune_max_change for r in rep.iterations) <= 1e-8
    assert rep.value == pytest.approx(ef_value(prob), abs=0.01)


def test_report_files(tmp_path):
    rep = run(gen_inventory(4), Strategy(LEVEL1), eps=1e-6)
    rep.write_json(tmp_path / "r.json")
    rep.write_bounds_csv(tmp_path / "b.csv")
    d = json.loads((tmp_path / "r.json").read_text())
    assert d["status"] == CONVERGED and d["n_iter"] == rep.n_iter
    rows = list(csv.reader(open(tmp_path / "b.csv")))
    assert rows[0] == ["iter", "lb", "running_lb", "ub", "ub_best", "time_s", "cuts_selected_total"]
    assert len(rows) == rep.n_iter + 1


def test_runs_are_deterministic():
    a = run(gen_portfolio(5, 3, seed=2), Strategy(LIMITED_MEMORY), eps=1e-4)
    b = run(gen_portfolio(5, 3, seed=2), Strategy(LIMITED_MEMORY), eps=1e-4)
    assert a.value == b.value and a.n_iter == b.n_iter
    assert [r.trajectory for r in a.iterations] == [r.trajectory for r in b.iterations]
