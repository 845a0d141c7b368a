import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddpcut.instances import gen_inventory, gen_portfolio
from ddpcut.model import (MultistageProblem, StageLp, extensive_form, load_problem, save_problem,
                          stage_cost, trajectory_cost, validate)
from ddpcut.oracle import grid_dp
from ddpcut.instances import InventoryParams
from ddpcut.simplex import LpProblem, solve_lp
from lpgen import enumerate_vertices


def one_stage(**kw):
    base = dict(c=[1.0], d=[0.0], lo=[0.0], hi=[1.0])
    base.update(kw)
    return StageLp.build(1, 1, **base)


# -- validation -----------------------------------------------------------------

def test_well_formed_problem_has_empty_report():
    rep = validate(MultistageProblem.create([0.0], [one_stage()]))
    assert len(rep) == 0 and not rep


def test_wrong_B_columns_is_one_dimension_issue():
    s1 = StageLp.build(1, 1, c=[1.0], d=[0.0], lo=[0], hi=[1])
    s2 = StageLp.build(2, 1, c=[1.0], d=[0.0], A=[[1.0]], B=[[1.0, 2.0]], b=[0.0], lo=[0], hi=[1])
    rep = validate(MultistageProblem.create([0.0], [s1, s2]))
    dims = [i for i in rep.errors if i.kind == "dimension"]
    assert len(dims) == 1 and dims[0].stage == 2 and "B" in dims[0].message


def test_infinite_state_bound_is_a_warning():
    rep = validate(MultistageProblem.create([0.0], [one_stage(hi=[np.inf])]))
    assert not rep.errors
    assert [w.kind for w in rep.warnings] == ["unbounded-box"]
    assert "state" in rep.warnings[0].message


def test_inverted_bounds_reported():
    s = StageLp(1, 1, np.ones(1), np.zeros(1), np.zeros((0, 1)), np.zeros((0, 1)), np.zeros(0),
                np.zeros((0, 1)), np.zeros((0, 1)), np.zeros(0), np.array([2.0]), np.array([1.0]))
    rep = validate(MultistageProblem.create([0.0], [s]))
    assert [e.kind for e in rep.errors] == ["bounds"]


def test_bad_sense():
    with pytest.raises(ValueError):
        MultistageProblem.create([0.0], [one_stage()], sense="maximize")


# -- stage cost -----------------------------------------------------------------

def test_stage_cost_zero_d():
    assert stage_cost(one_stage(hi=[10]), [3.0], [7.0]) == 3.0


def test_stage_cost_hand_arithmetic():
    s = StageLp.build(1, 1, c=[2.0, 1.0], d=[-1.0])
    assert stage_cost(s, [1.0, 1.0], [2.0]) == pytest.approx(2 + 1 - 2)


def test_inventory_stage_one_cost_at_initial_level():
    # x_1 = y_1 = 10: nothing ordered, D_1 = 5.5 so 4.5 units held at h = 0.2
    p = gen_inventory(1)
    s = p.stages[0]
    dec = [10 - 5.5, 10.0, 0.0, 4.5]
    assert stage_cost(s, dec, [10.0]) == pytest.approx(0.2 * 4.5)
    c1 = 1.5 + math.cos(math.pi / 6)
    assert stage_cost(s, [12 - 5.5, 12.0, 0.0, 6.5], [10.0]) == pytest.approx(c1 * 2 + 0.2 * 6.5)


def test_stage_cost_length_check():
    with pytest.raises(ValueError):
        stage_cost(one_stage(), [1.0, 2.0], [0.0])


# -- extensive form -------------------------------------------------------------

def test_extensive_form_T1_is_stage_lp_with_x0_substituted():
    s = StageLp.build(1, 1, c=[1.0, 2.0], d=[3.0], A=[[1.0, 1.0]], B=[[-1.0]], b=[1.0],
                      G=[[1.0, -1.0]], H=[[2.0]], h=[4.0], lo=[0, 0], hi=[5, 5])
    ef = extensive_form(MultistageProblem.create([2.0], [s]))
    assert np.allclose(ef.lp.A_eq, s.A) and np.allclose(ef.lp.b_eq, [1.0 + 2.0])
    assert np.allclose(ef.lp.h, [4.0 - 4.0])
    assert ef.constant == pytest.approx(6.0)


def test_extensive_form_T2_shape():
    s1 = StageLp.build(1, 1, c=[1.0], d=[0.0], A=[[1.0]], B=[[0.0]], b=[1.0], lo=[0], hi=[3])
    s2 = StageLp.build(2, 1, c=[1.0], d=[1.0], A=[[1.0]], B=[[-1.0]], b=[0.0], lo=[0], hi=[3])
    ef = extensive_form(MultistageProblem.create([0.0], [s1, s2]))
    assert ef.lp.n == 2 and ef.lp.A_eq.shape == (2, 2)
    assert np.allclose(ef.lp.A_eq, [[1, 0], [-1, 1]])
    sol = solve_lp(ef.lp)
    assert sol.obj + ef.constant == pytest.approx(1 + 1 + 1)


def test_inventory_T3_matches_grid_oracle():
    p = gen_inventory(3)
    ef = extensive_form(p)
    sol = solve_lp(ef.lp)
    table = grid_dp(InventoryParams(3), 2001)
    # hold 4.5 after t=1 (0.9), top up 1.5 at c_2 = 2 (3.0), buy 6.5 at c_3 = 1.5 (9.75)
    assert sol.obj + ef.constant == pytest.approx(0.9 + 3.0 + 9.75, abs=1e-9)
    assert table.q1 == pytest.approx(sol.obj + ef.constant, abs=1e-6)


def test_extensive_form_rejects_invalid():
    s = one_stage(d=[0.0, 0.0])
    with pytest.raises(ValueError):
        extensive_form(MultistageProblem.create([0.0], [s]))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), kind=st.sampled_from(["inventory", "portfolio"]))
def test_extensive_objective_equals_sum_of_stage_costs(seed, kind):
    prob = gen_inventory(4) if kind == "inventory" else gen_portfolio(3, 2, seed=seed % 7)
    ef = extensive_form(prob)
    # random objective direction gives a random feasible vertex
    rng = np.random.default_rng(seed)
    lp = ef.lp
    probe = LpProblem(rng.normal(size=lp.n), lp.A_eq, lp.b_eq, lp.G, lp.h, lp.lo, lp.hi)
    x = solve_lp(probe).x
    assert float(lp.c @ x) + ef.constant == pytest.approx(trajectory_cost(prob, ef.split(x)),
                                                          rel=1e-12, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_max_normalisation_against_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    c = rng.normal(size=n)
    G = rng.normal(size=(2, n))
    s = StageLp.build(1, n, c=c, d=np.zeros(1), G=G, H=np.zeros((2, 1)), h=np.abs(rng.normal(size=2)),
                      lo=np.zeros(n), hi=np.ones(n))
    prob = MultistageProblem.create([0.0], [s], sense="max")
    ef = extensive_form(prob)
    best_max = max(float(c @ v) for v in enumerate_vertices(ef.lp))
    sol = solve_lp(ef.lp)
    assert prob.to_user_value(sol.obj + ef.constant) == pytest.approx(best_max, abs=1e-9)


# -- JSON -----------------------------------------------------------------------

def test_json_roundtrip_preserves_data_and_infinities(tmp_path):
    s = one_stage(lo=[-np.inf], hi=[np.inf])
    prob = MultistageProblem.create([1.5], [s, StageLp.build(2, 1, c=[2.0], d=[1.0], lo=[0], hi=[1])],
                                    sense="max", name="rt")
    path = tmp_path / "p.json"
    save_problem(prob, path)
    assert '"inf"' in path.read_text()
    back = load_problem(path)
    assert back.sense == "max" and back.name == "rt" and back.T == 2
    for a, b in zip(prob.stages, back.stages):
        for f in ("c", "d", "A", "B", "b", "G", "H", "h", "lo", "hi"):
            assert np.array_equal(getattr(a, f), getattr(b, f)), f


def test_json_roundtrip_portfolio_is_exact(tmp_path):
    prob = gen_portfolio(3, 2, seed=1)
    save_problem(prob, tmp_path / "a.json")
    save_problem(load_problem(tmp_path / "a.json"), tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
