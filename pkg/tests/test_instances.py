import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddpcut.ddp import build_stage_subproblem
from ddpcut.instances import (InventoryParams, PortfolioParams, ReturnsParseError, Xoshiro256,
                              gen_inventory, gen_portfolio, load_returns_csv, portfolio_data,
                              splitmix64)
from ddpcut.model import extensive_form, problem_to_dict, save_problem, validate
from ddpcut.simplex import LpProblem, solve_lp


# -- PRNG -----------------------------------------------------------------------

def test_xoshiro_reference_outputs():
    # published test vector for state (1, 2, 3, 4); the first is rotl(2*5, 7)*9 by hand
    g = Xoshiro256(state=[1, 2, 3, 4])
    assert [g.next_u64() for _ in range(4)] == [11520, 0, 1509978240, 1215971899390074240]


def test_splitmix_reference_outputs():
    assert splitmix64(0, 1) == [0xE220A8397B1DCDAF]
    assert splitmix64(1234567, 1) == [6457827717110365317]


def test_seeding_goes_through_splitmix():
    assert Xoshiro256(42).s == splitmix64(42, 4)


def test_uniform_range_and_resolution():
    g = Xoshiro256(3)
    u = np.array([g.random() for _ in range(2000)])
    assert u.min() >= 0.0 and u.max() < 1.0
    # 53-bit mantissa scaling: every draw is an integer multiple of 2**-53
    assert np.all((u * 2.0**53) == np.floor(u * 2.0**53))
    assert abs(u.mean() - 0.5) < 0.03


# -- inventory ------------------------------------------------------------------

def test_inventory_parameters():
    p = InventoryParams(600)
    assert p.demand(1) == 5.5
    assert p.order_cost(6) == pytest.approx(0.5)
    assert p.backorder == 2.8 and p.holding == 0.2 and p.y1 == 10
    assert all(p.backorder > p.order_cost(t) for t in range(1, 13))


def test_inventory_generator_shape():
    prob = gen_inventory(600)
    assert prob.T == 600 and prob.sense == "min"
    assert np.array_equal(prob.x0, [10.0])
    assert not validate(prob)
    s = prob.stages[5]
    assert s.c[1] == pytest.approx(0.5) and s.d[0] == pytest.approx(-0.5)
    assert s.b[0] == pytest.approx(-8.0)


def _stage_lp_fixed(stage, y, x):
    lp = build_stage_subproblem(stage, [y], None)
    lo, hi = lp.lo.copy(), lp.hi.copy()
    lo[1] = hi[1] = x
    return LpProblem(lp.c, lp.A_eq, lp.b_eq, lp.G, lp.h, lo, hi)


@settings(max_examples=60, deadline=None)
@given(t=st.integers(1, 600), y=st.floats(-100, 1500), extra=st.floats(0, 400))
def test_inventory_reformulation_is_exact(t, y, extra):
    prob = gen_inventory(600)
    st_ = prob.stages[t - 1]
    pr = InventoryParams(600)
    c, D = pr.order_cost(t), pr.demand(t)
    x = max(y + extra, D - 100.0)       # keeps y_{t+1} = x - D inside the state box
    sol = solve_lp(_stage_lp_fixed(st_, y, x))
    assert sol.optimal
    direct = c * (x - y) + 2.8 * max(D - x, 0.0) + 0.2 * max(x - D, 0.0)
    assert sol.obj + float(st_.d @ [y]) == pytest.approx(direct, rel=1e-12, abs=1e-9)


def test_inventory_rejects_bad_T():
    with pytest.raises(ValueError):
        gen_inventory(0)


# -- portfolio ------------------------------------------------------------------

def test_portfolio_draw_ranges_and_order():
    x0, R = portfolio_data(PortfolioParams(4, 3, seed=9))
    g = Xoshiro256(9)
    assert np.array_equal(x0, [100.0 * g.random() for _ in range(4)])
    assert R[0, 0] == pytest.approx(0.00005 + 0.00035 * g.random(), rel=0, abs=0)
    assert R.shape == (5, 3)
    assert R.min() >= 0.00005 and R.max() <= 0.0004
    assert x0.min() >= 0 and x0.max() <= 100


def test_portfolio_objective_only_at_horizon():
    prob = gen_portfolio(5, 3, seed=2)
    assert prob.sense == "max"
    for s in prob.stages[:-1]:
        assert not s.c.any() and not s.d.any()
    assert prob.stages[-1].c[:4].min() < 0      # negated once for minimisation


def test_frictionless_zero_return_conserves_wealth():
    pr = PortfolioParams(4, 1, cash_return=0.0, sell_cost=0.0, buy_cost=0.0)
    x0 = np.array([30.0, 12.5])
    prob = gen_portfolio(4, 1, returns=np.zeros((5, 1)), x0=x0, params=pr)
    ef = extensive_form(prob)
    sol = solve_lp(ef.lp)
    assert prob.to_user_value(sol.obj + ef.constant) == pytest.approx(x0.sum(), abs=1e-9)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 1000), n=st.integers(1, 4))
def test_self_financing_without_costs(seed, n):
    T = 4
    pr = PortfolioParams(T, n, seed, sell_cost=0.0, buy_cost=0.0)
    x0, R = portfolio_data(pr)
    prob = gen_portfolio(T, n, seed, params=pr)
    ef = extensive_form(prob)
    # random direction so trades actually happen
    rng = np.random.default_rng(seed)
    lp = ef.lp
    sol = solve_lp(LpProblem(rng.normal(size=lp.n), lp.A_eq, lp.b_eq, lp.G, lp.h, lp.lo, lp.hi))
    growth = 1 + np.hstack([R, np.full((T + 1, 1), pr.cash_return)])
    prev = x0
    for t, dec in enumerate(ef.split(sol.x), start=1):
        x = dec[:n + 1]
        assert x.sum() == pytest.approx(growth[t - 1] @ prev, rel=1e-10)
        prev = x


def test_seed_determinism_byte_identical(tmp_path):
    a, b, c = tmp_path / "a.json", tmp_path / "b.json", tmp_path / "c.json"
    save_problem(gen_portfolio(90, 25, seed=7), a)
    save_problem(gen_portfolio(90, 25, seed=7), b)
    save_problem(gen_portfolio(90, 25, seed=8), c)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_wealth_ceiling_bounds_every_variable():
    pr = PortfolioParams(6, 2, seed=4)
    x0, R = portfolio_data(pr)
    prob = gen_portfolio(6, 2, seed=4)
    growth = np.maximum(1 + np.hstack([R, np.full((7, 1), 1e-4)]).max(axis=1), 1)
    w_max = x0.sum() * growth.prod()
    for s in prob.stages:
        assert np.allclose(s.hi, w_max) and not s.lo.any()


def test_returns_shape_checked():
    with pytest.raises(ValueError):
        gen_portfolio(3, 2, returns=np.zeros((3, 2)))


# -- returns CSV ----------------------------------------------------------------

def test_returns_csv_parses(tmp_path):
    f = tmp_path / "r.csv"
    f.write_text("0.01,0.02\n0.00,−0.01\n", encoding="utf-8")
    assert np.array_equal(load_returns_csv(f), [[0.01, 0.02], [0.00, -0.01]])


def test_returns_csv_empty(tmp_path):
    f = tmp_path / "r.csv"
    f.write_text("")
    with pytest.raises(ReturnsParseError):
        load_returns_csv(f)


def test_returns_csv_wrong_arity_names_row(tmp_path):
    f = tmp_path / "r.csv"
    f.write_text("0.01,0.02\n0.03\n")
    with pytest.raises(ReturnsParseError, match="row 2"):
        load_returns_csv(f)


def test_returns_csv_bad_number(tmp_path):
    f = tmp_path / "r.csv"
    f.write_text("0.01,abc\n")
    with pytest.raises(ReturnsParseError, match="row 1, column 2"):
        load_returns_csv(f)


def test_returns_csv_feeds_generator(tmp_path):
    f = tmp_path / "r.csv"
    f.write_text("\n".join(["0.001,0.002"] * 4))
    prob = gen_portfolio(3, 2, seed=0, returns=load_returns_csv(f))
    assert np.allclose(-prob.stages[0].B.diagonal()[:2], [1.001, 1.002])
