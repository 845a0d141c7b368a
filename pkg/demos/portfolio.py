# coding: utf-8

# # Portfolio rebalancing with transaction costs
#
# n risky assets plus cash. Each period the investor may sell or buy at a
# proportional cost of 0.1% and then collects one period of returns. The
# goal is to maximise final wealth, so this is a max problem; the library
# negates it internally and reports values in the original sense.

import numpy as np

from ddpcut import extensive_form, gen_portfolio, run, solve_lp, Strategy
from ddpcut.instances import PortfolioParams, portfolio_data

T, n, seed = 8, 4, 7
x0, R = portfolio_data(PortfolioParams(T, n, seed))
print("initial holdings (assets..., cash):", x0.round(2))
print("mean return per asset:", R.mean(axis=0).round(5))

prob = gen_portfolio(T, n, seed=seed)

# ## Reference value from the flat LP

ef = extensive_form(prob)
sol = solve_lp(ef.lp)
ref = prob.to_user_value(sol.obj + ef.constant)
print(f"flat LP final wealth : {ref:.6f}")

# ## DDP with two selection rules
#
# The stopping tolerance is relative to initial wealth.

eps = 1e-6 * x0.sum()
for s in (Strategy("level1"), Strategy("limited_memory")):
    rep = run(prob, s, eps=eps, check_invariants=True)
    print(f"{s.label:<16}: {rep.value:.6f}  ({rep.status}, {rep.n_iter} passes, "
          f"|diff| {abs(rep.value - ref):.2e})")

# ## The rebalancing policy
#
# Wealth drifts into the asset with the best remaining cumulative return,
# as long as the gain outweighs the 0.1% cost of each leg.

traj = np.array(rep.final_trajectory)[:, :n + 1]
for t, row in enumerate(traj, start=1):
    print(f"t={t}: " + " ".join(f"{v:8.2f}" for v in row))
