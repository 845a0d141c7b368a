# coding: utf-8

# # The inventory problem solved three ways
#
# A single product with deterministic demand D_t = 5 + t/2, a cyclic order
# price 1.5 + cos(pi t / 6), backorder cost 2.8 and holding cost 0.2.
# We compare one flat LP over all stages, the grid dynamic-programming
# oracle and DDP.

import time

import numpy as np

from ddpcut import InventoryParams, extensive_form, gen_inventory, grid_dp, interp, run, solve_lp, Strategy

T = 60
prob = gen_inventory(T)

# ## Flat LP over every stage

t0 = time.perf_counter()
ef = extensive_form(prob)
sol = solve_lp(ef.lp)
flat = sol.obj + ef.constant
print(f"flat LP     : {flat:.4f}  ({sol.pivots} pivots, {time.perf_counter() - t0:.2f}s)")

# ## Grid dynamic programming
#
# Q_t is tabulated on a uniform grid of the stock level and interpolated
# linearly. Interpolating a convex function from above gives an upper
# estimate that tightens as the grid is refined.

for N in (501, 2001, 8001):
    table = grid_dp(InventoryParams(T), N)
    print(f"grid N={N:5d}: {table.q1:.4f}  (excess {table.q1 - flat:.4f})")

table = grid_dp(InventoryParams(T), 2001)
ys = np.array([-50.0, 0.0, 10.0, 100.0])
print("Q_2 at", ys, "->", np.round(interp(table, 2, ys), 3))

# ## DDP
#
# One forward pass per iteration. The lower bound creeps backwards through
# the horizon one stage at a time, so the number of passes grows with T.

t0 = time.perf_counter()
rep = run(prob, Strategy("level1"), eps=1e-6)
print(f"DDP level1  : {rep.value:.4f}  {rep.status} after {rep.n_iter} passes "
      f"({time.perf_counter() - t0:.2f}s)")

lbs = [r.running_lb for r in rep.iterations]
for k in (1, 10, 30, rep.n_iter):
    print(f"  pass {k:3d}: lower bound {lbs[k - 1]:10.3f}")

# Each stage decision is (next stock, stock after ordering, backorder, holding).
# The order quantity is the jump from the incoming stock to the post-order
# level; it spikes where the price cycle bottoms out.

traj = np.array(rep.final_trajectory)
incoming = np.concatenate([[10.0], traj[:-1, 0]])
orders = traj[:, 1] - incoming
print("orders, stages 1-24:", np.round(orders[:24], 1))
print("price , stages 1-24:", np.round([InventoryParams(T).order_cost(t) for t in range(1, 25)], 2))
