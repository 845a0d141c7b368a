# coding: utf-8

# # How much does cut selection save?
#
# Every DDP pass adds one cut per stage. Without selection the stage LPs
# keep growing. The selection rules keep only the cuts that are highest at
# some trial point, which leaves the lower model unchanged at those points.

import time

from ddpcut import gen_inventory, run, Strategy

prob = gen_inventory(80)

strategies = [
    Strategy("none"),
    Strategy("level1"),
    Strategy("territory"),
    Strategy("limited_memory"),
    Strategy("level_h", H=2),
]

print(f"{'strategy':<18}{'value':>13}{'passes':>8}{'computed':>10}{'selected':>10}{'time':>8}")
for s in strategies:
    t0 = time.perf_counter()
    rep = run(prob, s, eps=1e-6, check_invariants=True)
    tot = rep.totals
    print(f"{s.label:<18}{rep.value:13.4f}{rep.n_iter:8d}{tot['cuts_computed']:10d}"
          f"{tot['cuts_selected']:10d}{time.perf_counter() - t0:8.2f}")
    assert rep.h2_violations == 0

# All strategies reach the same value. Limited memory keeps at most one cut
# per trial point, so its selected count stays close to the number of
# distinct trial points, while "none" keeps everything.

# ## Selection in one pool
#
# A closer look at a single stage's pool after the limited-memory run.

from ddpcut import DDPSolver

solver = DDPSolver(prob, Strategy("limited_memory"))
for _ in range(40):
    solver.step()
pool = solver.pools[40]
print(f"stage 40: {len(pool.cuts)} cuts stored, {len(pool.selected)} selected, "
      f"{len(pool.trial_points)} trial points")
print("trial points:", pool.trial_points[:, 0].round(2))
