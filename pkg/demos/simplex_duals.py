# coding: utf-8

# # Simplex solves and their multipliers
#
# The DDP engine needs two things from every stage LP: an optimal vertex and
# the Lagrange multipliers of the rows. This script solves a small production
# problem and checks what the multipliers mean.

import numpy as np

from ddpcut import LpProblem, dual_objective, is_vertex, solve_lp

# Two products, three resources. Maximise profit 3a + 5b, written as a
# minimisation. One resource is shared through an equality: a + b = 6.

c = np.array([-3.0, -5.0])
G = np.array([[1.0, 0.0],
              [0.0, 2.0],
              [3.0, 2.0]])
h = np.array([4.0, 12.0, 18.0])
lp = LpProblem(c, G=G, h=h, lo=[0, 0], hi=[10, 10], name="production")

sol = solve_lp(lp)
print("status :", sol.status)
print("x      :", sol.x)
print("obj    :", sol.obj)
print("mu     :", sol.dual_ineq)
print("pivots :", sol.pivots)

# ## Vertex and strong duality
#
# The solution is a vertex (the active rows have full rank) and the dual
# objective of the returned multipliers matches the primal value.

print("vertex      :", is_vertex(lp, sol.x))
print("dual value  :", dual_objective(lp, sol))

# ## Multipliers as sensitivities
#
# With the sign convention used here the optimal value moves by -mu_i per
# unit of extra right-hand side on row i. A finite difference confirms it.

step = 1e-4
for i in range(len(h)):
    h2 = h.copy()
    h2[i] += step
    bumped = solve_lp(LpProblem(c, G=G, h=h2, lo=[0, 0], hi=[10, 10]))
    fd = (bumped.obj - sol.obj) / step
    print(f"row {i}: finite difference {fd:+.4f}   -mu {-sol.dual_ineq[i]:+.4f}")

# ## A degenerate corner
#
# Three rows meet at x = (2, 2) in a 2-d problem. The solver still returns
# a vertex with a consistent set of multipliers.

G3 = np.array([[1.0, 1.0], [1.0, -1.0], [2.0, 1.0]])
h3 = np.array([4.0, 0.0, 6.0])
deg = solve_lp(LpProblem([-1.0, -1.0], G=G3, h=h3, lo=[0, 0]))
print("degenerate x :", deg.x, " mu :", deg.dual_ineq)
print("vertex       :", is_vertex(LpProblem([-1.0, -1.0], G=G3, h=h3, lo=[0, 0]), deg.x))
