"""Dual dynamic programming for deterministic multistage LPs, with cut selection."""
from .simplex import LpProblem, LpSolution, solve_lp, dual_objective, is_vertex, CyclingError
from .model import (StageLp, MultistageProblem, validate, extensive_form, trajectory_cost,
                    save_problem, load_problem)
from .cutsel import Cut, CutPool, Strategy, insert_and_select, pool_value, usefulness_test
from .ddp import DDPSolver, RunReport, IterationRecord, StageError, run
from .instances import (InventoryParams, PortfolioParams, gen_inventory, gen_portfolio,
                        load_returns_csv, Xoshiro256)
from .oracle import ValueTable, grid_dp, interp

__version__ = "0.1.0"
