"""Command-line front end.

    ddpcut generate inventory --T 600 --out runs/
    ddpcut solve --algo ddp-cs-2 --eps 0.1 runs/inventory_T600.json --out runs/cs2
    ddpcut oracle --T 600 --N 2001 --out runs/dp
    ddpcut compare --algo simplex --algo ddp --algo ddp-cs-1 inventory --T 50
    ddpcut bench inventory --T 50 100 150 200 --algo ddp --algo ddp-cs-2

An instance argument is either a problem JSON file or a generator family
(``inventory`` / ``portfolio``) parametrised by ``--T``, ``--n``, ``--seed``.
Exit status is 0 only if every requested run converged.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from . import ddp as _ddp
from .cutsel import LEVEL1, LEVEL_H, LIMITED_MEMORY, NONE, TERRITORY, Strategy
from .instances import (InventoryParams, ReturnsParseError, gen_inventory, gen_portfolio,
                        load_returns_csv)
from .model import extensive_form, problem_from_dict, problem_to_dict, validate
from .oracle import grid_dp
from .simplex import CyclingError, solve_lp

ALGOS = {
    "simplex": None,
    "ddp": NONE,
    "ddp-cs-1": LEVEL1,
    "ddp-cs-2": LIMITED_MEMORY,
    "territory": TERRITORY,
    "level-h": LEVEL_H,
    "dp-oracle": None,
}
FAMILIES = ("inventory", "portfolio")

CONVERGED = _ddp.CONVERGED
ERROR = _ddp.ERROR


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Everything needed to reproduce one (instance, algorithm) run."""
    subcommand: str
    instance: Optional[str] = None
    algos: List[str] = field(default_factory=list)
    eps: float = 1e-6
    max_iter: int = 10_000
    seed: int = 0
    T: Optional[int] = None
    n: Optional[int] = None
    N: int = 2001
    strategy_h: int = 1
    usefulness_period: Optional[int] = None
    returns: Optional[str] = None
    out: Optional[str] = None
    threads: int = 1

    def __post_init__(self):
        if not self.eps > 0:
            raise UsageError("--eps must be positive")
        if self.max_iter < 1:
            raise UsageError("--max-iter must be >= 1")
        if self.threads < 1:
            raise UsageError("--threads must be >= 1")
        if self.N < 2:
            raise UsageError("--N must be >= 2")
        for a in self.algos:
            if a not in ALGOS:
                raise UsageError(f"unknown algorithm {a!r}; choose from {', '.join(ALGOS)}")

    def strategy(self, algo: str) -> Strategy:
        return Strategy(ALGOS[algo], H=self.strategy_h, usefulness_period=self.usefulness_period)


@dataclass
class RunResult:
    algo: str
    status: str
    value: float
    iters: int
    time_s: float
    cuts_computed: int = 0
    cuts_selected: int = 0
    gap: float = float("nan")
    h2_violations: int = 0
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


# -- instances ------------------------------------------------------------------

def _generator_spec(cfg: RunConfig, family: str) -> dict:
    if cfg.T is None:
        raise UsageError(f"{family} needs --T")
    if family == "inventory":
        return {"family": "inventory", "T": cfg.T}
    if cfg.n is None:
        raise UsageError("portfolio needs --n")
    spec = {"family": "portfolio", "T": cfg.T, "n": cfg.n, "seed": cfg.seed}
    if cfg.returns:
        spec["returns"] = cfg.returns
    return spec


def _build(spec: dict):
    if spec["family"] == "inventory":
        return gen_inventory(spec["T"])
    returns = load_returns_csv(spec["returns"]) if spec.get("returns") else None
    return gen_portfolio(spec["T"], spec["n"], spec["seed"], returns=returns)


def resolve_instance(cfg: RunConfig):
    """Return ``(problem, generator block or None)`` for ``cfg.instance``."""
    inst = cfg.instance
    if inst is None:
        raise UsageError("an instance file or generator family is required")
    if inst in FAMILIES and not Path(inst).exists():
        spec = _generator_spec(cfg, inst)
        return _build(spec), spec
    path = Path(inst)
    if not path.is_file():
        raise UsageError(f"no such instance file: {inst}")
    data = json.loads(path.read_text(encoding="utf-8"))
    return problem_from_dict(data), data.get("generator")


# -- single runs ----------------------------------------------------------------

def _run_simplex(problem, cfg: RunConfig) -> RunResult:
    t0 = time.perf_counter()
    ef = extensive_form(problem)
    sol = solve_lp(ef.lp)
    dt = time.perf_counter() - t0
    if not sol.optimal:
        return RunResult("simplex", ERROR, float("nan"), sol.pivots, dt, message=sol.status)
    value = problem.to_user_value(sol.obj + ef.constant)
    return RunResult("simplex", CONVERGED, value, sol.pivots, dt, gap=0.0)


def _run_oracle(spec, cfg: RunConfig):
    if not spec or spec.get("family") != "inventory":
        raise UsageError("dp-oracle applies to generated inventory instances only")
    t0 = time.perf_counter()
    table = grid_dp(InventoryParams(spec["T"]), cfg.N)
    dt = time.perf_counter() - t0
    return RunResult("dp-oracle", CONVERGED, table.q1, spec["T"], dt), table


def run_one(cfg: RunConfig, algo: str, problem=None, spec=None, out: Optional[Path] = None) -> RunResult:
    """Run ``algo`` once and write its report files into ``out`` (if given)."""
    if problem is None:
        problem, spec = resolve_instance(cfg)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    try:
        if algo == "dp-oracle":
            res, table = _run_oracle(spec, cfg)
            if out is not None:
                table.write_csv(out / "values.csv")
                _write_json(out / "report.json", {**res.__dict__, "N": cfg.N,
                                                  "extrapolations": table.extrapolations})
            return res
        if algo == "simplex":
            res = _run_simplex(problem, cfg)
            if out is not None:
                _write_json(out / "report.json", {**res.__dict__, "problem": problem.name})
                with open(out / "bounds.csv", "w", newline="", encoding="utf-8") as f:
                    w = csv.writer(f)
                    w.writerow(["iter", "lb", "running_lb", "ub", "ub_best", "time_s", "cuts_selected_total"])
                    w.writerow([res.iters, repr(res.value), repr(res.value), repr(res.value),
                                repr(res.value), f"{res.time_s:.6f}", 0])
            return res
        # invariant checks are cheap next to the LP solves, so reports always carry them
        rep = _ddp.run(problem, cfg.strategy(algo), cfg.eps, cfg.max_iter,
                       check_invariants=True, track_stability=True, seed=cfg.seed)
    except (_ddp.StageError, CyclingError) as exc:
        return RunResult(algo, ERROR, float("nan"), 0, 0.0, message=str(exc))
    if out is not None:
        rep.write_json(out / "report.json")
        rep.write_bounds_csv(out / "bounds.csv")
    return RunResult(algo, rep.status, rep.value, rep.n_iter, rep.totals["time_s"],
                     rep.totals["cuts_computed"], rep.totals["cuts_selected"], rep.gap,
                     rep.h2_violations)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, default=float), encoding="utf-8")


def _job(args):
    cfg, algo, out = args
    return run_one(cfg, algo, out=out)


def _map(cfg: RunConfig, jobs):
    # each job rebuilds its instance, so workers share nothing
    if cfg.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as ex:
            return list(ex.map(_job, jobs))
    return [_job(j) for j in jobs]


# -- subcommands ----------------------------------------------------------------

def cmd_generate(cfg: RunConfig, family: str) -> int:
    spec = _generator_spec(cfg, family)
    try:
        problem = _build(spec)
    except (ReturnsParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{problem.name}.json"
    data = problem_to_dict(problem)
    data["generator"] = spec
    path.write_text(json.dumps(data), encoding="utf-8")
    print(f"wrote {path}: {problem.T} stages, " + ", ".join(f"{k}={v}" for k, v in spec.items()))
    return 0


def cmd_solve(cfg: RunConfig) -> int:
    if len(cfg.algos) != 1:
        raise UsageError("solve takes exactly one --algo")
    problem, spec = resolve_instance(cfg)
    if cfg.algos[0] != "dp-oracle":
        errs = validate(problem).errors
        if errs:
            for e in errs:
                print(f"invalid instance: stage {e.stage}: {e.message}", file=sys.stderr)
            return 2
    res = run_one(cfg, cfg.algos[0], problem, spec, Path(cfg.out or "."))
    print(f"{res.algo}: status={res.status} value={res.value:.6f} iterations={res.iters} "
          f"gap={res.gap:.3g} time={res.time_s:.2f}s" + (f" ({res.message})" if res.message else ""))
    return 0 if res.converged else 1


def cmd_oracle(cfg: RunConfig) -> int:
    if cfg.T is None and cfg.instance is None:
        raise UsageError("oracle needs --T or an inventory instance")
    if cfg.instance is None:
        cfg.instance = "inventory"
    problem, spec = resolve_instance(cfg)
    out = Path(cfg.out or ".")
    res = run_one(cfg, "dp-oracle", problem, spec, out)
    # grid-refinement error estimate from a nested grid
    fine = grid_dp(InventoryParams(spec["T"]), 2 * cfg.N - 1)
    tol = abs(fine.q1 - res.value)
    print(f"dp-oracle: Q_1({InventoryParams(spec['T']).y1:g}) = {res.value:.6f} (N={cfg.N}), "
          f"{fine.q1:.6f} (N={2 * cfg.N - 1}), tol_interp={tol:.3g}, time={res.time_s:.2f}s")
    return 0


def _table(results: List[RunResult]) -> str:
    head = ("algo", "status", "value", "iters", "time_s", "cuts_computed", "cuts_selected")
    rows = [(r.algo, r.status, f"{r.value:.6f}", str(r.iters), f"{r.time_s:.2f}",
             str(r.cuts_computed), str(r.cuts_selected)) for r in results]
    w = [max(len(x) for x in col) for col in zip(head, *rows)]
    return "\n".join("  ".join(x.rjust(n) for x, n in zip(r, w)) for r in [head, *rows])


def cmd_compare(cfg: RunConfig) -> int:
    algos = list(dict.fromkeys(cfg.algos))
    if len(algos) < 2:
        raise UsageError("compare needs at least two distinct --algo values")
    problem, spec = resolve_instance(cfg)
    out = Path(cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    if cfg.instance in FAMILIES and spec is not None:
        # let workers regenerate the instance instead of pickling it
        jobs = [(cfg, a, out / a) for a in algos]
        results = _map(cfg, jobs)
    else:
        results = [run_one(cfg, a, problem, spec, out / a) for a in algos]
    with open(out / "compare.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["algo", "status", "value", "iters", "time_s", "cuts_computed", "cuts_selected"])
        for r in results:
            w.writerow([r.algo, r.status, repr(r.value), r.iters, f"{r.time_s:.6f}",
                        r.cuts_computed, r.cuts_selected])
    print(_table(results))
    return 0 if all(r.converged for r in results) else 1


def cmd_bench(cfg: RunConfig, family: str, size_key: str, sizes: List[int], eps_list: List[float]) -> int:
    if not cfg.algos:
        raise UsageError("bench needs at least one --algo")
    if not sizes:
        raise UsageError("bench needs a non-empty size list")
    if not eps_list:
        raise UsageError("bench needs a non-empty --eps list")
    if any(e <= 0 for e in eps_list):
        raise UsageError("--eps must be positive")
    jobs = []
    for s in sizes:
        for e in eps_list:
            kw = {size_key: s, "eps": e, "instance": family}
            c = RunConfig(**{**cfg.__dict__, **kw})
            _generator_spec(c, family)          # usage errors before any work
            for a in cfg.algos:
                jobs.append((c, a, None))
    results = []
    for (c, a, _), r in zip(jobs, _map(cfg, jobs)):
        results.append((getattr(c, size_key), c.eps, r))
    out = Path(cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "bench.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["size", "algo", "time_s", "iters", "value", "eps", "status"])
        for s, e, r in results:
            w.writerow([s, r.algo, f"{r.time_s:.6f}", r.iters, repr(r.value), repr(e), r.status])
    for s, e, r in results:
        print(f"{size_key}={s} eps={e:g} {r.algo}: {r.status} value={r.value:.6f} "
              f"iters={r.iters} time={r.time_s:.2f}s")
    return 0 if all(r.converged for _, _, r in results) else 1


# -- argument parsing -----------------------------------------------------------

def _common(p: argparse.ArgumentParser, eps_many=False):
    if eps_many:
        p.add_argument("--eps", type=float, nargs="+", default=[1e-6])
    else:
        p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--algo", action="append", default=[], choices=list(ALGOS))
    p.add_argument("--max-iter", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int)
    p.add_argument("--N", type=int, default=2001)
    p.add_argument("--strategy-h", type=int, default=1)
    p.add_argument("--usefulness-period", type=int)
    p.add_argument("--returns", help="CSV of asset returns, one row per period 0..T")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ddpcut", description="Dual dynamic programming with cut selection")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    g = sub.add_parser("generate", help="write a benchmark instance as JSON")
    g.add_argument("family", choices=FAMILIES)
    g.add_argument("--T", type=int, required=True)
    _common(g)

    for name, hlp in (("solve", "run one algorithm"), ("compare", "run several algorithms on one instance")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("instance", help="problem JSON file, or 'inventory' / 'portfolio'")
        p.add_argument("--T", type=int)
        _common(p)

    o = sub.add_parser("oracle", help="grid dynamic programming for the inventory problem")
    o.add_argument("instance", nargs="?")
    o.add_argument("--T", type=int)
    _common(o)

    b = sub.add_parser("bench", help="time algorithms over a sweep of sizes or tolerances")
    b.add_argument("family", choices=FAMILIES)
    b.add_argument("--T", type=int, nargs="+", default=[])
    b.add_argument("--sizes-n", type=int, nargs="+", default=[], dest="sizes_n",
                   help="sweep the number of assets at the first --T")
    _common(b, eps_many=True)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        base = dict(eps=args.eps if not isinstance(args.eps, list) else 1.0,
                    algos=args.algo, max_iter=args.max_iter, seed=args.seed, n=args.n, N=args.N,
                    strategy_h=args.strategy_h, usefulness_period=args.usefulness_period,
                    returns=args.returns, out=args.out, threads=args.threads)
        if args.subcommand == "bench":
            if args.sizes_n:
                if len(args.T) != 1:
                    raise UsageError("--sizes-n needs exactly one --T")
                cfg = RunConfig("bench", T=args.T[0], **base)
                return cmd_bench(cfg, args.family, "n", args.sizes_n, args.eps)
            cfg = RunConfig("bench", **base)
            return cmd_bench(cfg, args.family, "T", args.T, args.eps)
        cfg = RunConfig(args.subcommand, instance=getattr(args, "instance", None), T=args.T, **base)
        if args.subcommand == "generate":
            return cmd_generate(cfg, args.family)
        if args.subcommand == "solve":
            return cmd_solve(cfg)
        if args.subcommand == "oracle":
            return cmd_oracle(cfg)
        return cmd_compare(cfg)
    except UsageError as exc:
        ap.error(str(exc))


if __name__ == "__main__":
    sys.exit(main())
