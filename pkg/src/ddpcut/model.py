"""Multistage linear problems, validation, JSON I/O and the extensive form.

Stage ``t`` chooses a decision vector ``dec = (x_t, locals)`` and pays
``c.dec + d.x_{t-1}`` subject to::

    A dec + B x_{t-1}  = b
    G dec + H x_{t-1} <= h
    lo <= dec <= hi

The first ``n_state`` entries of ``dec`` are the state handed to stage
``t + 1``.  Problems are always stored in minimisation form; a ``max``
problem has its costs negated once, at construction.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence

import numpy as np

from .simplex import LpProblem


@dataclass(frozen=True, eq=False)
class StageLp:
    t: int
    n_state: int
    c: np.ndarray
    d: np.ndarray
    A: np.ndarray
    B: np.ndarray
    b: np.ndarray
    G: np.ndarray
    H: np.ndarray
    h: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def build(cls, t, n_state, c, d, A=None, B=None, b=None, G=None, H=None, h=None,
              lo=None, hi=None) -> "StageLp":
        """Coerce array-likes, filling empty blocks with correctly shaped zeros."""
        c = np.asarray(c, dtype=float).ravel()
        d = np.asarray(d, dtype=float).ravel()
        nd, np_ = c.size, d.size

        def mat(M, rows, cols):
            if M is None:
                return np.zeros((rows, cols))
            M = np.asarray(M, dtype=float)
            if M.size == 0:
                return np.zeros((rows, cols))
            return M.reshape(-1, cols) if M.ndim == 1 else M

        A = mat(A, 0, nd)
        G = mat(G, 0, nd)
        B = mat(B, A.shape[0], np_)
        H = mat(H, G.shape[0], np_)
        b = np.zeros(A.shape[0]) if b is None else np.asarray(b, dtype=float).ravel()
        h = np.zeros(G.shape[0]) if h is None else np.asarray(h, dtype=float).ravel()
        lo = np.full(nd, -np.inf) if lo is None else np.asarray(lo, dtype=float).ravel()
        hi = np.full(nd, np.inf) if hi is None else np.asarray(hi, dtype=float).ravel()
        return cls(int(t), int(n_state), c, d, A, B, b, G, H, h, lo, hi)

    @property
    def n_dec(self) -> int:
        return self.c.size

    @property
    def n_local(self) -> int:
        return self.c.size - self.n_state

    @property
    def n_prev(self) -> int:
        return self.d.size

    def state_box(self):
        """Bounds of the state part of the decision vector."""
        return self.lo[:self.n_state], self.hi[:self.n_state]


@dataclass(frozen=True, eq=False)
class MultistageProblem:
    x0: np.ndarray
    stages: tuple
    sense: str = "min"
    name: str = "problem"

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float).ravel())
        object.__setattr__(self, "stages", tuple(self.stages))
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")

    @classmethod
    def create(cls, x0, stages: Sequence[StageLp], sense="min", name="problem"):
        """Build a problem from stages written in their natural ``sense``."""
        if sense == "max":
            stages = [_negate_costs(s) for s in stages]
        return cls(x0, tuple(stages), sense, name)

    @property
    def T(self) -> int:
        return len(self.stages)

    def to_user_value(self, value: float) -> float:
        """Map an internal (minimisation) value back to the problem's sense."""
        return -value if self.sense == "max" else value


def _negate_costs(s: StageLp) -> StageLp:
    return StageLp(s.t, s.n_state, -s.c, -s.d, s.A, s.B, s.b, s.G, s.H, s.h, s.lo, s.hi)


def stage_cost(stage: StageLp, dec, x_prev) -> float:
    dec = np.asarray(dec, dtype=float).ravel()
    x_prev = np.asarray(x_prev, dtype=float).ravel()
    if dec.size != stage.n_dec:
        raise ValueError(f"stage {stage.t}: decision has length {dec.size}, expected {stage.n_dec}")
    if x_prev.size != stage.n_prev:
        raise ValueError(f"stage {stage.t}: previous state has length {x_prev.size}, expected {stage.n_prev}")
    return float(stage.c @ dec + stage.d @ x_prev)


# -- validation -------------------------------------------------------------

@dataclass(frozen=True)
class Issue:
    stage: int
    kind: str
    message: str

    @property
    def is_error(self) -> bool:
        return self.kind != "unbounded-box"


@dataclass
class ValidationReport:
    issues: List[Issue] = field(default_factory=list)

    def __bool__(self):
        return bool(self.issues)

    def __len__(self):
        return len(self.issues)

    def __iter__(self):
        return iter(self.issues)

    @property
    def errors(self) -> List[Issue]:
        return [i for i in self.issues if i.is_error]

    @property
    def warnings(self) -> List[Issue]:
        return [i for i in self.issues if not i.is_error]


def validate(problem: MultistageProblem) -> ValidationReport:
    """Collect dimension mismatches, inverted bounds and unbounded boxes.

    Infinite bounds are reported with kind ``unbounded-box``: they are legal
    data but break the compactness needed for finite convergence.
    """
    issues = []
    prev_dim = problem.x0.size
    if problem.T < 1:
        issues.append(Issue(0, "dimension", "problem has no stages"))
    for k, s in enumerate(problem.stages, start=1):
        nd = s.n_dec
        add = lambda kind, msg: issues.append(Issue(k, kind, msg))
        if s.t != k:
            add("dimension", f"stage index {s.t} stored at position {k}")
        if not 0 <= s.n_state <= nd:
            add("dimension", f"n_state={s.n_state} outside [0, {nd}]")
        if s.d.size != prev_dim:
            add("dimension", f"d has length {s.d.size}, expected {prev_dim}")
        q, p = s.A.shape[0], s.G.shape[0]
        for nm, M, shape in (("A", s.A, (q, nd)), ("B", s.B, (q, prev_dim)),
                             ("G", s.G, (p, nd)), ("H", s.H, (p, prev_dim))):
            if M.shape != shape:
                add("dimension", f"{nm} has shape {M.shape}, expected {shape}")
        if s.b.size != q:
            add("dimension", f"b has length {s.b.size}, expected {q}")
        if s.h.size != p:
            add("dimension", f"h has length {s.h.size}, expected {p}")
        if s.lo.size != nd or s.hi.size != nd:
            add("dimension", f"bounds have lengths {s.lo.size}/{s.hi.size}, expected {nd}")
        elif np.any(s.lo > s.hi):
            bad = np.flatnonzero(s.lo > s.hi).tolist()
            add("bounds", f"lo > hi for variables {bad}")
        else:
            inf = np.flatnonzero(~np.isfinite(s.lo) | ~np.isfinite(s.hi)).tolist()
            if inf:
                which = "state" if any(j < s.n_state for j in inf) else "local"
                add("unbounded-box", f"infinite bound on {which} variables {inf}; X_t is not compact")
        prev_dim = s.n_state
    return ValidationReport(issues)


# -- extensive form ---------------------------------------------------------

@dataclass
class ExtensiveForm:
    lp: LpProblem
    constant: float
    blocks: List[slice]

    def split(self, x) -> List[np.ndarray]:
        """Split a flat solution into per-stage decision vectors."""
        return [np.asarray(x)[blk] for blk in self.blocks]


def extensive_form(problem: MultistageProblem) -> ExtensiveForm:
    """Flatten all stages into one LP whose optimum plus ``constant`` is Q_1(x0).

    Variables are the stage decision vectors concatenated in stage order.
    Stage ``t >= 2`` couples to the first ``n_state`` columns of block
    ``t - 1``; stage 1's coupling terms move to the right-hand side.
    """
    rep = validate(problem)
    if rep.errors:
        raise ValueError(f"invalid problem: {rep.errors[0].message}")
    offs = np.cumsum([0] + [s.n_dec for s in problem.stages])
    N = int(offs[-1])
    q_tot = sum(s.A.shape[0] for s in problem.stages)
    p_tot = sum(s.G.shape[0] for s in problem.stages)
    c = np.zeros(N)
    A = np.zeros((q_tot, N))
    b = np.zeros(q_tot)
    G = np.zeros((p_tot, N))
    h = np.zeros(p_tot)
    lo = np.empty(N)
    hi = np.empty(N)
    const = 0.0
    qr = pr = 0
    blocks = []
    for k, s in enumerate(problem.stages):
        blk = slice(int(offs[k]), int(offs[k + 1]))
        blocks.append(blk)
        q, p = s.A.shape[0], s.G.shape[0]
        c[blk] += s.c
        lo[blk] = s.lo
        hi[blk] = s.hi
        A[qr:qr + q, blk] = s.A
        G[pr:pr + p, blk] = s.G
        if k == 0:
            const += float(s.d @ problem.x0)
            b[qr:qr + q] = s.b - s.B @ problem.x0
            h[pr:pr + p] = s.h - s.H @ problem.x0
        else:
            prev = slice(int(offs[k - 1]), int(offs[k - 1]) + s.n_prev)
            c[prev] += s.d
            b[qr:qr + q] = s.b
            h[pr:pr + p] = s.h
            A[qr:qr + q, prev] = s.B
            G[pr:pr + p, prev] = s.H
        qr += q
        pr += p
    lp = LpProblem(c, A, b, G, h, lo, hi, name=f"{problem.name}-extensive")
    return ExtensiveForm(lp, const, blocks)


def trajectory_cost(problem: MultistageProblem, decisions: Sequence[np.ndarray]) -> float:
    """Sum of stage costs along a trajectory of decision vectors."""
    total = 0.0
    x_prev = problem.x0
    for s, dec in zip(problem.stages, decisions):
        total += stage_cost(s, dec, x_prev)
        x_prev = np.asarray(dec)[:s.n_state]
    return total


# -- JSON -------------------------------------------------------------------

def _enc(a):
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        return _enc_scalar(float(a))
    return [_enc(r) for r in a] if a.ndim > 1 else [_enc_scalar(float(v)) for v in a]


def _enc_scalar(v):
    if np.isposinf(v):
        return "inf"
    if np.isneginf(v):
        return "-inf"
    return v


def _dec(a, cols=None):
    if isinstance(a, list) and a and isinstance(a[0], list):
        return np.array([[float(v) for v in row] for row in a], dtype=float)
    arr = np.array([float(v) for v in a], dtype=float)
    if cols is not None:
        return arr.reshape(0, cols) if arr.size == 0 else arr
    return arr


def problem_to_dict(problem: MultistageProblem) -> dict:
    sign = -1.0 if problem.sense == "max" else 1.0
    stages = []
    for s in problem.stages:
        stages.append({
            "t": s.t, "n_state": s.n_state, "n_local": s.n_local,
            "c": _enc(sign * s.c), "d": _enc(sign * s.d),
            "A": _enc(s.A), "B": _enc(s.B), "b": _enc(s.b),
            "G": _enc(s.G), "H": _enc(s.H), "h": _enc(s.h),
            "lo": _enc(s.lo), "hi": _enc(s.hi),
        })
    return {"name": problem.name, "T": problem.T, "sense": problem.sense,
            "x0": _enc(problem.x0), "stages": stages}


def problem_from_dict(data: dict) -> MultistageProblem:
    stages = []
    for s in data["stages"]:
        c = _dec(s["c"])
        d = _dec(s["d"])
        nd, np_ = c.size, d.size
        A = _dec(s["A"], nd)
        G = _dec(s["G"], nd)
        stages.append(StageLp.build(
            s["t"], s["n_state"], c, d,
            A=A, B=_dec(s["B"], np_), b=_dec(s["b"]),
            G=G, H=_dec(s["H"], np_), h=_dec(s["h"]),
            lo=_dec(s["lo"]), hi=_dec(s["hi"]),
        ))
    if "T" in data and data["T"] != len(stages):
        raise ValueError(f"T={data['T']} but {len(stages)} stages given")
    return MultistageProblem.create(_dec(data["x0"]), stages, data.get("sense", "min"),
                                    data.get("name", "problem"))


def save_problem(problem: MultistageProblem, path) -> None:
    Path(path).write_text(json.dumps(problem_to_dict(problem)), encoding="utf-8")


def load_problem(path) -> MultistageProblem:
    return problem_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
