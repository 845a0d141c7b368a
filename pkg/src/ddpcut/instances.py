"""Benchmark generators: deterministic inventory control and portfolio selection."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import MultistageProblem, StageLp

_MASK = (1 << 64) - 1


class Xoshiro256:
    """xoshiro256** seeded through splitmix64.

    Used instead of numpy's generators so that generated instances are
    reproducible bit-for-bit from the published algorithm alone.
    """

    def __init__(self, seed: int = 0, state=None):
        if state is not None:
            self.s = [int(v) & _MASK for v in state]
        else:
            sm = int(seed) & _MASK
            self.s = []
            for _ in range(4):
                sm = (sm + 0x9E3779B97F4A7C15) & _MASK
                self.s.append(_splitmix_mix(sm))

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s
        result = (_rotl((s1 * 5) & _MASK, 7) * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, a: float, b: float, size: int) -> np.ndarray:
        return np.array([a + (b - a) * self.random() for _ in range(size)])


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & _MASK


def _splitmix_mix(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def splitmix64(seed: int, count: int):
    """First ``count`` outputs of splitmix64 started at ``seed``."""
    out, sm = [], int(seed) & _MASK
    for _ in range(count):
        sm = (sm + 0x9E3779B97F4A7C15) & _MASK
        out.append(_splitmix_mix(sm))
    return out


# -- inventory ----------------------------------------------------------------

@dataclass(frozen=True)
class InventoryParams:
    T: int
    backorder: float = 2.8
    holding: float = 0.2
    y1: float = 10.0
    state_lo: float = -100.0
    state_hi: float = 2000.0
    aux_hi: float = 4000.0

    def order_cost(self, t: int) -> float:
        return 1.5 + math.cos(math.pi * t / 6)

    def demand(self, t: int) -> float:
        return 5.0 + 0.5 * t


def gen_inventory(T: int, params: InventoryParams = None) -> MultistageProblem:
    """Inventory problem with backorders, written as a T-stage LP.

    Stage ``t`` decides ``(y_{t+1}, x_t, p_t, q_t)``: next inventory level,
    post-order level, backorder amount and holding amount, and pays
    ``c_t (x_t - y_t) + b p_t + h q_t``.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    p = params or InventoryParams(T)
    stages = []
    for t in range(1, T + 1):
        ct, D = p.order_cost(t), p.demand(t)
        stages.append(StageLp.build(
            t, 1,
            c=[0.0, ct, p.backorder, p.holding],
            d=[-ct],
            A=[[1.0, -1.0, 0.0, 0.0]], B=[[0.0]], b=[-D],
            G=[[0.0, -1.0, 0.0, 0.0],    # y_t <= x_t
               [0.0, -1.0, -1.0, 0.0],   # p_t >= D_t - x_t
               [0.0, 1.0, 0.0, -1.0]],   # q_t >= x_t - D_t
            H=[[1.0], [0.0], [0.0]],
            h=[0.0, -D, D],
            # x_t's upper bound is implied by y_{t+1} <= state_hi
            lo=[p.state_lo, p.state_lo, 0.0, 0.0],
            hi=[p.state_hi, p.state_hi + D, p.aux_hi, p.aux_hi],
        ))
    return MultistageProblem.create([p.y1], stages, "min", name=f"inventory_T{T}")


# -- portfolio ----------------------------------------------------------------

@dataclass(frozen=True)
class PortfolioParams:
    T: int
    n: int
    seed: int = 0
    cash_return: float = 0.0001
    sell_cost: float = 0.001
    buy_cost: float = 0.001
    cap: float = 1.0
    return_lo: float = 0.00005
    return_hi: float = 0.0004
    x0_hi: float = 100.0


def portfolio_data(params: PortfolioParams):
    """Draw ``(x0, returns)`` for ``params``.

    Draw order: the n+1 initial positions, then the asset returns row by
    row for periods 0..T.  ``returns`` has shape ``(T+1, n)``.
    """
    rng = Xoshiro256(params.seed)
    x0 = rng.uniform(0.0, params.x0_hi, params.n + 1)
    R = rng.uniform(params.return_lo, params.return_hi, (params.T + 1) * params.n)
    return x0, R.reshape(params.T + 1, params.n)


def gen_portfolio(T: int, n: int, seed: int = 0, returns=None, x0=None,
                  params: PortfolioParams = None) -> MultistageProblem:
    """Portfolio selection with proportional transaction costs (a max problem).

    Stage ``t`` decides ``(x_t, y_t, z_t)``: holdings of the n assets plus
    cash, amounts sold and amounts bought.  ``returns`` (shape ``(T+1, n)``,
    rows for periods 0..T) and ``x0`` override the random draws.
    """
    if T < 1 or n < 1:
        raise ValueError("T and n must be >= 1")
    p = params or PortfolioParams(T, n, seed)
    x0_rand, R_rand = portfolio_data(p)
    x0 = x0_rand if x0 is None else np.asarray(x0, dtype=float)
    R = R_rand if returns is None else np.asarray(returns, dtype=float)
    if R.shape != (T + 1, n):
        raise ValueError(f"returns must have shape {(T + 1, n)}, got {R.shape}")
    if x0.shape != (n + 1,):
        raise ValueError(f"x0 must have length {n + 1}")
    growth = 1.0 + np.hstack([R, np.full((T + 1, 1), p.cash_return)])

    w_max = float(x0.sum() * np.prod(np.maximum(growth.max(axis=1), 1.0)))
    eta, nu = p.sell_cost, p.buy_cost
    N = n + 1
    I_n = np.eye(n)
    stages = []
    for t in range(1, T + 1):
        g = growth[t - 1]
        A = np.zeros((N, N + 2 * n))
        A[:n, :n] = I_n
        A[:n, N:N + n] = I_n
        A[:n, N + n:] = -I_n
        A[n, n] = 1.0
        A[n, N:N + n] = -(1.0 - eta)
        A[n, N + n:] = 1.0 + nu
        B = -np.diag(g)
        G = np.zeros((n, N + 2 * n))
        G[:, :n] = I_n
        H = -p.cap * np.tile(g, (n, 1))
        c = np.zeros(N + 2 * n)
        if t == T:
            c[:N] = growth[T]
        stages.append(StageLp.build(
            t, N, c=c, d=np.zeros(N), A=A, B=B, b=np.zeros(N),
            G=G, H=H, h=np.zeros(n),
            lo=np.zeros(N + 2 * n), hi=np.full(N + 2 * n, w_max),
        ))
    return MultistageProblem.create(x0, stages, "max", name=f"portfolio_T{T}_n{n}_s{seed}")


class ReturnsParseError(ValueError):
    pass


def load_returns_csv(path) -> np.ndarray:
    """Read a comma-separated matrix of decimal returns (one row per period)."""
    text = Path(path).read_text(encoding="utf-8").replace("−", "-")
    rows = [r for r in csv.reader(text.splitlines()) if any(cell.strip() for cell in r)]
    if not rows:
        raise ReturnsParseError(f"{path}: empty returns file")
    width = len(rows[0])
    out = np.empty((len(rows), width))
    for i, row in enumerate(rows, start=1):
        if len(row) != width:
            raise ReturnsParseError(f"{path}: row {i} has {len(row)} columns, expected {width}")
        for j, cell in enumerate(row, start=1):
            try:
                out[i - 1, j - 1] = float(cell)
            except ValueError:
                raise ReturnsParseError(f"{path}: row {i}, column {j}: not a number: {cell!r}") from None
    return out
