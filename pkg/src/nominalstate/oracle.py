"""Brute-force ground truth for tiny instances.

Nothing here reuses the solver's projection or Bellman code; transitions are
rebuilt node by node and values come from a dense linear solve.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .grid import StateGrid
from .model import Economy, ExogenousEnv, PolityState, Regime
from .stage import StageBimatrix

MAX_NODES = 4

U, F = "U", "F"


class OracleTooLarge(ValueError):
    pass


def enumerate_stage_nash(bimatrix: StageBimatrix) -> frozenset:
    """Every profile where neither bloc gains strictly by switching alone."""
    found = set()
    for profile, (p1, p2) in bimatrix.payoffs.items():
        stable = True
        for alt, (q1, q2) in bimatrix.payoffs.items():
            # bloc 1 deviates: bloc 2's action unchanged
            if alt[1] == profile[1] and alt[0] != profile[0] and q1 > p1:
                stable = False
            # bloc 2 deviates
            if alt[0] == profile[0] and alt[1] != profile[1] and q2 > p2:
                stable = False
        if stable:
            found.add(profile)
    return frozenset(found)


@dataclass(frozen=True)
class PolicyPair:
    """Per-bloc action strings, one character ('U' or 'F') per grid node."""

    elite1: str
    elite2: str

    def regime(self, node: int) -> Regime:
        if self.elite1[node] == U and self.elite2[node] == U:
            return Regime.UNIFIED
        return Regime.FRAGMENTED

    def as_array(self) -> np.ndarray:
        """Boolean ``(2, n, 1)`` array, True = U, matching solver layout."""
        return np.array([[[c == U] for c in self.elite1], [[c == U] for c in self.elite2]])


def _nearest(axis: np.ndarray, x: float) -> int:
    best, best_d = 0, abs(axis[0] - x)
    for j in range(1, len(axis)):
        d = abs(axis[j] - x)
        if d < best_d:  # ties keep the lower node
            best, best_d = j, d
    return best


class _Tiny:
    """Exact node-to-node payoffs and transitions for a deterministic environment."""

    def __init__(self, economy: Economy, env: ExogenousEnv, grid: StateGrid):
        if grid.size > MAX_NODES:
            raise OracleTooLarge(f"oracle handles at most {MAX_NODES} nodes, grid has {grid.size}")
        self.economy, self.env, self.grid = economy, env, grid
        self.n = grid.size
        self.delta = economy.params.elite_discount
        self.pay = {}
        self.next = {}
        ks, rs = list(grid.k_axis), list(grid.r_axis)
        for regime in (Regime.UNIFIED, Regime.FRAGMENTED):
            pay, nxt = [], []
            for i, k in enumerate(ks):
                for j, r in enumerate(rs):
                    out = economy.period(PolityState(k, r), regime, env)
                    pay.append(out.payoffs)
                    kn = min(max(out.next_state.capacity, ks[0]), ks[-1])
                    rn = min(max(out.next_state.recognition, rs[0]), rs[-1])
                    nxt.append(_nearest(grid.k_axis, kn) * len(rs) + _nearest(grid.r_axis, rn))
            self.pay[regime] = pay
            self.next[regime] = nxt

    def values(self, pair: PolicyPair) -> np.ndarray:
        n = self.n
        P = np.zeros((n, n))
        pi = np.zeros((2, n))
        for x in range(n):
            reg = pair.regime(x)
            P[x, self.next[reg][x]] = 1.0
            pi[:, x] = self.pay[reg][x]
        A = np.eye(n) - self.delta * P
        return np.linalg.solve(A, pi.T).T

    def profitable_deviation(self, pair: PolicyPair, V: np.ndarray, tol: float) -> bool:
        for x in range(self.n):
            for i in (0, 1):
                acts = [pair.elite1[x], pair.elite2[x]]
                acts[i] = F if acts[i] == U else U
                reg = Regime.UNIFIED if acts == [U, U] else Regime.FRAGMENTED
                dev = self.pay[reg][x][i] + self.delta * V[i, self.next[reg][x]]
                if dev > V[i, x] + tol:
                    return True
        return False


def policy_value_exact(pair: PolicyPair, grid: StateGrid, economy: Economy, env: ExogenousEnv) -> tuple[np.ndarray, np.ndarray]:
    """Solve ``V = pi + delta_e P V`` for a fixed pair under nearest-node transitions."""
    V = _Tiny(economy, env, grid).values(pair)
    return V[0], V[1]


def all_policy_pairs(n: int):
    for a in itertools.product(U + F, repeat=n):
        for b in itertools.product(U + F, repeat=n):
            yield PolicyPair("".join(a), "".join(b))


def brute_force_mpe(grid: StateGrid, economy: Economy, env: ExogenousEnv, tol: float = 1e-9) -> list[PolicyPair]:
    """All stationary pure policy pairs with no strictly profitable one-shot deviation."""
    tiny = _Tiny(economy, env, grid)
    out = []
    for pair in all_policy_pairs(tiny.n):
        if not tiny.profitable_deviation(pair, tiny.values(pair), tol):
            out.append(pair)
    return out
