"""Stationary Markov-perfect equilibrium on a discretized (K, R) grid.

The solver iterates the coupled Bellman system of the two blocs. At each node
it forms both regimes' flow payoff plus discounted expected continuation,
takes each bloc's continuation gain from unification, and selects the regime
by the bilateral weak-support rule (unified iff both gains are >= 0).
Updates are synchronous: every node reads the previous iterate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .dynamics import CrisisShock, ExogenousPath, Trajectory, simulate
from .grid import StateGrid
from .model import (
    Economy,
    ExogenousEnv,
    ModelDomainError,
    PolityState,
    Regime,
    effective_capital_static,
    elite_period_payoff,
    institutional_productivity,
    investment,
    output,
    step_capacity,
    step_recognition,
    transfers,
)

log = logging.getLogger(__name__)

REGIMES = (Regime.UNIFIED, Regime.FRAGMENTED)


def flow_payoff(
    economy: Economy, state: PolityState, regime: Regime, env: ExogenousEnv, static_output: bool = False
) -> tuple[float, float]:
    p = economy.params
    A = institutional_productivity(economy.productivity, regime, env.peace)
    if static_output:
        k = effective_capital_static(p.static_capital_base, p.invest_risk_sensitivity, p.risk(regime))
    else:
        k = state.capacity
    Y = output(p, A, k)
    T = transfers(p, regime, env.crisis_intensity)
    return tuple(elite_period_payoff(e, regime, Y, state.recognition, T) for e in economy.elites)


def successor(economy: Economy, state: PolityState, regime: Regime, env: ExogenousEnv) -> PolityState:
    p = economy.params
    A = institutional_productivity(economy.productivity, regime, env.peace)
    return PolityState(
        step_capacity(p, state.capacity, investment(p, A, regime)),
        step_recognition(p, state.recognition, env, state.capacity, economy.recognition_link),
    )


@dataclass(eq=False)
class GridGame:
    """The discretized game: flow payoffs and transition operators on a grid.

    ``payoffs[regime]`` has shape ``(2, n_nodes, n_shocks)``;
    ``transitions[regime]`` is a row-stochastic sparse ``(n_nodes, n_nodes)``
    operator. Crisis shocks enter transfers only, so transitions ignore them.
    """

    economy: Economy
    env: ExogenousEnv
    grid: StateGrid
    shock: CrisisShock | None = None
    static_output: bool = False
    payoffs: dict = field(init=False)
    transitions: dict = field(init=False)
    successors: dict = field(init=False)

    def __post_init__(self):
        nodes = [PolityState(k, r) for k, r in self.grid.nodes]
        self.payoffs, self.transitions, self.successors = {}, {}, {}
        for regime in REGIMES:
            pay = np.empty((2, len(nodes), self.n_shocks))
            for s, env in enumerate(self.shock_envs):
                pay[:, :, s] = np.array(
                    [flow_payoff(self.economy, x, regime, env, self.static_output) for x in nodes]
                ).T
            nxt = np.array([
                [y.capacity, y.recognition]
                for y in (successor(self.economy, x, regime, self.env) for x in nodes)
            ])
            self.payoffs[regime] = pay
            self.successors[regime] = nxt
            self.transitions[regime] = self.grid.weights(nxt)

    @property
    def discount(self) -> float:
        return self.economy.params.elite_discount

    @property
    def shock_envs(self) -> list[ExogenousEnv]:
        if self.shock is None:
            return [self.env]
        return [ExogenousEnv(self.env.peace, self.env.diplomatic_support, self.env.symbolic_support, h)
                for h in self.shock.values]

    @property
    def shock_probs(self) -> np.ndarray:
        return np.ones(1) if self.shock is None else np.asarray(self.shock.probs)

    @property
    def n_shocks(self) -> int:
        return 1 if self.shock is None else len(self.shock.values)

    def regime_values(self, values: np.ndarray) -> dict[Regime, np.ndarray]:
        """Flow plus discounted expected continuation, per regime, shape ``(2, n, S)``."""
        expected = values @ self.shock_probs  # (2, n)
        out = {}
        for regime in REGIMES:
            cont = np.stack([self.transitions[regime] @ expected[i] for i in (0, 1)])
            out[regime] = self.payoffs[regime] + self.discount * cont[:, :, None]
        return out

    def sweep(self, values: np.ndarray):
        q = self.regime_values(values)
        deltas = q[Regime.UNIFIED] - q[Regime.FRAGMENTED]
        unified = (deltas[0] >= 0) & (deltas[1] >= 0)
        new = np.where(unified[None], q[Regime.UNIFIED], q[Regime.FRAGMENTED])
        return new, deltas, unified


@dataclass(eq=False)
class EquilibriumSolution:
    game: GridGame
    values: np.ndarray             # (2, n_nodes, n_shocks)
    deltas: np.ndarray             # continuation gains, same shape
    actions: np.ndarray            # True = U, shape (2, n_nodes, n_shocks)
    regime_policy: np.ndarray      # True = unified, shape (n_nodes, n_shocks)
    residual_history: list[float]
    converged: bool
    iterations: int

    @property
    def grid(self) -> StateGrid:
        return self.game.grid

    def _squeeze(self, arr):
        return arr[..., 0] if arr.shape[-1] == 1 else arr

    @property
    def V1(self) -> np.ndarray:
        return self._squeeze(self.values[0])

    @property
    def V2(self) -> np.ndarray:
        return self._squeeze(self.values[1])

    def regimes(self) -> np.ndarray:
        return np.where(self._squeeze(self.regime_policy), Regime.UNIFIED.value, Regime.FRAGMENTED.value)

    def contraction_ratio(self, window: int = 5) -> float:
        """Median ratio of successive residuals over the last ``window`` informative steps."""
        h = np.asarray(self.residual_history)
        h = h[h > 1e-300]
        if h.size < 3:
            return 0.0
        ratios = h[1:] / h[:-1]
        return float(np.median(ratios[-window:]))


def solve_stationary(
    economy: Economy,
    env: ExogenousEnv,
    grid: StateGrid,
    tol: float = 1e-9,
    max_iter: int = 100_000,
    *,
    shock: CrisisShock | None = None,
    static_output: bool = False,
    initial: np.ndarray | None = None,
) -> EquilibriumSolution:
    """Value iteration until the sup-norm change is at most ``tol``.

    Non-convergence is not an error: the result carries ``converged=False``.
    ``static_output`` evaluates output on each regime's static effective
    capital instead of node capacity (repeated static calibration).
    """
    if not tol > 0:
        raise ModelDomainError("tol must be > 0")
    game = GridGame(economy, env, grid, shock, static_output)
    values = np.zeros((2, grid.size, game.n_shocks)) if initial is None else np.array(initial, dtype=float)
    history: list[float] = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        new, deltas, unified = game.sweep(values)
        change = float(np.max(np.abs(new - values)))
        history.append(change)
        values = new
        if change <= tol:
            converged = True
            break
    if not converged:
        log.warning("value iteration stopped after %d sweeps with residual %.3g", it, history[-1])
    # policy consistent with the returned values
    _, deltas, unified = game.sweep(values)
    actions = deltas >= 0
    return EquilibriumSolution(game, values, deltas, actions, unified, history, converged, it)


def bellman_residual(solution: EquilibriumSolution, game: GridGame | None = None, values: np.ndarray | None = None) -> float:
    game = game or solution.game
    vals = solution.values if values is None else values
    new, _, _ = game.sweep(vals)
    return float(np.max(np.abs(new - vals)))


def _regime_grid(actions: np.ndarray) -> np.ndarray:
    return actions[0] & actions[1]


def evaluate_policy(game: GridGame, actions: np.ndarray) -> np.ndarray:
    """Exact values of a fixed action pair via a sparse linear solve."""
    n, S = game.grid.size, game.n_shocks
    unified = _regime_grid(actions).ravel()  # index x * S + s
    mix = np.outer(np.ones(S), game.shock_probs)
    blocks = {r: sparse.kron(game.transitions[r], mix, format="csr") for r in REGIMES}
    M = sparse.diags(unified.astype(float)) @ blocks[Regime.UNIFIED] + sparse.diags(
        (~unified).astype(float)
    ) @ blocks[Regime.FRAGMENTED]
    A = (sparse.identity(n * S, format="csc") - game.discount * M).tocsc()
    out = np.empty((2, n, S))
    for i in (0, 1):
        pi = np.where(unified, game.payoffs[Regime.UNIFIED][i].ravel(), game.payoffs[Regime.FRAGMENTED][i].ravel())
        out[i] = np.atleast_1d(spsolve(A, pi)).reshape(n, S)
    return out


@dataclass(frozen=True)
class DeviationReport:
    passed: bool
    worst_violation: float
    node: int | None
    shock: int | None
    elite: int | None
    state: tuple[float, float] | None
    tol: float


def deviation_gains(game: GridGame, actions: np.ndarray) -> np.ndarray:
    """One-shot deviation gains ``(2, n, S)`` for a fixed action pair."""
    values = evaluate_policy(game, actions)
    q = game.regime_values(values)
    unified = _regime_grid(actions)
    gains = np.empty_like(values)
    for i in (0, 1):
        other_u = actions[1 - i]
        own_u = actions[i]
        # deviating flips own action; regime is unified only if both end up at U
        dev_unified = (~own_u) & other_u
        dev_val = np.where(dev_unified, q[Regime.UNIFIED][i], q[Regime.FRAGMENTED][i])
        eq_val = np.where(unified, q[Regime.UNIFIED][i], q[Regime.FRAGMENTED][i])
        gains[i] = dev_val - eq_val
    return gains


def verify_no_deviation(
    solution: EquilibriumSolution,
    game: GridGame | None = None,
    tol: float = 1e-8,
    actions: np.ndarray | None = None,
) -> DeviationReport:
    """Check every node, shock and bloc for a profitable unilateral deviation.

    The action pair (the solution's unless ``actions`` is given) is valued
    exactly before deviations are priced, so a tampered policy is judged on
    its own continuation values.
    """
    game = game or solution.game
    acts = solution.actions if actions is None else np.asarray(actions, dtype=bool)
    gains = deviation_gains(game, acts)
    worst = float(gains.max())
    if worst <= 0:
        return DeviationReport(True, max(worst, 0.0), None, None, None, None, tol)
    i, x, s = np.unravel_index(int(np.argmax(gains)), gains.shape)
    k, r = game.grid.nodes[x]
    return DeviationReport(worst <= tol, worst, int(x), int(s), int(i) + 1, (float(k), float(r)), tol)


def continuation_deltas(solution: EquilibriumSolution, state: PolityState, env: ExogenousEnv) -> np.ndarray:
    """Each bloc's continuation gain from unification at an arbitrary state."""
    game = solution.game
    expected = solution.values @ game.shock_probs  # (2, n)
    q = {}
    for regime in REGIMES:
        flow = np.array(flow_payoff(game.economy, state, regime, env, game.static_output))
        nxt = successor(game.economy, state, regime, env)
        cont = game.grid.interpolate(expected.T, np.array([[nxt.capacity, nxt.recognition]]))[0]
        q[regime] = flow + game.discount * cont
    return q[Regime.UNIFIED] - q[Regime.FRAGMENTED]


def value_policy(solution: EquilibriumSolution):
    """Closed-loop decision rule evaluated against the solved value functions."""

    def rule(t, state, env):
        d = continuation_deltas(solution, state, env)
        return Regime.UNIFIED if d[0] >= 0 and d[1] >= 0 else Regime.FRAGMENTED

    return rule


@dataclass(frozen=True)
class Classification:
    label: str  # "nominal-statehood", "unified-convergent" or "other"
    burn_in: int | None
    evidence: dict
    trajectory: Trajectory

    def as_dict(self) -> dict:
        return {"label": self.label, "burn_in": self.burn_in, "evidence": self.evidence}


def _first_tail(ok: np.ndarray, limit: int) -> int | None:
    """Smallest t0 <= limit such that ok[t0:] is all true."""
    bad = np.flatnonzero(~ok)
    t0 = 0 if bad.size == 0 else int(bad[-1]) + 1
    return t0 if t0 <= limit else None


def classify_equilibrium(
    solution: EquilibriumSolution,
    x0: PolityState,
    horizon: int,
    *,
    seed: int = 0,
    slack: float = 1e-9,
) -> Classification:
    """Simulate the closed-loop path from ``x0`` and label its long-run behaviour.

    The burn-in ``t0`` is the earliest period from which a condition holds for
    the rest of the path; it must fall within the first half of the horizon.
    """
    game = solution.game
    params = game.economy.params
    path = ExogenousPath.constant(game.env, horizon, game.shock, seed)
    traj = simulate(game.economy, path, value_policy(solution), x0)
    limit = horizon // 2

    fragmented = np.array([r is Regime.FRAGMENTED for r in traj.regimes] + [True])
    unified = np.array([r is Regime.UNIFIED for r in traj.regimes] + [True])
    K, R = traj.capacity, traj.recognition
    G = traj.gaps(params.gap_scale)
    rec_ok = R >= params.recognition_threshold
    cap_ok = K < params.capacity_threshold
    gap_ok = np.append(np.diff(G) >= -slack, True)

    conditions = {
        "fragmented": fragmented,
        "recognition_above_threshold": rec_ok,
        "capacity_below_threshold": cap_ok,
        "gap_non_decreasing": gap_ok,
    }
    tails = {name: _first_tail(ok, limit) for name, ok in conditions.items()}
    evidence = {
        name: {"holds": tails[name] is not None, "from_period": tails[name],
               "violations": int((~ok[:-1]).sum()) if name in ("fragmented", "gap_non_decreasing") else int((~ok).sum())}
        for name, ok in conditions.items()
    }
    evidence["horizon"] = horizon
    evidence["final_state"] = {"K": float(K[-1]), "R": float(R[-1]), "G": float(G[-1])}
    evidence["regimes"] = "".join(r.value for r in traj.regimes)

    if all(t is not None for t in tails.values()):
        t0 = max(tails.values())
        return Classification("nominal-statehood", t0, evidence, traj)
    t_u = _first_tail(unified, limit)
    evidence["unified_from_period"] = t_u
    if t_u is not None and horizon > 0:
        return Classification("unified-convergent", t_u, evidence, traj)
    return Classification("other", None, evidence, traj)
