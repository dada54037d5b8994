"""Trajectory simulation, path comparisons and finite-difference comparative statics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence, Union

import numpy as np

from .model import (
    Economy,
    ExogenousEnv,
    ModelDomainError,
    PeriodOutcome,
    PolityState,
    Regime,
    recognition_capacity_gap,
)
from .stage import paper_decision_profile, state_context, static_context, static_delta


@dataclass(frozen=True)
class CrisisShock:
    """I.i.d. finite-support distribution for crisis intensity."""

    values: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        probs = tuple(float(p) for p in self.probs)
        if not vals or len(vals) != len(probs):
            raise ModelDomainError("crisis shock needs matching, non-empty values and probs")
        if any(v < 0 or not math.isfinite(v) for v in vals):
            raise ModelDomainError("crisis values must be finite and >= 0")
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-12:
            raise ModelDomainError("crisis probabilities must be >= 0 and sum to 1")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "probs", probs)

    @property
    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))


@dataclass(frozen=True)
class ExogenousPath:
    envs: tuple[ExogenousEnv, ...]
    crisis: CrisisShock | None = None
    seed: int = 0

    @classmethod
    def constant(cls, env: ExogenousEnv, horizon: int, crisis: CrisisShock | None = None, seed: int = 0):
        if horizon < 0:
            raise ModelDomainError("horizon must be >= 0")
        return cls(tuple([env] * horizon), crisis, seed)

    @property
    def horizon(self) -> int:
        return len(self.envs)

    def realize(self) -> list[ExogenousEnv]:
        """Per-period environments with crisis draws substituted when a shock is set."""
        if self.crisis is None:
            return list(self.envs)
        rng = np.random.default_rng(self.seed)
        draws = rng.choice(np.asarray(self.crisis.values), p=np.asarray(self.crisis.probs), size=self.horizon)
        return [replace(env, crisis_intensity=float(h)) for env, h in zip(self.envs, draws)]


Policy = Callable[[int, PolityState, ExogenousEnv], Regime]


def fixed_policy(regime: Regime) -> Policy:
    return lambda t, state, env: regime


def sequence_policy(regimes: Sequence[Regime]) -> Policy:
    seq = list(regimes)
    return lambda t, state, env: seq[t]


def myopic_policy(economy: Economy) -> Policy:
    """Decision rule on one-period payoffs at the inherited capacity."""

    def rule(t, state, env):
        ctx = state_context(economy.params, economy.productivity, env, state)
        return paper_decision_profile(*(static_delta(e, ctx) for e in economy.elites))

    return rule


@dataclass(frozen=True)
class Trajectory:
    initial: PolityState
    records: tuple[PeriodOutcome, ...] = ()

    def __len__(self) -> int:
        return len(self.records)

    @property
    def horizon(self) -> int:
        return len(self.records)

    @property
    def states(self) -> list[PolityState]:
        return [self.initial] + [r.next_state for r in self.records]

    @property
    def capacity(self) -> np.ndarray:
        return np.array([s.capacity for s in self.states])

    @property
    def recognition(self) -> np.ndarray:
        return np.array([s.recognition for s in self.states])

    @property
    def regimes(self) -> list[Regime]:
        return [r.regime for r in self.records]

    def gaps(self, gap_scale: float) -> np.ndarray:
        return self.recognition - gap_scale * self.capacity


TRAJECTORY_COLUMNS = ("t", "regime", "K", "R", "A", "Y", "I", "T", "pi1", "pi2", "W", "G")


def trajectory_rows(traj: Trajectory, economy: Economy) -> list[dict]:
    """One row per state; the terminal state carries no flow quantities."""
    rows = []
    for t, rec in enumerate(traj.records):
        rows.append({
            "t": t, "regime": rec.regime.value, "K": rec.state.capacity, "R": rec.state.recognition,
            "A": rec.productivity, "Y": rec.output, "I": rec.investment, "T": rec.transfer,
            "pi1": rec.payoffs[0], "pi2": rec.payoffs[1], "W": rec.welfare, "G": rec.gap,
        })
    last = traj.states[-1]
    row = dict.fromkeys(TRAJECTORY_COLUMNS, None)
    row.update(t=traj.horizon, K=last.capacity, R=last.recognition,
               G=recognition_capacity_gap(economy.params, last))
    rows.append(row)
    return rows


def simulate(
    economy: Economy,
    path: ExogenousPath,
    policy: Union[Policy, Regime],
    x0: PolityState,
) -> Trajectory:
    if isinstance(policy, Regime):
        policy = fixed_policy(policy)
    state = x0
    records = []
    for t, env in enumerate(path.realize()):
        rec = economy.period(state, policy(t, state, env), env)
        records.append(rec)
        state = rec.next_state
    return Trajectory(x0, tuple(records))


@dataclass(frozen=True)
class PathComparison:
    unified: Trajectory
    fragmented: Trajectory
    gap_scale: float
    capacity_diff: np.ndarray = field(init=False)     # K^U - K^F
    recognition_diff: np.ndarray = field(init=False)  # R^U - R^F
    gap_diff: np.ndarray = field(init=False)          # G^F - G^U

    def __post_init__(self):
        dk = self.unified.capacity - self.fragmented.capacity
        dr = self.unified.recognition - self.fragmented.recognition
        object.__setattr__(self, "capacity_diff", dk)
        object.__setattr__(self, "recognition_diff", dr)
        object.__setattr__(self, "gap_diff", -dr + self.gap_scale * dk)


def compare_paths(economy: Economy, path: ExogenousPath, x0: PolityState) -> PathComparison:
    return PathComparison(
        simulate(economy, path, Regime.UNIFIED, x0),
        simulate(economy, path, Regime.FRAGMENTED, x0),
        economy.params.gap_scale,
    )


@dataclass(frozen=True)
class PsiInterval:
    """Open interval ``(lower, upper)`` of gap scales; may be empty."""

    lower: float
    upper: float

    @property
    def is_empty(self) -> bool:
        return not self.lower < self.upper

    def __contains__(self, psi: float) -> bool:
        return self.lower < psi < self.upper


def gap_divergence_interval(pair: PathComparison, t: int) -> PsiInterval:
    """Gap scales ``psi > 0`` for which the fragmented gap exceeds the unified one at ``t``."""
    if not 0 <= t <= pair.unified.horizon:
        raise ModelDomainError(f"period {t} outside [0, {pair.unified.horizon}]")
    a = -float(pair.recognition_diff[t])  # R^F - R^U
    b = float(pair.capacity_diff[t])      # K^U - K^F
    # a + psi * b > 0 with psi > 0
    if b > 0:
        return PsiInterval(max(0.0, -a / b), math.inf)
    if b < 0:
        return PsiInterval(0.0, a / -b) if a > 0 else PsiInterval(0.0, 0.0)
    return PsiInterval(0.0, math.inf) if a > 0 else PsiInterval(0.0, 0.0)


SENSITIVITY_TARGETS = {
    "tau1": "transfer_frag_premium",
    "transfer_frag_premium": "transfer_frag_premium",
    "p": "peace",
    "peace": "peace",
    "X": "diplomatic_support",
    "diplomatic_support": "diplomatic_support",
    "Z": "symbolic_support",
    "symbolic_support": "symbolic_support",
}


def _perturb(economy: Economy, env: ExogenousEnv, target: str, value: float):
    if target == "transfer_frag_premium":
        if value < 0:
            raise ModelDomainError("perturbed transfer premium leaves [0, inf)")
        return replace(economy, params=replace(economy.params, transfer_frag_premium=value)), env
    if target == "peace" and not 0.0 <= value <= 1.0:
        raise ModelDomainError("perturbed peace credibility leaves [0, 1]")
    if value < 0:
        raise ModelDomainError(f"perturbed {target} is negative")
    return economy, replace(env, **{target: value})


def delta_sensitivity(
    economy: Economy,
    env: ExogenousEnv,
    target: str,
    h: float | None = None,
    *,
    mode: str = "static",
    state: PolityState | None = None,
    grid=None,
    tol: float = 1e-11,
) -> tuple[float, float]:
    """Central finite difference of each bloc's unification gain.

    ``h`` is relative to ``max(1, |value|)``. ``mode="static"`` differentiates
    the static-calibration gain; ``mode="dynamic"`` re-solves the stationary
    equilibrium on ``grid`` and differentiates the continuation gain at ``state``.
    The static gain is affine in every target, so its default step is wide
    (1e-3) to keep cancellation error small; the dynamic default is 1e-5.
    """
    if h is None:
        h = 1e-3 if mode == "static" else 1e-5
    if h <= 0:
        raise ModelDomainError("step h must be > 0")
    try:
        name = SENSITIVITY_TARGETS[target]
    except KeyError:
        raise ModelDomainError(f"unknown sensitivity target {target!r}; expected one of {sorted(SENSITIVITY_TARGETS)}") from None
    base = economy.params.transfer_frag_premium if name == "transfer_frag_premium" else getattr(env, name)
    step = h * max(1.0, abs(base))

    if mode == "static":
        def deltas(econ, e):
            ctx = static_context(econ.params, econ.productivity, e)
            return np.array([static_delta(el, ctx) for el in econ.elites])
    elif mode == "dynamic":
        if state is None or grid is None:
            raise ModelDomainError("dynamic sensitivities need a state and a grid")
        from .mpe import continuation_deltas, solve_stationary

        def deltas(econ, e):
            sol = solve_stationary(econ, e, grid, tol=tol)
            return continuation_deltas(sol, state, e)
    else:
        raise ModelDomainError(f"mode must be 'static' or 'dynamic', got {mode!r}")

    hi, lo = base + step, base - step
    up = deltas(*_perturb(economy, env, name, hi))
    down = deltas(*_perturb(economy, env, name, lo))
    d = (up - down) / (hi - lo)
    return float(d[0]), float(d[1])

