"""Primitive equations of the two-bloc statehood game.

Every function here is a pure evaluation of one model equation. Higher-level
modules (stage game, dynamics, the equilibrium solver) compose them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from enum import Enum
from typing import Iterable


class ModelDomainError(ValueError):
    """An argument lies outside the domain of a model equation."""


class Regime(str, Enum):
    UNIFIED = "U"
    FRAGMENTED = "F"

    def __str__(self) -> str:
        return self.value


class Action(str, Enum):
    U = "U"
    F = "F"

    def __str__(self) -> str:
        return self.value


ACTION_PROFILES: tuple[tuple[Action, Action], ...] = (
    (Action.U, Action.U),
    (Action.U, Action.F),
    (Action.F, Action.U),
    (Action.F, Action.F),
)


def regime_of(a1: Action, a2: Action) -> Regime:
    """Unification needs both blocs; a single defection keeps fragmentation."""
    if a1 is Action.U and a2 is Action.U:
        return Regime.UNIFIED
    return Regime.FRAGMENTED


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ModelDomainError(msg)


def _finite(obj, names: Iterable[str]) -> None:
    for name in names:
        value = getattr(obj, name)
        _check(math.isfinite(value), f"{type(obj).__name__}.{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class ProductivitySpec:
    """Affine institutional productivity ``base + slope * peace`` per regime."""

    base_unified: float
    base_fragmented: float
    slope_unified: float = 0.0
    slope_fragmented: float = 0.0

    def __post_init__(self):
        _finite(self, [f.name for f in fields(self)])
        for f in fields(self):
            _check(getattr(self, f.name) >= 0, f"ProductivitySpec.{f.name} must be >= 0")


@dataclass(frozen=True)
class ModelParams:
    output_elasticity: float
    labor: float
    invest_base: float
    invest_prod_sensitivity: float
    invest_risk_sensitivity: float
    risk_unified: float
    risk_fragmented: float
    depreciation: float
    recognition_decay: float
    diplomatic_weight: float
    symbolic_weight: float
    capacity_feedback: float
    transfer_base: float
    transfer_frag_premium: float
    transfer_crisis_sensitivity: float
    elite_discount: float
    gap_scale: float
    recognition_threshold: float
    capacity_threshold: float
    welfare_capacity_weight: float
    welfare_recognition_weight: float
    static_capital_base: float

    def __post_init__(self):
        _finite(self, [f.name for f in fields(self)])
        _check(0 < self.output_elasticity < 1, "output_elasticity must lie in (0, 1)")
        _check(self.labor > 0, "labor must be > 0")
        _check(self.invest_base > 0, "invest_base must be > 0")
        # closed intervals admit the full-depreciation and memoryless limits
        _check(0 <= self.depreciation <= 1, "depreciation must lie in [0, 1]")
        _check(0 <= self.recognition_decay <= 1, "recognition_decay must lie in [0, 1]")
        _check(0 < self.elite_discount < 1, "elite_discount must lie in (0, 1)")
        for name in (
            "invest_prod_sensitivity", "invest_risk_sensitivity", "risk_unified",
            "risk_fragmented", "diplomatic_weight", "symbolic_weight", "capacity_feedback",
            "transfer_base", "transfer_frag_premium", "transfer_crisis_sensitivity",
            "gap_scale", "recognition_threshold", "capacity_threshold",
            "welfare_capacity_weight", "welfare_recognition_weight", "static_capital_base",
        ):
            _check(getattr(self, name) >= 0, f"{name} must be >= 0")

    def risk(self, regime: Regime) -> float:
        return self.risk_unified if regime is Regime.UNIFIED else self.risk_fragmented


@dataclass(frozen=True)
class EliteParams:
    share_unified: float
    share_fragmented: float
    rents_unified: float
    rents_fragmented: float
    control_unified: float
    control_fragmented: float
    recognition_value: float = 0.0
    transfer_capture: float = 0.0

    def __post_init__(self):
        _finite(self, [f.name for f in fields(self)])
        _check(0 <= self.share_unified <= 1, "share_unified must lie in [0, 1]")
        _check(0 <= self.share_fragmented <= 1, "share_fragmented must lie in [0, 1]")
        _check(0 <= self.transfer_capture <= 1, "transfer_capture must lie in [0, 1]")
        _check(self.recognition_value >= 0, "recognition_value must be >= 0")

    def share(self, regime: Regime) -> float:
        return self.share_unified if regime is Regime.UNIFIED else self.share_fragmented

    def rents(self, regime: Regime) -> float:
        return self.rents_unified if regime is Regime.UNIFIED else self.rents_fragmented

    def control(self, regime: Regime) -> float:
        return self.control_unified if regime is Regime.UNIFIED else self.control_fragmented


@dataclass(frozen=True)
class PolityState:
    capacity: float
    recognition: float

    def __post_init__(self):
        _finite(self, ("capacity", "recognition"))
        _check(self.capacity >= 0, "capacity must be >= 0")
        _check(self.recognition >= 0, "recognition must be >= 0")


@dataclass(frozen=True)
class ExogenousEnv:
    peace: float = 0.0
    diplomatic_support: float = 0.0
    symbolic_support: float = 0.0
    crisis_intensity: float = 0.0

    def __post_init__(self):
        _finite(self, [f.name for f in fields(self)])
        # dataclass is frozen; clamping goes through object.__setattr__
        object.__setattr__(self, "peace", min(1.0, max(0.0, self.peace)))
        for name in ("diplomatic_support", "symbolic_support", "crisis_intensity"):
            _check(getattr(self, name) >= 0, f"{name} must be >= 0")


RECOGNITION_LINKS = ("linear", "saturating")


def capacity_link(capacity: float, form: str = "linear") -> float:
    """Weakly increasing map from capacity into recognition accumulation."""
    if form == "linear":
        return capacity
    if form == "saturating":
        return capacity / (1.0 + capacity)
    raise ModelDomainError(f"unknown recognition link {form!r}; expected one of {RECOGNITION_LINKS}")


def institutional_productivity(spec: ProductivitySpec, regime: Regime, peace: float) -> float:
    if not 0.0 <= peace <= 1.0:
        raise ModelDomainError(f"peace must lie in [0, 1], got {peace!r}")
    if regime is Regime.UNIFIED:
        return spec.base_unified + spec.slope_unified * peace
    return spec.base_fragmented + spec.slope_fragmented * peace


def output(params: ModelParams, productivity: float, capacity: float) -> float:
    """Cobb-Douglas output ``A K^a L^(1-a)``."""
    if capacity < 0:
        raise ModelDomainError(f"capacity must be >= 0, got {capacity!r}")
    a = params.output_elasticity
    return productivity * capacity**a * params.labor ** (1.0 - a)


def investment(params: ModelParams, productivity: float, regime: Regime) -> float:
    # may go negative; step_capacity floors the stock instead
    return (
        params.invest_base
        + params.invest_prod_sensitivity * productivity
        - params.invest_risk_sensitivity * params.risk(regime)
    )


def effective_capital_static(base: float, sensitivity: float, risk: float) -> float:
    return max(0.0, base - sensitivity * risk)


def step_capacity(params: ModelParams, capacity: float, invest: float) -> float:
    return max(0.0, (1.0 - params.depreciation) * capacity + invest)


def step_recognition(
    params: ModelParams,
    recognition: float,
    env: ExogenousEnv,
    capacity: float,
    link: str = "linear",
) -> float:
    nxt = (
        (1.0 - params.recognition_decay) * recognition
        + params.diplomatic_weight * env.diplomatic_support
        + params.symbolic_weight * env.symbolic_support
        + params.capacity_feedback * capacity_link(capacity, link)
    )
    return max(0.0, nxt)


def transfers(params: ModelParams, regime: Regime, crisis: float) -> float:
    if crisis < 0:
        raise ModelDomainError(f"crisis intensity must be >= 0, got {crisis!r}")
    premium = params.transfer_frag_premium if regime is Regime.FRAGMENTED else 0.0
    return params.transfer_base + premium + params.transfer_crisis_sensitivity * crisis


def elite_period_payoff(
    elite: EliteParams, regime: Regime, output_: float, recognition: float, transfer: float
) -> float:
    return (
        elite.share(regime) * output_
        + elite.rents(regime)
        + elite.control(regime)
        + elite.recognition_value * recognition
        + elite.transfer_capture * transfer
    )


def welfare(
    params: ModelParams,
    elites: tuple[EliteParams, EliteParams],
    regime: Regime,
    output_: float,
    capacity: float,
    recognition: float,
) -> float:
    rents = sum(e.rents(regime) for e in elites)
    return (
        output_
        - rents
        + params.welfare_capacity_weight * capacity
        + params.welfare_recognition_weight * recognition
    )


def recognition_capacity_gap(params: ModelParams, state: PolityState) -> float:
    return state.recognition - params.gap_scale * state.capacity


def is_nominal_statehood(params: ModelParams, state: PolityState) -> bool:
    return (
        state.recognition >= params.recognition_threshold
        and state.capacity < params.capacity_threshold
    )


@dataclass(frozen=True)
class Economy:
    """Everything needed to evaluate payoffs and transitions at a state."""

    params: ModelParams
    elites: tuple[EliteParams, EliteParams]
    productivity: ProductivitySpec
    recognition_link: str = "linear"

    def __post_init__(self):
        _check(len(self.elites) == 2, "exactly two elite blocs are modelled")
        capacity_link(0.0, self.recognition_link)

    def period(self, state: PolityState, regime: Regime, env: ExogenousEnv) -> "PeriodOutcome":
        """Evaluate one period at ``state`` under ``regime``."""
        p = self.params
        A = institutional_productivity(self.productivity, regime, env.peace)
        Y = output(p, A, state.capacity)
        I = investment(p, A, regime)
        T = transfers(p, regime, env.crisis_intensity)
        pis = tuple(elite_period_payoff(e, regime, Y, state.recognition, T) for e in self.elites)
        W = welfare(p, self.elites, regime, Y, state.capacity, state.recognition)
        nxt = PolityState(
            step_capacity(p, state.capacity, I),
            step_recognition(p, state.recognition, env, state.capacity, self.recognition_link),
        )
        return PeriodOutcome(regime, state, A, Y, I, T, pis, W, recognition_capacity_gap(p, state), nxt)


@dataclass(frozen=True)
class PeriodOutcome:
    regime: Regime
    state: PolityState
    productivity: float
    output: float
    investment: float
    transfer: float
    payoffs: tuple[float, float]
    welfare: float
    gap: float
    next_state: PolityState


def assumption_violations(
    params: ModelParams,
    elites: Iterable[EliteParams],
    spec: ProductivitySpec,
) -> list[tuple[str, str]]:
    """Return ``(code, message)`` for each of A1, A2, A3, A5 that fails."""
    out: list[tuple[str, str]] = []
    a_u0, a_f0 = spec.base_unified, spec.base_fragmented
    a_u1, a_f1 = a_u0 + spec.slope_unified, a_f0 + spec.slope_fragmented
    if not (a_u0 > a_f0 and a_u1 > a_f1):
        out.append(("A1", f"A1 violated: A(U,p) <= A(F,p) at p=0 or p=1 ({a_u0}, {a_f0}; {a_u1}, {a_f1})"))
    if not params.risk_fragmented > params.risk_unified:
        out.append(("A2", f"A2 violated: q_F <= q_U ({params.risk_fragmented} <= {params.risk_unified})"))
    for i, e in enumerate(elites, start=1):
        if not (e.rents_fragmented > e.rents_unified and e.control_fragmented > e.control_unified):
            out.append((
                "A3",
                f"A3 violated for elite {i}: need r(F) > r(U) and gamma(F) > gamma(U)",
            ))
            break
    if not spec.slope_unified > spec.slope_fragmented >= 0:
        out.append(("A5", f"A5 violated: need kappa_U > kappa_F >= 0 ({spec.slope_unified}, {spec.slope_fragmented})"))
    return out
