"""One-period analysis: the 2x2 stage game and closed-form thresholds."""

from __future__ import annotations

from dataclasses import dataclass

from .model import (
    ACTION_PROFILES,
    Action,
    EliteParams,
    ExogenousEnv,
    ModelDomainError,
    ModelParams,
    PolityState,
    ProductivitySpec,
    Regime,
    effective_capital_static,
    elite_period_payoff,
    institutional_productivity,
    output,
    regime_of,
    transfers,
)


class UndefinedThresholdError(ModelDomainError):
    """A threshold's defining equation has no unique root."""


Profile = tuple[Action, Action]


@dataclass(frozen=True)
class StaticContext:
    output_unified: float
    output_fragmented: float
    transfer_unified: float
    transfer_fragmented: float
    recognition: float = 0.0

    @property
    def transfer_gap(self) -> float:
        return self.transfer_fragmented - self.transfer_unified


def static_context(params: ModelParams, spec: ProductivitySpec, env: ExogenousEnv) -> StaticContext:
    """Static calibration: each regime runs on capital ``K0 - lambda * q``."""
    ys = {}
    for regime in Regime:
        k = effective_capital_static(
            params.static_capital_base, params.invest_risk_sensitivity, params.risk(regime)
        )
        ys[regime] = output(params, institutional_productivity(spec, regime, env.peace), k)
    return StaticContext(
        ys[Regime.UNIFIED],
        ys[Regime.FRAGMENTED],
        transfers(params, Regime.UNIFIED, env.crisis_intensity),
        transfers(params, Regime.FRAGMENTED, env.crisis_intensity),
    )


def state_context(
    params: ModelParams, spec: ProductivitySpec, env: ExogenousEnv, state: PolityState
) -> StaticContext:
    """Both regimes evaluated on the same inherited capacity."""
    return StaticContext(
        output(params, institutional_productivity(spec, Regime.UNIFIED, env.peace), state.capacity),
        output(params, institutional_productivity(spec, Regime.FRAGMENTED, env.peace), state.capacity),
        transfers(params, Regime.UNIFIED, env.crisis_intensity),
        transfers(params, Regime.FRAGMENTED, env.crisis_intensity),
        state.recognition,
    )


def regime_payoff(elite: EliteParams, regime: Regime, ctx: StaticContext) -> float:
    if regime is Regime.UNIFIED:
        return elite_period_payoff(elite, regime, ctx.output_unified, ctx.recognition, ctx.transfer_unified)
    return elite_period_payoff(elite, regime, ctx.output_fragmented, ctx.recognition, ctx.transfer_fragmented)


@dataclass(frozen=True)
class StageBimatrix:
    payoffs: dict[Profile, tuple[float, float]]

    def __getitem__(self, profile: Profile) -> tuple[float, float]:
        return self.payoffs[profile]


def stage_bimatrix(elites: tuple[EliteParams, EliteParams], ctx: StaticContext) -> StageBimatrix:
    by_regime = {
        regime: tuple(regime_payoff(e, regime, ctx) for e in elites) for regime in Regime
    }
    return StageBimatrix({prof: by_regime[regime_of(*prof)] for prof in ACTION_PROFILES})


def static_delta(elite: EliteParams, ctx: StaticContext) -> float:
    """Signed one-period gain from unification; >= 0 means the bloc supports it."""
    return (
        elite.share_unified * ctx.output_unified
        - elite.share_fragmented * ctx.output_fragmented
        - (elite.rents_fragmented - elite.rents_unified)
        - (elite.control_fragmented - elite.control_unified)
        - elite.transfer_capture * ctx.transfer_gap
    )


def paper_decision_profile(delta1: float, delta2: float) -> Regime:
    """Unified iff both blocs weakly gain; ties go to unification."""
    if delta1 >= 0 and delta2 >= 0:
        return Regime.UNIFIED
    return Regime.FRAGMENTED


@dataclass(frozen=True)
class NashSet:
    """Weak pure-strategy Nash profiles.

    ``indifferent`` holds the members where some bloc is exactly indifferent
    to its unilateral deviation, i.e. that are not strict equilibria.
    """

    profiles: frozenset[Profile]
    indifferent: frozenset[Profile]

    def __contains__(self, profile) -> bool:
        return profile in self.profiles

    def __len__(self) -> int:
        return len(self.profiles)

    @property
    def strict(self) -> frozenset[Profile]:
        return self.profiles - self.indifferent


def _flip(a: Action) -> Action:
    return Action.F if a is Action.U else Action.U


def pure_nash_profiles(bimatrix: StageBimatrix) -> NashSet:
    members, flagged = set(), set()
    for prof in ACTION_PROFILES:
        gains = []
        for i in (0, 1):
            dev = list(prof)
            dev[i] = _flip(dev[i])
            gains.append(bimatrix[tuple(dev)][i] - bimatrix[prof][i])
        if max(gains) > 0:
            continue
        members.add(prof)
        if max(gains) == 0:
            flagged.add(prof)
    return NashSet(frozenset(members), frozenset(flagged))


def _formal_gain(elite: EliteParams, ctx: StaticContext) -> float:
    return elite.share_unified * ctx.output_unified - elite.share_fragmented * ctx.output_fragmented


def critical_transfer_differential(elite: EliteParams, ctx: StaticContext) -> float:
    if elite.transfer_capture == 0:
        raise UndefinedThresholdError("transfer capture is zero; no transfer differential sets the gain to zero")
    return (
        _formal_gain(elite, ctx)
        - (elite.rents_fragmented - elite.rents_unified)
        - (elite.control_fragmented - elite.control_unified)
    ) / elite.transfer_capture


def critical_control_premium(elite: EliteParams, ctx: StaticContext) -> float:
    return (
        _formal_gain(elite, ctx)
        - (elite.rents_fragmented - elite.rents_unified)
        - elite.transfer_capture * ctx.transfer_gap
    )


def critical_rent_gap(elite: EliteParams, ctx: StaticContext) -> float:
    return (
        _formal_gain(elite, ctx)
        - (elite.control_fragmented - elite.control_unified)
        - elite.transfer_capture * ctx.transfer_gap
    )


@dataclass(frozen=True)
class PeaceThreshold:
    value: float
    # "inside", "above" (unification never attractive on [0, 1]) or "below" (always attractive)
    position: str

    @property
    def attainable(self) -> bool:
        return self.position == "inside"


def peace_credibility_threshold(
    elite: EliteParams,
    spec: ProductivitySpec,
    params: ModelParams,
    env: ExogenousEnv = ExogenousEnv(),
) -> PeaceThreshold:
    """Peace level at which the static gain of ``elite`` crosses zero.

    Outputs use the static effective capital of each regime; ``env.peace``
    is ignored. With a flat fragmented slope this is the familiar
    ``(wedges + s_F Y_F - s_U A_U0 K_U^a) / (s_U kappa K_U^a)``.
    The result is not clamped to [0, 1].
    """
    scale = {}
    for regime in Regime:
        k = effective_capital_static(
            params.static_capital_base, params.invest_risk_sensitivity, params.risk(regime)
        )
        scale[regime] = output(params, 1.0, k)
    wedges = (
        (elite.rents_fragmented - elite.rents_unified)
        + (elite.control_fragmented - elite.control_unified)
        + elite.transfer_capture
        * (transfers(params, Regime.FRAGMENTED, env.crisis_intensity)
           - transfers(params, Regime.UNIFIED, env.crisis_intensity))
    )
    su, sf = elite.share_unified, elite.share_fragmented
    yu, yf = scale[Regime.UNIFIED], scale[Regime.FRAGMENTED]
    denom = su * spec.slope_unified * yu - sf * spec.slope_fragmented * yf
    if denom == 0:
        raise UndefinedThresholdError("static gain does not vary with peace credibility")
    p_star = (wedges + sf * spec.base_fragmented * yf - su * spec.base_unified * yu) / denom
    if p_star > 1:
        position = "above"
    elif p_star < 0:
        position = "below"
    else:
        position = "inside"
    return PeaceThreshold(p_star, position)


def static_delta_at_peace(
    elite: EliteParams, spec: ProductivitySpec, params: ModelParams, env: ExogenousEnv, peace: float
) -> float:
    """Static gain with productivity rebuilt at ``peace``.

    The affine form is evaluated directly so ``peace`` may leave [0, 1];
    threshold round-trips rely on that.
    """
    ku = effective_capital_static(params.static_capital_base, params.invest_risk_sensitivity, params.risk_unified)
    kf = effective_capital_static(params.static_capital_base, params.invest_risk_sensitivity, params.risk_fragmented)
    ctx = StaticContext(
        output(params, spec.base_unified + spec.slope_unified * peace, ku),
        output(params, spec.base_fragmented + spec.slope_fragmented * peace, kf),
        transfers(params, Regime.UNIFIED, env.crisis_intensity),
        transfers(params, Regime.FRAGMENTED, env.crisis_intensity),
    )
    return static_delta(elite, ctx)
