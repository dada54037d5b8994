from dataclasses import replace

import numpy as np
import pytest

from nominalstate.grid import build_grid
from nominalstate.model import ACTION_PROFILES, Action, EliteParams
from nominalstate.mpe import solve_stationary, verify_no_deviation
from nominalstate.oracle import (
    OracleTooLarge,
    PolicyPair,
    all_policy_pairs,
    brute_force_mpe,
    enumerate_stage_nash,
    policy_value_exact,
)
from nominalstate.stage import StageBimatrix, stage_bimatrix, static_context

FF = (Action.F, Action.F)
UF = (Action.U, Action.F)
FU = (Action.F, Action.U)
ZERO = EliteParams(0, 0, 0, 0, 0, 0, 0, 0)


def test_stage_benchmark(benchmark):
    ctx = static_context(benchmark.model, benchmark.productivity, benchmark.environment)
    assert enumerate_stage_nash(stage_bimatrix(benchmark.elites, ctx)) == {FF, UF, FU}


def test_stage_all_equal():
    bim = StageBimatrix({p: (2.0, -1.0) for p in ACTION_PROFILES})
    assert enumerate_stage_nash(bim) == set(ACTION_PROFILES)


def test_stage_ff_always_member(benchmark):
    from conftest import random_economy_parts

    rng = np.random.default_rng(31)
    for _ in range(200):
        p, elites, spec = random_economy_parts(rng, benchmark.model)
        ctx = static_context(p, spec, benchmark.environment)
        assert FF in enumerate_stage_nash(stage_bimatrix(elites, ctx))


def test_one_node_fragmented_value(benchmark):
    # a node at the fragmented static capital reproduces the static payoff
    grid = build_grid((86, 86), (30, 30), (1, 1), "nearest")
    v1, v2 = policy_value_exact(PolicyPair("F", "F"), grid, benchmark.economy, benchmark.environment)
    assert v1[0] == pytest.approx(155.48, abs=0.01)
    assert v2[0] == pytest.approx(155.48, abs=0.01)


def test_zero_payoffs(dynamic):
    grid = build_grid((40, 160), (0, 120), (2, 2), "nearest")
    econ = replace(dynamic.economy, elites=(ZERO, ZERO))
    for pair in all_policy_pairs(grid.size):
        v1, v2 = policy_value_exact(pair, grid, econ, dynamic.environment)
        assert not v1.any() and not v2.any()


def test_absorbing_two_node_chain(dynamic):
    # full depreciation and flat investment send both nodes to K = 100
    p = replace(dynamic.model, depreciation=1.0, invest_base=100.0, invest_prod_sensitivity=0.0,
                invest_risk_sensitivity=0.0, elite_discount=0.8)
    econ = replace(dynamic.economy, params=p)
    env = dynamic.environment
    grid = build_grid((50, 100), (30, 30), (2, 1), "nearest")
    v1, _ = policy_value_exact(PolicyPair("FF", "FF"), grid, econ, env)
    e = econ.elites[0]
    a_f = 0.72
    pi = [e.share_fragmented * a_f * k ** 0.35 + e.rents_fragmented + e.control_fragmented
          + e.transfer_capture * (4 + 6) for k in (50.0, 100.0)]
    v_hi = pi[1] / (1 - 0.8)
    v_lo = pi[0] + 0.8 * v_hi
    assert v1[1] == pytest.approx(v_hi, abs=1e-10)
    assert v1[0] == pytest.approx(v_lo, abs=1e-10)


def test_brute_force_one_node(benchmark):
    grid = build_grid((86, 86), (30, 30), (1, 1), "nearest")
    assert PolicyPair("F", "F") in brute_force_mpe(grid, benchmark.economy, benchmark.environment)


def test_brute_force_all_equal(dynamic):
    grid = build_grid((40, 160), (0, 120), (2, 1), "nearest")
    econ = replace(dynamic.economy, elites=(ZERO, ZERO))
    assert len(brute_force_mpe(grid, econ, dynamic.environment)) == 16


def test_too_large(dynamic):
    grid = build_grid((40, 160), (0, 120), (5, 1), "nearest")
    with pytest.raises(OracleTooLarge):
        brute_force_mpe(grid, dynamic.economy, dynamic.environment)


def test_membership_agrees_with_verifier(benchmark):
    """For every policy pair, solver-side verification equals oracle membership."""
    from conftest import tiny_instance

    rng = np.random.default_rng(41)
    for _ in range(8):
        econ, env, grid = tiny_instance(rng, benchmark.model)
        sol = solve_stationary(econ, env, grid, tol=1e-12)
        members = set(brute_force_mpe(grid, econ, env))
        assert members
        for pair in all_policy_pairs(grid.size):
            verdict = verify_no_deviation(sol, tol=1e-9, actions=pair.as_array()).passed
            assert verdict == (pair in members)
