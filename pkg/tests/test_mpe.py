from dataclasses import replace

import numpy as np
import pytest

from nominalstate.dynamics import CrisisShock
from nominalstate.grid import GridError, build_grid
from nominalstate.model import (
    EliteParams,
    PolityState,
    ProductivitySpec,
    Regime,
    elite_period_payoff,
    institutional_productivity,
    investment,
    output,
    step_capacity,
    step_recognition,
    transfers,
)
from nominalstate.mpe import (
    GridGame,
    bellman_residual,
    classify_equilibrium,
    evaluate_policy,
    solve_stationary,
    verify_no_deviation,
)
from nominalstate.stage import paper_decision_profile, state_context, static_delta

U, F = Regime.UNIFIED, Regime.FRAGMENTED


@pytest.fixture(scope="module")
def dynamic_solution(dynamic):
    return solve_stationary(dynamic.economy, dynamic.environment, dynamic.grid.build())


@pytest.fixture(scope="module")
def small_grid():
    return build_grid((40, 160), (0, 120), (7, 7), "multilinear")


class TestGrid:
    def test_uniform(self):
        g = build_grid((0, 100), (0, 50), (5, 3))
        assert g.size == 15
        assert np.allclose(g.k_axis, [0, 25, 50, 75, 100])
        assert np.allclose(g.r_axis, [0, 25, 50])

    def test_single_node(self):
        g = build_grid((10, 10), (5, 5), (1, 1))
        assert g.size == 1
        w = g.weights(np.array([[300.0, -4.0]]))
        assert w.toarray().tolist() == [[1.0]]

    def test_two_nodes(self):
        assert build_grid((0, 100), (0, 1), (2, 2)).k_axis.tolist() == [0, 100]

    @pytest.mark.parametrize("bounds,nodes", [
        ((0, float("inf")), (3, 3)),
        ((0, 100), (0, 3)),
        ((float("nan"), 1), (2, 2)),
    ])
    def test_errors(self, bounds, nodes):
        with pytest.raises(GridError):
            build_grid(bounds, (0, 1), nodes)

    @pytest.mark.parametrize("projection", ["multilinear", "nearest"])
    def test_weights_stochastic_and_clamped(self, projection):
        g = build_grid((0, 10), (0, 4), (6, 3), projection)
        rng = np.random.default_rng(0)
        pts = rng.uniform(-5, 15, size=(200, 2))
        w = g.weights(pts)
        assert np.allclose(np.asarray(w.sum(axis=1)).ravel(), 1.0)
        assert w.min() >= 0
        far = g.weights(np.array([[-100.0, 100.0]])).toarray()[0]
        assert far[g.index(0, 2)] == 1.0

    def test_multilinear_reproduces_linear(self):
        g = build_grid((0, 10), (0, 4), (6, 3))
        f = 2 * g.nodes[:, 0] - 3 * g.nodes[:, 1] + 1
        pts = np.array([[3.3, 1.7], [9.9, 0.1], [0.0, 4.0]])
        assert np.allclose(g.interpolate(f, pts), 2 * pts[:, 0] - 3 * pts[:, 1] + 1, atol=1e-12)


class TestSolver:
    def test_one_node_repeated_stage_game(self, benchmark):
        grid = build_grid((86, 86), (30, 30), (1, 1), "nearest")
        sol = solve_stationary(benchmark.economy, benchmark.environment, grid, static_output=True)
        assert sol.converged
        assert sol.regimes().tolist() == ["F"]
        assert sol.V1[0] == pytest.approx(155.48, abs=0.1)
        assert sol.V2[0] == pytest.approx(15.54768 / 0.1, abs=1e-6)

    def test_one_node_matches_stage_payoff(self, dynamic):
        grid = build_grid((86, 86), (30, 30), (1, 1), "nearest")
        sol = solve_stationary(dynamic.economy, dynamic.environment, grid, tol=1e-12)
        regime = F if sol.regimes()[0] == "F" else U
        pi = dynamic.economy.period(PolityState(86, 30), regime, dynamic.environment).payoffs
        delta = dynamic.model.elite_discount
        assert sol.V1[0] == pytest.approx(pi[0] / (1 - delta), abs=1e-8)
        assert sol.V2[0] == pytest.approx(pi[1] / (1 - delta), abs=1e-8)

    @pytest.mark.parametrize("preset", ["dynamic", "aligned", "mixed"])
    def test_myopic_limit(self, request, small_grid, preset):
        sc = request.getfixturevalue("dynamic" if preset == "mixed" else preset)
        econ = sc.economy
        if preset == "mixed":
            econ = _mixed_economy(sc)
        econ = replace(econ, params=replace(econ.params, elite_discount=0.01))
        sol = solve_stationary(econ, sc.environment, small_grid)
        for x, (k, r) in enumerate(small_grid.nodes):
            ctx = state_context(econ.params, econ.productivity, sc.environment, PolityState(k, r))
            rule = paper_decision_profile(*(static_delta(e, ctx) for e in econ.elites))
            assert bool(sol.regime_policy[x, 0]) == (rule is U)

    def test_regime_identical_model(self, dynamic, small_grid):
        p = replace(dynamic.model, risk_fragmented=dynamic.model.risk_unified, transfer_frag_premium=0)
        e = EliteParams(0.2, 0.2, 3, 3, 1, 1, 0.01, 0.2)
        econ = replace(dynamic.economy, params=p, elites=(e, e), productivity=ProductivitySpec(1, 1, 0.5, 0.5))
        sol = solve_stationary(econ, dynamic.environment, small_grid)
        assert sol.regime_policy.all()
        q = sol.game.regime_values(sol.values)
        assert np.array_equal(q[U], q[F])

    def test_converged_residual(self, dynamic_solution):
        assert dynamic_solution.converged
        assert bellman_residual(dynamic_solution) <= 1e-9

    def test_shifted_residual(self, dynamic_solution):
        game = dynamic_solution.game
        exact = evaluate_policy(game, dynamic_solution.actions)
        c = 1.0
        r = bellman_residual(dynamic_solution, values=exact + c)
        assert r == pytest.approx(c * (1 - game.discount), abs=1e-12)

    def test_zero_model(self, dynamic, small_grid):
        zero = EliteParams(0, 0, 0, 0, 0, 0, 0, 0)
        econ = replace(dynamic.economy, elites=(zero, zero))
        sol = solve_stationary(econ, dynamic.environment, small_grid)
        assert bellman_residual(sol, values=np.zeros_like(sol.values)) == 0.0

    def test_contraction(self, dynamic_solution):
        h = np.asarray(dynamic_solution.residual_history)
        assert h[-1] <= 1e-9
        assert np.all(np.diff(h[len(h) // 2:]) <= 0)
        assert dynamic_solution.contraction_ratio() <= dynamic_solution.game.discount + 0.01

    def test_policy_rule_consistency(self, dynamic, small_grid):
        econ = _mixed_economy(dynamic, tau1=1.5)
        sol = solve_stationary(econ, dynamic.environment, small_grid)
        _, deltas, _ = sol.game.sweep(sol.values)
        rule = (deltas[0] >= 0) & (deltas[1] >= 0)
        assert np.array_equal(sol.regime_policy, rule)
        assert 0 < sol.regime_policy.sum() < small_grid.size

    def test_non_convergence_flag(self, dynamic, small_grid):
        sol = solve_stationary(dynamic.economy, dynamic.environment, small_grid, max_iter=3)
        assert not sol.converged and sol.iterations == 3
        assert len(sol.residual_history) == 3


class TestVerification:
    def test_solution_passes(self, dynamic_solution):
        rep = verify_no_deviation(dynamic_solution)
        assert rep.passed and rep.worst_violation <= 1e-8

    def test_flipped_node_fails(self, dynamic_solution):
        acts = dynamic_solution.actions.copy()
        x = 100
        assert np.all(np.abs(dynamic_solution.deltas[:, x, 0]) > 1e-6)
        acts[:, x, 0] = ~acts[:, x, 0]
        rep = verify_no_deviation(dynamic_solution, actions=acts)
        assert not rep.passed
        assert rep.node == x

    def test_indifferent_model_any_policy(self, dynamic, small_grid):
        zero = EliteParams(0, 0, 0, 0, 0, 0, 0, 0)
        sol = solve_stationary(replace(dynamic.economy, elites=(zero, zero)), dynamic.environment, small_grid)
        rng = np.random.default_rng(2)
        for _ in range(5):
            acts = rng.integers(0, 2, size=sol.actions.shape).astype(bool)
            assert verify_no_deviation(sol, actions=acts).passed


class TestClassification:
    def test_dynamic_preset(self, dynamic, dynamic_solution):
        cls = classify_equilibrium(dynamic_solution, dynamic.initial_state, dynamic.horizon)
        assert cls.label == "nominal-statehood"
        for cond in ("fragmented", "recognition_above_threshold", "capacity_below_threshold", "gap_non_decreasing"):
            assert cls.evidence[cond]["holds"]
        assert cls.burn_in <= dynamic.horizon // 2

    def test_aligned_preset(self, aligned):
        sol = solve_stationary(aligned.economy, aligned.environment, aligned.grid.build())
        assert classify_equilibrium(sol, aligned.initial_state, aligned.horizon).label == "unified-convergent"

    def test_unreachable_recognition(self, dynamic):
        p = replace(dynamic.model, recognition_threshold=1e6)
        econ = replace(dynamic.economy, params=p)
        sol = solve_stationary(econ, dynamic.environment, build_grid((40, 160), (0, 120), (9, 9)))
        cls = classify_equilibrium(sol, dynamic.initial_state, dynamic.horizon)
        assert cls.label == "other"
        assert not cls.evidence["recognition_above_threshold"]["holds"]


def _mixed_economy(sc, tau1=1.0):
    """Dynamic preset with small rent/control gaps, so policies differ across nodes."""
    elites = tuple(replace(e, rents_fragmented=2.5, control_fragmented=1.2) for e in sc.elites)
    return replace(
        sc.economy,
        elites=elites,
        productivity=replace(sc.productivity, slope_unified=2.5),
        params=replace(sc.model, transfer_frag_premium=tau1),
    )


class TestComparativeStatics:
    grid = build_grid((40, 160), (0, 120), (9, 9), "multilinear")

    def test_transfer_premium_shrinks_unified_set(self, dynamic):
        counts, sets = [], []
        for tau in np.linspace(0, 2, 10):
            sol = solve_stationary(_mixed_economy(dynamic, tau), dynamic.environment, self.grid)
            sets.append(sol.regime_policy[:, 0].copy())
            counts.append(int(sol.regime_policy.sum()))
        assert counts[0] > counts[-1]
        for a, b in zip(sets, sets[1:]):
            assert np.all(b <= a)

    def test_peace_grows_unified_set(self, dynamic):
        counts, sets = [], []
        for p in np.linspace(0, 1, 10):
            sol = solve_stationary(_mixed_economy(dynamic), replace(dynamic.environment, peace=p), self.grid)
            sets.append(sol.regime_policy[:, 0].copy())
            counts.append(int(sol.regime_policy.sum()))
        assert counts[0] < counts[-1]
        for a, b in zip(sets, sets[1:]):
            assert np.all(b >= a)


def _nearest(axis, v):
    v = min(max(v, axis[0]), axis[-1])
    return int(np.argmin(np.abs(axis - v)))


def test_crisis_shock_against_expanded_chain(dynamic):
    """Stochastic crisis checked on an enlarged deterministic chain (node x shock)."""
    shock = CrisisShock((0.0, 4.0), (0.7, 0.3))
    econ = _mixed_economy(dynamic, tau1=0.5)
    econ = replace(econ, params=replace(econ.params, transfer_crisis_sensitivity=1.0))
    env = dynamic.environment
    grid = build_grid((60, 100), (20, 60), (2, 2), "nearest")
    sol = solve_stationary(econ, env, grid, tol=1e-12, shock=shock)
    assert sol.converged

    n, S = grid.size, 2
    nodes = grid.nodes
    delta = econ.params.elite_discount
    # independent build of the (node, shock) chain under the solver's actions
    P = np.zeros((n * S, n * S))
    pay = np.zeros((2, n * S))
    regime_at = {}
    for x in range(n):
        k, r = nodes[x]
        for s, h in enumerate(shock.values):
            reg = U if sol.actions[0, x, s] and sol.actions[1, x, s] else F
            regime_at[x, s] = reg
            a = institutional_productivity(econ.productivity, reg, env.peace)
            y = output(econ.params, a, k)
            t = transfers(econ.params, reg, h)
            for i, e in enumerate(econ.elites):
                pay[i, x * S + s] = elite_period_payoff(e, reg, y, r, t)
            k2 = step_capacity(econ.params, k, investment(econ.params, a, reg))
            r2 = step_recognition(econ.params, r, env, k)
            y_node = _nearest(grid.k_axis, k2) * len(grid.r_axis) + _nearest(grid.r_axis, r2)
            for s2, prob in enumerate(shock.probs):
                P[x * S + s, y_node * S + s2] += prob
    V = np.linalg.solve(np.eye(n * S) - delta * P, pay.T).T
    assert np.allclose(V.reshape(2, n, S), sol.values, atol=1e-8)
    assert verify_no_deviation(sol, tol=1e-9).passed


def test_game_shapes(dynamic, small_grid):
    game = GridGame(dynamic.economy, dynamic.environment, small_grid, CrisisShock((0.0, 1.0), (0.5, 0.5)))
    assert game.payoffs[U].shape == (2, small_grid.size, 2)
    assert game.transitions[F].shape == (small_grid.size, small_grid.size)
