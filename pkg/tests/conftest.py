from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from nominalstate.model import EliteParams, ProductivitySpec
from nominalstate.scenario import aligned_preset, benchmark_preset, dynamic_preset

# (label, passed, detail) rows filled by test_acceptance.py
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")


@pytest.fixture(scope="session")
def benchmark():
    return benchmark_preset()


@pytest.fixture(scope="session")
def dynamic():
    return dynamic_preset()


@pytest.fixture(scope="session")
def aligned():
    return aligned_preset()


@pytest.fixture
def bench_elite(benchmark) -> EliteParams:
    return benchmark.elites[0]


def random_economy_parts(rng: np.random.Generator, params):
    """Parameters satisfying A1, A2, A3 and A5, drawn around ``params``."""
    q_u = rng.uniform(0.0, 0.5)
    p = replace(
        params,
        output_elasticity=rng.uniform(0.1, 0.9),
        invest_base=rng.uniform(1, 20),
        invest_prod_sensitivity=rng.uniform(0.01, 5),
        invest_risk_sensitivity=rng.uniform(0.01, 40),
        risk_unified=q_u,
        risk_fragmented=q_u + rng.uniform(1e-3, 0.5),
        depreciation=rng.uniform(0.01, 0.99),
        transfer_base=rng.uniform(0, 10),
        transfer_frag_premium=rng.uniform(0, 10),
    )
    a_f = rng.uniform(0.1, 2)
    k_f = rng.uniform(0, 1)
    spec = ProductivitySpec(a_f + rng.uniform(1e-3, 1), a_f, k_f + rng.uniform(1e-3, 1), k_f)
    elites = tuple(
        EliteParams(
            share_unified=rng.uniform(0.01, 0.99),
            share_fragmented=rng.uniform(0.01, 0.99),
            rents_unified=(ru := rng.uniform(0, 5)),
            rents_fragmented=ru + rng.uniform(1e-3, 5),
            control_unified=(cu := rng.uniform(0, 5)),
            control_fragmented=cu + rng.uniform(1e-3, 5),
            recognition_value=rng.uniform(0, 1),
            transfer_capture=rng.uniform(0, 1),
        )
        for _ in range(2)
    )
    return p, elites, spec


TINY_SHAPES = ((1, 1), (2, 1), (1, 2), (2, 2), (3, 1), (1, 3), (4, 1), (1, 4))


def tiny_instance(rng: np.random.Generator, params):
    """Random economy, env and nearest-node grid with at most four nodes."""
    from nominalstate.grid import build_grid
    from nominalstate.model import Economy, ExogenousEnv

    p, elites, spec = random_economy_parts(rng, params)
    p = replace(
        p,
        elite_discount=rng.uniform(0.5, 0.95),
        capacity_feedback=rng.uniform(0, 0.05),
        recognition_decay=rng.uniform(0.02, 0.5),
    )
    env = ExogenousEnv(peace=rng.uniform(), diplomatic_support=rng.uniform(0, 3), symbolic_support=rng.uniform(0, 3))
    shape = TINY_SHAPES[rng.integers(len(TINY_SHAPES))]
    k_lo = rng.uniform(10, 100)
    r_lo = rng.uniform(0, 30)
    grid = build_grid((k_lo, k_lo + rng.uniform(5, 100)), (r_lo, r_lo + rng.uniform(5, 60)), shape, "nearest")
    return Economy(p, elites, spec), env, grid
