"""Scenario files: YAML schema, validation, presets and parameter sweeps.

A scenario is a YAML mapping with the sections below. Every key is
required except the ones listed as defaulted; unknown keys are rejected.

    name: str                      (default "")
    mode: static | dynamic | solve
    horizon: int >= 0
    seed: int
    model: {22 ModelParams fields}
    elites: [two EliteParams mappings]
    productivity: {base_unified, base_fragmented, slope_unified, slope_fragmented}
    recognition_link: linear | saturating          (default linear)
    environment: {peace, diplomatic_support, symbolic_support, crisis_intensity,
                  path: [env mappings, one per period]     (optional),
                  crisis_shock: {values: [...], probs: [...]} (optional)}
    initial_state: {capacity, recognition}
    grid: {capacity: [lo, hi], recognition: [lo, hi], nodes: [nk, nr],
           projection: multilinear | nearest (default multilinear)}   (optional)
    solver: {tol (default 1e-9), max_iter (default 100000)}            (optional)
    waivers: [A1 | A2 | A3 | A5]                                       (optional)
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from typing import Any

import numpy as np
import yaml

from .dynamics import CrisisShock, ExogenousPath
from .grid import PROJECTIONS, StateGrid, build_grid
from .model import (
    RECOGNITION_LINKS,
    Economy,
    EliteParams,
    ExogenousEnv,
    ModelDomainError,
    ModelParams,
    PolityState,
    ProductivitySpec,
    assumption_violations,
)

MODES = ("static", "dynamic", "solve")
WAIVABLE = ("A1", "A2", "A3", "A5")
PRESETS = ("benchmark", "dynamic", "aligned")


class ScenarioError(ValueError):
    pass


class ScenarioParseError(ScenarioError):
    pass


class ScenarioValidationError(ScenarioError):
    pass


@dataclass(frozen=True)
class GridSpec:
    capacity: tuple[float, float]
    recognition: tuple[float, float]
    nodes: tuple[int, int]
    projection: str = "multilinear"

    def build(self) -> StateGrid:
        return build_grid(self.capacity, self.recognition, self.nodes, self.projection)


@dataclass(frozen=True)
class SolverSpec:
    tol: float = 1e-9
    max_iter: int = 100_000


@dataclass(frozen=True)
class Scenario:
    model: ModelParams
    elites: tuple[EliteParams, EliteParams]
    productivity: ProductivitySpec
    environment: ExogenousEnv
    initial_state: PolityState
    horizon: int
    seed: int
    mode: str
    name: str = ""
    recognition_link: str = "linear"
    env_path: tuple[ExogenousEnv, ...] | None = None
    crisis_shock: CrisisShock | None = None
    grid: GridSpec | None = None
    solver: SolverSpec = field(default_factory=SolverSpec)
    waivers: tuple[str, ...] = ()

    @property
    def economy(self) -> Economy:
        return Economy(self.model, self.elites, self.productivity, self.recognition_link)

    def path(self) -> ExogenousPath:
        if self.env_path is not None:
            return ExogenousPath(self.env_path, self.crisis_shock, self.seed)
        return ExogenousPath.constant(self.environment, self.horizon, self.crisis_shock, self.seed)


# --------------------------------------------------------------------------- parsing


def _line_map(text: str) -> dict[tuple, int]:
    """Map key paths to 1-based source lines."""
    lines: dict[tuple, int] = {}

    def walk(node, path):
        lines.setdefault(path, node.start_mark.line + 1)
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                lines[path + (k.value,)] = k.start_mark.line + 1
                walk(v, path + (k.value,))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, path + (i,))

    root = yaml.compose(text, Loader=yaml.SafeLoader)
    if root is not None:
        walk(root, ())
    return lines


class _Reader:
    def __init__(self, lines: dict[tuple, int]):
        self.lines = lines

    def where(self, path: tuple) -> str:
        p = tuple(path)
        while p and p not in self.lines:
            p = p[:-1]
        line = self.lines.get(p)
        dotted = ".".join(str(x) for x in path) or "<root>"
        return f"line {line}: {dotted}" if line else dotted

    def fail(self, path, msg) -> ScenarioValidationError:
        return ScenarioValidationError(f"{self.where(path)}: {msg}")

    def mapping(self, obj, path, required, optional=()) -> dict:
        if not isinstance(obj, dict):
            raise self.fail(path, "expected a mapping")
        unknown = sorted(set(obj) - set(required) - set(optional), key=str)
        if unknown:
            raise self.fail(path + (unknown[0],), f"unknown key {unknown[0]!r}; allowed: {', '.join(list(required) + list(optional))}")
        missing = [k for k in required if k not in obj]
        if missing:
            raise self.fail(path, f"missing required key {missing[0]!r}")
        return obj

    def number(self, obj, path) -> float:
        if isinstance(obj, bool) or not isinstance(obj, (int, float)):
            raise self.fail(path, f"expected a number, got {obj!r}")
        return float(obj)

    def integer(self, obj, path) -> int:
        if isinstance(obj, bool) or not isinstance(obj, int):
            raise self.fail(path, f"expected an integer, got {obj!r}")
        return obj

    def pair(self, obj, path, conv) -> tuple:
        if not isinstance(obj, list) or len(obj) != 2:
            raise self.fail(path, "expected a two-element list")
        return tuple(conv(v, path + (i,)) for i, v in enumerate(obj))

    def record(self, cls, obj, path, defaults=()):
        names = [f.name for f in fields(cls)]
        req = [n for n in names if n not in defaults]
        data = self.mapping(obj, path, req, [n for n in names if n in defaults])
        kwargs = {k: self.number(v, path + (k,)) for k, v in data.items()}
        try:
            return cls(**kwargs)
        except ModelDomainError as exc:
            field_name = next((n for n in names if n in str(exc)), None)
            raise self.fail(path + ((field_name,) if field_name else ()), str(exc)) from None


_TOP_REQUIRED = ("mode", "horizon", "seed", "model", "elites", "productivity", "environment", "initial_state")
_TOP_OPTIONAL = ("name", "recognition_link", "grid", "solver", "waivers")
_ENV_FIELDS = ("peace", "diplomatic_support", "symbolic_support", "crisis_intensity")


def _env(rd: _Reader, obj, path, optional=()) -> ExogenousEnv:
    data = rd.mapping(obj, path, _ENV_FIELDS, optional)
    vals = {k: rd.number(data[k], path + (k,)) for k in _ENV_FIELDS}
    if not 0.0 <= vals["peace"] <= 1.0:
        raise rd.fail(path + ("peace",), "peace must lie in [0, 1]")
    try:
        return ExogenousEnv(**vals)
    except ModelDomainError as exc:
        raise rd.fail(path, str(exc)) from None


def parse_scenario(text: str) -> Scenario:
    """Parse and fully validate scenario text."""
    try:
        data = yaml.safe_load(text)
        lines = _line_map(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}: " if mark else ""
        raise ScenarioParseError(f"{where}malformed scenario: {getattr(exc, 'problem', exc)}") from None
    if data is None:
        raise ScenarioParseError("empty scenario file")
    rd = _Reader(lines)
    if not isinstance(data, dict):
        raise ScenarioParseError("scenario must be a mapping at top level")
    rd.mapping(data, (), _TOP_REQUIRED, _TOP_OPTIONAL)

    mode = data["mode"]
    if mode not in MODES:
        raise rd.fail(("mode",), f"mode must be one of {MODES}, got {mode!r}")
    horizon = rd.integer(data["horizon"], ("horizon",))
    if horizon < 0:
        raise rd.fail(("horizon",), "horizon must be >= 0")
    seed = rd.integer(data["seed"], ("seed",))
    name = data.get("name", "")
    if not isinstance(name, str):
        raise rd.fail(("name",), "name must be a string")

    model = rd.record(ModelParams, data["model"], ("model",))
    elites_raw = data["elites"]
    if not isinstance(elites_raw, list) or len(elites_raw) != 2:
        raise rd.fail(("elites",), "expected a list of exactly two elite blocs")
    elites = tuple(rd.record(EliteParams, e, ("elites", i)) for i, e in enumerate(elites_raw))
    prod = rd.record(ProductivitySpec, data["productivity"], ("productivity",))
    link = data.get("recognition_link", "linear")
    if link not in RECOGNITION_LINKS:
        raise rd.fail(("recognition_link",), f"must be one of {RECOGNITION_LINKS}, got {link!r}")

    env_raw = data["environment"]
    env = _env(rd, env_raw, ("environment",), ("path", "crisis_shock"))
    env_path = None
    if "path" in env_raw:
        steps = env_raw["path"]
        if not isinstance(steps, list):
            raise rd.fail(("environment", "path"), "expected a list of environments")
        env_path = tuple(_env(rd, s, ("environment", "path", i)) for i, s in enumerate(steps))
        if len(env_path) != horizon:
            raise rd.fail(("environment", "path"), f"path length {len(env_path)} does not match horizon {horizon}")
    shock = None
    if "crisis_shock" in env_raw:
        sp = ("environment", "crisis_shock")
        raw = rd.mapping(env_raw["crisis_shock"], sp, ("values", "probs"))
        if not isinstance(raw["values"], list) or not isinstance(raw["probs"], list):
            raise rd.fail(sp, "values and probs must be lists")
        try:
            shock = CrisisShock(
                tuple(rd.number(v, sp + ("values", i)) for i, v in enumerate(raw["values"])),
                tuple(rd.number(v, sp + ("probs", i)) for i, v in enumerate(raw["probs"])),
            )
        except ModelDomainError as exc:
            raise rd.fail(sp, str(exc)) from None

    x0 = rd.record(PolityState, data["initial_state"], ("initial_state",))

    grid = None
    if "grid" in data:
        gp = ("grid",)
        g = rd.mapping(data["grid"], gp, ("capacity", "recognition", "nodes"), ("projection",))
        proj = g.get("projection", "multilinear")
        if proj not in PROJECTIONS:
            raise rd.fail(gp + ("projection",), f"must be one of {PROJECTIONS}, got {proj!r}")
        grid = GridSpec(
            rd.pair(g["capacity"], gp + ("capacity",), rd.number),
            rd.pair(g["recognition"], gp + ("recognition",), rd.number),
            rd.pair(g["nodes"], gp + ("nodes",), rd.integer),
            proj,
        )
        try:
            grid.build()
        except ValueError as exc:
            raise rd.fail(gp, str(exc)) from None

    solver = SolverSpec()
    if "solver" in data:
        sp = ("solver",)
        s = rd.mapping(data["solver"], sp, (), ("tol", "max_iter"))
        solver = SolverSpec(
            rd.number(s.get("tol", solver.tol), sp + ("tol",)),
            rd.integer(s.get("max_iter", solver.max_iter), sp + ("max_iter",)),
        )
        if not solver.tol > 0 or solver.max_iter < 1:
            raise rd.fail(sp, "tol must be > 0 and max_iter >= 1")

    waivers = data.get("waivers", []) or []
    if not isinstance(waivers, list) or any(w not in WAIVABLE for w in waivers):
        raise rd.fail(("waivers",), f"waivers must be a list drawn from {WAIVABLE}")

    scenario = Scenario(
        model=model, elites=elites, productivity=prod, environment=env, initial_state=x0,
        horizon=horizon, seed=seed, mode=mode, name=name, recognition_link=link,
        env_path=env_path, crisis_shock=shock, grid=grid, solver=solver,
        waivers=tuple(sorted(set(waivers))),
    )
    _validate(scenario, rd)
    return scenario


_ASSUMPTION_FIELDS = {
    "A1": ("productivity",),
    "A2": ("model", "risk_fragmented"),
    "A3": ("elites",),
    "A5": ("productivity", "slope_unified"),
}


def _validate(sc: Scenario, rd: _Reader | None = None) -> None:
    rd = rd or _Reader({})
    m = sc.model
    for name in ("depreciation", "recognition_decay"):
        if not 0 < getattr(m, name) < 1:
            raise rd.fail(("model", name), f"{name} must lie strictly inside (0, 1)")
    for name in ("invest_prod_sensitivity", "invest_risk_sensitivity"):
        if not getattr(m, name) > 0:
            raise rd.fail(("model", name), f"{name} must be > 0")
    for i, e in enumerate(sc.elites):
        for name in ("share_unified", "share_fragmented"):
            if not 0 < getattr(e, name) < 1:
                raise rd.fail(("elites", i, name), f"{name} must lie strictly inside (0, 1)")
    for code, msg in assumption_violations(sc.model, sc.elites, sc.productivity):
        if code not in sc.waivers:
            raise rd.fail(_ASSUMPTION_FIELDS[code], msg)
    if sc.mode == "solve" and sc.grid is None:
        raise rd.fail(("grid",), "mode 'solve' needs a grid section")


def validate(scenario: Scenario) -> Scenario:
    """Re-run scenario-level validation (e.g. after programmatic edits)."""
    _validate(scenario)
    return scenario


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


# --------------------------------------------------------------------------- serialization


def _record(obj) -> dict:
    return {f.name: getattr(obj, f.name) for f in fields(obj)}


def _env_dict(env: ExogenousEnv) -> dict:
    return {k: getattr(env, k) for k in _ENV_FIELDS}


def scenario_to_dict(sc: Scenario) -> dict[str, Any]:
    env = _env_dict(sc.environment)
    if sc.env_path is not None:
        env["path"] = [_env_dict(e) for e in sc.env_path]
    if sc.crisis_shock is not None:
        env["crisis_shock"] = {"values": list(sc.crisis_shock.values), "probs": list(sc.crisis_shock.probs)}
    out: dict[str, Any] = {
        "name": sc.name,
        "mode": sc.mode,
        "horizon": sc.horizon,
        "seed": sc.seed,
        "model": _record(sc.model),
        "elites": [_record(e) for e in sc.elites],
        "productivity": _record(sc.productivity),
        "recognition_link": sc.recognition_link,
        "environment": env,
        "initial_state": _record(sc.initial_state),
    }
    if sc.grid is not None:
        out["grid"] = {
            "capacity": list(sc.grid.capacity),
            "recognition": list(sc.grid.recognition),
            "nodes": list(sc.grid.nodes),
            "projection": sc.grid.projection,
        }
    out["solver"] = {"tol": sc.solver.tol, "max_iter": sc.solver.max_iter}
    if sc.waivers:
        out["waivers"] = list(sc.waivers)
    return out


def serialize_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False, default_flow_style=None)


# --------------------------------------------------------------------------- presets


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ScenarioError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return resources.files("nominalstate.presets").joinpath(f"{name}.yaml").read_text(encoding="utf-8")


def load_preset(name: str) -> Scenario:
    return parse_scenario(preset_text(name))


def benchmark_preset() -> Scenario:
    return load_preset("benchmark")


def dynamic_preset() -> Scenario:
    return load_preset("dynamic")


def aligned_preset() -> Scenario:
    return load_preset("aligned")


# --------------------------------------------------------------------------- parameter edits and sweeps

_SECTIONS = {
    "model": ModelParams,
    "productivity": ProductivitySpec,
    "environment": ExogenousEnv,
    "elites": EliteParams,
    "elite1": EliteParams,
    "elite2": EliteParams,
}


def parameter_names() -> list[str]:
    names = []
    for section, cls in _SECTIONS.items():
        names += [f"{section}.{f.name}" for f in fields(cls)]
    return names


def with_parameter(sc: Scenario, name: str, value: float) -> Scenario:
    """Copy of ``sc`` with the dotted parameter replaced; ``elites.*`` sets both blocs."""
    section, _, attr = name.partition(".")
    cls = _SECTIONS.get(section)
    if cls is None or attr not in {f.name for f in fields(cls)}:
        raise ScenarioValidationError(
            f"unknown parameter {name!r}; valid names: {', '.join(parameter_names())}"
        )
    try:
        if section == "model":
            return replace(sc, model=replace(sc.model, **{attr: value}))
        if section == "productivity":
            return replace(sc, productivity=replace(sc.productivity, **{attr: value}))
        if section == "environment":
            if attr == "peace" and not 0.0 <= value <= 1.0:
                raise ModelDomainError("peace must lie in [0, 1]")
            return replace(sc, environment=replace(sc.environment, **{attr: value}))
        which = (0, 1) if section == "elites" else (int(section[-1]) - 1,)
        elites = tuple(replace(e, **{attr: value}) if i in which else e for i, e in enumerate(sc.elites))
        return replace(sc, elites=elites)
    except ModelDomainError as exc:
        raise ScenarioValidationError(f"{name}={value!r}: {exc}") from None


def parse_range(spec: str) -> np.ndarray:
    """``"lo:hi:n"`` to ``n`` evenly spaced values; a bare number is one point."""
    parts = spec.split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except (ValueError, IndexError):
        raise ScenarioValidationError(f"range must be 'lo:hi:n' or a single number, got {spec!r}") from None
    if n < 1 or not (np.isfinite(lo) and np.isfinite(hi)):
        raise ScenarioValidationError(f"range needs finite bounds and n >= 1, got {spec!r}")
    return np.linspace(lo, hi, n)


SWEEP_COLUMNS = ("value", "delta1", "delta2", "regime", "classification")


def evaluate_point(sc: Scenario) -> dict:
    """Unification gains, selected regime and classification for one scenario.

    static: static-calibration gains. dynamic: one-period gains at the initial
    state. solve: continuation gains at the initial state from the solved
    equilibrium, plus the closed-loop classification.
    """
    from .mpe import classify_equilibrium, continuation_deltas, solve_stationary
    from .stage import paper_decision_profile, state_context, static_context, static_delta

    econ = sc.economy
    if sc.mode == "static":
        ctx = static_context(sc.model, sc.productivity, sc.environment)
        d = [static_delta(e, ctx) for e in sc.elites]
        label = "n/a"
    elif sc.mode == "dynamic":
        ctx = state_context(sc.model, sc.productivity, sc.environment, sc.initial_state)
        d = [static_delta(e, ctx) for e in sc.elites]
        label = "n/a"
    else:
        sol = solve_stationary(econ, sc.environment, sc.grid.build(), sc.solver.tol, sc.solver.max_iter,
                               shock=sc.crisis_shock)
        d = list(continuation_deltas(sol, sc.initial_state, sc.environment))
        label = classify_equilibrium(sol, sc.initial_state, sc.horizon, seed=sc.seed).label
    return {
        "delta1": float(d[0]),
        "delta2": float(d[1]),
        "regime": paper_decision_profile(d[0], d[1]).value,
        "classification": label,
    }


def sweep(sc: Scenario, name: str, values, max_workers: int | None = None) -> list[dict]:
    """Evaluate independent scenario copies over ``values``; rows ordered by value."""
    vals = sorted(float(v) for v in np.atleast_1d(values))
    copies = [validate(with_parameter(sc, name, v)) for v in vals]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        results = list(pool.map(evaluate_point, copies))
    return [{"value": v, **r} for v, r in zip(vals, results)]

