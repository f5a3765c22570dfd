"""TOML run configuration: parsing, validation, defaults.

Reactions can be given as single expression strings (continuous case)
or as piecewise tables with declared jumps; gradient reactions also
accept a product-of-factors form.  Unknown keys are rejected so typos
fail loudly.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .nonlinearity import NonlinearitySpec


class ConfigError(ValueError):
    """Malformed or constraint-violating configuration."""


_KNOWN = {
    "domain": {"polygon", "h"},
    "problem": {"p", "gamma", "f", "g"},
    "problem.f": {"pieces", "jumps", "expr"},
    "problem.g": {"pieces", "jumps", "expr", "product"},
    "scheme": {"epsilon_schedule", "epsilon_steps"},
    "tolerances": {"solver", "comparison", "bracket", "fixed_point", "tol_dist"},
    "run": {"validation_mode", "seed", "output_dir"},
}


@dataclass
class RunConfig:
    polygon: list
    h: float
    p: float
    gamma: float
    fspec: NonlinearitySpec
    gspec: NonlinearitySpec
    epsilon_schedule: list | str = "auto"
    epsilon_steps: int = 4
    tol_solver: float = 1e-10
    tol_comparison: float = 1e-8
    tol_bracket: float = 1e-6
    tol_fixed_point: float = 1e-9
    tol_dist: float | None = None  # None: final epsilon
    validation_mode: bool = False
    seed: int = 0
    output_dir: str = "out"
    raw: dict = field(default_factory=dict, repr=False)


def _num(value, name):
    if isinstance(value, str):
        s = value.strip().lower()
        if s in ("inf", "+inf"):
            return np.inf
        if s == "-inf":
            return -np.inf
        raise ConfigError(f"{name}: expected a number, got {value!r}")
    if not isinstance(value, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {type(value).__name__}")
    return float(value)


def _check_keys(table, section):
    known = _KNOWN.get(section)
    if known is None:
        return
    for key in table:
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in [{section}]")


def _parse_scalar_reaction(node, name, gamma, domain_lo=0.0):
    def single_piece(expr):
        return NonlinearitySpec.scalar(
            [(domain_lo, np.inf, expr)], gamma=gamma, name=name, domain_lo=domain_lo
        )

    if isinstance(node, str):
        return single_piece(node)
    if not isinstance(node, dict):
        raise ConfigError(f"[problem.{name}] must be a string or a table")
    _check_keys(node, f"problem.{name}")
    if "expr" in node:
        return single_piece(node["expr"])
    if "pieces" not in node:
        raise ConfigError(f"[problem.{name}] needs 'expr' or 'pieces'")
    pieces = []
    for i, piece in enumerate(node["pieces"]):
        if set(piece) - {"on", "expr"}:
            raise ConfigError(f"unknown key in [problem.{name}] piece {i}")
        lo = _num(piece["on"][0], f"{name}.pieces[{i}].on[0]")
        hi = _num(piece["on"][1], f"{name}.pieces[{i}].on[1]")
        pieces.append((lo, hi, piece["expr"]))
    jumps = [_num(j, f"{name}.jumps") for j in node.get("jumps", [])]
    return NonlinearitySpec.scalar(
        pieces, jumps=jumps, gamma=gamma, name=name, domain_lo=domain_lo
    )


def _parse_g(node, dim):
    if isinstance(node, str):
        return NonlinearitySpec.vector_expression(dim, node)
    if not isinstance(node, dict):
        raise ConfigError("[problem.g] must be a string or a table")
    _check_keys(node, "problem.g")
    if "product" in node:
        factors = []
        for i, fac in enumerate(node["product"]):
            spec = _parse_scalar_reaction(
                fac, f"g{i+1}", gamma=None, domain_lo=-np.inf
            )
            factors.append(spec)
        return NonlinearitySpec.product(factors)
    if "expr" in node:
        return NonlinearitySpec.vector_expression(dim, node["expr"])
    if "pieces" in node:
        pieces = []
        for i, piece in enumerate(node["pieces"]):
            if set(piece) - {"on", "expr"}:
                raise ConfigError(f"unknown key in [problem.g] piece {i}")
            lo = tuple(_num(v, f"g.pieces[{i}].on") for v in piece["on"][0])
            hi = tuple(_num(v, f"g.pieces[{i}].on") for v in piece["on"][1])
            pieces.append((lo, hi, piece["expr"]))
        jumps = node.get("jumps", [[]] * dim)
        jumps = [[_num(v, "g.jumps") for v in axis] for axis in jumps]
        return NonlinearitySpec.vector(dim, pieces, jumps_per_axis=jumps)
    raise ConfigError("[problem.g] needs 'expr', 'pieces', or 'product'")


def parse_config(path):
    """Load and validate a TOML run configuration."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error in {path}: {exc}")
    return build_config(data)


def build_config(data):
    for section in data:
        if section not in ("domain", "problem", "scheme", "tolerances", "run"):
            raise ConfigError(f"unknown section [{section}]")
    for section in ("domain", "problem"):
        if section not in data:
            raise ConfigError(f"missing required section [{section}]")
    dom = data["domain"]
    _check_keys(dom, "domain")
    prob = dict(data["problem"])
    _check_keys(prob, "problem")
    sch = data.get("scheme", {})
    _check_keys(sch, "scheme")
    tol = data.get("tolerances", {})
    _check_keys(tol, "tolerances")
    run = data.get("run", {})
    _check_keys(run, "run")

    polygon = dom.get("polygon")
    if not polygon or len(polygon) < 3:
        raise ConfigError("domain.polygon: need at least 3 vertices")
    h = _num(dom.get("h", 0.0), "domain.h")
    if h <= 0:
        raise ConfigError(f"domain.h must be positive, got {h}")

    p = _num(prob.get("p", 0.0), "problem.p")
    validation_mode = bool(run.get("validation_mode", False))
    if not validation_mode and not (1.0 < p < 2.0):
        raise ConfigError(
            f"problem.p={p} violates 1 < p < N = 2; set run.validation_mode "
            "to unlock p >= 2 for linear-oracle runs"
        )
    if validation_mode and p <= 1.0:
        raise ConfigError(f"problem.p must exceed 1, got {p}")

    gamma = _num(prob.get("gamma", 0.5), "problem.gamma")
    if not (0.0 < gamma < 1.0):
        raise ConfigError(
            f"problem.gamma={gamma} outside (0,1): the singularity exponent "
            "must satisfy 0 < gamma < 1"
        )

    if "f" not in prob or "g" not in prob:
        raise ConfigError("[problem] needs both f and g")
    fspec = _parse_scalar_reaction(prob["f"], "f", gamma)
    gspec = _parse_g(prob["g"], dim=2)

    schedule = sch.get("epsilon_schedule", "auto")
    if schedule != "auto":
        schedule = [_num(e, "scheme.epsilon_schedule") for e in schedule]
        if any(not (0 < e < 1) for e in schedule):
            raise ConfigError("scheme.epsilon_schedule entries must lie in (0,1)")
        if any(e2 >= e1 for e1, e2 in zip(schedule, schedule[1:])):
            raise ConfigError("scheme.epsilon_schedule must be strictly decreasing")
    steps = int(sch.get("epsilon_steps", 4))
    if steps < 2:
        raise ConfigError("scheme.epsilon_steps must be at least 2")

    tol_dist = tol.get("tol_dist")
    cfg = RunConfig(
        polygon=[[_num(c, "polygon") for c in v] for v in polygon],
        h=h,
        p=p,
        gamma=gamma,
        fspec=fspec,
        gspec=gspec,
        epsilon_schedule=schedule,
        epsilon_steps=steps,
        tol_solver=_num(tol.get("solver", 1e-10), "tolerances.solver"),
        tol_comparison=_num(tol.get("comparison", 1e-8), "tolerances.comparison"),
        tol_bracket=_num(tol.get("bracket", 1e-6), "tolerances.bracket"),
        tol_fixed_point=_num(tol.get("fixed_point", 1e-9), "tolerances.fixed_point"),
        tol_dist=None if tol_dist is None else _num(tol_dist, "tolerances.tol_dist"),
        validation_mode=validation_mode,
        seed=int(run.get("seed", 0)),
        output_dir=str(run.get("output_dir", "out")),
        raw=data,
    )
    return cfg
