"""Strict run-configuration parsing.

Configs are JSON with a closed key set: unknown keys anywhere are rejected so
that a saved config is an exact record of an experiment. All range violations
are collected and reported together.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .anisotropy import AdhesionField, make_anisotropy
from .elasticity import ElasticTensor, MismatchSpec
from .errors import ParseError, ValidationError
from .geometry import load_geometry
from .optimizer import MOVE_KINDS, Problem, Schedule
from .presets import PRESET_NAMES, make_preset

_TOP_KEYS = {
    "preset", "overrides", "geometry", "anisotropy", "adhesion", "elasticity",
    "mismatch", "v", "lambda", "m", "h", "seed", "schedule", "output_dir",
    "emit", "gauge",
}
_SCHEDULE_KEYS = {
    "iterations", "t0", "t_end_factor", "greedy_fraction", "sigma0",
    "sigma_floor_factor", "move_weights", "max_vertices", "polish_rounds",
    "temperature_law",
}
_EMIT_KEYS = {"svg", "mesh_dump", "trace", "trace_timing"}
_ADHESION_KEYS = {"beta", "values"}
_ELASTICITY_KEYS = {"film", "substrate", "overrides", "enabled"}
_MISMATCH_KEYS = {"e0", "grad"}

DEFAULT_EMIT = {"svg": True, "mesh_dump": False, "trace": True,
                "trace_timing": False}


@dataclass
class RunConfig:
    preset: str | None = None
    overrides: dict = field(default_factory=dict)
    geometry: str | None = None
    anisotropy: dict | None = None
    adhesion: dict | None = None
    elasticity: dict | None = None
    mismatch: dict | None = None
    v: float | None = None
    lam: float | None = None
    m: int | None = None
    h: float | None = None
    seed: int = 0
    schedule: dict = field(default_factory=dict)
    output_dir: str = "sdri_out"
    emit: dict = field(default_factory=lambda: dict(DEFAULT_EMIT))
    gauge: str | None = None

    def to_dict(self) -> dict:
        data = {
            "preset": self.preset,
            "overrides": self.overrides,
            "geometry": self.geometry,
            "anisotropy": self.anisotropy,
            "adhesion": self.adhesion,
            "elasticity": self.elasticity,
            "mismatch": self.mismatch,
            "v": self.v,
            "lambda": self.lam,
            "m": self.m,
            "h": self.h,
            "seed": self.seed,
            "schedule": self.schedule,
            "output_dir": self.output_dir,
            "emit": self.emit,
            "gauge": self.gauge,
        }
        return {k: v for k, v in data.items() if v is not None}


def _check_keys(data, allowed, where, problems):
    for key in data:
        if key not in allowed:
            problems.append(f"unknown key {key!r} in {where}")


def parse_config(path) -> RunConfig:
    """Load, strictly validate, and default-fill a run configuration."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") \
            from None
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: top level must be an object")
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> RunConfig:
    problems = []
    _check_keys(raw, _TOP_KEYS, "config", problems)

    schedule = raw.get("schedule", {})
    if not isinstance(schedule, dict):
        problems.append("schedule must be an object")
        schedule = {}
    _check_keys(schedule, _SCHEDULE_KEYS, "schedule", problems)
    weights = schedule.get("move_weights", {})
    if isinstance(weights, dict):
        for k in weights:
            if k not in MOVE_KINDS:
                problems.append(f"unknown move kind {k!r} in schedule.move_weights")
    emit = dict(DEFAULT_EMIT)
    raw_emit = raw.get("emit", {})
    if not isinstance(raw_emit, dict):
        problems.append("emit must be an object")
        raw_emit = {}
    _check_keys(raw_emit, _EMIT_KEYS, "emit", problems)
    emit.update(raw_emit)

    for section, keys in (("adhesion", _ADHESION_KEYS),
                          ("elasticity", _ELASTICITY_KEYS),
                          ("mismatch", _MISMATCH_KEYS)):
        block = raw.get(section)
        if block is not None:
            if not isinstance(block, dict):
                problems.append(f"{section} must be an object")
            else:
                _check_keys(block, keys, section, problems)

    preset = raw.get("preset")
    geometry = raw.get("geometry")
    if preset is None and geometry is None:
        problems.append("config needs either a preset or a geometry file")
    if preset is not None and preset not in PRESET_NAMES:
        problems.append(f"unknown preset {preset!r}")

    def number(key, lo=None, hi=None, strict_lo=False, integer=False):
        if key not in raw or raw[key] is None:
            return None
        val = raw[key]
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            problems.append(f"{key} must be a number")
            return None
        if integer and int(val) != val:
            problems.append(f"{key} must be an integer")
            return None
        if lo is not None and (val <= lo if strict_lo else val < lo):
            cmp = ">" if strict_lo else ">="
            problems.append(f"{key} must be {cmp} {lo}")
            return None
        if hi is not None and val > hi:
            problems.append(f"{key} must be <= {hi}")
        return int(val) if integer else float(val)

    v = number("v", lo=0, strict_lo=True)
    lam = number("lambda", lo=0)
    m = number("m", lo=1, integer=True)
    h = number("h", lo=0, strict_lo=True)
    seed = number("seed", integer=True)
    iterations = schedule.get("iterations")
    if iterations is not None and (not isinstance(iterations, int) or iterations < 0):
        problems.append("schedule.iterations must be a nonnegative integer")

    if problems:
        raise ValidationError(problems)

    return RunConfig(
        preset=preset,
        overrides=dict(raw.get("overrides", {})),
        geometry=geometry,
        anisotropy=raw.get("anisotropy"),
        adhesion=raw.get("adhesion"),
        elasticity=raw.get("elasticity"),
        mismatch=raw.get("mismatch"),
        v=v, lam=lam, m=m, h=h,
        seed=seed if seed is not None else 0,
        schedule=dict(schedule),
        output_dir=str(raw.get("output_dir", "sdri_out")),
        emit=emit,
        gauge=raw.get("gauge"),
    )


def build_schedule(config: RunConfig) -> Schedule:
    kwargs = dict(config.schedule)
    return Schedule(**kwargs)


def build_problem(config: RunConfig) -> Problem:
    """Materialize the Problem a config describes (preset or explicit scene)."""
    if config.preset is not None:
        overrides = dict(config.overrides)
        if config.v is not None:
            overrides.setdefault("v", config.v)
        if config.lam is not None:
            overrides.setdefault("lambda", config.lam)
        if config.m is not None:
            overrides.setdefault("m", config.m)
        if config.h is not None:
            overrides.setdefault("h", config.h)
        if config.anisotropy is not None:
            overrides.setdefault("anisotropy", config.anisotropy)
        problem = make_preset(config.preset, overrides)
        if config.schedule:
            problem.schedule = build_schedule(config)
        if config.gauge:
            problem.gauge = config.gauge
        return problem

    domain, crystal = load_geometry(config.geometry)
    phi = make_anisotropy(config.anisotropy or {"family": "isotropic", "gamma": 1.0})
    beta = None
    if config.adhesion is not None:
        if "values" in config.adhesion:
            beta = AdhesionField.from_values(config.adhesion["values"], domain)
        else:
            beta = AdhesionField.constant(config.adhesion.get("beta", 0.0), domain)
    tensor = None
    mismatch = None
    if config.elasticity is not None and config.elasticity.get("enabled", True):
        film = config.elasticity.get("film", (1.0, 1.0))
        substrate = config.elasticity.get("substrate")
        overrides = {int(k): tuple(val) for k, val in
                     (config.elasticity.get("overrides") or {}).items()}
        tensor = ElasticTensor.isotropic(*film,
                                         substrate=tuple(substrate) if substrate else None,
                                         overrides=overrides)
        if config.mismatch is not None:
            if "grad" in config.mismatch:
                import numpy as np
                mismatch = MismatchSpec(grad=np.asarray(config.mismatch["grad"], float))
            else:
                mismatch = MismatchSpec.lattice(float(config.mismatch.get("e0", 0.0)))
        else:
            mismatch = MismatchSpec.zero()
    return Problem(
        domain=domain, phi=phi, beta=beta, tensor=tensor, mismatch=mismatch,
        v=config.v if config.v is not None else max(crystal.area, 1e-9),
        lam=config.lam if config.lam is not None else 10.0,
        m=config.m if config.m is not None else 1,
        h=config.h if config.h is not None else 0.1,
        preset="custom",
        gauge=config.gauge or "mean",
        init_crystal=crystal,
        schedule=build_schedule(config),
    )
