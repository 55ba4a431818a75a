"""Experiment configuration: JSON schema, validation, and (de)serialization.

The canonical config is a single JSON document.  Unknown keys are rejected;
validation collects every violation before failing.  Problems serialize to an
"inline" form that round-trips bit-exactly (JSON floats keep full precision
through repr).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geometry, schedules
from .errors import ParseError, ValidationError
from .generate import GeneratorSpec
from .operators import (
    ConstantOne,
    MetricProjection,
    SubgradientNorm,
    SubgradientProjection,
)
from .solver import Constraint, InteriorBall, Mode, Problem

__all__ = [
    "DiagnosticsConfig",
    "ExperimentConfig",
    "parse_config",
    "config_from_dict",
    "load_config_file",
    "problem_to_inline",
    "problem_from_inline",
    "set_to_dict",
    "set_from_dict",
    "function_to_dict",
    "function_from_dict",
]

_MODES = {m.value: m for m in Mode}


@dataclass(frozen=True)
class DiagnosticsConfig:
    oracle_final: bool = False
    oracle_per_row: bool = False
    qf: bool = False
    oracle_method: str = "dykstra"
    oracle_budget: int = 100_000
    oracle_tol: float = 1e-10


@dataclass
class ExperimentConfig:
    """Fully validated experiment description."""

    seed: int | None
    generator: GeneratorSpec | None
    inline_problem: Problem | None
    schedule: schedules.OverrelaxSchedule
    control_kind: str
    control_blocks: tuple | None
    plan: schedules.RelaxationPlan
    mode: Mode
    x0: object  # "random" or a frozen vector
    max_iterations: int
    convergence_tol: float | None
    log_every: int
    diagnostics: DiagnosticsConfig
    out_dir: str

    def build_control(self, m: int) -> schedules.ControlSequence:
        if self.control_kind == "full":
            return schedules.Full(m)
        if self.control_kind == "cyclic_singleton":
            return schedules.CyclicSingleton(m)
        return schedules.CyclicBlocks(self.control_blocks, m)

    @property
    def declared_m(self) -> int:
        return self.generator.m if self.generator else self.inline_problem.m


# ---------------------------------------------------------------------------
# set / function / problem serialization


def _vec(values) -> np.ndarray:
    return np.asarray(values, dtype=float)


def set_to_dict(s) -> dict:
    if isinstance(s, geometry.Halfspace):
        return {"kind": "halfspace", "a": [float(v) for v in s.a], "b": float(s.b)}
    if isinstance(s, geometry.Hyperplane):
        return {"kind": "hyperplane", "a": [float(v) for v in s.a], "b": float(s.b)}
    if isinstance(s, geometry.Ball):
        return {
            "kind": "ball",
            "center": [float(v) for v in s.center],
            "radius": float(s.radius),
        }
    if isinstance(s, geometry.Box):
        return {
            "kind": "box",
            "lo": [float(v) for v in s.lo],
            "hi": [float(v) for v in s.hi],
        }
    if isinstance(s, geometry.AffineSubspace):
        return {
            "kind": "affine_subspace",
            "rows": [[float(v) for v in row] for row in s.rows],
            "rhs": [float(v) for v in s.rhs],
        }
    if isinstance(s, geometry.WholeSpace):
        return {"kind": "whole_space"}
    if isinstance(s, geometry.Intersection):
        return {"kind": "intersection", "members": [set_to_dict(m) for m in s.members]}
    raise TypeError(f"cannot serialize set type {type(s).__name__}")


def set_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "halfspace":
        return geometry.Halfspace(_vec(d["a"]), float(d["b"]))
    if kind == "hyperplane":
        return geometry.Hyperplane(_vec(d["a"]), float(d["b"]))
    if kind == "ball":
        return geometry.Ball(_vec(d["center"]), float(d["radius"]))
    if kind == "box":
        return geometry.Box(_vec(d["lo"]), _vec(d["hi"]))
    if kind == "affine_subspace":
        return geometry.AffineSubspace(
            np.asarray(d["rows"], dtype=float), _vec(d["rhs"])
        )
    if kind == "whole_space":
        return geometry.WholeSpace()
    if kind == "intersection":
        return geometry.Intersection(tuple(set_from_dict(m) for m in d["members"]))
    raise ValueError(f"unknown set kind {kind!r}")


def function_to_dict(f) -> dict:
    if isinstance(f, geometry.AffineFunction):
        return {"kind": "affine", "a": [float(v) for v in f.a], "b": float(f.b)}
    if isinstance(f, geometry.MaxOfAffine):
        return {
            "kind": "max_of_affine",
            "pieces": [
                {"a": [float(v) for v in a], "b": float(b)} for a, b in f.pieces
            ],
        }
    if isinstance(f, geometry.NormResidual):
        return {
            "kind": "norm_residual",
            "center": [float(v) for v in f.center],
            "radius": float(f.radius),
        }
    if isinstance(f, geometry.SupNormResidual):
        return {
            "kind": "sup_norm_residual",
            "center": [float(v) for v in f.center],
            "radius": float(f.radius),
        }
    raise TypeError(f"cannot serialize function type {type(f).__name__}")


def function_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "affine":
        return geometry.AffineFunction(_vec(d["a"]), float(d["b"]))
    if kind == "max_of_affine":
        return geometry.MaxOfAffine(
            tuple((_vec(p["a"]), float(p["b"])) for p in d["pieces"])
        )
    if kind == "norm_residual":
        return geometry.NormResidual(_vec(d["center"]), float(d["radius"]))
    if kind == "sup_norm_residual":
        return geometry.SupNormResidual(_vec(d["center"]), float(d["radius"]))
    raise ValueError(f"unknown function kind {kind!r}")


def problem_to_inline(problem: Problem) -> dict:
    """Serialize a problem to the inline config form; round-trips bit-exactly."""
    constraints = []
    for c in problem.constraints:
        phi = (
            {"kind": "subgradient_norm"}
            if isinstance(c.phi, SubgradientNorm)
            else {"kind": "constant_one"}
        )
        if isinstance(c.cutter, MetricProjection):
            constraints.append(
                {"cutter": "metric_projection", "set": set_to_dict(c.cutter.target), "phi": phi}
            )
        elif isinstance(c.cutter, SubgradientProjection):
            constraints.append(
                {
                    "cutter": "subgradient_projection",
                    "f": function_to_dict(c.cutter.f),
                    "phi": phi,
                }
            )
        else:
            raise TypeError(f"cannot serialize cutter {type(c.cutter).__name__}")
    return {
        "dimension": problem.dim,
        "q": set_to_dict(problem.q),
        "constraints": constraints,
        "interior_ball": None
        if problem.interior_ball is None
        else {
            "center": [float(v) for v in problem.interior_ball.center],
            "radius": float(problem.interior_ball.radius),
        },
        "witness": None
        if problem.witness is None
        else [float(v) for v in problem.witness],
    }


def problem_from_inline(d: dict) -> Problem:
    constraints = []
    for spec in d["constraints"]:
        phi_kind = spec.get("phi", {"kind": "constant_one"}).get("kind")
        if spec["cutter"] == "metric_projection":
            if phi_kind != "constant_one":
                raise ValueError("metric projections carry the constant overrelaxation functional")
            cutter = MetricProjection(set_from_dict(spec["set"]))
            phi = ConstantOne()
        elif spec["cutter"] == "subgradient_projection":
            f = function_from_dict(spec["f"])
            cutter = SubgradientProjection(f)
            phi = SubgradientNorm(f) if phi_kind == "subgradient_norm" else ConstantOne()
        else:
            raise ValueError(f"unknown cutter kind {spec['cutter']!r}")
        constraints.append(Constraint(cutter=cutter, phi=phi, set=cutter.fix_set()))
    ball = d.get("interior_ball")
    witness = d.get("witness")
    return Problem(
        constraints=tuple(constraints),
        q=set_from_dict(d["q"]),
        interior_ball=None
        if ball is None
        else InteriorBall(_vec(ball["center"]), float(ball["radius"])),
        witness=None if witness is None else _vec(witness),
    )


# ---------------------------------------------------------------------------
# config parsing

_TOP_KEYS = {
    "seed",
    "problem",
    "schedule",
    "control",
    "relaxation",
    "weights",
    "epsilon_margin",
    "solver",
    "diagnostics",
    "output",
}
_SCHEDULE_KEYS = {"kind", "r0", "q", "alpha_exp", "values"}
_CONTROL_KEYS = {"kind", "blocks"}
_SOLVER_KEYS = {"mode", "x0", "max_iterations", "convergence_tol", "log_every"}
_DIAG_KEYS = {"oracle_final", "oracle_per_row", "qf", "oracle"}
_ORACLE_KEYS = {"method", "budget", "tol"}
_GENERATOR_KEYS = {"kind", "m", "n", "interior_radius", "q"}
_QSPEC_KEYS = {"kind", "lo", "hi", "center", "radius"}

DEFAULTS_HELP = """\
config defaults:
  schedule          {"kind": "power", "r0": 1.0, "alpha_exp": 2.0}
  control           {"kind": "full"}
  relaxation        {"alpha": 1.0}
  weights           {"kind": "uniform"}
  epsilon_margin    0.01
  solver            {"mode": "exploratory", "x0": "random",
                     "max_iterations": 100000, "convergence_tol": null
                     (1e-8 in certified_asymptotic mode), "log_every": 0}
  diagnostics       {"oracle_final": false, "oracle_per_row": false, "qf": false,
                     "oracle": {"method": "dykstra", "budget": 100000, "tol": 1e-10}}
  output            {"dir": "feasikit-out"}
"""


def _reject_unknown(section: dict, allowed: set, where: str, problems: list):
    for key in section:
        if key not in allowed:
            problems.append(f"{where}: unknown key {key!r}")


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Validate a raw config mapping, collecting every violation."""
    problems: list[str] = []
    if not isinstance(raw, dict):
        raise ValidationError(["config root must be a JSON object"])
    _reject_unknown(raw, _TOP_KEYS, "config", problems)

    seed = raw.get("seed")
    if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool) or seed < 0):
        problems.append("seed: must be a nonnegative integer")
        seed = None

    # problem section
    generator = None
    inline_problem = None
    psec = raw.get("problem")
    if not isinstance(psec, dict) or not ({"generator", "inline"} & set(psec)):
        problems.append("problem: need a 'generator' or 'inline' entry")
    else:
        _reject_unknown(psec, {"generator", "inline"}, "problem", problems)
        if "generator" in psec and "inline" in psec:
            problems.append("problem: 'generator' and 'inline' are mutually exclusive")
        elif "generator" in psec:
            gsec = psec["generator"]
            _reject_unknown(gsec, _GENERATOR_KEYS, "problem.generator", problems)
            if "q" in gsec:
                _reject_unknown(gsec["q"], _QSPEC_KEYS, "problem.generator.q", problems)
            try:
                generator = GeneratorSpec.from_dict(gsec)
            except Exception as exc:
                problems.append(f"problem.generator: {exc}")
            if seed is None:
                problems.append("seed: required when a generator is used")
        else:
            try:
                inline_problem = problem_from_inline(psec["inline"])
            except Exception as exc:
                problems.append(f"problem.inline: {exc}")

    # schedule
    ssec = dict(raw.get("schedule", {"kind": "power", "r0": 1.0, "alpha_exp": 2.0}))
    _reject_unknown(ssec, _SCHEDULE_KEYS, "schedule", problems)
    schedule = None
    try:
        kind = ssec.get("kind", "power")
        if kind == "zero":
            schedule = schedules.Zero()
        elif kind == "constant":
            schedule = schedules.Constant(float(ssec["r0"]))
        elif kind == "geometric":
            schedule = schedules.Geometric(float(ssec["r0"]), float(ssec["q"]))
        elif kind == "power":
            schedule = schedules.Power(
                float(ssec.get("r0", 1.0)), float(ssec.get("alpha_exp", 2.0))
            )
        elif kind == "explicit":
            schedule = schedules.Explicit(tuple(ssec["values"]))
        else:
            problems.append(f"schedule.kind: unknown kind {kind!r}")
    except ValidationError:
        raise
    except Exception as exc:
        problems.append(f"schedule: {exc}")

    # control
    csec = dict(raw.get("control", {"kind": "full"}))
    _reject_unknown(csec, _CONTROL_KEYS, "control", problems)
    control_kind = csec.get("kind", "full")
    control_blocks = None
    if control_kind not in ("full", "cyclic_singleton", "cyclic_blocks"):
        problems.append(f"control.kind: unknown kind {control_kind!r}")
    elif control_kind == "cyclic_blocks":
        blocks = csec.get("blocks")
        if not blocks:
            problems.append("control.blocks: required for cyclic_blocks")
        else:
            control_blocks = tuple(tuple(int(i) for i in blk) for blk in blocks)

    # relaxation plan
    rsec = dict(raw.get("relaxation", {"alpha": 1.0}))
    _reject_unknown(rsec, {"alpha"}, "relaxation", problems)
    wsec = dict(raw.get("weights", {"kind": "uniform"}))
    _reject_unknown(wsec, {"kind", "values"}, "weights", problems)
    eps_margin = raw.get("epsilon_margin", 0.01)
    plan = None
    try:
        if wsec.get("kind", "uniform") == "uniform":
            rule = "uniform"
        elif wsec.get("kind") == "fixed":
            rule = tuple(float(v) for v in wsec["values"])
        else:
            raise ValueError(f"unknown weights kind {wsec.get('kind')!r}")
        plan = schedules.RelaxationPlan(
            alpha=float(rsec.get("alpha", 1.0)),
            weight_rule=rule,
            epsilon_margin=float(eps_margin),
        )
    except Exception as exc:
        problems.append(f"relaxation/weights: {exc}")

    # solver
    osec = dict(raw.get("solver", {}))
    _reject_unknown(osec, _SOLVER_KEYS, "solver", problems)
    mode_name = osec.get("mode", "exploratory")
    mode = _MODES.get(mode_name)
    if mode is None:
        problems.append(f"solver.mode: unknown mode {mode_name!r}")
        mode = Mode.EXPLORATORY
    x0 = osec.get("x0", "random")
    if isinstance(x0, list):
        try:
            x0 = geometry.as_point(x0)
            x0.setflags(write=False)
        except Exception as exc:
            problems.append(f"solver.x0: {exc}")
    elif x0 != "random":
        problems.append("solver.x0: must be 'random' or a list of numbers")
    if x0 == "random" and seed is None:
        problems.append("seed: required when x0 is 'random'")
    max_iterations = osec.get("max_iterations", 100_000)
    if not isinstance(max_iterations, int) or max_iterations < 1:
        problems.append("solver.max_iterations: must be an integer >= 1")
        max_iterations = 1
    tol = osec.get("convergence_tol")
    if tol is None and mode is Mode.CERTIFIED_ASYMPTOTIC:
        tol = 1e-8
    if tol is not None:
        try:
            tol = float(tol)
            if not tol > 0:
                raise ValueError
        except (TypeError, ValueError):
            problems.append("solver.convergence_tol: must be a positive number")
            tol = None
    log_every = osec.get("log_every", 0)

    # theorem-level cross-checks that are knowable at load time
    if mode is Mode.CERTIFIED_FINITE and isinstance(schedule, schedules.Geometric):
        problems.append(
            "solver.mode/schedule: certified_finite rejects geometric schedules "
            "(schedule fails STAG)"
        )

    # diagnostics
    dsec = dict(raw.get("diagnostics", {}))
    _reject_unknown(dsec, _DIAG_KEYS, "diagnostics", problems)
    orc = dict(dsec.get("oracle", {}))
    _reject_unknown(orc, _ORACLE_KEYS, "diagnostics.oracle", problems)
    diagnostics = DiagnosticsConfig(
        oracle_final=bool(dsec.get("oracle_final", False)),
        oracle_per_row=bool(dsec.get("oracle_per_row", False)),
        qf=bool(dsec.get("qf", False)),
        oracle_method=orc.get("method", "dykstra"),
        oracle_budget=int(orc.get("budget", 100_000)),
        oracle_tol=float(orc.get("tol", 1e-10)),
    )

    outsec = dict(raw.get("output", {}))
    _reject_unknown(outsec, {"dir"}, "output", problems)
    out_dir = str(outsec.get("dir", "feasikit-out"))

    if problems:
        raise ValidationError(problems)

    return ExperimentConfig(
        seed=seed,
        generator=generator,
        inline_problem=inline_problem,
        schedule=schedule,
        control_kind=control_kind,
        control_blocks=control_blocks,
        plan=plan,
        mode=mode,
        x0=x0,
        max_iterations=max_iterations,
        convergence_tol=tol,
        log_every=int(log_every),
        diagnostics=diagnostics,
        out_dir=out_dir,
    )


def load_config_file(path) -> object:
    """Decode the JSON document at ``path`` (an object or a batch list)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def parse_config(path) -> ExperimentConfig:
    """Read and validate a single-experiment config file."""
    raw = load_config_file(path)
    if isinstance(raw, list):
        raise ValidationError(
            ["config is a batch list; parse_config expects a single experiment"]
        )
    return config_from_dict(raw)
