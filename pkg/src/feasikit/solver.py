"""The driver for the overrelaxed simultaneous-cutter iteration.

A run starts from x0 in Q and repeats

    x_{k+1} = P_Q( x_k + alpha_k * sum_{i in I_k} lambda_{i,k} beta_{i,k}(x_k) (T_i(x_k) - x_k) )

until the iterate lands exactly in C and Q (finite convergence, detected with
zero-tolerance membership over *all* constraints, not just the active ones),
or the residual drops below a tolerance (asymptotic modes), or the iteration
budget runs out.

Trace rows are keyed to iterate evaluations: row k describes the state x_k
and the step taken from it.  The terminal row carries zero step fields (for
finite convergence these are the literal values: every displacement vanishes
on C).  Certified modes machine-check the convergence theorems'
preconditions before a single step is taken; exploratory mode downgrades
every violation to a warning.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from . import geometry, operators, schedules
from .errors import (
    DivergenceSuspected,
    ExplicitExhausted,
    MarginViolation,
    NonFiniteIterate,
    PreconditionViolation,
    ReferenceNotFeasible,
    UnsupportedProjection,
)
from .geometry import Ball, Box, Halfspace, Hyperplane, AffineSubspace, Intersection, WholeSpace
from .operators import ConstantOne, MetricProjection, SubgradientProjection

log = logging.getLogger("feasikit.solver")

__all__ = [
    "Constraint",
    "constraint_for",
    "InteriorBall",
    "Problem",
    "Mode",
    "SolverConfig",
    "Status",
    "TraceRow",
    "Trace",
    "Finding",
    "validate",
    "run",
    "fejer_reference_check",
]

# Runtime guard threshold for unbounded trajectories (relative to the start).
_DIVERGENCE_FACTOR = 1e6


@dataclass(frozen=True, eq=False)
class Constraint:
    """One constraint: its cutter, overrelaxation functional, and set C_i."""

    cutter: operators.Cutter
    phi: operators.OverrelaxFunctional
    set: geometry.ConvexSet


def constraint_for(cutter, phi=None) -> Constraint:
    """Build a Constraint, deriving C_i = Fix T and a default phi of 1."""
    return Constraint(
        cutter=cutter,
        phi=phi if phi is not None else ConstantOne(),
        set=cutter.fix_set(),
    )


@dataclass(frozen=True, eq=False)
class InteriorBall:
    """Certified B(center, radius) inside C with center in Q."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", geometry.as_point(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0.0:
            raise ValueError("interior ball radius must be > 0")


@dataclass(frozen=True, eq=False)
class Problem:
    """Find x in (intersection of the constraint sets) and Q."""

    constraints: tuple
    q: geometry.ConvexSet
    interior_ball: InteriorBall | None = None
    witness: np.ndarray | None = None

    def __post_init__(self):
        cons = tuple(self.constraints)
        if not cons:
            raise ValueError("a problem needs at least one constraint")
        object.__setattr__(self, "constraints", cons)
        dims = {c.set.dim for c in cons if c.set.dim is not None}
        if self.q.dim is not None:
            dims.add(self.q.dim)
        if len(dims) != 1:
            raise ValueError(f"constraint/Q dimensions disagree: {sorted(dims)}")
        object.__setattr__(self, "_dim", dims.pop())
        if self.witness is not None:
            w = geometry.as_point(self.witness, self._dim)
            w.setflags(write=False)
            object.__setattr__(self, "witness", w)
            for idx, c in enumerate(cons, start=1):
                if not c.set.contains(w):
                    raise ValueError(f"witness is not in constraint set {idx}")
            if not self.q.contains(w):
                raise ValueError("witness is not in Q")
        if self.interior_ball is not None:
            self._check_interior_ball()

    def _check_interior_ball(self):
        # necessary-condition sampling: the 2n axis points of the ball must
        # belong to every constraint set, and the center to Q
        z, r = self.interior_ball.center, self.interior_ball.radius
        geometry.as_point(z, self._dim)
        if not self.q.contains(z):
            raise ValueError("interior ball center is not in Q")
        for idx, c in enumerate(self.constraints, start=1):
            for j in range(self._dim):
                for sgn in (1.0, -1.0):
                    p = z.copy()
                    p[j] += sgn * r
                    if not c.set.contains(p):
                        raise ValueError(
                            f"interior ball pokes out of constraint set {idx} "
                            f"along axis {j}"
                        )

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def m(self) -> int:
        return len(self.constraints)


class Mode(enum.Enum):
    CERTIFIED_FINITE = "certified_finite"
    CERTIFIED_ASYMPTOTIC = "certified_asymptotic"
    EXPLORATORY = "exploratory"


@dataclass(frozen=True, eq=False)
class SolverConfig:
    schedule: schedules.OverrelaxSchedule
    control: schedules.ControlSequence
    plan: schedules.RelaxationPlan
    x0: np.ndarray
    max_iterations: int = 100_000
    mode: Mode = Mode.EXPLORATORY
    convergence_tol: float | None = None
    log_every: int = 0

    def __post_init__(self):
        object.__setattr__(self, "x0", geometry.as_point(self.x0))
        self.x0.setflags(write=False)
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.convergence_tol is not None and not self.convergence_tol > 0.0:
            raise ValueError("convergence_tol must be > 0")


class Status(enum.Enum):
    FINITE_CONVERGENCE = "FINITE_CONVERGENCE"
    TOL_REACHED = "TOL_REACHED"
    BUDGET_EXHAUSTED = "BUDGET_EXHAUSTED"


@dataclass(frozen=True)
class TraceRow:
    k: int
    r_k: float
    alpha_k: float
    active: tuple
    betas: tuple
    displacement_norms: tuple
    phis: tuple
    step_norm: float
    w_step_norm: float   # ||sum_i lambda_i (T_i(x)-x)|| of the executed step
    max_constraint_distance: float
    in_c: bool
    in_q: bool
    oracle_distance: float | None = None

    @property
    def max_beta(self) -> float:
        return max(self.betas, default=0.0)

    @property
    def max_displacement(self) -> float:
        return max(self.displacement_norms, default=0.0)


@dataclass(eq=False)
class Trace:
    problem: Problem
    config: SolverConfig
    rows: list
    iterates: list
    status: Status
    k_star: int | None
    delta_hat: float | None  # min phi value observed along the run

    @property
    def final_k(self) -> int:
        return self.rows[-1].k

    @property
    def final_residual(self) -> float:
        return self.rows[-1].max_constraint_distance


@dataclass(frozen=True)
class Finding:
    severity: str  # "error" | "warning"
    code: str
    message: str


# set variants whose metric projections have known bounded linear regularity
_REGULAR_SET_TYPES = (Halfspace, Hyperplane, Ball, Box, AffineSubspace)


def _projection_regularity_ok(s) -> bool:
    if isinstance(s, _REGULAR_SET_TYPES):
        return True
    if isinstance(s, WholeSpace):
        return True
    if isinstance(s, Intersection):
        try:
            s._closed_form()
        except UnsupportedProjection:
            return False
        return True
    return False


def validate(problem: Problem, config: SolverConfig) -> list:
    """Check the convergence theorems' preconditions for the chosen mode.

    Returns the list of findings.  In the certified modes any error-level
    finding raises PreconditionViolation (carrying the full list); in
    exploratory mode everything is downgraded to a warning.
    """
    findings = []
    certified = config.mode in (Mode.CERTIFIED_FINITE, Mode.CERTIFIED_ASYMPTOTIC)
    sev = "error" if certified else "warning"

    def add(code, message):
        findings.append(Finding(sev, code, message))

    if not problem.q.contains(config.x0):
        add("x0-not-in-q", "x0 must belong to Q")

    classification = None
    try:
        classification = schedules.classify(config.schedule)
    except Exception as exc:  # UnclassifiableExplicit
        add("schedule-unclassifiable", f"cannot certify schedule: {exc}")

    if classification is not None:
        if config.mode is Mode.CERTIFIED_FINITE:
            if classification.regime is schedules.Regime.GEOMETRIC_OR_FASTER:
                add("schedule-not-stag", "schedule fails STAG (decays geometrically or faster)")
            elif classification.regime is schedules.Regime.ZERO:
                add("schedule-zero", "zero schedule carries no overrelaxation; finite arrival is not certified")
            elif not classification.converges_to_zero:
                add("schedule-not-vanishing", "schedule does not converge to zero")
        if config.mode is Mode.CERTIFIED_ASYMPTOTIC and not classification.summable:
            add("schedule-not-summable", "schedule series diverges; asymptotic certificate needs summability")
        for w in classification.warnings:
            findings.append(Finding("warning", "schedule-warning", w))

    horizon = max(2 * schedules.period(config.control), 64)
    s = schedules.minimal_intermittency(config.control, horizon)
    if s is None:
        add("control-not-intermittent", "control not intermittent: no window covers every index")

    try:
        for k in range(schedules.period(config.control)):
            schedules.weights_at(config.plan, k, schedules.control_at(config.control, k))
    except MarginViolation as exc:
        add("weights-below-margin", str(exc))

    if config.mode is Mode.CERTIFIED_FINITE:
        ball = problem.interior_ball
        if ball is None:
            add("no-interior-ball", "certified finite mode needs an interior ball witness")
        for idx, c in enumerate(problem.constraints, start=1):
            if isinstance(c.cutter, MetricProjection):
                if not _projection_regularity_ok(c.set):
                    add(
                        "regularity-unknown",
                        f"constraint {idx}: no known linear-regularity certificate for "
                        f"{type(c.set).__name__}",
                    )
            elif isinstance(c.cutter, SubgradientProjection):
                if ball is None:
                    add(
                        "slater-unverifiable",
                        f"constraint {idx}: subgradient projection needs a Slater point "
                        "(interior ball center)",
                    )
                elif not c.cutter.f.value(ball.center) < 0.0:
                    add(
                        "slater-violated",
                        f"constraint {idx}: f(z*) = {c.cutter.f.value(ball.center)} is not < 0",
                    )
            else:
                add("cutter-unknown", f"constraint {idx}: unrecognized cutter type")

    if config.mode is Mode.CERTIFIED_ASYMPTOTIC and config.convergence_tol is None:
        findings.append(
            Finding("warning", "no-tol", "asymptotic mode without convergence_tol only stops on budget")
        )

    if certified:
        errors = [f for f in findings if f.severity == "error"]
        if errors:
            raise PreconditionViolation(
                "; ".join(f"{f.code}: {f.message}" for f in errors), findings
            )
    return findings


class _ResidualPanel:
    """Vectorized membership/distance scans for homogeneous linear families."""

    def __init__(self, rows, offsets, norms, equality):
        self.rows = rows
        self.offsets = offsets
        self.norms = norms
        self.equality = equality

    @classmethod
    def build(cls, constraint_sets):
        kinds = {type(s) for s in constraint_sets}
        if kinds == {Halfspace}:
            equality = False
        elif kinds == {Hyperplane}:
            equality = True
        else:
            return None
        rows = np.vstack([s.a for s in constraint_sets])
        offsets = np.array([s.b for s in constraint_sets])
        norms = np.linalg.norm(rows, axis=1)
        return cls(rows, offsets, norms, equality)

    def scan(self, x):
        res = self.rows @ x - self.offsets
        if self.equality:
            res = np.abs(res)
            in_c = bool(np.all(res <= 0.0))
            return float(np.max(res / self.norms)), in_c
        in_c = bool(np.all(res <= 0.0))
        return float(np.max(np.maximum(res, 0.0) / self.norms)), in_c


def _set_distance(s, x) -> float:
    """Distance to a constraint set, with a max-of-members fallback.

    Intersections without a closed-form projection report the largest member
    distance, a lower bound tied to the true distance through the family's
    linear-regularity constant.
    """
    try:
        return s.distance(x)
    except UnsupportedProjection:
        if isinstance(s, Intersection):
            return max(_set_distance(m, x) for m in s.members)
        raise


def _scan_constraints(problem, panel, x):
    if panel is not None:
        return panel.scan(x)
    max_d = 0.0
    in_c = True
    for c in problem.constraints:
        if not c.set.contains(x):
            in_c = False
        d = _set_distance(c.set, x)
        if d > max_d:
            max_d = d
    return max_d, in_c


def run(problem: Problem, config: SolverConfig, row_oracle=None) -> Trace:
    """Execute the iteration and record a full trace.

    ``row_oracle``, when given, is a callable ``x -> float`` estimating
    d(x, C n Q); its value is stored on every row (the CSV column stays
    empty otherwise).  The run is deterministic: identical inputs produce
    bit-identical traces.
    """
    validate(problem, config)

    x = geometry.as_point(config.x0, problem.dim).copy()
    if not problem.q.contains(x):
        raise ValueError("x0 must belong to Q")

    panel = _ResidualPanel.build([c.set for c in problem.constraints])
    cutters = [c.cutter for c in problem.constraints]
    phis = [c.phi for c in problem.constraints]

    tol_active = config.convergence_tol is not None and config.mode is not Mode.CERTIFIED_FINITE
    divergence_bar = _DIVERGENCE_FACTOR * (1.0 + float(np.linalg.norm(x)))

    rows = []
    iterates = [x.copy()]
    delta_hat = np.inf
    status = None
    k_star = None

    def terminal_row(k, r_k, alpha_k, active, max_d, in_c, in_q, oracle_d):
        return TraceRow(
            k=k, r_k=r_k, alpha_k=alpha_k, active=active,
            betas=(), displacement_norms=(), phis=(),
            step_norm=0.0, w_step_norm=0.0,
            max_constraint_distance=max_d, in_c=in_c, in_q=in_q,
            oracle_distance=oracle_d,
        )

    for k in range(config.max_iterations + 1):
        active = schedules.control_at(config.control, k)
        alpha_k = schedules.relaxation_at(config.plan, k)
        try:
            r_k = schedules.overrelaxation_at(config.schedule, k)
        except ExplicitExhausted:
            if k == config.max_iterations:
                r_k = float("nan")  # evaluation-only terminal row
            else:
                raise

        max_d, in_c = _scan_constraints(problem, panel, x)
        in_q = problem.q.contains(x)
        oracle_d = float(row_oracle(x)) if row_oracle is not None else None

        if in_c and in_q:
            rows.append(terminal_row(k, r_k, alpha_k, active, max_d, in_c, in_q, oracle_d))
            status, k_star = Status.FINITE_CONVERGENCE, k
            break
        if tol_active and max_d <= config.convergence_tol:
            rows.append(terminal_row(k, r_k, alpha_k, active, max_d, in_c, in_q, oracle_d))
            status, k_star = Status.TOL_REACHED, k
            break
        if k == config.max_iterations:
            rows.append(terminal_row(k, r_k, alpha_k, active, max_d, in_c, in_q, oracle_d))
            status = Status.BUDGET_EXHAUSTED
            break

        weights = schedules.weights_at(config.plan, k, active)
        report = operators.projected_step(
            problem.q, cutters, phis, weights, active, x, r_k, alpha_k
        )
        x_next = report.projected
        if not np.all(np.isfinite(x_next)):
            raise NonFiniteIterate(f"iterate at k={k + 1} has non-finite coordinates")
        if float(np.linalg.norm(x_next)) > divergence_bar:
            raise DivergenceSuspected(
                f"||x_{k + 1}|| exceeded {_DIVERGENCE_FACTOR:g} * (1 + ||x0||); "
                "trajectory looks unbounded"
            )

        step_norm = float(np.linalg.norm(x_next - x))
        w_disp = np.zeros_like(x)
        for lam, e in zip(weights, report.entries):
            w_disp += lam * e.displacement
        for e in report.entries:
            if e.phi < delta_hat:
                delta_hat = e.phi

        rows.append(
            TraceRow(
                k=k, r_k=r_k, alpha_k=alpha_k, active=active,
                betas=tuple(e.beta for e in report.entries),
                displacement_norms=tuple(e.displacement_norm for e in report.entries),
                phis=tuple(e.phi for e in report.entries),
                step_norm=step_norm,
                w_step_norm=float(np.linalg.norm(w_disp)),
                max_constraint_distance=max_d, in_c=in_c, in_q=in_q,
                oracle_distance=oracle_d,
            )
        )
        iterates.append(x_next.copy())
        x = x_next

        if config.log_every and (k + 1) % config.log_every == 0:
            log.info(
                "k=%d r_k=%.3e max_d=%.3e step=%.3e", k, r_k, max_d, step_norm
            )

    return Trace(
        problem=problem,
        config=config,
        rows=rows,
        iterates=iterates,
        status=status,
        k_star=k_star,
        delta_hat=None if not np.isfinite(delta_hat) else float(delta_hat),
    )


def check_reference_feasible(problem: Problem, z) -> np.ndarray:
    z = geometry.as_point(z, problem.dim)
    for idx, c in enumerate(problem.constraints, start=1):
        if not c.set.contains(z):
            raise ReferenceNotFeasible(f"reference point is outside constraint set {idx}")
    if not problem.q.contains(z):
        raise ReferenceNotFeasible("reference point is outside Q")
    return z


def fejer_reference_check(trace: Trace, z, eps_seq) -> bool:
    """Quasi-Fejér inequality along the trace against a feasible reference.

    TRUE iff ||x_{k+1} - z|| <= ||x_k - z|| + eps_seq[k] + 1e-10 for every
    consecutive pair of iterates.
    """
    z = check_reference_feasible(trace.problem, z)
    eps = np.asarray(eps_seq, dtype=float)
    n_steps = len(trace.iterates) - 1
    if eps.shape[0] < n_steps:
        raise ValueError(f"eps_seq has {eps.shape[0]} entries, trace has {n_steps} steps")
    dist = [float(np.linalg.norm(xk - z)) for xk in trace.iterates]
    for k in range(n_steps):
        if dist[k + 1] > dist[k] + eps[k] + 1e-10:
            return False
    return True
