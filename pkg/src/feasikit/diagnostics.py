"""Independent oracles and lemma-level property probes.

This module is the verification side of the toolkit: a Dykstra-based
intersection-distance oracle, an empirical linear-regularity probe, erosion
and subgradient-bound inequalities checked on seeded samples, and
(quasi-)Fejér verdicts over solver traces.  Probes never assert more than
they compute; regularity constants are reported, not proven.

Sampling is uniform on balls: a normalized Gaussian direction with the
radius drawn through the power transform ``R * u**(1/n)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry
from .errors import (
    EmptyErodedSet,
    HypothesisViolation,
    OracleBudgetExhausted,
    ReferenceNotFeasible,
    SlaterViolation,
)
from .geometry import ConvexFunction, ConvexSet, is_empty, sublevel_set
from .solver import check_reference_feasible

__all__ = [
    "OracleConfig",
    "OracleResult",
    "oracle_project",
    "oracle_distance",
    "uniform_in_ball",
    "Verdict",
    "RegularityReport",
    "regularity_probe",
    "erosion_inequality_probe",
    "SubgradientBoundReport",
    "subgradient_bound_probe",
    "QFVerdict",
    "qf_verdict",
    "operator_regularity_probe",
]


@dataclass(frozen=True)
class OracleConfig:
    """Inner solver used for intersection distances.

    Dykstra's scheme converges to the actual projection onto the
    intersection; plain alternating projections converge to *some* point of
    the intersection and therefore only upper-bound the distance.
    """

    method: str = "dykstra"
    budget: int = 100_000
    tol: float = 1e-10

    def __post_init__(self):
        if self.method not in ("dykstra", "alternating"):
            raise ValueError("method must be 'dykstra' or 'alternating'")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if not self.tol > 0.0:
            raise ValueError("tolerance must be > 0")


DEFAULT_ORACLE = OracleConfig()


@dataclass(frozen=True)
class OracleResult:
    point: np.ndarray
    distance: float
    converged: bool
    sweeps: int


def oracle_project(sets, x, cfg: OracleConfig = DEFAULT_ORACLE) -> OracleResult:
    """Approximate the projection of x onto the intersection of ``sets``.

    Runs cyclic sweeps until the per-sweep displacement drops below
    ``cfg.tol`` or the sweep budget runs out; the ``converged`` flag records
    which happened.
    """
    sets = list(sets)
    if not sets:
        raise ValueError("need at least one set")
    x0 = geometry.as_point(x).astype(float)
    cur = x0.copy()
    dykstra = cfg.method == "dykstra"
    incs = [np.zeros_like(cur) for _ in sets] if dykstra else None

    sweeps = 0
    converged = False
    for sweeps in range(1, cfg.budget + 1):
        prev = cur.copy()
        for i, s in enumerate(sets):
            if dykstra:
                w = cur + incs[i]
                cur = s.project(w)
                incs[i] = w - cur
            else:
                cur = s.project(cur)
        if float(np.linalg.norm(cur - prev)) <= cfg.tol:
            converged = True
            break
    return OracleResult(
        point=cur,
        distance=float(np.linalg.norm(x0 - cur)),
        converged=converged,
        sweeps=sweeps,
    )


def oracle_distance(sets, x, cfg: OracleConfig = DEFAULT_ORACLE) -> float:
    """Estimate d(x, intersection of sets); single sets resolve exactly."""
    result = oracle_project(sets, x, cfg)
    if not result.converged:
        raise OracleBudgetExhausted(
            f"oracle did not converge within {cfg.budget} sweeps",
            best_estimate=result.distance,
        )
    return result.distance


def uniform_in_ball(rng: np.random.Generator, center, radius: float) -> np.ndarray:
    """Uniform sample from the closed ball B(center, radius)."""
    center = geometry.as_point(center)
    g = rng.standard_normal(center.shape[0])
    n = float(np.linalg.norm(g))
    while n == 0.0:  # measure-zero, but deterministic code paths only
        g = rng.standard_normal(center.shape[0])
        n = float(np.linalg.norm(g))
    r = radius * rng.random() ** (1.0 / center.shape[0])
    return center + (r / n) * g


@dataclass(frozen=True)
class Verdict:
    passed: bool
    n_checked: int
    worst_violation: float
    first_violation: int | None = None
    note: str = ""


@dataclass(frozen=True)
class RegularityReport:
    """Empirical vs. theoretical linear-regularity constants for a family.

    ``kappa_theoretical = 1 + 2 * sup_{x in S} ||x - z0|| / r`` for the
    sample ball S and interior ball B(z0, r); the same constant must bound
    the distance ratio for every nonempty subfamily.
    """

    description: str
    sample_center: np.ndarray
    sample_radius: float
    interior_center: np.ndarray
    interior_radius: float
    kappa_empirical: float
    kappa_theoretical: float
    n_samples: int
    n_subfamily_checks: int
    passed: bool


def _ball_inside(s: ConvexSet, center, radius: float) -> bool:
    eroded = s.erode(radius)
    if is_empty(eroded):
        return False
    return eroded.contains(center)


def regularity_probe(
    family,
    interior_center,
    interior_radius: float,
    sample_radius: float,
    n_samples: int,
    seed: int,
    sample_center=None,
    j0: int | None = None,
    subfamily_probes: int = 2,
    oracle: OracleConfig = DEFAULT_ORACLE,
    slack: float = 1e-8,
) -> RegularityReport:
    """Check d(x, intersection) <= kappa_S * max_i d(x, C_i) on samples.

    The hypothesis is that B(interior_center, interior_radius) sits inside
    every family member except possibly the one at (1-based) position ``j0``,
    which must still contain the center.  Samples are drawn uniformly from
    B(sample_center, sample_radius) (default: around the interior center);
    each one is also tested against random nonempty subfamilies, since the
    constant does not depend on the subfamily.  Ratio 0/0 counts as 1.
    """
    family = list(family)
    z0 = geometry.as_point(interior_center)
    if not interior_radius > 0.0:
        raise ValueError("interior radius must be > 0")
    for pos, s in enumerate(family, start=1):
        if j0 is not None and pos == j0:
            if not s.contains(z0):
                raise HypothesisViolation(f"set {pos}: center outside the designated set")
            continue
        if not _ball_inside(s, z0, interior_radius):
            raise HypothesisViolation(
                f"set {pos} does not contain the interior ball"
            )

    center = z0 if sample_center is None else geometry.as_point(sample_center)
    sup_dist = float(np.linalg.norm(center - z0)) + sample_radius
    kappa_s = 1.0 + 2.0 * sup_dist / interior_radius

    rng = np.random.default_rng(seed)
    worst = 1.0
    passed = True
    n_sub = 0

    def ratio(sets, x):
        dists = [s.distance(x) for s in sets]
        dmax = max(dists)
        if dmax == 0.0:
            return 1.0
        return oracle_distance(sets, x, oracle) / dmax

    for _ in range(n_samples):
        x = uniform_in_ball(rng, center, sample_radius)
        checks = [family]
        for _ in range(subfamily_probes if len(family) > 1 else 0):
            size = int(rng.integers(1, len(family) + 1))
            idx = rng.choice(len(family), size=size, replace=False)
            checks.append([family[i] for i in sorted(idx)])
            n_sub += 1
        for sets in checks:
            rho = ratio(sets, x)
            if rho > worst:
                worst = rho
            if rho > kappa_s + slack:
                passed = False

    return RegularityReport(
        description=f"{len(family)} sets in R^{z0.shape[0]}",
        sample_center=center,
        sample_radius=float(sample_radius),
        interior_center=z0,
        interior_radius=float(interior_radius),
        kappa_empirical=float(worst),
        kappa_theoretical=float(kappa_s),
        n_samples=n_samples,
        n_subfamily_checks=n_sub,
        passed=passed,
    )


def _erosion_distance(base_set, eps, oracle):
    """Distance function to an eroded set, analytic when erosion is."""
    eroded = base_set.erode(eps)
    if is_empty(eroded):
        raise EmptyErodedSet(f"erosion by {eps} is empty: {eroded.reason}")
    if isinstance(eroded, geometry.Intersection):
        members = eroded.members
        return lambda x: oracle_distance(members, x, oracle)
    return eroded.distance


def _sublevel_distance(f, shift, witness, oracle):
    s = sublevel_set(f, shift)
    if is_empty(s):
        raise EmptyErodedSet(f"shifted sublevel set at +{shift} is empty")
    if witness is None or not (f.value(witness) + shift <= 0.0):
        raise EmptyErodedSet(
            f"need a witness with f(witness) + {shift} <= 0 to certify nonemptiness"
        )
    if isinstance(s, geometry.Intersection):
        members = s.members
        return lambda x: oracle_distance(members, x, oracle)
    return s.distance


def erosion_inequality_probe(
    target,
    eps: float,
    r: float,
    n_samples: int,
    seed: int,
    witness=None,
    sample_center=None,
    sample_radius: float | None = None,
    oracle: OracleConfig = DEFAULT_ORACLE,
    slack: float = 1e-10,
) -> Verdict:
    """Check d(x, S_eps)/(v(x)+eps) <= d(x, S_r)/(v(x)+r) on infeasible samples.

    For a ConvexSet the shifted sets are its erosions and v(x) = d(x, C);
    for a ConvexFunction they are the shifted sublevel sets and v(x) = f(x).
    Requires 0 <= eps <= r and a nonempty S_r (certified through ``witness``
    in the function form).  Samples with v(x) <= 0 are redrawn.
    """
    if not (0.0 <= eps <= r):
        raise ValueError("need 0 <= eps <= r")

    if isinstance(target, ConvexSet):
        d_eps = _erosion_distance(target, eps, oracle)
        d_r = _erosion_distance(target, r, oracle)
        violation = target.distance
        anchor = witness
        if anchor is None:
            if isinstance(target, geometry.Ball):
                anchor = target.center
            elif isinstance(target, geometry.Box):
                anchor = 0.5 * (target.lo + target.hi)
            elif isinstance(target, geometry.Halfspace):
                anchor = (target.b / float(target.a @ target.a)) * target.a
            else:
                raise ValueError("supply a witness/anchor point for this variant")
        scale = sample_radius if sample_radius is not None else 5.0 * (1.0 + r)
    elif isinstance(target, ConvexFunction):
        d_eps = _sublevel_distance(target, eps, witness, oracle)
        d_r = _sublevel_distance(target, r, witness, oracle)
        violation = target.value
        anchor = witness
        scale = sample_radius if sample_radius is not None else 5.0 * (1.0 + r)
    else:
        raise TypeError("target must be a ConvexSet or ConvexFunction")

    anchor = geometry.as_point(anchor)
    rng = np.random.default_rng(seed)
    checked = 0
    worst = -np.inf
    first_bad = None
    attempts = 0
    max_attempts = 1000 * n_samples
    while checked < n_samples and attempts < max_attempts:
        attempts += 1
        x = uniform_in_ball(rng, anchor, scale)
        v = float(violation(x))
        if v <= 0.0:
            continue
        lhs = d_eps(x) / (v + eps)
        rhs = d_r(x) / (v + r)
        gap = lhs - rhs
        if gap > worst:
            worst = gap
        if gap > slack and first_bad is None:
            first_bad = checked
        checked += 1
    if checked < n_samples:
        raise ValueError("could not draw enough infeasible samples; widen sample_radius")
    return Verdict(
        passed=first_bad is None,
        n_checked=checked,
        worst_violation=float(worst),
        first_violation=first_bad,
    )


@dataclass(frozen=True)
class SubgradientBoundReport:
    passed: bool
    bound: float
    min_norm: float | None
    n_qualifying: int
    n_samples: int


def subgradient_bound_probe(
    functions,
    z,
    r: float,
    n_samples: int,
    seed: int,
    extra_points=(),
    slack: float = 1e-10,
) -> SubgradientBoundReport:
    """Check ||g_k(x)|| >= -max_k f_k(z) / r for infeasible x in B(z, r).

    ``z`` must be strictly feasible for the whole family (Slater point); the
    probe samples the ball and also evaluates any supplied ``extra_points``
    (useful for boundary constructions that random sampling would miss).
    """
    functions = list(functions)
    z = geometry.as_point(z)
    fz = max(f.value(z) for f in functions)
    if not fz < 0.0:
        raise SlaterViolation(f"max_k f_k(z) = {fz} must be < 0")
    if not r > 0.0:
        raise ValueError("r must be > 0")
    bound = -fz / r

    rng = np.random.default_rng(seed)
    points = [uniform_in_ball(rng, z, r) for _ in range(n_samples)]
    for p in extra_points:
        p = geometry.as_point(p, z.shape[0])
        if float(np.linalg.norm(p - z)) > r * (1.0 + 1e-12):
            raise ValueError("extra point lies outside B(z, r)")
        points.append(p)

    min_norm = None
    passed = True
    n_qual = 0
    for x in points:
        for f in functions:
            if f.value(x) >= 0.0:
                n_qual += 1
                g = float(np.linalg.norm(f.subgradient(x)))
                if min_norm is None or g < min_norm:
                    min_norm = g
                if g < bound - slack:
                    passed = False
    return SubgradientBoundReport(
        passed=passed,
        bound=float(bound),
        min_norm=min_norm,
        n_qualifying=n_qual,
        n_samples=len(points),
    )


@dataclass(frozen=True)
class QFVerdict:
    kind: str
    passed: bool
    first_violation: int | None
    worst_violation: float
    eps_partial_sum: float


def qf_verdict(trace, z, kind: str, eps_seq=None, slack: float = 1e-10) -> QFVerdict:
    """Fejér / quasi-Fejér verdict for a trace against a feasible reference.

    FM:  ||x_{k+1} - z||   <= ||x_k - z||
    QF1: ||x_{k+1} - z||   <= ||x_k - z||   + eps_k
    QF2: ||x_{k+1} - z||^2 <= ||x_k - z||^2 + eps_k

    each up to ``slack``.  The partial sum of eps over the trace horizon is
    reported so the caller can judge summability.
    """
    kind = kind.upper()
    if kind not in ("FM", "QF1", "QF2"):
        raise ValueError("kind must be FM, QF1 or QF2")
    z = check_reference_feasible(trace.problem, z)

    n_steps = len(trace.iterates) - 1
    if kind == "FM":
        eps = np.zeros(n_steps)
    else:
        if eps_seq is None:
            raise ValueError(f"{kind} needs an eps sequence")
        eps = np.asarray(eps_seq, dtype=float)
        if eps.shape[0] < n_steps:
            raise ValueError(f"eps_seq has {eps.shape[0]} entries, trace has {n_steps} steps")
        eps = eps[:n_steps]
    if np.any(eps < 0.0):
        raise ValueError("eps values must be >= 0")

    dist = np.array([float(np.linalg.norm(xk - z)) for xk in trace.iterates])
    if kind == "QF2":
        lhs, rhs = dist[1:] ** 2, dist[:-1] ** 2 + eps
    else:
        lhs, rhs = dist[1:], dist[:-1] + eps
    gaps = lhs - rhs
    bad = np.nonzero(gaps > slack)[0]
    return QFVerdict(
        kind=kind,
        passed=bad.size == 0,
        first_violation=int(bad[0]) if bad.size else None,
        worst_violation=float(np.max(gaps)) if gaps.size else 0.0,
        eps_partial_sum=float(np.sum(eps)),
    )


def operator_regularity_probe(
    cutter,
    sample_center,
    sample_radius: float,
    n_samples: int,
    seed: int,
    oracle: OracleConfig = DEFAULT_ORACLE,
) -> float:
    """Empirical linear-regularity constant of a cutter.

    Returns the smallest observed ratio ||T(x) - x|| / d(x, Fix T) over
    samples outside the fixed-point set (inf when every sample is inside).
    Reported as evidence only; nothing is asserted.
    """
    fix = cutter.fix_set()

    def fix_distance(x):
        try:
            return fix.distance(x)
        except Exception:
            if isinstance(fix, geometry.Intersection):
                return oracle_distance(fix.members, x, oracle)
            raise

    rng = np.random.default_rng(seed)
    center = geometry.as_point(sample_center)
    delta = np.inf
    for _ in range(n_samples):
        x = uniform_in_ball(rng, center, sample_radius)
        d = float(fix_distance(x))
        if d <= 0.0:
            continue
        disp = float(np.linalg.norm(cutter.apply(x) - x))
        delta = min(delta, disp / d)
    return float(delta)
