"""Exception types shared across the toolkit."""

from __future__ import annotations


class FeasikitError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(FeasikitError):
    """A point does not match the dimension of the object it is used with."""


class UnsupportedProjection(FeasikitError):
    """The set variant has no closed-form projection (use the diagnostics oracle)."""


class UnsupportedSignedDistance(FeasikitError):
    """Signed distance is undefined or not implemented for this variant."""


class ZeroSubgradientOutsideLevelSet(FeasikitError):
    """f(x) > 0 with a zero subgradient contradicts consistency of the sublevel set."""


class NonpositivePhi(FeasikitError):
    """Overrelaxation functionals must be strictly positive."""


class WeightSumViolation(FeasikitError):
    """Averaging weights must lie in (0, 1] and sum to one."""


class EmptyControlSet(FeasikitError):
    """The active index set of an iteration must be nonempty."""


class ExplicitExhausted(FeasikitError):
    """An explicit overrelaxation schedule was queried past its last entry."""


class UnclassifiableExplicit(FeasikitError):
    """Explicit schedules carry no asymptotic law and cannot be classified."""


class MarginViolation(FeasikitError):
    """A relaxation parameter or weight left the configured [eps, ...] margin."""


class PreconditionViolation(FeasikitError):
    """A certified run mode rejected the problem/config combination.

    ``findings`` holds every violated precondition, not just the first.
    """

    def __init__(self, message: str, findings=()):
        super().__init__(message)
        self.findings = list(findings)


class NonFiniteIterate(FeasikitError):
    """An iterate picked up a NaN/Inf coordinate (mis-scaled problem)."""


class DivergenceSuspected(FeasikitError):
    """Iterate norm exploded relative to the start point; trajectory unbounded."""


class ReferenceNotFeasible(FeasikitError):
    """The reference point of a (quasi-)Fejér check must lie in C and Q."""


class OracleBudgetExhausted(FeasikitError):
    """The intersection-distance oracle hit its sweep budget before converging.

    ``best_estimate`` carries the last distance estimate.
    """

    def __init__(self, message: str, best_estimate: float):
        super().__init__(message)
        self.best_estimate = best_estimate


class HypothesisViolation(FeasikitError):
    """A probe's structural hypothesis (e.g. interior-ball containment) failed."""


class SlaterViolation(FeasikitError):
    """The strict-feasibility hypothesis max_k f_k(z) < 0 failed."""


class EmptyErodedSet(FeasikitError):
    """The eroded set / shifted sublevel set required by a probe is empty."""


class InconsistentSpec(FeasikitError):
    """A problem generator spec cannot produce a consistent instance."""


class ParseError(FeasikitError):
    """A config file could not be read or decoded."""


class ValidationError(FeasikitError):
    """A config violated the schema; ``violations`` lists every problem found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
