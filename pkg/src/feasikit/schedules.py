"""Overrelaxation sequences, control sequences and relaxation plans.

Schedules are evaluated by index (no internal cursor), so concurrent queries
at arbitrary k are safe.  Regime classification separates schedules that decay
geometrically or faster from those that are slower than any geometric
sequence (STAG), the latter split by summability of the series.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyControlSet,
    ExplicitExhausted,
    MarginViolation,
    UnclassifiableExplicit,
)

__all__ = [
    "OverrelaxSchedule",
    "Zero",
    "Constant",
    "Geometric",
    "Power",
    "Explicit",
    "Regime",
    "Classification",
    "overrelaxation_at",
    "classify",
    "ControlSequence",
    "Full",
    "CyclicSingleton",
    "CyclicBlocks",
    "control_at",
    "period",
    "minimal_intermittency",
    "RelaxationPlan",
    "weights_at",
    "relaxation_at",
]


class OverrelaxSchedule:
    """Base for the r_k sequences."""

    def value_at(self, k: int) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class Zero(OverrelaxSchedule):
    """r_k = 0: the plain (non-overrelaxed) relaxed cutter method."""

    def value_at(self, k):
        _check_index(k)
        return 0.0


@dataclass(frozen=True)
class Constant(OverrelaxSchedule):
    r0: float

    def __post_init__(self):
        if not self.r0 > 0.0:
            raise ValueError("constant schedule needs r0 > 0")

    def value_at(self, k):
        _check_index(k)
        return self.r0


@dataclass(frozen=True)
class Geometric(OverrelaxSchedule):
    """r_k = r0 * q^k with q in (0, 1)."""

    r0: float
    q: float

    def __post_init__(self):
        if not self.r0 > 0.0:
            raise ValueError("geometric schedule needs r0 > 0")
        if not 0.0 < self.q < 1.0:
            raise ValueError("geometric ratio must lie in (0, 1)")

    def value_at(self, k):
        _check_index(k)
        return self.r0 * self.q**k


@dataclass(frozen=True)
class Power(OverrelaxSchedule):
    """r_k = r0 / (k+1)^alpha_exp (the 1-indexed 1/k^alpha shifted to k=0)."""

    r0: float
    alpha_exp: float

    def __post_init__(self):
        if not self.r0 > 0.0:
            raise ValueError("power schedule needs r0 > 0")
        if not self.alpha_exp > 0.0:
            raise ValueError("power schedule needs alpha_exp > 0")

    def value_at(self, k):
        _check_index(k)
        return self.r0 / (k + 1) ** self.alpha_exp


@dataclass(frozen=True)
class Explicit(OverrelaxSchedule):
    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if any(v < 0.0 or not np.isfinite(v) for v in vals):
            raise ValueError("explicit schedule values must be finite and >= 0")
        object.__setattr__(self, "values", vals)

    def value_at(self, k):
        _check_index(k)
        if k >= len(self.values):
            raise ExplicitExhausted(
                f"explicit schedule has {len(self.values)} entries, asked for k={k}"
            )
        return self.values[k]


def _check_index(k):
    if k < 0 or int(k) != k:
        raise ValueError(f"schedule index must be a nonnegative integer, got {k}")


def overrelaxation_at(sched: OverrelaxSchedule, k: int) -> float:
    return sched.value_at(k)


class Regime(enum.Enum):
    ZERO = "ZERO"
    GEOMETRIC_OR_FASTER = "GEOMETRIC_OR_FASTER"
    STAG_DIVERGENT = "STAG_DIVERGENT"
    STAG_SUMMABLE = "STAG_SUMMABLE"


@dataclass(frozen=True)
class Classification:
    regime: Regime
    summable: bool
    converges_to_zero: bool
    warnings: tuple = ()


def classify(sched: OverrelaxSchedule) -> Classification:
    """Regime of an analytic schedule; Explicit schedules are refused.

    STAG (slower than any geometric sequence) is asymptotic and cannot be
    observed from finitely many values, so it is certified per variant: power
    schedules have ratio r_{k+1}/r_k -> 1, geometric schedules fail by
    construction, and constant schedules are trivially slower than geometric
    but never reach zero (flagged with a warning).
    """
    if isinstance(sched, Zero):
        return Classification(Regime.ZERO, summable=True, converges_to_zero=True)
    if isinstance(sched, Geometric):
        return Classification(
            Regime.GEOMETRIC_OR_FASTER, summable=True, converges_to_zero=True
        )
    if isinstance(sched, Power):
        if sched.alpha_exp > 1.0:
            return Classification(
                Regime.STAG_SUMMABLE, summable=True, converges_to_zero=True
            )
        return Classification(
            Regime.STAG_DIVERGENT, summable=False, converges_to_zero=True
        )
    if isinstance(sched, Constant):
        return Classification(
            Regime.STAG_DIVERGENT,
            summable=False,
            converges_to_zero=False,
            warnings=("constant schedule does not converge to zero",),
        )
    if isinstance(sched, Explicit):
        raise UnclassifiableExplicit(
            "explicit schedules carry no asymptotic law; cannot classify"
        )
    raise TypeError(f"unknown schedule type {type(sched).__name__}")


class ControlSequence:
    """Assigns each iteration its active index set I_k (1-based indices)."""

    m: int

    def index_set(self, k: int) -> tuple:
        raise NotImplementedError

    def period(self) -> int:
        raise NotImplementedError


@dataclass(frozen=True)
class Full(ControlSequence):
    """I_k = {1, ..., m} at every iteration."""

    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("need m >= 1")

    def index_set(self, k):
        return tuple(range(1, self.m + 1))

    def period(self):
        return 1


@dataclass(frozen=True)
class CyclicSingleton(ControlSequence):
    """I_k = {1 + (k mod m)}."""

    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("need m >= 1")

    def index_set(self, k):
        return (1 + k % self.m,)

    def period(self):
        return self.m


@dataclass(frozen=True)
class CyclicBlocks(ControlSequence):
    """Cycles through a fixed list of index blocks."""

    blocks: tuple
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("need m >= 1")
        blocks = tuple(tuple(sorted(set(int(i) for i in blk))) for blk in self.blocks)
        if not blocks:
            raise ValueError("need at least one block")
        for blk in blocks:
            if not blk:
                raise EmptyControlSet("blocks must be nonempty")
            if blk[0] < 1 or blk[-1] > self.m:
                raise ValueError(f"block {blk} leaves the index range 1..{self.m}")
        object.__setattr__(self, "blocks", blocks)

    def index_set(self, k):
        return self.blocks[k % len(self.blocks)]

    def period(self):
        return len(self.blocks)


def control_at(ctrl: ControlSequence, k: int) -> tuple:
    _check_index(k)
    return ctrl.index_set(k)


def period(ctrl: ControlSequence) -> int:
    return ctrl.period()


def minimal_intermittency(ctrl: ControlSequence, horizon: int) -> int | None:
    """Smallest s >= 1 with I = I_k u ... u I_{k+s} for every k, or None.

    All implemented controls are periodic, so checking every window start in
    one period certifies the identity for all k.  Returns None when no
    s <= horizon works (in particular when the control never covers I).
    """
    p = ctrl.period()
    if horizon < p:
        raise ValueError(f"horizon {horizon} is below one full period {p}")
    full = set(range(1, ctrl.m + 1))
    covered = set()
    for k in range(p):
        covered.update(ctrl.index_set(k))
    if covered != full:
        return None
    for s in range(1, horizon + 1):
        ok = True
        for k in range(p):
            window = set()
            for j in range(k, k + s + 1):
                window.update(ctrl.index_set(j))
                if window == full:
                    break
            if window != full:
                ok = False
                break
        if ok:
            return s
    return None


@dataclass(frozen=True)
class RelaxationPlan:
    """Constant relaxation parameter plus a weight rule over active sets.

    ``weight_rule`` is either the string ``"uniform"`` or a tuple of fixed
    positive weights (one per constraint) renormalized over each active set.
    """

    alpha: float
    weight_rule: object = "uniform"
    epsilon_margin: float = 0.01

    def __post_init__(self):
        eps = float(self.epsilon_margin)
        if not 0.0 < eps < 1.0:
            raise ValueError("epsilon_margin must lie in (0, 1)")
        object.__setattr__(self, "epsilon_margin", eps)
        a = float(self.alpha)
        if not (eps <= a <= 2.0 - eps):
            raise MarginViolation(
                f"alpha = {a} outside [{eps}, {2.0 - eps}]"
            )
        object.__setattr__(self, "alpha", a)
        if self.weight_rule != "uniform":
            w = tuple(float(v) for v in self.weight_rule)
            if not w or any(v <= 0.0 for v in w):
                raise ValueError("fixed weights must be positive")
            object.__setattr__(self, "weight_rule", w)


def relaxation_at(plan: RelaxationPlan, k: int) -> float:
    _check_index(k)
    return plan.alpha


def weights_at(plan: RelaxationPlan, k: int, active) -> tuple:
    """Weights over the active set: positive, summing to 1, each >= the margin."""
    _check_index(k)
    active = tuple(active)
    if not active:
        raise EmptyControlSet("active index set is empty")
    if plan.weight_rule == "uniform":
        w = np.full(len(active), 1.0 / len(active))
    else:
        fixed = plan.weight_rule
        if max(active) > len(fixed):
            raise ValueError(
                f"active index {max(active)} exceeds the {len(fixed)} fixed weights"
            )
        w = np.array([fixed[i - 1] for i in active])
        w = w / w.sum()
    if np.any(w < plan.epsilon_margin):
        raise MarginViolation(
            f"weight {w.min():.6g} below epsilon_margin {plan.epsilon_margin}"
        )
    return tuple(float(v) for v in w)
