"""Cutter operators and the extrapolated, averaged, projected iteration step.

A cutter T satisfies <z - T(x), x - T(x)> <= 0 for every x and every fixed
point z.  The two concrete cutters here are the metric projection onto a
convex set and the subgradient projection of a convex function.  The
extrapolation factor

    beta(x) = (r/phi(x) + ||T(x) - x||) / ||T(x) - x||     if T(x) != x
    beta(x) = 0                                            otherwise

stretches each nonzero displacement, and one iteration of the method is

    x_next = P_Q( x + alpha * sum_i lambda_i * beta_i(x) * (T_i(x) - x) ).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry
from .errors import (
    EmptyControlSet,
    NonpositivePhi,
    WeightSumViolation,
    ZeroSubgradientOutsideLevelSet,
)

__all__ = [
    "Cutter",
    "MetricProjection",
    "SubgradientProjection",
    "OverrelaxFunctional",
    "ConstantOne",
    "SubgradientNorm",
    "default_tau_fix",
    "beta",
    "extrapolated_step",
    "averaged_step",
    "projected_step",
    "qf1_decomposition",
    "StepEntry",
    "StepReport",
]


class Cutter:
    """Operator with Fix T equal to a convex set, applied pointwise."""

    def apply(self, x) -> np.ndarray:
        raise NotImplementedError

    def fix_set(self) -> geometry.ConvexSet:
        """Analytic description of Fix T."""
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class MetricProjection(Cutter):
    """Nearest-point map onto a closed convex set; Fix T is the set itself."""

    target: geometry.ConvexSet

    def apply(self, x):
        return self.target.project(x)

    def fix_set(self):
        return self.target


@dataclass(frozen=True, eq=False)
class SubgradientProjection(Cutter):
    """x - (f(x)/||g(x)||^2) g(x) on {f > 0}, identity elsewhere."""

    f: geometry.ConvexFunction

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        fx = self.f.value(x)
        if fx <= 0.0:
            return x.copy()
        g = self.f.subgradient(x)
        g2 = float(g @ g)
        if g2 == 0.0:
            raise ZeroSubgradientOutsideLevelSet(
                f"f(x) = {fx} > 0 with zero subgradient; sublevel set cannot be nonempty"
            )
        return x - (fx / g2) * g

    def fix_set(self):
        return geometry.sublevel_set(self.f)


class OverrelaxFunctional:
    """Strictly positive functional scaling the overrelaxation parameter."""

    def __call__(self, x) -> float:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class ConstantOne(OverrelaxFunctional):
    def __call__(self, x) -> float:
        return 1.0


@dataclass(frozen=True, eq=False)
class SubgradientNorm(OverrelaxFunctional):
    """||g(x)|| where f(x) > 0, and 1 on the feasible side."""

    f: geometry.ConvexFunction

    def __call__(self, x) -> float:
        if self.f.value(x) <= 0.0:
            return 1.0
        n = float(np.linalg.norm(self.f.subgradient(x)))
        if n == 0.0:
            raise ZeroSubgradientOutsideLevelSet(
                "zero subgradient on the infeasible side"
            )
        return n


def default_tau_fix(x) -> float:
    """Fixed-point threshold 1e-14 * (1 + ||x||).

    The extrapolation factor branches on exact equality T(x) = x, which is
    unattainable in floating point; displacements below this relative
    threshold are treated as zero.
    """
    return 1e-14 * (1.0 + float(np.linalg.norm(x)))


def beta(r_k: float, phi_value: float, displacement_norm: float, tau_fix: float) -> float:
    """Extrapolation factor for one cutter displacement.

    Returns 0 when the displacement is below ``tau_fix``; otherwise
    ``(r_k/phi_value + displacement_norm) / displacement_norm``, which is
    strictly greater than 1 whenever ``r_k > 0`` (and exactly 1 for the
    zero-overrelaxation schedule ``r_k == 0``).
    """
    if phi_value <= 0.0:
        raise NonpositivePhi(f"phi must be > 0, got {phi_value}")
    if r_k < 0.0:
        raise ValueError(f"overrelaxation parameter must be >= 0, got {r_k}")
    if displacement_norm <= tau_fix:
        return 0.0
    return (r_k / phi_value + displacement_norm) / displacement_norm


@dataclass(frozen=True)
class StepEntry:
    """Per-index record of a simultaneous step."""

    index: int               # 1-based constraint index
    displacement: np.ndarray  # T_i(x) - x
    displacement_norm: float
    beta: float
    phi: float


@dataclass(frozen=True)
class StepReport:
    """Everything one iteration computed: U_i data, V(x), and P_Q(V(x))."""

    x: np.ndarray
    entries: tuple
    averaged: np.ndarray
    projected: np.ndarray | None
    r_k: float
    alpha_k: float
    tau_fix: float

    @property
    def max_beta(self) -> float:
        return max((e.beta for e in self.entries), default=0.0)

    @property
    def max_displacement(self) -> float:
        return max((e.displacement_norm for e in self.entries), default=0.0)


def extrapolated_step(cutter, phi, x, r_k, alpha_k, tau_fix=None) -> np.ndarray:
    """U(x) = x + alpha * beta(x) * (T(x) - x) for a single cutter."""
    x = np.asarray(x, dtype=float)
    if tau_fix is None:
        tau_fix = default_tau_fix(x)
    t = cutter.apply(x)
    d = t - x
    dn = float(np.linalg.norm(d))
    b = beta(r_k, phi(x), dn, tau_fix)
    if b == 0.0:
        return x.copy()
    return x + (alpha_k * b) * d


def _validated_weights(weights, active):
    active = tuple(active)
    if not active:
        raise EmptyControlSet("active index set is empty")
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(active),):
        raise WeightSumViolation(
            f"{len(active)} active indices but {w.shape} weights"
        )
    if np.any(w <= 0.0) or np.any(w > 1.0):
        raise WeightSumViolation(f"weights must lie in (0, 1], got {w}")
    s = float(np.sum(w))
    if abs(s - 1.0) > 1e-12:
        raise WeightSumViolation(f"weights sum to {s}, expected 1")
    return w, active


def averaged_step(cutters, phis, weights, active, x, r_k, alpha_k, tau_fix=None) -> StepReport:
    """V(x) = sum over the active set of lambda_i * U_i(x).

    ``active`` holds 1-based indices into ``cutters``/``phis``; ``weights``
    aligns with it.  If x is a fixed point of every active cutter, V(x) = x.
    """
    x = np.asarray(x, dtype=float)
    if tau_fix is None:
        tau_fix = default_tau_fix(x)
    w, active = _validated_weights(weights, active)

    entries = []
    v = x.astype(float, copy=True)
    for lam, i in zip(w, active):
        cutter, phi = cutters[i - 1], phis[i - 1]
        t = cutter.apply(x)
        d = t - x
        dn = float(np.linalg.norm(d))
        pv = float(phi(x))
        b = beta(r_k, pv, dn, tau_fix)
        entries.append(StepEntry(i, d, dn, b, pv))
        if b != 0.0:
            v += (lam * alpha_k * b) * d
    return StepReport(
        x=x.copy(),
        entries=tuple(entries),
        averaged=v,
        projected=None,
        r_k=float(r_k),
        alpha_k=float(alpha_k),
        tau_fix=float(tau_fix),
    )


def projected_step(q_set, cutters, phis, weights, active, x, r_k, alpha_k, tau_fix=None) -> StepReport:
    """One full iteration: the averaged step followed by projection onto Q."""
    report = averaged_step(cutters, phis, weights, active, x, r_k, alpha_k, tau_fix)
    return StepReport(
        x=report.x,
        entries=report.entries,
        averaged=report.averaged,
        projected=q_set.project(report.averaged),
        r_k=report.r_k,
        alpha_k=report.alpha_k,
        tau_fix=report.tau_fix,
    )


def qf1_decomposition(cutters, phis, weights, active, x, r_k, tau_fix=None):
    """Split the averaged step into a cutter average plus a summable error.

    Returns ``(w, e)`` with ``w = sum_i lambda_i T_i(x)`` and
    ``e = sum_i lambda_i (r_k/phi_i(x)) (T_i(x)-x)/||T_i(x)-x||`` (indices with
    displacement below ``tau_fix`` contribute nothing to ``e``), so that the
    relaxed identity ``x + alpha (w - x + e) = V(x)`` holds and
    ``||e|| <= r_k / min_i phi_i(x)``.
    """
    x = np.asarray(x, dtype=float)
    if tau_fix is None:
        tau_fix = default_tau_fix(x)
    lam, active = _validated_weights(weights, active)

    w = np.zeros_like(x)
    e = np.zeros_like(x)
    for l, i in zip(lam, active):
        cutter, phi = cutters[i - 1], phis[i - 1]
        t = cutter.apply(x)
        w += l * t
        d = t - x
        dn = float(np.linalg.norm(d))
        if dn > tau_fix:
            pv = float(phi(x))
            if pv <= 0.0:
                raise NonpositivePhi(f"phi must be > 0, got {pv}")
            e += (l * r_k / pv) * (d / dn)
    return w, e
