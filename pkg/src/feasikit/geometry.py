"""Closed convex set primitives and convex functions with subgradient selection.

Everything lives in R^n with the standard inner product and double precision.
Sets expose exact projections, distances, signed distances, membership with
zero floating-point tolerance, and (where analytic) erosions.  All objects are
immutable after construction; operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    UnsupportedProjection,
    UnsupportedSignedDistance,
)

__all__ = [
    "as_point",
    "ConvexSet",
    "Halfspace",
    "Hyperplane",
    "Ball",
    "Box",
    "AffineSubspace",
    "WholeSpace",
    "Intersection",
    "EmptySet",
    "ConvexFunction",
    "AffineFunction",
    "MaxOfAffine",
    "NormResidual",
    "SupNormResidual",
    "sublevel_set",
]

# Relative slack by which conditional projection polish pushes a point back
# inside its set; keeps zero-tolerance membership of projected points robust.
_POLISH = 1e-12


def _frozen(x, ndim=1) -> np.ndarray:
    arr = np.array(x, dtype=float, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("coordinates must be finite")
    arr.setflags(write=False)
    return arr


def as_point(x, dim: int | None = None) -> np.ndarray:
    """Coerce ``x`` to a finite 1-d float vector, checking its dimension."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"a point must be 1-d, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point coordinates must be finite")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatch(f"point has dimension {arr.shape[0]}, expected {dim}")
    return arr


class ConvexSet:
    """A closed convex subset of R^n."""

    @property
    def dim(self) -> int | None:
        """Ambient dimension, or None when the set lives in any dimension."""
        raise NotImplementedError

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise DimensionMismatch(f"a point must be 1-d, got shape {x.shape}")
        d = self.dim
        if d is not None and x.shape[0] != d:
            raise DimensionMismatch(f"point has dimension {x.shape[0]}, expected {d}")
        return x

    def project(self, x) -> np.ndarray:
        raise NotImplementedError

    def membership_residuals(self, x) -> np.ndarray:
        """Defining residuals; the set is exactly {x : all residuals <= 0}."""
        raise NotImplementedError

    def contains(self, x) -> bool:
        """Strict membership: every defining residual <= 0, zero tolerance."""
        res = self.membership_residuals(x)
        return bool(np.all(res <= 0.0))

    def distance(self, x) -> float:
        """Euclidean distance to the set; zero iff ``contains(x)``."""
        raise NotImplementedError

    def signed_distance(self, x) -> float:
        """d(x, C) - d(x, complement of C)."""
        raise UnsupportedSignedDistance(f"{type(self).__name__} has no signed distance")

    def erode(self, eps: float):
        """The set of points whose closed eps-ball stays inside the set."""
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class EmptySet:
    """Result marker for erosions that empty out; carries the reason."""

    reason: str = "empty"


def is_empty(s) -> bool:
    return isinstance(s, EmptySet)


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if eps < 0.0 or not np.isfinite(eps):
        raise ValueError("erosion radius must be finite and >= 0")
    return eps


@dataclass(frozen=True, eq=False)
class Halfspace(ConvexSet):
    """{x : <a, x> <= b} with a != 0."""

    a: np.ndarray
    b: float

    def __post_init__(self):
        object.__setattr__(self, "a", _frozen(self.a))
        object.__setattr__(self, "b", float(self.b))
        n2 = float(self.a @ self.a)
        if n2 == 0.0:
            raise ValueError("halfspace normal must be nonzero")
        object.__setattr__(self, "_norm2", n2)
        object.__setattr__(self, "_norm", float(np.sqrt(n2)))

    @property
    def dim(self):
        return self.a.shape[0]

    def residual(self, x) -> float:
        return float(self.a @ self._check(x) - self.b)

    def membership_residuals(self, x):
        return np.array([self.residual(x)])

    def project(self, x):
        x = self._check(x)
        r = float(self.a @ x - self.b)
        if r <= 0.0:
            return x.copy()
        p = x - (r / self._norm2) * self.a
        # rounding can leave p an ulp outside; push strictly in
        for _ in range(4):
            rp = float(self.a @ p - self.b)
            if rp <= 0.0:
                break
            p = p - (rp * (1.0 + _POLISH) / self._norm2) * self.a
        return p

    def distance(self, x):
        return max(0.0, self.residual(x)) / self._norm

    def signed_distance(self, x):
        return self.residual(x) / self._norm

    def erode(self, eps):
        eps = _check_eps(eps)
        if eps == 0.0:
            return self
        return Halfspace(self.a, self.b - eps * self._norm)


@dataclass(frozen=True, eq=False)
class Hyperplane(ConvexSet):
    """{x : <a, x> = b} with a != 0."""

    a: np.ndarray
    b: float

    def __post_init__(self):
        object.__setattr__(self, "a", _frozen(self.a))
        object.__setattr__(self, "b", float(self.b))
        n2 = float(self.a @ self.a)
        if n2 == 0.0:
            raise ValueError("hyperplane normal must be nonzero")
        object.__setattr__(self, "_norm2", n2)
        object.__setattr__(self, "_norm", float(np.sqrt(n2)))

    @property
    def dim(self):
        return self.a.shape[0]

    def residual(self, x) -> float:
        return float(self.a @ self._check(x) - self.b)

    def membership_residuals(self, x):
        return np.array([abs(self.residual(x))])

    def project(self, x):
        x = self._check(x)
        return x - (float(self.a @ x - self.b) / self._norm2) * self.a

    def distance(self, x):
        return abs(self.residual(x)) / self._norm

    def signed_distance(self, x):
        # the complement of a hyperplane is dense, so d(x, H\C) = 0
        return self.distance(x)

    def erode(self, eps):
        eps = _check_eps(eps)
        if eps == 0.0:
            return self
        return EmptySet("dimension-deficient set has empty erosion")


@dataclass(frozen=True, eq=False)
class Ball(ConvexSet):
    """Closed Euclidean ball {x : ||x - center|| <= radius}."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if self.radius < 0.0:
            raise ValueError("ball radius must be >= 0")

    @property
    def dim(self):
        return self.center.shape[0]

    def membership_residuals(self, x):
        x = self._check(x)
        return np.array([float(np.linalg.norm(x - self.center)) - self.radius])

    def project(self, x):
        x = self._check(x)
        v = x - self.center
        d = float(np.linalg.norm(v))
        if d <= self.radius:
            return x.copy()
        p = self.center + (self.radius / d) * v
        for _ in range(4):
            rp = float(np.linalg.norm(p - self.center)) - self.radius
            if rp <= 0.0:
                break
            p = self.center + (self.radius * (1.0 - _POLISH) / (self.radius + rp)) * (
                p - self.center
            )
        return p

    def distance(self, x):
        x = self._check(x)
        return max(0.0, float(np.linalg.norm(x - self.center)) - self.radius)

    def signed_distance(self, x):
        x = self._check(x)
        return float(np.linalg.norm(x - self.center)) - self.radius

    def erode(self, eps):
        eps = _check_eps(eps)
        if eps == 0.0:
            return self
        if eps > self.radius:
            return EmptySet("erosion radius exceeds ball radius")
        return Ball(self.center, self.radius - eps)


@dataclass(frozen=True, eq=False)
class Box(ConvexSet):
    """Axis-aligned box {x : lo <= x <= hi} (componentwise)."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", _frozen(self.lo))
        object.__setattr__(self, "hi", _frozen(self.hi))
        if self.lo.shape != self.hi.shape:
            raise DimensionMismatch("box bounds must share a dimension")
        if np.any(self.lo > self.hi):
            raise ValueError("box requires lo <= hi componentwise")

    @property
    def dim(self):
        return self.lo.shape[0]

    def membership_residuals(self, x):
        x = self._check(x)
        return np.maximum(self.lo - x, x - self.hi)

    def project(self, x):
        x = self._check(x)
        return np.clip(x, self.lo, self.hi)

    def distance(self, x):
        x = self._check(x)
        return float(np.linalg.norm(x - np.clip(x, self.lo, self.hi)))

    def signed_distance(self, x):
        x = self._check(x)
        res = np.maximum(self.lo - x, x - self.hi)
        if np.all(res <= 0.0):
            return float(np.max(res))  # -depth to the nearest face
        return self.distance(x)

    def erode(self, eps):
        eps = _check_eps(eps)
        if eps == 0.0:
            return self
        lo, hi = self.lo + eps, self.hi - eps
        if np.any(lo > hi):
            return EmptySet("erosion radius exceeds box half-width")
        return Box(lo, hi)


@dataclass(frozen=True, eq=False)
class AffineSubspace(ConvexSet):
    """{x : A x = rhs} for a row-constraint matrix A with no zero rows."""

    rows: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rows", _frozen(self.rows, ndim=2))
        object.__setattr__(self, "rhs", _frozen(self.rhs))
        if self.rows.shape[0] != self.rhs.shape[0]:
            raise DimensionMismatch("row count must match rhs length")
        if self.rows.shape[0] == 0:
            raise ValueError("affine subspace needs at least one row")
        if np.any(np.linalg.norm(self.rows, axis=1) == 0.0):
            raise ValueError("affine subspace rows must be nonzero")
        pinv = np.linalg.pinv(self.rows)
        pinv.setflags(write=False)
        object.__setattr__(self, "_pinv", pinv)

    @property
    def dim(self):
        return self.rows.shape[1]

    def membership_residuals(self, x):
        x = self._check(x)
        return np.abs(self.rows @ x - self.rhs)

    def project(self, x):
        x = self._check(x)
        return x - self._pinv @ (self.rows @ x - self.rhs)

    def distance(self, x):
        x = self._check(x)
        return float(np.linalg.norm(x - self.project(x)))

    def signed_distance(self, x):
        # proper affine subspaces have dense complements
        return self.distance(x)

    def erode(self, eps):
        eps = _check_eps(eps)
        if eps == 0.0:
            return self
        return EmptySet("dimension-deficient set has empty erosion")


@dataclass(frozen=True, eq=False)
class WholeSpace(ConvexSet):
    """All of R^n; projection is the identity."""

    @property
    def dim(self):
        return None

    def membership_residuals(self, x):
        self._check(x)
        return np.empty(0)

    def project(self, x):
        return self._check(x).copy()

    def contains(self, x):
        self._check(x)
        return True

    def distance(self, x):
        self._check(x)
        return 0.0

    def erode(self, eps):
        _check_eps(eps)
        return self


@dataclass(frozen=True, eq=False)
class Intersection(ConvexSet):
    """Intersection of finitely many convex sets.

    Projection (and hence distance) is available only when the member list
    collapses to a closed form: a single set, boxes only, or affine pieces
    only.  Everything else goes through the diagnostics oracle.
    """

    members: tuple

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("intersection needs at least one member")
        dims = {m.dim for m in members if m.dim is not None}
        if len(dims) > 1:
            raise DimensionMismatch(f"member dimensions disagree: {sorted(dims)}")
        object.__setattr__(self, "members", members)

    @property
    def dim(self):
        for m in self.members:
            if m.dim is not None:
                return m.dim
        return None

    def membership_residuals(self, x):
        return np.concatenate([m.membership_residuals(x) for m in self.members])

    def _closed_form(self):
        real = [m for m in self.members if not isinstance(m, WholeSpace)]
        if not real:
            return WholeSpace()
        if len(real) == 1:
            return real[0]
        if all(isinstance(m, Box) for m in real):
            lo = np.max([m.lo for m in real], axis=0)
            hi = np.min([m.hi for m in real], axis=0)
            if np.any(lo > hi):
                raise UnsupportedProjection("box members have empty intersection")
            return Box(lo, hi)
        if all(isinstance(m, (Hyperplane, AffineSubspace)) for m in real):
            rows, rhs = [], []
            for m in real:
                if isinstance(m, Hyperplane):
                    rows.append(m.a[None, :])
                    rhs.append([m.b])
                else:
                    rows.append(m.rows)
                    rhs.append(m.rhs)
            return AffineSubspace(np.vstack(rows), np.concatenate(rhs))
        raise UnsupportedProjection(
            "intersection has no closed-form projection; use the diagnostics oracle"
        )

    def project(self, x):
        return self._closed_form().project(self._check(x))

    def distance(self, x):
        return self._closed_form().distance(self._check(x))

    def erode(self, eps):
        eps = _check_eps(eps)
        if eps == 0.0:
            return self
        eroded = []
        for m in self.members:
            e = m.erode(eps)
            if is_empty(e):
                return e
            eroded.append(e)
        return Intersection(tuple(eroded))


class ConvexFunction:
    """A finite convex function with a deterministic subgradient selection."""

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.dim:
            raise DimensionMismatch(
                f"point has shape {x.shape}, expected ({self.dim},)"
            )
        return x

    def value(self, x) -> float:
        raise NotImplementedError

    def subgradient(self, x) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class AffineFunction(ConvexFunction):
    """f(x) = <a, x> + b."""

    a: np.ndarray
    b: float

    def __post_init__(self):
        object.__setattr__(self, "a", _frozen(self.a))
        object.__setattr__(self, "b", float(self.b))

    @property
    def dim(self):
        return self.a.shape[0]

    def value(self, x):
        return float(self.a @ self._check(x) + self.b)

    def subgradient(self, x):
        self._check(x)
        return self.a.copy()


@dataclass(frozen=True, eq=False)
class MaxOfAffine(ConvexFunction):
    """f(x) = max_j (<a_j, x> + b_j); ties pick the first maximizing index."""

    pieces: tuple

    def __post_init__(self):
        pieces = tuple((_frozen(a), float(b)) for a, b in self.pieces)
        if not pieces:
            raise ValueError("max-of-affine needs at least one piece")
        dims = {a.shape[0] for a, _ in pieces}
        if len(dims) != 1:
            raise DimensionMismatch("piece dimensions disagree")
        object.__setattr__(self, "pieces", pieces)

    @property
    def dim(self):
        return self.pieces[0][0].shape[0]

    def _values(self, x):
        x = self._check(x)
        return np.array([float(a @ x + b) for a, b in self.pieces])

    def value(self, x):
        return float(np.max(self._values(x)))

    def subgradient(self, x):
        j = int(np.argmax(self._values(x)))  # argmax returns the first maximizer
        return self.pieces[j][0].copy()


@dataclass(frozen=True, eq=False)
class NormResidual(ConvexFunction):
    """f(x) = ||x - center|| - radius."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if self.radius < 0.0:
            raise ValueError("radius must be >= 0")

    @property
    def dim(self):
        return self.center.shape[0]

    def value(self, x):
        x = self._check(x)
        return float(np.linalg.norm(x - self.center)) - self.radius

    def subgradient(self, x):
        x = self._check(x)
        v = x - self.center
        n = float(np.linalg.norm(v))
        if n == 0.0:
            return np.zeros_like(v)  # 0 is a valid subgradient at the center
        return v / n


@dataclass(frozen=True, eq=False)
class SupNormResidual(ConvexFunction):
    """f(x) = ||x - center||_inf - radius."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if self.radius < 0.0:
            raise ValueError("radius must be >= 0")

    @property
    def dim(self):
        return self.center.shape[0]

    def value(self, x):
        x = self._check(x)
        return float(np.max(np.abs(x - self.center))) - self.radius

    def subgradient(self, x):
        x = self._check(x)
        v = x - self.center
        j = int(np.argmax(np.abs(v)))
        g = np.zeros_like(v)
        if v[j] != 0.0:
            g[j] = 1.0 if v[j] > 0.0 else -1.0
        return g


def sublevel_set(f: ConvexFunction, shift: float = 0.0):
    """The set {x : f(x) + shift <= 0} as a ConvexSet (or EmptySet).

    This is the fixed-point set of the subgradient projection of ``f``
    when ``shift == 0``, and the shifted sublevel set used by the erosion
    inequality probes otherwise.
    """
    shift = float(shift)
    if isinstance(f, AffineFunction):
        return Halfspace(f.a, -f.b - shift)
    if isinstance(f, MaxOfAffine):
        halves = tuple(Halfspace(a, -b - shift) for a, b in f.pieces)
        return halves[0] if len(halves) == 1 else Intersection(halves)
    if isinstance(f, NormResidual):
        r = f.radius - shift
        if r < 0.0:
            return EmptySet("sublevel radius is negative")
        return Ball(f.center, r)
    if isinstance(f, SupNormResidual):
        r = f.radius - shift
        if r < 0.0:
            return EmptySet("sublevel radius is negative")
        return Box(f.center - r, f.center + r)
    raise TypeError(f"no sublevel-set form for {type(f).__name__}")
