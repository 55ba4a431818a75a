"""Seeded problem generators for the experiment CLI.

Instances are consistent by construction: halfspaces and balls are built to
contain a drawn point z* with a strict interior margin (certifying the
interior ball the finite-convergence theorem asks for), while the affine-only
generator routes hyperplanes through a common point, giving a nonempty
intersection with empty interior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InconsistentSpec
from .geometry import Ball, Box, Halfspace, Hyperplane, WholeSpace, as_point
from .operators import ConstantOne, MetricProjection
from .solver import Constraint, InteriorBall, Problem

__all__ = ["GeneratorSpec", "generate_problem", "draw_point_in", "build_q"]

_KINDS = ("random_halfspaces", "random_balls", "affine_only")


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    m: int
    n: int
    interior_radius: float = 0.0
    q_spec: dict | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.m < 1 or self.n < 1:
            raise ValueError("need m >= 1 and n >= 1")
        if self.kind != "affine_only" and not self.interior_radius > 0.0:
            raise InconsistentSpec(
                f"{self.kind} needs interior_radius > 0, got {self.interior_radius}"
            )

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        return cls(
            kind=d["kind"],
            m=int(d["m"]),
            n=int(d["n"]),
            interior_radius=float(d.get("interior_radius", 0.0)),
            q_spec=d.get("q"),
        )


def build_q(q_spec: dict | None, n: int):
    """Materialize the outer set Q from its config spec."""
    if q_spec is None or q_spec.get("kind", "whole") == "whole":
        return WholeSpace()
    kind = q_spec["kind"]
    if kind == "box":
        lo, hi = q_spec["lo"], q_spec["hi"]
        lo = np.full(n, float(lo)) if np.isscalar(lo) else as_point(lo, n)
        hi = np.full(n, float(hi)) if np.isscalar(hi) else as_point(hi, n)
        return Box(lo, hi)
    if kind == "ball":
        center = q_spec.get("center", 0.0)
        center = np.full(n, float(center)) if np.isscalar(center) else as_point(center, n)
        return Ball(center, float(q_spec["radius"]))
    raise ValueError(f"unknown Q kind {kind!r}")


def draw_point_in(q, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a point of Q: uniform on boxes/balls, standard normal otherwise."""
    if isinstance(q, Box):
        return rng.uniform(q.lo, q.hi)
    if isinstance(q, Ball):
        g = rng.standard_normal(n)
        g /= np.linalg.norm(g)
        r = q.radius * rng.random() ** (1.0 / n)
        return q.center + r * g
    if isinstance(q, WholeSpace):
        return rng.standard_normal(n)
    # generic fallback: project a Gaussian draw into the set
    return q.project(rng.standard_normal(n))


def _unit_normal(rng, n):
    g = rng.standard_normal(n)
    nrm = float(np.linalg.norm(g))
    while nrm == 0.0:
        g = rng.standard_normal(n)
        nrm = float(np.linalg.norm(g))
    return g / nrm


def generate_problem(spec: GeneratorSpec, seed) -> Problem:
    """Build a problem instance, deterministic in the seed.

    ``seed`` may be an integer or an already-seeded numpy Generator (the
    latter lets callers continue the same stream, e.g. to draw x0).
    """
    rng = np.random.default_rng(seed)
    q = build_q(spec.q_spec, spec.n)
    z_star = draw_point_in(q, spec.n, rng)

    constraints = []
    if spec.kind == "random_halfspaces":
        for _ in range(spec.m):
            a = _unit_normal(rng, spec.n)
            b = float(a @ z_star) + spec.interior_radius * float(np.linalg.norm(a))
            constraints.append(_metric(Halfspace(a, b)))
        ball = InteriorBall(z_star, spec.interior_radius)
    elif spec.kind == "random_balls":
        for _ in range(spec.m):
            offset = _unit_normal(rng, spec.n) * rng.uniform(0.5, 3.0)
            center = z_star + offset
            radius = float(np.linalg.norm(center - z_star)) + spec.interior_radius * (
                1.0 + rng.uniform(0.1, 1.0)
            )
            constraints.append(_metric(Ball(center, radius)))
        ball = InteriorBall(z_star, spec.interior_radius)
    else:  # affine_only: common point, empty interior
        for _ in range(spec.m):
            a = _unit_normal(rng, spec.n)
            constraints.append(_metric(Hyperplane(a, float(a @ z_star))))
        ball = None

    return Problem(
        constraints=tuple(constraints),
        q=q,
        interior_ball=ball,
        witness=z_star,
    )


def _metric(s) -> Constraint:
    return Constraint(cutter=MetricProjection(s), phi=ConstantOne(), set=s)
