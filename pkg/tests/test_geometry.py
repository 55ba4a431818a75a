"""Geometry primitives: projections, distances, erosions, convex functions."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from feasikit import geometry as g
from feasikit.diagnostics import oracle_distance, uniform_in_ball
from feasikit.errors import (
    DimensionMismatch,
    UnsupportedProjection,
    UnsupportedSignedDistance,
)


def v(*coords):
    return np.array(coords, dtype=float)


HALF = g.Halfspace(v(1.0, 0.0), 0.0)
BALL2 = g.Ball(v(0.0, 0.0), 2.0)
UNIT_BOX = g.Box(v(-1.0, -1.0), v(1.0, 1.0))


def sample_variants(dim=2):
    rng = np.random.default_rng(11)
    a = rng.standard_normal(dim)
    rows = rng.standard_normal((1, dim))
    return [
        g.Halfspace(a, 0.7),
        g.Hyperplane(a, -0.3),
        g.Ball(rng.standard_normal(dim), 1.5),
        g.Box(-np.abs(rng.standard_normal(dim)), np.abs(rng.standard_normal(dim))),
        g.AffineSubspace(rows, v(0.2)),
        g.Intersection((g.Box(v(-2.0, -2.0), v(0.5, 0.5)), g.Box(v(-1.0, -3.0), v(3.0, 3.0)))),
    ]


# ---------------------------------------------------------------------------
# projection / distance / signed distance / membership examples


def test_projection_examples():
    assert_allclose(HALF.project(v(2.0, 3.0)), v(0.0, 3.0))
    assert_allclose(BALL2.project(v(0.0, 0.0)), v(0.0, 0.0))
    assert_allclose(UNIT_BOX.project(v(3.0, -5.0)), v(1.0, -1.0))


def test_distance_examples():
    assert BALL2.distance(v(3.0, 0.0)) == pytest.approx(1.0, abs=1e-15)
    assert g.Halfspace(v(0.0, 1.0), 1.0).distance(v(5.0, 1.0)) == 0.0
    hyp = g.Hyperplane(v(1.0, 1.0) / np.sqrt(2.0), 0.0)
    x = v(1.0, 1.0)
    # derived oracle: distance must equal the norm of x minus its projection
    assert hyp.distance(x) == pytest.approx(np.linalg.norm(x - hyp.project(x)), abs=1e-14)
    assert hyp.distance(x) == pytest.approx(np.sqrt(2.0), abs=1e-14)


def test_signed_distance_examples():
    assert BALL2.signed_distance(v(1.0, 0.0)) == pytest.approx(-1.0, abs=1e-15)
    assert HALF.signed_distance(v(3.0, 0.0)) == pytest.approx(3.0, abs=1e-15)
    assert HALF.signed_distance(v(-2.0, 0.0)) == pytest.approx(-2.0, abs=1e-15)


def test_contains_examples():
    assert HALF.contains(v(-1e-16, 7.0))
    assert g.Ball(v(0.0, 0.0), 1.0).contains(v(1.0, 0.0))
    assert not g.Box(v(0.0, 0.0), v(1.0, 1.0)).contains(v(0.5, 1.0000001))


def test_contains_is_zero_tolerance():
    assert not HALF.contains(v(1e-300, 0.0))
    assert HALF.contains(v(0.0, 0.0))


# ---------------------------------------------------------------------------
# erosion


def test_erode_examples():
    e = BALL2.erode(1.0)
    assert isinstance(e, g.Ball) and e.radius == 1.0
    assert_allclose(e.center, v(0.0, 0.0))

    h = g.Halfspace(v(2.0, 0.0), 4.0).erode(1.0)
    assert isinstance(h, g.Halfspace)
    assert h.b == pytest.approx(2.0, abs=1e-15)

    assert g.is_empty(BALL2.erode(3.0))


def test_erode_zero_is_identity():
    for s in sample_variants():
        assert s.erode(0.0) is s


def test_erode_box_and_degenerate():
    b = g.Box(v(0.0, 0.0), v(4.0, 2.0)).erode(1.0)
    assert_allclose(b.lo, v(1.0, 1.0))
    assert_allclose(b.hi, v(3.0, 1.0))
    assert g.is_empty(g.Box(v(0.0, 0.0), v(4.0, 2.0)).erode(1.5))


def test_erode_dimension_deficient_sets_empty():
    hyp = g.Hyperplane(v(1.0, 0.0), 0.0)
    aff = g.AffineSubspace(np.array([[1.0, 0.0]]), v(0.0))
    for s in (hyp, aff):
        e = s.erode(0.5)
        assert g.is_empty(e)
        assert "erosion" in e.reason


def test_erode_distributes_over_intersection():
    inter = g.Intersection((g.Halfspace(v(1.0, 0.0), 1.0), BALL2))
    e = inter.erode(0.5)
    assert isinstance(e, g.Intersection)
    assert e.members[0].b == pytest.approx(0.5)
    assert e.members[1].radius == pytest.approx(1.5)
    assert g.is_empty(inter.erode(2.5))
    assert isinstance(g.WholeSpace().erode(10.0), g.WholeSpace)


def test_erosion_ball_membership_definition():
    # erosion = points whose eps-ball stays inside, spot-checked by sampling
    rng = np.random.default_rng(3)
    for s in (g.Halfspace(v(0.3, -1.2), 0.4), g.Ball(v(1.0, -1.0), 2.0),
              g.Box(v(-2.0, -1.0), v(1.0, 3.0))):
        eps = 0.3
        eroded = s.erode(eps)
        for _ in range(200):
            x = rng.uniform(-4, 4, 2)
            if eroded.contains(x):
                u = rng.standard_normal(2)
                u *= eps / np.linalg.norm(u)
                assert s.distance(x + u) <= 1e-9


# ---------------------------------------------------------------------------
# convex functions


def test_fn_examples():
    f = g.AffineFunction(v(1.0, 2.0), -3.0)
    assert f.value(v(1.0, 1.0)) == 0.0
    assert_allclose(f.subgradient(v(1.0, 1.0)), v(1.0, 2.0))

    m = g.MaxOfAffine(((v(1.0, 0.0), 0.0), (v(0.0, 1.0), 0.0)))
    assert m.value(v(2.0, 2.0)) == 2.0
    assert_allclose(m.subgradient(v(2.0, 2.0)), v(1.0, 0.0))  # tie -> first index

    nr = g.NormResidual(v(0.0, 0.0), 1.0)
    assert nr.value(v(3.0, 4.0)) == pytest.approx(4.0, abs=1e-15)
    assert_allclose(nr.subgradient(v(3.0, 4.0)), v(0.6, 0.8))


def test_sup_norm_residual():
    f = g.SupNormResidual(v(0.0, 0.0), 1.0)
    assert f.value(v(0.5, -3.0)) == pytest.approx(2.0)
    assert_allclose(f.subgradient(v(0.5, -3.0)), v(0.0, -1.0))
    assert_allclose(f.subgradient(v(0.0, 0.0)), v(0.0, 0.0))


def sample_functions(dim=2):
    rng = np.random.default_rng(5)
    pieces = tuple((rng.standard_normal(dim), float(rng.standard_normal())) for _ in range(4))
    return [
        g.AffineFunction(rng.standard_normal(dim), 0.3),
        g.MaxOfAffine(pieces),
        g.NormResidual(rng.standard_normal(dim), 1.2),
        g.SupNormResidual(rng.standard_normal(dim), 0.7),
    ]


def test_subgradient_inequality_sampled():
    rng = np.random.default_rng(17)
    for f in sample_functions():
        for _ in range(300):
            x = 3.0 * rng.standard_normal(2)
            y = 3.0 * rng.standard_normal(2)
            gx = f.subgradient(x)
            assert f.value(y) >= f.value(x) + gx @ (y - x) - 1e-10


def test_midpoint_convexity_sampled():
    rng = np.random.default_rng(23)
    for f in sample_functions():
        for _ in range(300):
            x = 3.0 * rng.standard_normal(2)
            y = 3.0 * rng.standard_normal(2)
            assert f.value(0.5 * (x + y)) <= 0.5 * (f.value(x) + f.value(y)) + 1e-10


def test_sublevel_set_forms():
    f = g.MaxOfAffine(((v(1.0, 0.0), -1.0), (v(0.0, 1.0), -1.0)))
    s = g.sublevel_set(f)
    assert isinstance(s, g.Intersection) and len(s.members) == 2
    assert s.contains(v(0.5, 0.5))
    assert not s.contains(v(1.5, 0.0))

    shifted = g.sublevel_set(f, shift=0.25)
    assert shifted.members[0].b == pytest.approx(0.75)

    assert isinstance(g.sublevel_set(g.NormResidual(v(0.0, 0.0), 1.0)), g.Ball)
    assert g.is_empty(g.sublevel_set(g.NormResidual(v(0.0, 0.0), 1.0), shift=2.0))
    box = g.sublevel_set(g.SupNormResidual(v(1.0, 1.0), 1.0))
    assert isinstance(box, g.Box)
    assert_allclose(box.lo, v(0.0, 0.0))


# ---------------------------------------------------------------------------
# property checks from the module invariants


def test_projection_idempotence_sampled():
    rng = np.random.default_rng(29)
    for s in sample_variants():
        for _ in range(1000):
            x = 5.0 * rng.standard_normal(2)
            p = s.project(x)
            p2 = s.project(p)
            assert np.linalg.norm(p2 - p) <= 1e-12 * (1.0 + np.linalg.norm(p))


def test_projection_membership_and_optimality_sampled():
    rng = np.random.default_rng(31)
    for s in sample_variants():
        for _ in range(200):
            x = 5.0 * rng.standard_normal(2)
            p = s.project(x)
            res = s.membership_residuals(p)
            assert np.all(res <= 1e-12 * (1.0 + np.linalg.norm(x)))
            y = s.project(5.0 * rng.standard_normal(2))  # a point of the set
            assert np.linalg.norm(x - p) <= np.linalg.norm(x - y) + 1e-10


def test_projection_firmly_nonexpansive_sampled():
    rng = np.random.default_rng(37)
    for s in sample_variants():
        for _ in range(500):
            x = 5.0 * rng.standard_normal(2)
            y = 5.0 * rng.standard_normal(2)
            px, py = s.project(x), s.project(y)
            lhs = np.linalg.norm(px - py) ** 2
            assert lhs <= (px - py) @ (x - y) + 1e-10


def test_erosion_inequality_specialized_sampled():
    # d(x, C^eps)/(d(x,C)+eps) <= d(x, C^r)/(d(x,C)+r) on analytic variants
    rng = np.random.default_rng(41)
    for s in (g.Halfspace(v(0.8, -0.6), 0.5), g.Ball(v(0.5, 0.5), 2.0)):
        checked = 0
        while checked < 1000:
            x = 8.0 * rng.standard_normal(2)
            d = s.distance(x)
            if d == 0.0:
                continue
            eps = rng.uniform(0.0, 1.0)
            r = eps + rng.uniform(0.0, 1.0)
            ce, cr = s.erode(eps), s.erode(r)
            if g.is_empty(ce) or g.is_empty(cr):
                continue
            lhs = ce.distance(x) / (d + eps)
            rhs = cr.distance(x) / (d + r)
            assert lhs <= rhs + 1e-10
            checked += 1


def test_erosion_inequality_general_max_of_affine():
    # the sublevel-set form with distances from the independent oracle
    angles = [np.pi / 2, np.pi / 2 + 2 * np.pi / 3, np.pi / 2 + 4 * np.pi / 3]
    f = g.MaxOfAffine(tuple((v(np.cos(a), np.sin(a)), -1.0) for a in angles))
    r = 0.6
    assert f.value(v(0.0, 0.0)) == -1.0  # S_{f+r} nonempty via the origin
    rng = np.random.default_rng(43)
    checked = 0
    while checked < 120:
        x = 4.0 * rng.standard_normal(2)
        fx = f.value(x)
        if fx <= 0.0:
            continue
        eps = rng.uniform(0.0, r)
        se = g.sublevel_set(f, eps)
        sr = g.sublevel_set(f, r)
        lhs = oracle_distance(se.members, x) / (fx + eps)
        rhs = oracle_distance(sr.members, x) / (fx + r)
        assert lhs <= rhs + 1e-8
        checked += 1


def test_subgradient_norm_lower_bound_sampled():
    # finite family with max_k f_k(z) < 0: infeasible points in B(z, r) have
    # subgradients no shorter than -f(z)/r
    rng = np.random.default_rng(47)
    fam = [g.AffineFunction(a, float(b)) for a, b in
           ((v(1.0, 0.2), -1.0), (v(-0.5, 1.0), -1.2), (v(0.0, -1.0), -0.8))]
    z = v(0.0, 0.0)
    fz = max(f.value(z) for f in fam)
    assert fz < 0.0
    r = 3.0
    bound = -fz / r
    for _ in range(2000):
        x = uniform_in_ball(rng, z, r)
        for f in fam:
            if f.value(x) >= 0.0:
                assert np.linalg.norm(f.subgradient(x)) >= bound - 1e-10


def test_signed_distance_lipschitz_sampled():
    rng = np.random.default_rng(53)
    sets = [g.Halfspace(v(1.0, -2.0), 0.3), g.Hyperplane(v(0.5, 1.0), -1.0),
            g.Ball(v(0.2, 0.1), 1.5), g.Box(v(-1.0, -2.0), v(2.0, 0.5))]
    for s in sets:
        for _ in range(500):
            x = 5.0 * rng.standard_normal(2)
            y = 5.0 * rng.standard_normal(2)
            diff = abs(s.signed_distance(x) - s.signed_distance(y))
            assert diff <= np.linalg.norm(x - y) + 1e-12


# ---------------------------------------------------------------------------
# errors and invariant enforcement


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        HALF.project(v(1.0, 2.0, 3.0))
    with pytest.raises(DimensionMismatch):
        BALL2.contains(v(1.0))
    with pytest.raises(DimensionMismatch):
        g.AffineFunction(v(1.0, 0.0), 0.0).value(v(1.0, 2.0, 3.0))
    with pytest.raises(DimensionMismatch):
        g.Box(v(0.0, 0.0), v(1.0, 1.0, 1.0))


def test_invalid_constructions():
    with pytest.raises(ValueError):
        g.Halfspace(v(0.0, 0.0), 1.0)
    with pytest.raises(ValueError):
        g.Ball(v(0.0), -1.0)
    with pytest.raises(ValueError):
        g.Box(v(1.0), v(0.0))
    with pytest.raises(ValueError):
        g.Intersection(())
    with pytest.raises(ValueError):
        g.Ball(v(np.nan), 1.0)
    with pytest.raises(ValueError):
        g.AffineSubspace(np.zeros((1, 2)), v(0.0))


def test_unsupported_operations():
    with pytest.raises(UnsupportedSignedDistance):
        g.WholeSpace().signed_distance(v(0.0, 0.0))
    inter = g.Intersection((HALF, BALL2))
    with pytest.raises(UnsupportedSignedDistance):
        inter.signed_distance(v(0.0, 0.0))
    with pytest.raises(UnsupportedProjection):
        inter.project(v(0.0, 0.0))


def test_intersection_closed_forms():
    single = g.Intersection((BALL2,))
    assert_allclose(single.project(v(4.0, 0.0)), v(2.0, 0.0))

    boxes = g.Intersection((g.Box(v(-2.0, -2.0), v(1.0, 1.0)), g.Box(v(0.0, -1.0), v(3.0, 3.0))))
    assert_allclose(boxes.project(v(5.0, -5.0)), v(1.0, -1.0))

    planes = g.Intersection((g.Hyperplane(v(1.0, 0.0), 1.0), g.Hyperplane(v(0.0, 1.0), 2.0)))
    assert_allclose(planes.project(v(9.0, -9.0)), v(1.0, 2.0), atol=1e-12)

    disjoint = g.Intersection((g.Box(v(0.0,), v(1.0,)), g.Box(v(2.0,), v(3.0,))))
    with pytest.raises(UnsupportedProjection):
        disjoint.project(v(0.5,))


def test_immutability():
    with pytest.raises(ValueError):
        HALF.a[0] = 5.0
