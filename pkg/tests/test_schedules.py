"""Overrelaxation schedules, regime classification, controls, margins."""

import math

import numpy as np
import pytest

from feasikit import schedules as sch
from feasikit.errors import (
    EmptyControlSet,
    ExplicitExhausted,
    MarginViolation,
    UnclassifiableExplicit,
)


# ---------------------------------------------------------------------------
# values


def test_overrelaxation_at_examples():
    assert sch.overrelaxation_at(sch.Power(1.0, 2.0), 1) == 0.25
    assert sch.overrelaxation_at(sch.Geometric(1.0, 0.5), 3) == 0.125
    assert sch.overrelaxation_at(sch.Zero(), 12345) == 0.0


def test_explicit_schedule():
    e = sch.Explicit((0.5, 0.25, 0.1))
    assert e.value_at(2) == 0.1
    with pytest.raises(ExplicitExhausted):
        e.value_at(3)
    with pytest.raises(ValueError):
        sch.Explicit((0.5, -1.0))


def test_monotone_nonincreasing():
    for s in (sch.Zero(), sch.Constant(0.7), sch.Geometric(1.0, 0.9), sch.Power(2.0, 0.5)):
        vals = [s.value_at(k) for k in range(200)]
        assert all(b <= a for a, b in zip(vals, vals[1:]))
        assert all(v >= 0.0 for v in vals)


def test_invalid_schedule_parameters():
    with pytest.raises(ValueError):
        sch.Constant(0.0)
    with pytest.raises(ValueError):
        sch.Geometric(1.0, 1.0)
    with pytest.raises(ValueError):
        sch.Power(1.0, 0.0)
    with pytest.raises(ValueError):
        sch.Power(1.0, 2.0).value_at(-1)


# ---------------------------------------------------------------------------
# classification


def test_classify_examples():
    assert sch.classify(sch.Power(1.0, 2.0)).regime is sch.Regime.STAG_SUMMABLE
    assert sch.classify(sch.Power(1.0, 1.0)).regime is sch.Regime.STAG_DIVERGENT
    assert sch.classify(sch.Geometric(1.0, 0.9)).regime is sch.Regime.GEOMETRIC_OR_FASTER
    assert sch.classify(sch.Zero()).regime is sch.Regime.ZERO


def test_classify_constant_flags_warning():
    c = sch.classify(sch.Constant(0.3))
    assert c.regime is sch.Regime.STAG_DIVERGENT
    assert not c.converges_to_zero
    assert c.warnings


def test_classify_explicit_refused():
    with pytest.raises(UnclassifiableExplicit):
        sch.classify(sch.Explicit((1.0, 0.5)))


def test_power_ratio_exceeds_any_geometric_after_k_of_q():
    # constructive STAG certificate: the ratio r_{k+1}/r_k is increasing and
    # beats any q in (0,1) for all k >= K(q) = ceil(alpha*q/(1-q))
    for alpha in (0.5, 1.0, 2.0, 3.0):
        s = sch.Power(1.0, alpha)
        ratios = [s.value_at(k + 1) / s.value_at(k) for k in range(3000)]
        assert all(b >= a for a, b in zip(ratios, ratios[1:]))
        for q in (0.3, 0.5, 0.9, 0.99):
            K = math.ceil(alpha * q / (1.0 - q))
            assert all(ratios[k] > q for k in range(K, 3000))


def test_geometric_ratio_to_qk_is_constant():
    s = sch.Geometric(2.5, 0.8)
    for k in range(0, 200, 7):
        assert s.value_at(k) / 0.8**k == pytest.approx(2.5, rel=1e-12)


def test_power_partial_sums_bounded_by_integral():
    r0, alpha = 2.0, 1.5
    s = sch.Power(r0, alpha)
    ks = np.arange(1_000_000, dtype=float)
    total = float(np.sum(r0 / (ks + 1.0) ** alpha))
    assert total <= r0 * alpha / (alpha - 1.0) + r0


# ---------------------------------------------------------------------------
# controls


def test_control_at_examples():
    assert sch.control_at(sch.CyclicSingleton(3), 4) == (2,)
    assert sch.control_at(sch.Full(5), 17) == (1, 2, 3, 4, 5)
    ctrl = sch.CyclicBlocks(((1, 2), (3,)), 3)
    assert sch.control_at(ctrl, 3) == (3,)


def test_control_construction_errors():
    with pytest.raises(EmptyControlSet):
        sch.CyclicBlocks(((1,), ()), 2)
    with pytest.raises(ValueError):
        sch.CyclicBlocks(((1, 4),), 3)
    with pytest.raises(ValueError):
        sch.Full(0)


def _brute_force_intermittency(ctrl, horizon):
    # independent oracle: explicit window check over emitted sets
    full = set(range(1, ctrl.m + 1))
    for s in range(1, horizon + 1):
        if all(
            set().union(*(sch.control_at(ctrl, j) for j in range(k, k + s + 1))) == full
            for k in range(0, horizon - s + 1)
        ):
            return s
    return None


def test_minimal_intermittency_examples():
    assert sch.minimal_intermittency(sch.Full(4), 8) == 1
    assert sch.minimal_intermittency(sch.CyclicSingleton(3), 12) == 2
    assert _brute_force_intermittency(sch.CyclicSingleton(3), 12) == 2
    assert sch.minimal_intermittency(sch.CyclicBlocks(((1,), (1,)), 2), 8) is None


def test_minimal_intermittency_matches_brute_force():
    controls = [
        sch.Full(3),
        sch.CyclicSingleton(5),
        sch.CyclicBlocks(((1, 2), (3,), (2, 4)), 4),
        sch.CyclicBlocks(((1,), (2,), (1,), (3,)), 3),
    ]
    for ctrl in controls:
        horizon = 4 * sch.period(ctrl)
        assert sch.minimal_intermittency(ctrl, horizon) == _brute_force_intermittency(
            ctrl, horizon
        )


def test_intermittency_union_identity_beyond_window():
    # the certified s keeps the union identity at random k past one period
    rng = np.random.default_rng(13)
    ctrl = sch.CyclicBlocks(((1, 2), (3,), (2, 4)), 4)
    s = sch.minimal_intermittency(ctrl, 12)
    full = set(range(1, 5))
    for k in rng.integers(sch.period(ctrl), 10_000, size=10):
        window = set()
        for j in range(int(k), int(k) + s + 1):
            window.update(sch.control_at(ctrl, j))
        assert window == full


def test_intermittency_horizon_precondition():
    with pytest.raises(ValueError):
        sch.minimal_intermittency(sch.CyclicSingleton(5), 3)


# ---------------------------------------------------------------------------
# relaxation plans


def test_weights_at_examples():
    plan = sch.RelaxationPlan(alpha=1.0)
    w = sch.weights_at(plan, 0, (1, 2, 4))
    assert w == pytest.approx((1 / 3, 1 / 3, 1 / 3))
    assert sch.relaxation_at(plan, 7) == 1.0

    fixed = sch.RelaxationPlan(alpha=1.0, weight_rule=(0.7, 0.3))
    assert sch.weights_at(fixed, 0, (1,)) == (1.0,)
    assert sch.weights_at(fixed, 0, (1, 2)) == pytest.approx((0.7, 0.3))


def test_weights_sum_and_margin():
    plan = sch.RelaxationPlan(alpha=1.0, epsilon_margin=0.01)
    for active in ((1,), (1, 2), (1, 2, 3, 4, 5)):
        w = sch.weights_at(plan, 0, active)
        assert abs(sum(w) - 1.0) <= 1e-12
        assert all(x >= plan.epsilon_margin for x in w)


def test_margin_violations():
    with pytest.raises(MarginViolation):
        sch.RelaxationPlan(alpha=1.995, epsilon_margin=0.01)
    with pytest.raises(MarginViolation):
        # renormalizing (0.99, 0.01, ...) over {1, 2} leaves w2 below margin
        plan = sch.RelaxationPlan(alpha=1.0, weight_rule=(0.99, 0.001), epsilon_margin=0.05)
        sch.weights_at(plan, 0, (1, 2))
    with pytest.raises(MarginViolation):
        # uniform weights over a large active set can also break the margin
        plan = sch.RelaxationPlan(alpha=1.0, epsilon_margin=0.3)
        sch.weights_at(plan, 0, (1, 2, 3, 4))
    with pytest.raises(EmptyControlSet):
        sch.weights_at(sch.RelaxationPlan(alpha=1.0), 0, ())
