import numpy as np
import pytest

from posgoods.core import distributions as D
from posgoods.core.value_function import ValueMode, linear, sqrt_shift
from posgoods.errors import BoundTooSmallError, InapplicableConditionError, ModeError, NonConvexCostError
from posgoods.extensions.intrinsic import intrinsic_monotonicity_check, intrinsic_quality_optimum, power_cost, quadratic
from posgoods.extensions.negative_status import (
    default_bound,
    excessive_waiting_pause,
    negative_status_allocation,
    negative_status_optimum,
)
from posgoods.extensions.phi_status import (
    PhiShape,
    PhiTransform,
    make_phi,
    phi_condition_check,
    phi_transformed_optimum,
    power_phi,
    sqrt_phi,
)
from posgoods.extensions.suffering import (
    cs_max_mode,
    suffering_allocation,
    suffering_no_exclusion_condition,
    suffering_objective,
    suffering_optimum,
    suffering_pooling,
)
from posgoods.feasibility.majorization import check_weak_majorization
from posgoods.mechanisms.objectives import revenue


def _suffering_value():
    return linear(2.0, -1.0, mode=ValueMode.SUFFERING)


# -----------------------------
# 内在质量
# -----------------------------

def test_intrinsic_quadratic_uniform(uniform01):
    res = intrinsic_quality_optimum(uniform01, quadratic(1.0))
    assert res.cutoff == pytest.approx(0.5, abs=1e-10)
    assert res.revenue_pure_intrinsic == pytest.approx(1.0 / 12.0, abs=1e-10)
    assert res.revenue_with_status == pytest.approx(7.0 / 24.0, abs=1e-10)
    assert res.status_uplift == pytest.approx(5.0 / 24.0, abs=1e-10)
    # Q(θ) = 2θ − 1，p(1) = 2 − ∫_{1/2}^1 (3x − 1) dx
    assert res.quality(0.75) == pytest.approx(0.5)
    assert res.payment(1.0)[0] == pytest.approx(1.375, abs=1e-10)
    assert res.payment(0.25)[0] == 0.0
    assert intrinsic_monotonicity_check(res).ok


def test_intrinsic_power_cost(uniform01):
    res = intrinsic_quality_optimum(uniform01, power_cost(1.0, 3.0))
    assert res.quality(1.0) == pytest.approx(1.0)
    assert res.revenue_pure_intrinsic > 0
    assert intrinsic_monotonicity_check(res).ok


def test_intrinsic_rejects_bad_inputs(uniform01):
    with pytest.raises(NonConvexCostError):
        quadratic(0.0)
    with pytest.raises(NonConvexCostError):
        power_cost(1.0, 1.0)
    with pytest.raises(InapplicableConditionError):
        intrinsic_quality_optimum(D.power(0.5), quadratic(1.0))


# -----------------------------
# φ 变换
# -----------------------------

def test_phi_shapes():
    assert power_phi(2.0).shape is PhiShape.CONVEX
    assert sqrt_phi().shape is PhiShape.CONCAVE
    assert power_phi(2.0)(0.5) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        make_phi(lambda x: 1.0 - np.asarray(x), lambda x: -np.ones_like(np.asarray(x)), "decreasing")
    with pytest.raises(ValueError):
        PhiTransform(phi=lambda x: np.asarray(x) ** 2, dphi=lambda x: 2 * np.asarray(x), shape=PhiShape.CONCAVE, label="square")


def test_phi_conditions_on_uniform(uniform01):
    cond = phi_condition_check(uniform01, power_phi(2.0))
    # (1−τ)·2τ 先增后减
    assert not cond.ifr and not cond.dfr
    assert not cond.regular
    assert phi_condition_check(uniform01, power_phi(2.0), tau_lo=0.5).regular
    assert phi_condition_check(uniform01, sqrt_phi()).regular


def test_convex_phi_optimum(uniform01):
    mech = phi_transformed_optimum(uniform01, phi=power_phi(2.0))
    assert mech.cutoff == pytest.approx(0.5, abs=1e-8)
    assert revenue(mech.alloc, v=mech.v) == pytest.approx(17.0 / 96.0, abs=1e-9)
    assert mech.alloc(0.8) == pytest.approx(0.64)


def test_concave_phi_optimum(uniform01):
    mech = phi_transformed_optimum(uniform01, phi=sqrt_phi())
    assert mech.cutoff == pytest.approx(0.5, abs=1e-8)
    assert revenue(mech.alloc, v=mech.v) == pytest.approx(0.227614, abs=1e-6)


def test_identity_phi_reduces_to_exclusion(uniform01):
    mech = phi_transformed_optimum(uniform01)
    assert revenue(mech.alloc) == pytest.approx(5.0 / 24.0, abs=1e-9)


# -----------------------------
# 负地位
# -----------------------------

def test_negative_status_linear_value(uniform01):
    v = linear(0.0, 0.5)
    res = negative_status_optimum(uniform01, v)
    assert res.bound == pytest.approx(1.5)
    assert res.switch_point == pytest.approx(0.5, abs=1e-10)
    assert res.revenue == pytest.approx(5.0 / 24.0 + 0.125, abs=1e-8)
    assert res.revenue_delta == pytest.approx(0.0, abs=1e-7)
    assert res.cs_delta == pytest.approx(0.0, abs=1e-7)
    # 低类型 U ≡ 0，付 v − θv' = 0
    assert res.mechanism.alloc(0.2) == pytest.approx(-0.5)
    assert res.mechanism.utility(0.2) == pytest.approx(0.0, abs=1e-10)
    assert res.mechanism.payment(0.2) == pytest.approx(0.0, abs=1e-10)


def test_negative_status_concave_value(uniform01):
    # 严格凹 v：低类型付正价换取负地位，收入上升，消费者剩余下降
    res = negative_status_optimum(uniform01, sqrt_shift(0.01))
    assert res.switch_point == pytest.approx(0.5, abs=1e-10)
    assert res.revenue_delta > 0.0
    assert res.cs_delta < 0.0
    assert res.mechanism.alloc(0.2) == pytest.approx(-0.5 / np.sqrt(0.21), abs=1e-9)
    assert res.mechanism.payment(0.2) > 0.0


def test_negative_status_bound_and_mode(uniform01):
    with pytest.raises(BoundTooSmallError):
        negative_status_optimum(uniform01, linear(0.0, 0.5), M=0.1)
    with pytest.raises(ModeError):
        negative_status_optimum(uniform01, _suffering_value())
    assert default_bound(uniform01, sqrt_shift(1.0)) == pytest.approx(1.5)


def test_negative_status_allocation_segments(uniform01):
    alloc = negative_status_allocation(uniform01, linear(0.0, 0.5), 0.5)
    assert alloc.exclusion_mass == 0.0
    assert alloc(0.9) == pytest.approx(0.9)


def test_excessive_waiting_pause(uniform01):
    assert excessive_waiting_pause(uniform01, linear(0.0, 0.5)) == pytest.approx(0.75, abs=1e-10)
    with pytest.raises(InapplicableConditionError):
        excessive_waiting_pause(uniform01, sqrt_shift(1.0))


# -----------------------------
# suffering
# -----------------------------

def test_suffering_allocation_shift(uniform01):
    alloc = suffering_allocation(uniform01, 0.5)
    assert alloc(0.25) == pytest.approx(0.75)
    assert alloc(0.75) == 0.0
    assert check_weak_majorization(alloc).feasible
    assert suffering_pooling(uniform01)(0.3) == pytest.approx(0.5)


def test_suffering_objective_closed_form(uniform01):
    v = _suffering_value()
    for t in (0.25, 0.5, 0.9):
        assert suffering_objective(uniform01, v, t) == pytest.approx(2 * t - t**3 / 3, abs=1e-12)


def test_suffering_optimum_uniform(uniform01):
    res = suffering_optimum(uniform01, _suffering_value())
    assert res.cutoff == pytest.approx(1.0, abs=1e-9)
    assert res.revenue == pytest.approx(5.0 / 3.0, abs=1e-9)
    assert res.single_good.revenue == pytest.approx(1.5, abs=1e-9)
    assert res.single_good_ratio == pytest.approx(0.9, abs=1e-8)
    assert res.cs_max_mode == "total_pooling"
    assert res.no_exclusion_condition
    mech = res.mechanism
    assert revenue(mech.alloc, v=mech.v, check=False) == pytest.approx(5.0 / 3.0, abs=1e-8)


def test_suffering_stated_objective_same_cutoff(uniform01):
    res = suffering_optimum(uniform01, _suffering_value(), stated_objective=True)
    assert res.stated_objective
    assert res.cutoff == pytest.approx(1.0, abs=1e-9)


def test_suffering_requires_mode(uniform01):
    with pytest.raises(ModeError):
        suffering_optimum(uniform01, linear(0.0, 0.5))


def test_suffering_cs_mode_power():
    # f/F = β/θ 递减
    assert cs_max_mode(D.power(2.0)) == "total_pooling"


def test_suffering_no_exclusion_condition_fails_for_fast_decay(uniform01):
    v = linear(1.0, -1.0, mode=ValueMode.SUFFERING)
    # θ > 1/2 时 −v'/v = 1/(1−θ) > f/F = 1/θ
    assert not suffering_no_exclusion_condition(uniform01, v)
