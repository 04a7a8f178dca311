import numpy as np
import pytest

from posgoods.core import distributions as D
from posgoods.core.value_function import linear
from posgoods.errors import InapplicableConditionError, InfeasibleAllocationError
from posgoods.feasibility.allocation import curve_allocation, full_separation, total_pooling
from posgoods.feasibility.menus import PartitionMenu, induced_status
from posgoods.mechanisms.exclusion import (
    exclusion_gain,
    no_exclusion_condition,
    optimal_exclusion,
    power_single_good_ratio,
    single_good_optimum,
)
from posgoods.mechanisms.mechanism import build_mechanism, payment_schedule
from posgoods.mechanisms.objectives import consumer_surplus, ensure_feasible, evaluate, revenue, social_welfare
from posgoods.mechanisms.welfare import cs_max_budget_balanced, cs_max_nonneg_price, social_optimum


# -----------------------------
# 目标函数
# -----------------------------

def test_objectives_of_full_separation(uniform01):
    s = full_separation(uniform01)
    assert revenue(s) == pytest.approx(1.0 / 6.0, abs=1e-10)
    assert consumer_surplus(s) == pytest.approx(1.0 / 6.0, abs=1e-10)
    # λ = 1 时 W_S = R + W
    assert social_welfare(s) == pytest.approx(1.0 / 3.0, abs=1e-10)


def test_boundary_utility_moves_surplus_to_buyers(uniform01):
    s = full_separation(uniform01)
    assert revenue(s, U0=0.1) == pytest.approx(1.0 / 6.0 - 0.1, abs=1e-10)
    assert consumer_surplus(s, U0=0.1) == pytest.approx(1.0 / 6.0 + 0.1, abs=1e-10)


def test_value_function_enters_revenue(uniform01):
    s = full_separation(uniform01, 0.5)
    # ∫ J s + v(θ₀)(1 − F(θ₀))
    assert revenue(s, v=linear(1.0, 0.0)) == pytest.approx(5.0 / 24.0 + 0.5, abs=1e-10)


def test_infeasible_allocation_is_refused(uniform01):
    fault = curve_allocation(uniform01, lambda th: np.minimum(np.asarray(th) + 0.05, 1.0), label="fault")
    with pytest.raises(InfeasibleAllocationError):
        ensure_feasible(fault)
    with pytest.raises(InfeasibleAllocationError):
        revenue(fault)


def test_distribution_mismatch(uniform01):
    with pytest.raises(ValueError):
        revenue(full_separation(uniform01), dist=D.uniform(0.0, 1.0))


# -----------------------------
# 机制与付款
# -----------------------------

def test_envelope_payments_uniform(uniform01):
    mech = build_mechanism(full_separation(uniform01, 0.5))
    # p(θ) = θ²/2 + 1/8
    assert mech.payment(1.0) == pytest.approx(0.625, abs=1e-10)
    assert mech.payment(0.75) == pytest.approx(0.75**2 / 2 + 0.125, abs=1e-10)
    assert mech.payment(0.3) == 0.0
    assert mech.utility(0.3) == 0.0
    assert mech.envelope_residual() < 1e-9


def test_payment_schedule_forms(uniform01):
    sep = payment_schedule(full_separation(uniform01, 0.5), uniform01)
    assert sep(0.5) == pytest.approx(0.25, abs=1e-10)
    assert np.all(np.diff(sep(np.linspace(0.5, 1.0, 11))) >= 0)

    pool = payment_schedule(total_pooling(uniform01, 0.5), uniform01)
    assert pool(np.array([0.5, 0.7, 1.0])) == pytest.approx([0.375, 0.375, 0.375], abs=1e-10)

    # 两层菜单：跳跃处 p_H − p_L = θ*(s_H − s_L)
    two = payment_schedule(induced_status(PartitionMenu((0.0, 0.5, 1.0)), uniform01), uniform01)
    assert two(0.75) - two(0.25) == pytest.approx(0.25, abs=1e-10)

    with pytest.raises(ValueError):
        payment_schedule(full_separation(uniform01), D.exponential(1.0))


def test_mechanism_frame_columns(uniform01):
    df = build_mechanism(total_pooling(uniform01)).to_frame(np.array([0.1, 0.9]))
    assert list(df.columns) == ["theta", "s", "p", "U"]
    # 全混同且 U(θ̲) = 0：所有人付 θ̲·s = 0
    assert np.allclose(df["p"], 0.0)


def test_evaluate_revenue_optimum(uniform01):
    rep = evaluate(optimal_exclusion(uniform01).mechanism, lambdas=(1.0, 2.0))
    assert rep.revenue == pytest.approx(5.0 / 24.0, abs=1e-8)
    assert rep.exclusion_mass == pytest.approx(0.5, abs=1e-8)
    assert set(rep.social_welfare) == {1.0, 2.0}
    assert len(rep.utility_samples) == 11
    assert rep.to_row()["welfare_2"] == pytest.approx(rep.social_welfare[2.0])


# -----------------------------
# 最优排除
# -----------------------------

def test_optimal_exclusion_uniform(uniform01):
    res = optimal_exclusion(uniform01)
    assert res.cutoff == pytest.approx(0.5, abs=1e-8)
    assert res.revenue == pytest.approx(5.0 / 24.0, abs=1e-10)
    assert not res.ironed
    assert not res.no_exclusion_condition
    assert res.allocation(0.75) == pytest.approx(0.75)


def test_optimal_exclusion_exponential(exp1):
    res = optimal_exclusion(exp1)
    # ψ(θ) = J F = (θ − 1)(1 − e^{−θ}) = 0 ⇒ θ₀ = 1
    assert res.cutoff == pytest.approx(1.0, abs=1e-6)


def test_large_value_removes_exclusion(uniform01):
    v = linear(2.0, 0.0)
    assert no_exclusion_condition(uniform01, v)
    res = optimal_exclusion(uniform01, v)
    assert res.cutoff == pytest.approx(0.0, abs=1e-9)
    assert res.revenue == pytest.approx(1.0 / 6.0 + 2.0, abs=1e-8)


def test_exclusion_gain_flags_quoted_figure(uniform01):
    gain = exclusion_gain(uniform01)
    assert gain.computed == pytest.approx(0.25, abs=1e-6)
    assert gain.quoted == pytest.approx(0.235)
    assert gain.discrepancy
    assert not exclusion_gain(uniform01, quoted=0.25).discrepancy


# -----------------------------
# 单一商品近似
# -----------------------------

def test_single_good_ratio_uniform(uniform01):
    res = single_good_optimum(uniform01)
    assert res.revenue == pytest.approx(1.0 / (3.0 * np.sqrt(3.0)), abs=1e-9)
    assert res.cutoff == pytest.approx(1.0 / np.sqrt(3.0), abs=1e-6)
    assert res.ratio == pytest.approx(0.92376, abs=1e-4)
    assert power_single_good_ratio(1.0) == pytest.approx(res.ratio, abs=1e-6)


def test_single_good_ratio_exponential(exp1):
    assert single_good_optimum(exp1).ratio == pytest.approx(0.9191, abs=1e-3)


@pytest.mark.parametrize("beta", [0.25, 0.5, 2.0, 4.0])
def test_power_single_good_ratio_above_half(beta):
    assert 0.5 < power_single_good_ratio(beta) <= 1.0


def test_single_good_matches_closed_form_power_two():
    res = single_good_optimum(D.power(2.0))
    assert res.ratio == pytest.approx(power_single_good_ratio(2.0), abs=1e-4)


# -----------------------------
# 消费者剩余与社会福利
# -----------------------------

def test_budget_balanced_cs(uniform01):
    mech = cs_max_budget_balanced(uniform01)
    assert mech.boundary_utility == pytest.approx(1.0 / 6.0, abs=1e-10)
    assert revenue(mech.alloc, U0=mech.boundary_utility) == pytest.approx(0.0, abs=1e-9)
    assert consumer_surplus(mech.alloc, U0=mech.boundary_utility) == pytest.approx(1.0 / 3.0, abs=1e-9)


def test_nonneg_price_cs_uniform_pools(uniform01):
    mech = cs_max_nonneg_price(uniform01)
    assert "total_pooling" in mech.label
    assert consumer_surplus(mech.alloc, U0=mech.boundary_utility) == pytest.approx(0.25, abs=1e-10)


def test_nonneg_price_cs_pareto_separates():
    mech = cs_max_nonneg_price(D.pareto(2.0, 1.0))
    assert "full_separation" in mech.label


def test_nonneg_price_cs_needs_monotone_hazard():
    with pytest.raises(InapplicableConditionError):
        cs_max_nonneg_price(D.power(0.5))


def test_social_optimum(uniform01):
    assert social_optimum(uniform01, lam=1.0).cutoff == 0.0
    # J₂ = 3θ − 1，截断满足 J₂(θ₀)F(θ₀) = 0
    assert social_optimum(uniform01, lam=2.0).cutoff == pytest.approx(1.0 / 3.0, abs=1e-5)
    with pytest.raises(InapplicableConditionError):
        social_optimum(uniform01, lam=0.5)
    with pytest.raises(ValueError):
        social_optimum(uniform01, lam=-1.0)


def test_social_optimum_low_weight_nonneg_prices(uniform01):
    mech = social_optimum(uniform01, lam=0.5, nonneg_prices=True)
    assert mech.payment(mech.cutoff) == pytest.approx(0.0, abs=1e-10)
