import numpy as np
import pytest

from posgoods.core import distributions as D
from posgoods.core.value_function import ValueMode, linear
from posgoods.errors import ModeError, NonMonotoneError, SizeGuardError, WeightSumError
from posgoods.feasibility.menus import PartitionMenu
from posgoods.mechanisms.exclusion import optimal_exclusion
from posgoods.oracle.discrete import (
    DiscreteMechanism,
    all_pay_simulation,
    assignment_from_menu,
    build_discrete_mechanism,
    discrete_objectives,
    discretize_mechanism,
    ic_check,
    status_from_assignment,
)
from posgoods.oracle.economy import DiscreteEconomy, discretize
from posgoods.oracle.search import Objective, best_menu_search, parse_objective, suffering_lowering_search


@pytest.fixture
def econ4(uniform01):
    return discretize(uniform01, K=4)


def test_discretize_uniform(econ4):
    assert np.allclose(econ4.types, [0.125, 0.375, 0.625, 0.875])
    assert np.allclose(econ4.masses, 0.25)
    assert np.allclose(econ4.mass_at_or_above, [1.0, 0.75, 0.5, 0.25, 0.0])
    assert econ4.mean() == pytest.approx(0.5)
    with pytest.raises(ValueError):
        discretize(D.uniform(0, 1), K=1)


def test_economy_validation():
    with pytest.raises(WeightSumError):
        DiscreteEconomy(types=[1.0, 2.0], masses=[0.5, 0.6], v_values=[0, 0], v_slopes=[0, 0])
    with pytest.raises(ValueError):
        DiscreteEconomy(types=[1.0, 1.0], masses=[0.5, 0.5], v_values=[0, 0], v_slopes=[0, 0])


def test_economy_csv(tmp_path, econ4):
    path = econ4.to_csv(tmp_path / "econ.csv")
    back = DiscreteEconomy.from_csv(path)
    assert np.array_equal(back.types, econ4.types)
    assert np.array_equal(back.masses, econ4.masses)

    (tmp_path / "near.csv").write_text("type,mass\n2,0.5\n1,0.5000000001\n", encoding="utf-8")
    near = DiscreteEconomy.from_csv(tmp_path / "near.csv")
    assert near.types.tolist() == [1.0, 2.0]
    assert near.masses.sum() == pytest.approx(1.0, abs=1e-15)

    (tmp_path / "bad.csv").write_text("type,mass\n1,0.5\n2,0.6\n", encoding="utf-8")
    with pytest.raises(WeightSumError):
        DiscreteEconomy.from_csv(tmp_path / "bad.csv")


def test_status_from_assignment(econ4):
    s = status_from_assignment([-1, 0, 0, 1], econ4)
    assert np.allclose(s, [0.0, 0.5, 0.5, 0.875])
    # 标签不必单调
    s2 = status_from_assignment([1, 0, -1, 0], econ4)
    assert np.allclose(s2, [0.875, 0.5, 0.0, 0.5])
    with pytest.raises(ValueError):
        status_from_assignment([0, 0], econ4)


def test_assignment_from_menu(econ4):
    labels = assignment_from_menu(PartitionMenu((0.3, 0.7, 1.0)), econ4)
    assert labels[0] < 0
    assert labels[1:].tolist() == [0, 0, 1]


def test_envelope_mechanism_is_ic(econ4):
    s = status_from_assignment([-1, 0, 0, 1], econ4)
    mech = build_discrete_mechanism(econ4, s, cutoff=1)
    assert np.allclose(mech.payment, [0.0, 0.1875, 0.1875, 0.515625])
    rep = ic_check(mech, econ4)
    assert rep.ok and rep.ir_ok
    assert discrete_objectives(mech, econ4).revenue == pytest.approx(0.22265625)

    out = all_pay_simulation(mech, econ4)
    assert out.matches()
    assert out.levels.tolist() == [-1, 0, 0, 1]
    assert out.revenue == pytest.approx(0.22265625)


def test_free_status_is_not_ic(econ4):
    mech = DiscreteMechanism(status=[0.125, 0.375, 0.625, 0.875], payment=np.zeros(4), participates=np.ones(4, dtype=bool))
    rep = ic_check(mech, econ4)
    assert not rep.ok
    assert rep.worst_type == 1
    assert rep.worst_report == 3
    assert rep.worst_deviation == pytest.approx(0.1875)


def test_discrete_mechanism_validation():
    with pytest.raises(ValueError):
        DiscreteMechanism(status=[0.1, 0.5], payment=[0.0, 0.1], participates=[False, True])
    with pytest.raises(NonMonotoneError):
        DiscreteMechanism(status=[0.5, 0.1], payment=[0.0, 0.0], participates=[True, True])


def test_discretized_continuous_optimum_is_ic(uniform01):
    econ = discretize(uniform01, K=50)
    mech = discretize_mechanism(optimal_exclusion(uniform01).mechanism, econ)
    assert ic_check(mech, econ).ok


# -----------------------------
# 菜单搜索
# -----------------------------

def test_parse_objective():
    assert parse_objective("cs") is Objective.CONSUMER_SURPLUS
    assert parse_objective("welfare") is Objective.SOCIAL
    assert parse_objective("revenue") is Objective.REVENUE
    with pytest.raises(ValueError):
        parse_objective("profit")


def test_revenue_search_approaches_continuous(uniform01):
    res = best_menu_search(discretize(uniform01, K=200))
    assert res.value == pytest.approx(5.0 / 24.0, abs=5e-3)
    assert res.cutoff == pytest.approx(0.5, abs=0.02)
    assert res.pricing == "ir"
    assert ic_check(res.mechanism, discretize(uniform01, K=200)).ok


def test_cs_search_pools_uniform(uniform01):
    res = best_menu_search(discretize(uniform01, K=100), objective="cs", allow_exclusion=False)
    assert res.levels == 1
    assert res.pricing == "nonneg"
    assert res.value == pytest.approx(0.25, abs=1e-12)


@pytest.mark.parametrize("objective", ["revenue", "cs", "welfare"])
def test_dp_matches_exhaustive(uniform01, objective):
    econ = discretize(uniform01, linear(0.1, 0.2), K=10)
    dp = best_menu_search(econ, objective=objective, max_levels=3, lam=1.5)
    ex = best_menu_search(econ, objective=objective, max_levels=3, lam=1.5, method="exhaustive")
    assert dp.value == pytest.approx(ex.value, abs=1e-9)


def test_more_levels_never_hurt(uniform01):
    econ = discretize(uniform01, K=60)
    values = [best_menu_search(econ, max_levels=m).value for m in (1, 2, 3, 4)]
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))


def test_search_guards(uniform01):
    with pytest.raises(SizeGuardError):
        best_menu_search(discretize(uniform01, K=41), method="exhaustive")
    with pytest.raises(ValueError):
        best_menu_search(discretize(uniform01, K=10), method="annealing")
    with pytest.raises(ValueError):
        best_menu_search(discretize(uniform01, K=10), max_levels=0)
    with pytest.raises(ModeError):
        best_menu_search(discretize(uniform01, linear(2.0, -1.0, mode=ValueMode.SUFFERING), K=10))


# -----------------------------
# suffering：降低地位
# -----------------------------

def test_lowering_status_never_helps(uniform01):
    econ = discretize(uniform01, linear(2.0, -1.0, mode=ValueMode.SUFFERING), K=6)
    res = suffering_lowering_search(econ)
    assert not res.improved
    assert res.gap < 0
    assert res.candidates > 0


def test_lowering_search_guards(uniform01):
    with pytest.raises(ModeError):
        suffering_lowering_search(discretize(uniform01, K=6))
    with pytest.raises(SizeGuardError):
        suffering_lowering_search(discretize(uniform01, linear(2.0, -1.0, mode=ValueMode.SUFFERING), K=11))
