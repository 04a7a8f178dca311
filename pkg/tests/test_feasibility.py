import numpy as np
import pytest

from posgoods.core import distributions as D
from posgoods.errors import EmptyIntervalError, NonMonotoneError, WeightSumError
from posgoods.feasibility.allocation import (
    ExclusionSide,
    Pool,
    Separation,
    StatusAllocation,
    StatusMode,
    curve_allocation,
    full_separation,
    mix,
    total_pooling,
)
from posgoods.feasibility.majorization import check_dominated_feasibility, check_mps, check_weak_majorization
from posgoods.feasibility.menus import PartitionMenu, induced_status, random_menu, refinement_chain


def test_full_separation_with_cutoff(uniform01):
    s = full_separation(uniform01, 0.5)
    assert s(0.25) == 0.0
    assert s(0.75) == pytest.approx(0.75)
    assert s.exclusion_mass == pytest.approx(0.5)
    assert s.expected_status() == pytest.approx(0.375, abs=1e-12)
    assert s.participates(np.array([0.4, 0.6])).tolist() == [False, True]


def test_total_pooling_level(uniform01):
    s = total_pooling(uniform01, 0.5, gamma=0.5)
    assert s(0.9) == pytest.approx(0.75)
    assert s.pooled_intervals() == [(0.5, 1.0)]
    assert isinstance(s.top_segment(), Pool)


def test_segments_must_tile_participants(uniform01):
    with pytest.raises(ValueError):
        StatusAllocation(dist=uniform01, exclusion_cutoff=0.0, segments=(Separation(0.0, 0.6),))
    with pytest.raises(ValueError):
        StatusAllocation(dist=uniform01, exclusion_cutoff=0.0, segments=(Pool(0.0, 0.4, 0.2), Pool(0.5, 1.0, 0.7)))


def test_mix_is_pointwise_average(uniform01):
    m = mix([(0.5, full_separation(uniform01)), (0.5, total_pooling(uniform01))])
    assert m(0.2) == pytest.approx(0.5 * 0.2 + 0.5 * 0.5)
    assert check_weak_majorization(m).feasible


def test_mix_rejects_bad_weights(uniform01):
    with pytest.raises(WeightSumError):
        mix([(0.7, full_separation(uniform01)), (0.7, total_pooling(uniform01))])
    with pytest.raises(WeightSumError):
        mix([])


def test_frames_for_export(uniform01):
    alloc = full_separation(uniform01, 0.5)
    theta = np.array([0.25, 0.75, 1.0])
    df = alloc.to_frame(theta)
    assert df["s"].tolist() == pytest.approx([0.0, 0.75, 1.0])
    wait = alloc.waiting_time_frame(theta)
    assert list(wait.columns) == ["theta", "t"]
    assert wait["t"].tolist() == pytest.approx([1.0, 0.25, 0.0])


# -----------------------------
# 弱优超
# -----------------------------

def test_separation_and_pooling_are_feasible(uniform01):
    sep = check_weak_majorization(full_separation(uniform01))
    assert sep.feasible
    assert sep.worst_violation == pytest.approx(0.0, abs=1e-12)
    assert sep.expected_status == pytest.approx(0.5, abs=1e-10)
    assert check_mps(total_pooling(uniform01))


def test_excluding_is_weakly_feasible_but_not_mps(uniform01):
    s = full_separation(uniform01, 0.5)
    assert check_weak_majorization(s).feasible
    assert not check_mps(s)


def test_shifted_status_is_caught(uniform01):
    fault = curve_allocation(uniform01, lambda th: np.minimum(np.asarray(th) + 0.05, 1.0), label="fault")
    rep = check_weak_majorization(fault)
    assert not rep.feasible
    assert rep.worst_violation == pytest.approx(0.04875, abs=1e-6)
    assert rep.worst_at == pytest.approx(0.0, abs=1e-3)


def test_pooling_above_gamma_half_is_infeasible(uniform01):
    rep = check_weak_majorization(total_pooling(uniform01, gamma=0.8))
    assert not rep.feasible
    assert rep.worst_violation > 0.01


def test_majorization_rejects_foreign_distribution(uniform01):
    s = full_separation(uniform01)
    assert check_weak_majorization(s, uniform01).feasible
    with pytest.raises(ValueError):
        check_weak_majorization(s, D.uniform(0.0, 1.0))
    with pytest.raises(ValueError):
        check_mps(s, D.exponential(1.0))


def test_non_monotone_status_rejected(uniform01):
    with pytest.raises(NonMonotoneError):
        check_weak_majorization(curve_allocation(uniform01, lambda th: 1.0 - np.asarray(th)))


def test_negative_status_dominated_feasibility(uniform01):
    s = curve_allocation(uniform01, lambda th: np.asarray(th) - 0.5, label="shifted_down")
    assert check_dominated_feasibility(s).feasible


def test_excluding_high_types_reference(uniform01):
    """被排除的高类型质量排在最底层时，s = τ + (1 − τ₀) 恰好可行。"""
    s = StatusAllocation(
        dist=uniform01,
        exclusion_cutoff=0.5,
        segments=(Separation(0.0, 0.5, shift=0.5),),
        exclusion_side=ExclusionSide.ABOVE,
    )
    assert s(0.9) == 0.0
    assert s(0.25) == pytest.approx(0.75)
    assert check_weak_majorization(s).feasible


# -----------------------------
# 菜单
# -----------------------------

def test_menu_validation():
    with pytest.raises(EmptyIntervalError):
        PartitionMenu((0.0, 0.5, 0.5, 1.0))
    with pytest.raises(ValueError):
        PartitionMenu((0.0, 0.6, 0.4, 1.0))
    with pytest.raises(ValueError):
        PartitionMenu((0.0, 1.0), prices=(0.1, 0.2))


def test_menu_split_and_json():
    m = PartitionMenu((0.0, 1.0)).split(0, 0.25)
    assert m.breakpoints == (0.0, 0.25, 1.0)
    assert m.levels == 2
    with pytest.raises(ValueError):
        m.split(0, 0.5)
    back = PartitionMenu.from_json(PartitionMenu((0.0, 1.0, float("inf")), prices=(0.0, 0.3)).to_json())
    assert back.breakpoints[-1] == float("inf")
    assert back.prices == (0.0, 0.3)


def test_two_level_menu_status(uniform01):
    s = induced_status(PartitionMenu.two_level(uniform01, 0.5), uniform01)
    assert s(0.2) == pytest.approx(0.25)
    assert s(0.7) == pytest.approx(0.75)
    assert check_mps(s)


def test_menu_with_exclusion_and_gamma(uniform01):
    s = induced_status(PartitionMenu((0.5, 1.0)), uniform01, gamma=0.25)
    # γF(b) + (1−γ)F(a)
    assert s(0.7) == pytest.approx(0.25 * 1.0 + 0.75 * 0.5)
    assert s(0.3) == 0.0


@pytest.mark.parametrize("dist", [D.uniform(0.0, 1.0), D.exponential(1.0), D.power(2.0)], ids=lambda d: d.label)
def test_lower_gamma_lowers_expected_status(dist):
    cutoff = float(dist.quantile(0.3))
    menu = PartitionMenu.two_level(dist, float(dist.quantile(0.6)), cutoff)
    half_pool = total_pooling(dist, gamma=0.5).expected_status()
    half_cut = total_pooling(dist, cutoff, gamma=0.5).expected_status()
    half_menu = induced_status(menu, dist, gamma=0.5).expected_status()
    assert half_pool == pytest.approx(0.5, abs=1e-8)
    for g in (0.0, 0.1, 0.25, 0.45):
        assert total_pooling(dist, gamma=g).expected_status() < half_pool - 1e-6
        assert total_pooling(dist, cutoff, gamma=g).expected_status() < half_cut - 1e-6
        assert induced_status(menu, dist, gamma=g).expected_status() < half_menu - 1e-6


def test_signaling_menu_uses_conditional_means(uniform01):
    s = induced_status(PartitionMenu((0.0, 0.5, 1.0)), uniform01, mode=StatusMode.SIGNALING)
    assert s(0.1) == pytest.approx(0.25)
    assert s(0.9) == pytest.approx(0.75)
    assert check_weak_majorization(s).feasible


def test_menu_must_end_at_support_top(uniform01):
    with pytest.raises(ValueError):
        induced_status(PartitionMenu((0.0, 0.5)), uniform01)


def test_random_menus_are_feasible(uniform01, rng):
    for _ in range(5):
        menu = random_menu(uniform01, rng, cutoff=0.2)
        assert menu.cutoff == pytest.approx(0.2)
        assert check_weak_majorization(induced_status(menu, uniform01)).feasible


def test_refinement_chain_refines(rng):
    dist = D.exponential(1.0)
    chain = refinement_chain(dist, rng, steps=5)
    assert [m.levels for m in chain] == [1, 2, 3, 4, 5, 6]
    for coarse, fine in zip(chain, chain[1:]):
        assert set(coarse.breakpoints) <= set(fine.breakpoints)
