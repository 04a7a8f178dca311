import numpy as np
import pandas as pd
import pytest

from posgoods.core import distributions as D
from posgoods.feasibility.allocation import Pool
from posgoods.ironing.hull import convex_minorant
from posgoods.ironing.ironing import (
    allocation_from_hull,
    export_hull_csv,
    integrated_virtual,
    iron,
    ironed_allocation,
    ironed_revenue,
    revenue_area,
)


def test_convex_samples_are_their_own_minorant():
    x = np.linspace(0.0, 1.0, 21)
    res = convex_minorant(x, x**2)
    assert res.regular
    assert np.allclose(res.hull, x**2)
    assert len(res.vertices) == x.size


def test_concave_bump_is_pooled():
    res = convex_minorant([0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 1.0, 0.0])
    assert res.vertices.tolist() == [0, 3]
    assert res.pooled_intervals == [(0.0, 3.0)]
    assert np.allclose(res.hull, 0.0)
    assert np.allclose(res.ironed_j, 0.0)


def test_minorant_rejects_unsorted_abscissae():
    with pytest.raises(ValueError):
        convex_minorant([0.0, 2.0, 1.0], [0.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        convex_minorant([0.0, 1.0], [0.0])


def test_integrated_virtual_value_uniform(uniform01):
    grid, jt = integrated_virtual(uniform01, 64)
    # J̃(τ) = τ² − τ
    assert np.allclose(jt, grid**2 - grid, atol=1e-12)
    with pytest.raises(ValueError):
        integrated_virtual(uniform01, 8)


def test_regular_distribution_needs_no_ironing(uniform01):
    assert iron(uniform01).regular
    assert ironed_allocation(uniform01, 0.5).label == "full_separation"


def test_power_half_pools_the_bottom():
    dist = D.power(0.5)
    res = iron(dist)
    assert len(res.pooled_intervals) == 1
    a, b = res.pooled_intervals[0]
    assert a == pytest.approx(0.0)
    assert b == pytest.approx(0.5, abs=2e-3)

    alloc = allocation_from_hull(dist, 0.0, res)
    first = alloc.segments[0]
    assert isinstance(first, Pool)
    assert first.hi == pytest.approx(0.25, abs=2e-3)
    assert first.level == pytest.approx(0.25, abs=1e-3)


def test_pool_level_follows_gamma():
    dist = D.power(0.5)
    alloc = ironed_allocation(dist, 0.0, gamma=0.25)
    assert alloc.gamma == 0.25
    first = alloc.segments[0]
    assert isinstance(first, Pool)
    # γF(b) + (1-γ)F(a)，a = 0
    assert first.level == pytest.approx(0.25 * float(dist.cdf(first.hi)), abs=1e-9)
    assert first.level == pytest.approx(0.125, abs=1e-3)

    with pytest.raises(ValueError):
        allocation_from_hull(dist, 0.0, iron(dist), gamma=1.5)


def test_ironed_revenue_matches_closed_forms(uniform01):
    assert ironed_revenue(uniform01, 0.0) == pytest.approx(1.0 / 6.0, abs=1e-10)
    assert ironed_revenue(uniform01, 0.5) == pytest.approx(5.0 / 24.0, abs=1e-10)
    assert revenue_area(uniform01, 0.5) == pytest.approx(5.0 / 24.0, abs=1e-10)


def test_ironed_revenue_power_half():
    # J 非单调时，熨平后的收入仍等于 ∫ R 的闭式（τ₀ = 0）
    assert ironed_revenue(D.power(0.5), 0.0) == pytest.approx(0.088542, abs=1e-5)


def test_export_hull_csv(tmp_path):
    p = export_hull_csv(iron(D.power(0.5), grid_size=64), tmp_path / "sub" / "hull.csv")
    df = pd.read_csv(p)
    assert list(df.columns) == ["tau", "jtilde", "hull", "ironed_j"]
    assert len(df) == 64
    assert (df["hull"] <= df["jtilde"] + 1e-12).all()
