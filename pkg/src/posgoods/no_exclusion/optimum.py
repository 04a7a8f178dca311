from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..core.distributions import TypeDistribution
from ..core.value_function import ValueFunction, zero
from ..ironing.ironing import allocation_from_hull, iron, ironed_revenue
from ..mechanisms.mechanism import Mechanism, build_mechanism
from ..utils import numeric
from ..utils.logger import get_logger

log = get_logger(__name__)


def free_level_utility(mech_alloc, v: ValueFunction) -> float:
    """最低层免费时的边界效用 U(θ̲) = θ̲ s(θ̲) + v(θ̲)。"""
    lo = float(mech_alloc.dist.support_lo)
    return lo * float(mech_alloc(lo)) + float(v(lo))


def revmax_no_exclusion(dist: TypeDistribution, v: Optional[ValueFunction] = None, grid_size: int = numeric.HULL_GRID) -> Mechanism:
    """
    不能排除时的收入最优：正则则 s = F，否则在整个支撑上熨平。
    最低层免费，收入 = ∫ J s dF。
    """
    v = v or zero()
    lo = float(dist.support_lo)
    hull = iron(dist, lo, grid_size)
    alloc = allocation_from_hull(dist, lo, hull)
    log.info(f"{dist.label}: 无排除收入最优 → {alloc.label}")
    return build_mechanism(alloc, v, free_level_utility(alloc, v), label=f"revmax_no_exclusion:{alloc.label}")


def max_revenue_no_exclusion(dist: TypeDistribution, grid_size: int = numeric.HULL_GRID) -> float:
    """熨平后的无排除最大收入（v = 0），作为比值的分母。"""
    return ironed_revenue(dist, float(dist.support_lo), grid_size=grid_size)


def max_posted_revenue(dist: TypeDistribution) -> float:
    """max_p p(1 − F(p)) = max_τ R(τ)。"""
    return numeric.maximize_scalar(lambda t: float(dist.revenue_curve(t)), 0.0, dist.tau_max).value


@dataclass(frozen=True)
class TwoLevelResult:
    price: float
    cutoff: float
    revenue: float
    max_revenue: float
    ratio: float

    def to_dict(self) -> dict:
        return {
            "price": self.price,
            "cutoff": self.cutoff,
            "revenue": self.revenue,
            "max_revenue": self.max_revenue,
            "ratio": self.ratio,
        }


def two_level_optimum(dist: TypeDistribution, max_revenue: Optional[float] = None) -> TwoLevelResult:
    """
    免费低层 + 一个付费高层。价格 p 下边际类型 θ(p) = 2p（s_H − s_L = 1/2），
    R2 = max_p p(1 − F(2p))，在价格空间直接搜索。
    """
    p_hi = 0.5 * dist.theta_max
    best = numeric.maximize_scalar(lambda p: p * float(dist.sf(2.0 * p)), 0.0, p_hi)
    max_r = max_revenue_no_exclusion(dist) if max_revenue is None else float(max_revenue)
    ratio = best.value / max_r if max_r > 0 else float("nan")
    if ratio < 0.5 - 1e-9:
        log.warning(f"{dist.label}: 两层比值 {ratio:.6g} 低于 1/2")
    return TwoLevelResult(price=best.x, cutoff=2.0 * best.x, revenue=best.value, max_revenue=max_r, ratio=ratio)


def power_two_level_ratio(beta: float) -> float:
    """
    F = θ^β 的两层比值闭式。
      β ≥ 1（正则）：maxR = β²/((1+β)(1+2β))；
      β < 1：J 在 0 附近下凹，熨平区间为 [0, 1−β]，
             maxR = (1−a)a^{1/β+1}/2 + ∫_a^1 (1−τ)τ^{1/β} dτ，a = 1−β。
    R2 = ½·β/(1+β)·(1+β)^{-1/β}。
    """
    b = float(beta)
    r2 = 0.5 * (b / (1.0 + b)) * (1.0 + b) ** (-1.0 / b)
    if b >= 1.0:
        max_r = b * b / ((1.0 + b) * (1.0 + 2.0 * b))
    else:
        a = 1.0 - b
        k = 1.0 / b
        tail = (1.0 - a ** (k + 1.0)) / (k + 1.0) - (1.0 - a ** (k + 2.0)) / (k + 2.0)
        max_r = (1.0 - a) * a ** (k + 1.0) / 2.0 + tail
    return r2 / max_r
