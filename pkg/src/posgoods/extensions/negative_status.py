from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core.distributions import TypeDistribution
from ..core.screening import classify, virtual_root
from ..core.value_function import ValueFunction, ValueMode, zero
from ..errors import BoundTooSmallError, InapplicableConditionError, ModeError
from ..feasibility.allocation import Curve, Separation, StatusAllocation
from ..mechanisms.exclusion import optimal_exclusion
from ..mechanisms.mechanism import Mechanism, build_mechanism
from ..mechanisms.objectives import consumer_surplus, revenue
from ..utils.logger import get_logger

log = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class NegativeStatusResult:
    mechanism: Mechanism
    bound: float
    switch_point: float
    revenue: float
    exclusion_revenue: float
    consumer_surplus: float
    exclusion_consumer_surplus: float

    @property
    def revenue_delta(self) -> float:
        return self.revenue - self.exclusion_revenue

    @property
    def cs_delta(self) -> float:
        return self.consumer_surplus - self.exclusion_consumer_surplus

    def to_dict(self) -> dict:
        return {
            "bound": self.bound,
            "switch_point": self.switch_point,
            "revenue": self.revenue,
            "exclusion_revenue": self.exclusion_revenue,
            "revenue_delta": self.revenue_delta,
            "consumer_surplus": self.consumer_surplus,
            "exclusion_consumer_surplus": self.exclusion_consumer_surplus,
            "cs_delta": self.cs_delta,
        }


def default_bound(dist: TypeDistribution, v: ValueFunction) -> float:
    """M 缺省为 1 + max|v'|。"""
    return 1.0 + v.max_abs_slope(dist)


def negative_status_allocation(dist: TypeDistribution, v: ValueFunction, switch_point: Optional[float] = None) -> StatusAllocation:
    """θ < θ₁ 时 s = −v'(θ)，θ ≥ θ₁ 时 s = F(θ)；θ₁ 缺省为 J^{-1}(0)。无排除。"""
    lo, hi = float(dist.support_lo), float(dist.support_hi)
    t1 = virtual_root(dist) if switch_point is None else float(switch_point)
    segments = []
    if t1 > lo:
        segments.append(Curve(lo, t1, lambda th: -np.asarray(v.slope(th), dtype=float), label="-v'"))
    if t1 < hi:
        segments.append(Separation(t1, hi))
    return StatusAllocation(dist=dist, exclusion_cutoff=lo, segments=tuple(segments), label="negative_status")


def negative_status_optimum(dist: TypeDistribution, v: Optional[ValueFunction] = None, M: Optional[float] = None) -> NegativeStatusResult:
    """
    地位可取负值（下界 −M）时的收入最优：J^{-1}(0) 以上全分离，以下 s* = −v'。
    低类型付 p = v − θv' ≥ 0，U ≡ 0；与最优排除机制比较收入与消费者剩余。
    """
    v = v or zero()
    if v.mode is not ValueMode.STANDARD:
        raise ModeError("负地位只在 standard 模式下定义")
    v.validate(dist)
    if not classify(dist).regular:
        raise InapplicableConditionError(f"{dist.label} 不满足正则性，负地位最优机制无刻画")
    need = v.max_abs_slope(dist)
    bound = default_bound(dist, v) if M is None else float(M)
    if bound < need:
        raise BoundTooSmallError(f"负地位下界 M={bound:g} 小于 max|v'|={need:g}")

    t1 = virtual_root(dist)
    alloc = negative_status_allocation(dist, v, t1)
    mech = build_mechanism(alloc, v, 0.0, label="negative_status")
    rev = revenue(alloc, v=v, U0=0.0)
    cs = consumer_surplus(alloc, v=v, U0=0.0, check=False)

    excl = optimal_exclusion(dist, v)
    ex_cs = consumer_surplus(excl.allocation, v=v, U0=0.0, check=False)
    log.info(f"{dist.label}: 负地位收入 {rev:.10g}，排除收入 {excl.revenue:.10g}")
    return NegativeStatusResult(
        mechanism=mech,
        bound=bound,
        switch_point=t1,
        revenue=rev,
        exclusion_revenue=excl.revenue,
        consumer_surplus=cs,
        exclusion_consumer_surplus=ex_cs,
    )


def excessive_waiting_pause(dist: TypeDistribution, v: ValueFunction, tol: float = 1e-9) -> float:
    """
    线性 v = v₀ + αθ：低类型的等待时间 1 + α 可以这样实现：先暂停 α + F(θ₁)/2，
    再把 θ₁ 以下的类型随机排序一起服务（混同层的等待为 1 − F(θ₁)/2）。
    """
    grid = np.concatenate([[dist.support_lo], dist.theta_grid(256), [dist.theta_max]])
    slopes = v.slope(grid)
    if float(np.ptp(slopes)) > tol:
        raise InapplicableConditionError(f"暂停长度只对线性价值函数定义，{v.label} 不是线性")
    alpha = float(slopes[0])
    return alpha + float(dist.cdf(virtual_root(dist))) / 2.0
