from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np

from ..core.distributions import TypeDistribution
from ..core.screening import mean_residual_life
from ..core.value_function import ValueFunction, zero
from ..errors import UnboundedSupportError
from ..feasibility.allocation import Separation, StatusAllocation, total_pooling
from ..feasibility.menus import induced_status, random_menu, refinement_chain
from ..mechanisms.mechanism import Mechanism, build_mechanism
from ..mechanisms.welfare import ChainPoint, evaluate_chain
from ..utils import numeric
from ..utils.logger import get_logger
from .optimum import free_level_utility

log = get_logger(__name__)


@dataclass(frozen=True)
class PoolingCondition:
    holds: bool
    worst_violation: float
    mrl_holds: bool

    def to_dict(self) -> dict:
        return {"holds": self.holds, "worst_violation": self.worst_violation, "mrl_holds": self.mrl_holds}


def pooling_cs_condition(dist: TypeDistribution, grid_size: int = numeric.DEFAULT_GRID, tol: float = 1e-9, mrl_points: int = 64) -> PoolingCondition:
    """
    I(θ) = ∫_θ̲^θ ((1−F)/f − E[θ]) dF ≥ 0 对所有 θ 成立时，一个层级的消费者剩余最高。
    等价形式：平均剩余寿命 E[θ̃ − θ | θ̃ ≥ θ] ≤ E[θ]（I = (1−F)(E[θ] − MRL)）。
    """
    mu = dist.mean()
    grid = np.unique(np.concatenate([[0.0], np.linspace(0.0, dist.tau_max, grid_size + 1)]))
    cum = numeric.cumulative_integral(lambda t: dist.inverse_hazard_tau(t) - mu, grid, dist.tau_breaks)
    scale = max(1.0, abs(mu))
    worst = max(0.0, float(-np.min(cum)))
    holds = worst <= tol * scale

    # 尾部截断会放大 MRL 的相对误差，只在 τ ≤ 0.99 上交叉检验
    taus = np.linspace(0.0, 0.99, mrl_points)
    mrl = mean_residual_life(dist, taus)
    mrl_holds = bool(np.all(mrl <= mu * (1.0 + 1e-6) + 1e-9))
    if holds != mrl_holds:
        log.warning(f"{dist.label}: 积分条件 ({holds}) 与 MRL 形式 ({mrl_holds}) 判定不一致")
    return PoolingCondition(holds=holds, worst_violation=worst, mrl_holds=mrl_holds)


def uniform_dominance_condition(dist: TypeDistribution, grid_size: int = numeric.DEFAULT_GRID, tol: float = 1e-12) -> bool:
    """F(θ) ≤ θ/θ̄ 对所有 θ 成立（F 一阶随机占优均匀分布）。"""
    if not dist.bounded:
        raise UnboundedSupportError(f"{dist.label} 支撑无界，条件 F(θ) ≤ θ/θ̄ 无意义")
    hi = float(dist.support_hi)
    theta = np.concatenate([[dist.support_lo], dist.theta_grid(grid_size), [hi]])
    return bool(np.all(np.asarray(dist.cdf(theta)) * hi <= theta + tol * hi))


@dataclass(frozen=True)
class DominanceReport:
    condition: bool
    sampled_ok: bool
    worst_gap: float
    menus: int

    def to_dict(self) -> dict:
        return {"condition": self.condition, "sampled_ok": self.sampled_ok, "worst_gap": self.worst_gap, "menus": self.menus}


def per_type_dominance(
    dist: TypeDistribution,
    v: Optional[ValueFunction] = None,
    rng: Optional[np.random.Generator] = None,
    menus: int = 200,
    max_levels: int = 6,
    points: int = 257,
    tol: float = 1e-9,
) -> DominanceReport:
    """
    逐类型验证：单层（s ≡ 1/2，p ≡ 0）下的 U(θ) 不低于随机菜单下的 U(θ)。
    菜单最低层免费，U(θ) = U(θ̲) + ∫ s dx + v(θ) − v(θ̲)。
    """
    v = v or zero()
    rng = rng or np.random.default_rng(0)
    theta = np.concatenate([[dist.support_lo], dist.theta_grid(points), [dist.theta_max]])
    single = build_mechanism(total_pooling(dist), v, free_level_utility(total_pooling(dist), v))
    base = single.utility(theta)
    worst = 0.0
    for _ in range(menus):
        alloc = induced_status(random_menu(dist, rng, max_levels=max_levels), dist)
        mech = build_mechanism(alloc, v, free_level_utility(alloc, v))
        worst = max(worst, float(np.max(mech.utility(theta) - base)))
    return DominanceReport(
        condition=uniform_dominance_condition(dist),
        sampled_ok=worst <= tol,
        worst_gap=worst,
        menus=menus,
    )


def separation_at_top_check(mech: Union[Mechanism, StatusAllocation], dist: Optional[TypeDistribution] = None) -> bool:
    """分配的最高一段是正长度的 Separation。"""
    alloc = mech.alloc if isinstance(mech, Mechanism) else mech
    top = alloc.top_segment()
    return isinstance(top, Separation) and top.hi > top.lo


@dataclass(frozen=True)
class ChainCheck:
    revenue_nondecreasing: bool
    cs_nonincreasing: bool
    cs_nondecreasing: bool
    points: List[ChainPoint]

    def to_dict(self) -> dict:
        return {
            "revenue_nondecreasing": self.revenue_nondecreasing,
            "cs_nonincreasing": self.cs_nonincreasing,
            "cs_nondecreasing": self.cs_nondecreasing,
            "revenue": [p.revenue for p in self.points],
            "consumer_surplus": [p.consumer_surplus for p in self.points],
        }


def chain_property(
    dist: TypeDistribution,
    v: Optional[ValueFunction] = None,
    rng: Optional[np.random.Generator] = None,
    steps: int = 20,
    tol: float = 1e-10,
) -> ChainCheck:
    """
    无排除、U(θ̲) − v(θ̲) = 0 时沿随机细化链的收入与消费者剩余。
    IFR 下剩余不增，DFR 下剩余不减；正则时收入不减。
    """
    v = v or zero()
    rng = rng or np.random.default_rng(0)
    chain = refinement_chain(dist, rng, steps=steps)
    points = evaluate_chain(dist, chain, v, U0=float(v(dist.support_lo)))
    rev = np.array([p.revenue for p in points])
    cs = np.array([p.consumer_surplus for p in points])
    return ChainCheck(
        revenue_nondecreasing=bool(np.all(np.diff(rev) >= -tol)),
        cs_nonincreasing=bool(np.all(np.diff(cs) <= tol)),
        cs_nondecreasing=bool(np.all(np.diff(cs) >= -tol)),
        points=points,
    )
