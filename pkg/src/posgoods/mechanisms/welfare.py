from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from ..core.distributions import TypeDistribution
from ..core.screening import classify
from ..core.value_function import ValueFunction, zero
from ..errors import InapplicableConditionError
from ..feasibility.allocation import full_separation, total_pooling
from ..feasibility.menus import PartitionMenu, induced_status
from ..utils import numeric
from ..utils.logger import get_logger
from .mechanism import Mechanism, build_mechanism
from .objectives import consumer_surplus, revenue, social_welfare

log = get_logger(__name__)


def cs_max_budget_balanced(dist: TypeDistribution, v: Optional[ValueFunction] = None) -> Mechanism:
    """
    预算平衡下的消费者剩余最大化：s = F，p(θ) = ∫_θ̲^θ x dF − E[(1−F(θ))θ]。
    对应边界效用 U(θ̲) = v(θ̲) + ∫R dτ，E[p] = 0。
    """
    v = v or zero()
    lo = float(dist.support_lo)
    u0 = float(v(lo)) + dist.integrate_tau(dist.revenue_curve, 0.0, 1.0)
    return build_mechanism(full_separation(dist, lo), v, u0, label="cs_max_budget_balanced")


def cs_max_nonneg_price(dist: TypeDistribution, v: Optional[ValueFunction] = None, gamma: float = 0.5) -> Mechanism:
    """
    非负价格下的消费者剩余最大化：
      IFR → 无排除全混同，p ≡ 0；DFR → 无排除全分离，p(θ) = ∫ x dF。
    两者皆满足（常数风险率）时取混同，二者 W 相等。
    """
    v = v or zero()
    cls = classify(dist)
    lo = float(dist.support_lo)
    if cls.ifr:
        alloc = total_pooling(dist, lo, gamma)
        u0 = lo * float(alloc(lo)) + float(v(lo))
        label = "total_pooling"
    elif cls.dfr:
        alloc = full_separation(dist, lo)
        u0 = lo * float(dist.cdf(lo)) + float(v(lo))
        label = "full_separation"
    else:
        raise InapplicableConditionError(f"{dist.label} 既非 IFR 也非 DFR，消费者剩余最优机制无刻画")
    log.info(f"{dist.label}: 非负价格消费者剩余最优 → {label}")
    return build_mechanism(alloc, v, u0, label=f"cs_max_nonneg:{label}")


def social_optimum(
    dist: TypeDistribution,
    v: Optional[ValueFunction] = None,
    lam: float = 1.0,
    nonneg_prices: bool = False,
    coarse: int = numeric.COARSE_SCAN,
) -> Mechanism:
    """
    社会计划者（收入权重 λ）：参与者全分离，截断点对 W_S 做标量搜索。
      λ ≥ 1：U(θ₀) = 0；λ < 1 只在非负价格下有意义，此时 p(θ₀) = 0，
      即 U(θ₀) = θ₀F(θ₀) + v(θ₀)。λ = 1 时不排除。
    """
    v = v or zero()
    if lam < 0:
        raise ValueError(f"λ 必须非负，收到 {lam}")
    if lam < 1.0 and not nonneg_prices:
        raise InapplicableConditionError(f"λ={lam:g} < 1 且允许负价格：目标无上界")
    if nonneg_prices:
        tau = numeric.interior_tau_grid(numeric.DEFAULT_GRID)
        tau = tau[tau <= dist.tau_max]
        j_lam = lam * np.asarray(dist.quantile(tau)) - (lam - 1.0) * np.asarray(dist.inverse_hazard_tau(tau))
        chk = numeric.check_monotone(j_lam, increasing=True)
        if not chk.ok:
            raise InapplicableConditionError(f"{dist.label}: J_λ (λ={lam:g}) 非单调，违反量 {chk.worst_violation:.3g}")

    lo = float(dist.support_lo)

    def boundary(theta0: float) -> float:
        if lam >= 1.0:
            return 0.0
        return theta0 * float(dist.cdf(theta0)) + float(v(theta0))

    def objective(t0: float) -> float:
        theta0 = float(dist.quantile(t0)) if t0 > 0 else lo
        alloc = full_separation(dist, theta0)
        if not alloc.segments:
            return 0.0
        return social_welfare(alloc, v=v, lam=lam, U0=boundary(theta0), check=False)

    if lam == 1.0:
        theta0 = lo
    else:
        best = numeric.maximize_scalar(objective, 0.0, dist.tau_max, coarse=coarse)
        theta0 = float(dist.quantile(best.x)) if best.x > 0 else lo
    alloc = full_separation(dist, theta0)
    log.info(f"{dist.label}: 社会最优 λ={lam:g} 截断 θ₀={theta0:.10g}")
    return build_mechanism(alloc, v, boundary(theta0), label=f"social_optimum(λ={lam:g})")


# -----------------------------
# 细化链上的收入 / 剩余
# -----------------------------

@dataclass(frozen=True)
class ChainPoint:
    levels: int
    revenue: float
    consumer_surplus: float


def evaluate_chain(
    dist: TypeDistribution,
    chain: Sequence[PartitionMenu],
    v: Optional[ValueFunction] = None,
    U0: float = 0.0,
) -> List[ChainPoint]:
    """沿细化菜单链计算收入与消费者剩余（截断固定，U₀ 固定）。"""
    v = v or zero()
    out: List[ChainPoint] = []
    for menu in chain:
        alloc = induced_status(menu, dist)
        out.append(ChainPoint(
            levels=menu.levels,
            revenue=revenue(alloc, v=v, U0=U0, check=False),
            consumer_surplus=consumer_surplus(alloc, v=v, U0=U0, check=False),
        ))
    return out
