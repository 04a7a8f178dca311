from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core.distributions import TypeDistribution
from ..core.value_function import ValueFunction, ValueMode
from ..errors import InapplicableConditionError, ModeError
from ..feasibility.allocation import ExclusionSide, Pool, Separation, StatusAllocation
from ..mechanisms.mechanism import Mechanism, build_mechanism
from ..utils import numeric
from ..utils.logger import get_logger

log = get_logger(__name__)


def suffering_allocation(dist: TypeDistribution, cutoff: float) -> StatusAllocation:
    """
    θ > θ₀ 被排除（地位 0，排在所有参与者之下），参与者全分离：
    s(θ) = F(θ) + (1 − F(θ₀))。
    """
    lo = float(dist.support_lo)
    cutoff = float(cutoff)
    if cutoff <= lo:
        return StatusAllocation(dist=dist, exclusion_cutoff=lo, exclusion_side=ExclusionSide.ABOVE, label="empty")
    tau0 = 1.0 if cutoff >= dist.support_hi else float(dist.cdf(cutoff))
    return StatusAllocation(
        dist=dist,
        exclusion_cutoff=cutoff,
        segments=(Separation(lo, cutoff, shift=1.0 - tau0),),
        exclusion_side=ExclusionSide.ABOVE,
        label="suffering_separation",
    )


def suffering_pooling(dist: TypeDistribution, cutoff: Optional[float] = None) -> StatusAllocation:
    """参与者 [θ̲, θ₀] 全混同：s = 1 − F(θ₀)/2。"""
    lo = float(dist.support_lo)
    c = float(dist.support_hi) if cutoff is None else float(cutoff)
    tau0 = 1.0 if c >= dist.support_hi else float(dist.cdf(c))
    return StatusAllocation(
        dist=dist,
        exclusion_cutoff=c,
        segments=(Pool(lo, c, 1.0 - tau0 / 2.0),),
        exclusion_side=ExclusionSide.ABOVE,
        label="suffering_pooling",
    )


def suffering_objective(dist: TypeDistribution, v: ValueFunction, tau0: float, stated: bool = False) -> float:
    """
    截断 τ₀ 下全分离的收入（U(θ₀) = 0）。记 S(τ) = τF^{-1}(τ)，则 S' = L，
      ∫_0^{τ₀} L·τ dτ = τ₀²F^{-1}(τ₀) − ∫_0^{τ₀} τF^{-1}(τ) dτ。
    stated=False 时参与者地位为 F + 1 − F(θ₀)，多出 (1 − τ₀)·τ₀F^{-1}(τ₀)。
    """
    tau0 = min(max(float(tau0), 0.0), 1.0)
    if tau0 <= 0.0:
        return 0.0
    q0 = float(dist.quantile(min(tau0, dist.tau_max)))
    core = tau0 * tau0 * q0 - dist.integrate_tau(lambda t: t * dist.quantile(t), 0.0, tau0)
    if not stated:
        core += (1.0 - tau0) * tau0 * q0
    return core + float(v(q0)) * tau0


@dataclass(frozen=True)
class SufferingSingleGood:
    cutoff: float
    price: float
    revenue: float
    ratio: float

    def to_dict(self) -> dict:
        return {"cutoff": self.cutoff, "price": self.price, "revenue": self.revenue, "ratio": self.ratio}


@dataclass(frozen=True, eq=False)
class SufferingResult:
    cutoff: float
    tau: float
    revenue: float
    mechanism: Mechanism
    single_good: SufferingSingleGood
    cs_max_mode: str
    no_exclusion_condition: bool
    stated_objective: bool = False

    @property
    def single_good_ratio(self) -> float:
        return self.single_good.ratio

    def to_dict(self) -> dict:
        return {
            "cutoff": self.cutoff,
            "tau": self.tau,
            "revenue": self.revenue,
            "single_good": self.single_good.to_dict(),
            "cs_max_mode": self.cs_max_mode,
            "no_exclusion_condition": self.no_exclusion_condition,
            "stated_objective": self.stated_objective,
        }


def _interior(dist: TypeDistribution, n: int = numeric.DEFAULT_GRID) -> np.ndarray:
    tau = numeric.interior_tau_grid(n)
    return tau[tau <= dist.tau_max]


def reverse_regular(dist: TypeDistribution, tol: float = numeric.MONOTONE_TOL) -> bool:
    """L(θ) = θ + F/f 递增。"""
    return numeric.check_monotone(dist.reverse_virtual_tau(_interior(dist)), increasing=True, tol=tol).ok


def cs_max_mode(dist: TypeDistribution, tol: float = numeric.MONOTONE_TOL) -> str:
    """反向失效率 f/F 递减 → 全混同；递增 → 全分离；否则 inapplicable。"""
    tau = _interior(dist)
    rfr = np.asarray(dist.density_at_quantile(tau), dtype=float) / tau
    if numeric.check_monotone(rfr, increasing=False, tol=tol).ok:
        return "total_pooling"
    if numeric.check_monotone(rfr, increasing=True, tol=tol).ok:
        return "full_separation"
    return "inapplicable"


def suffering_no_exclusion_condition(dist: TypeDistribution, v: ValueFunction) -> bool:
    """−v'/v ≤ f/F 处处成立（需要 v > 0）时不排除最优。"""
    tau = _interior(dist)
    theta = np.asarray(dist.quantile(tau), dtype=float)
    vals = v(theta)
    if np.any(vals <= 0):
        return False
    lhs = -v.slope(theta) / vals
    rhs = np.asarray(dist.pdf(theta), dtype=float) / tau
    return bool(np.all(lhs <= rhs * (1.0 + 1e-12)))


def suffering_single_good(dist: TypeDistribution, v: ValueFunction, max_revenue: float) -> SufferingSingleGood:
    """
    只卖一种商品：买家为 [θ̲, θ_c]，地位 1 − F(θ_c)/2，
    边际类型 θ_c 无差异定价 p = θ_c(1 − F(θ_c)/2) + v(θ_c)，收入 p·F(θ_c)。
    """
    def rev(t: float) -> float:
        q = float(dist.quantile(min(t, dist.tau_max)))
        return (q * (1.0 - t / 2.0) + float(v(q))) * t

    best = numeric.maximize_scalar(rev, 0.0, dist.tau_max)
    c = float(dist.quantile(best.x))
    price = c * (1.0 - best.x / 2.0) + float(v(c))
    ratio = best.value / max_revenue if max_revenue > 0 else float("nan")
    if ratio < 0.5 - 1e-9:
        log.warning(f"{dist.label}: suffering 单一商品比值 {ratio:.6g} 低于 1/2")
    return SufferingSingleGood(cutoff=c, price=price, revenue=best.value, ratio=ratio)


def suffering_optimum(dist: TypeDistribution, v: ValueFunction, stated_objective: bool = False) -> SufferingResult:
    """
    suffering 模式（v' ≤ −1）：排除 θ > θ₀*，参与者全分离，
    θ₀* = argmax ∫_0^{θ₀} L s dF + v(θ₀)F(θ₀)。需要 L 递增。
    """
    if v.mode is not ValueMode.SUFFERING:
        raise ModeError(f"{v.label} 不是 suffering 模式的价值函数")
    v.validate(dist)
    if not reverse_regular(dist):
        raise InapplicableConditionError(f"{dist.label}: L = θ + F/f 非单调")

    best = numeric.maximize_scalar(lambda t: suffering_objective(dist, v, t, stated_objective), 0.0, dist.tau_max)
    tau0 = best.x
    cutoff = float(dist.support_hi) if tau0 >= 1.0 else float(dist.quantile(tau0))
    alloc = suffering_allocation(dist, cutoff)
    mech = build_mechanism(alloc, v, 0.0, label="suffering_optimum")
    value = suffering_objective(dist, v, tau0, stated=False)
    single = suffering_single_good(dist, v, value)
    log.info(f"{dist.label}: suffering 截断 θ₀*={cutoff:.10g}，收入 {value:.12g}")
    return SufferingResult(
        cutoff=cutoff,
        tau=tau0,
        revenue=value,
        mechanism=mech,
        single_good=single,
        cs_max_mode=cs_max_mode(dist),
        no_exclusion_condition=suffering_no_exclusion_condition(dist, v),
        stated_objective=stated_objective,
    )
