from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core.distributions import TypeDistribution
from ..core.screening import regular_from
from ..core.value_function import ValueFunction, zero
from ..feasibility.allocation import StatusAllocation, full_separation
from ..ironing.hull import IroningResult
from ..ironing.ironing import allocation_from_hull, iron, ironed_revenue, revenue_area
from ..utils import numeric
from ..utils.logger import get_logger
from .mechanism import Mechanism, build_mechanism

log = get_logger(__name__)

# 常被引用的 uniform(0,1), v=0 排除收益增幅；按目标函数直接计算为 25%
QUOTED_UNIFORM_EXCLUSION_GAIN = 0.235


@dataclass(frozen=True, eq=False)
class ExclusionResult:
    cutoff: float
    tau: float
    revenue: float
    ironed: bool
    no_exclusion_condition: bool
    mechanism: Mechanism
    hull: Optional[IroningResult] = None

    @property
    def allocation(self) -> StatusAllocation:
        return self.mechanism.alloc

    def to_dict(self) -> dict:
        return {
            "cutoff": self.cutoff,
            "tau": self.tau,
            "revenue": self.revenue,
            "ironed": self.ironed,
            "no_exclusion_condition": self.no_exclusion_condition,
        }


def _psi_tau(dist: TypeDistribution, v: ValueFunction, tau: float) -> float:
    """ψ = J·F + v − (1−F)/f·v'，在 θ = F^{-1}(τ) 处；目标对 τ₀ 的导数为 −ψ。"""
    q = float(dist.quantile(tau))
    j = float(dist.virtual_value_tau(tau))
    h = float(dist.inverse_hazard_tau(tau))
    return j * tau + float(v(q)) - h * float(v.slope(q))


def no_exclusion_condition(dist: TypeDistribution, v: ValueFunction) -> bool:
    """v(θ̲) ≥ (v'(θ̲) + 1)/f(θ̲) 时不排除最优（f(θ̲) = 0 时条件不成立）。"""
    lo = float(dist.support_lo)
    f0 = float(dist.pdf(lo))
    if not f0 > 0:
        return False
    return float(v(lo)) >= (float(v.slope(lo)) + 1.0) / f0


def optimal_exclusion(
    dist: TypeDistribution,
    v: Optional[ValueFunction] = None,
    grid_size: int = numeric.HULL_GRID,
    coarse: int = numeric.COARSE_SCAN,
) -> ExclusionResult:
    """
    θ₀* = argmax ∫_{θ₀} J s dF + v(θ₀)(1−F(θ₀))，s 为截断 θ₀ 上的熨平分配，U(θ₀) = 0。

    J 在 [τ_r, 1] 上单调（regular_from），截断点落在那里时直接用闭式
    τ₀R(τ₀) + ∫R；落在 τ_r 之下时每个候选截断都重新熨平。
    """
    v = v or zero()
    tau_r = regular_from(dist)
    top = dist.tau_max
    scan_grid = max(256, grid_size // 4)

    def objective(t0: float, size: int = scan_grid) -> float:
        t0 = min(max(t0, 0.0), top)
        if t0 >= tau_r:
            core = revenue_area(dist, t0)
        else:
            core = ironed_revenue(dist, float(dist.quantile(t0)), iron(dist, float(dist.quantile(t0)), size))
        return core + float(v(dist.quantile(t0))) * (1.0 - t0)

    best = numeric.maximize_scalar(objective, 0.0, top, coarse=coarse)
    tau0 = best.x

    if tau0 >= tau_r and tau0 > 0.0:
        # 正则尾部：在粗扫描相邻区间内用 ψ 的变号精修
        step = top / (max(3, coarse) - 1)
        root = numeric.polish_root(lambda t: _psi_tau(dist, v, t), max(tau_r, tau0 - step), min(top, tau0 + step))
        if root is not None and objective(root) >= best.value - 1e-12 * max(1.0, abs(best.value)):
            tau0 = root

    theta0 = float(dist.quantile(tau0)) if tau0 > 0.0 else float(dist.support_lo)
    hull = iron(dist, theta0, grid_size)
    ironed = bool(hull.pooled_intervals)
    if ironed:
        alloc = allocation_from_hull(dist, theta0, hull)
        core = ironed_revenue(dist, theta0, hull)
    else:
        alloc = full_separation(dist, theta0)
        core = revenue_area(dist, tau0)
    value = core + float(v(theta0)) * (1.0 - tau0)

    log.info(f"{dist.label}: 最优排除 θ₀*={theta0:.10g} (τ₀={tau0:.10g})，收入 {value:.12g}，{'熨平' if ironed else '全分离'}")
    return ExclusionResult(
        cutoff=theta0,
        tau=tau0,
        revenue=value,
        ironed=ironed,
        no_exclusion_condition=no_exclusion_condition(dist, v),
        mechanism=build_mechanism(alloc, v, 0.0, label="revenue_optimal"),
        hull=hull,
    )


# -----------------------------
# 单一商品近似
# -----------------------------

@dataclass(frozen=True)
class SingleGoodResult:
    cutoff: float
    price: float
    revenue: float
    max_revenue: float
    ratio: float

    def to_dict(self) -> dict:
        return {
            "cutoff": self.cutoff,
            "price": self.price,
            "revenue": self.revenue,
            "max_revenue": self.max_revenue,
            "ratio": self.ratio,
        }


def single_good_optimum(dist: TypeDistribution, v: Optional[ValueFunction] = None, max_revenue: Optional[float] = None) -> SingleGoodResult:
    """
    只卖一种地位商品（θ 以上全部混同）：价格 p = θ(1+F(θ))/2 + v(θ)，
    收入 p·(1−F(θ))。比值以 optimal_exclusion 的最大收入为分母，应 ≥ 1/2。
    """
    v = v or zero()

    def rev(t: float) -> float:
        q = float(dist.quantile(t))
        return (q * (1.0 + t) / 2.0 + float(v(q))) * (1.0 - t)

    best = numeric.maximize_scalar(rev, 0.0, dist.tau_max)
    cutoff = float(dist.quantile(best.x))
    price = cutoff * (1.0 + best.x) / 2.0 + float(v(cutoff))
    max_r = optimal_exclusion(dist, v).revenue if max_revenue is None else float(max_revenue)
    ratio = best.value / max_r if max_r > 0 else float("nan")
    if ratio < 0.5 - 1e-9:
        log.warning(f"{dist.label}: 单一商品比值 {ratio:.6g} 低于 1/2")
    return SingleGoodResult(cutoff=cutoff, price=price, revenue=best.value, max_revenue=max_r, ratio=ratio)


def power_single_good_ratio(beta: float) -> float:
    """F(θ) = θ^β, v = 0 时比值的闭式。"""
    b = float(beta)
    return (1.0 + b) * (1.0 / (1.0 + 2.0 * b)) ** (1.0 / (2.0 * b)) / (b + (1.0 + b) ** (-1.0 - 1.0 / b))


# -----------------------------
# 排除带来的收入增幅
# -----------------------------

@dataclass(frozen=True)
class ExclusionGain:
    with_exclusion: float
    without_exclusion: float
    computed: float
    quoted: Optional[float]
    discrepancy: bool

    def to_dict(self) -> dict:
        return {
            "with_exclusion": self.with_exclusion,
            "without_exclusion": self.without_exclusion,
            "computed": self.computed,
            "quoted": self.quoted,
            "discrepancy": self.discrepancy,
        }


def exclusion_gain(dist: TypeDistribution, v: Optional[ValueFunction] = None, quoted: Optional[float] = None, tol: float = 0.005) -> ExclusionGain:
    """
    最优排除收入相对不排除（θ₀ = θ̲ 的熨平最优）的增幅。
    quoted 缺省时，uniform(0,1) 且 v 为 0 的情形附上常被引用的 23.5% 作对照。
    """
    v = v or zero()
    with_ex = optimal_exclusion(dist, v).revenue
    lo = float(dist.support_lo)
    without = ironed_revenue(dist, lo) + float(v(lo))
    computed = with_ex / without - 1.0 if without > 0 else float("inf")
    if quoted is None and dist.label == "uniform(0,1)" and v.label in ("0", "const(0)"):
        quoted = QUOTED_UNIFORM_EXCLUSION_GAIN
    discrepancy = quoted is not None and abs(computed - quoted) > tol
    if discrepancy:
        log.warning(f"{dist.label}: 计算得排除增幅 {computed:.4%}，与引用值 {quoted:.1%} 不一致")
    return ExclusionGain(with_ex, without, computed, quoted, discrepancy)
