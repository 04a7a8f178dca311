from __future__ import annotations

from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from ..core.distributions import TypeDistribution
from ..feasibility.allocation import Pool, Separation, StatusAllocation
from ..utils import numeric
from ..utils.logger import get_logger
from .hull import IroningResult, convex_minorant

log = get_logger(__name__)


def revenue_curve(dist: TypeDistribution, tau):
    """R(τ) = (1-τ)·F^{-1}(τ)。"""
    return dist.revenue_curve(tau)


def revenue_area(dist: TypeDistribution, tau0: float) -> float:
    """τ₀R(τ₀) + ∫_{τ₀}^1 R dτ：截断 τ₀ 上全分离的收入（v = 0）。"""
    tau0 = float(tau0)
    return tau0 * float(dist.revenue_curve(tau0)) + dist.integrate_tau(dist.revenue_curve, tau0, 1.0)


def _tau_grid(dist: TypeDistribution, grid_size: int, tau_lo: float) -> np.ndarray:
    top = dist.tau_max
    knots = dist.tau_breaks
    pts = np.concatenate([np.linspace(tau_lo, top, grid_size), knots[(knots > tau_lo) & (knots < top)]])
    return np.unique(pts)


def integrated_virtual(dist: TypeDistribution, grid_size: int = numeric.HULL_GRID, tau_lo: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    J̃(τ) = ∫_0^τ J(F^{-1}(t)) dt。由 R' = -J 得 J̃(τ) = R(0) - R(τ)，无需数值积分。
    返回 (τ 网格, J̃)。
    """
    if grid_size < 16:
        raise ValueError(f"grid_size 至少为 16，收到 {grid_size}")
    grid = _tau_grid(dist, grid_size, tau_lo)
    r0 = float(dist.revenue_curve(0.0))
    return grid, r0 - np.asarray(dist.revenue_curve(grid), dtype=float)


def iron(dist: TypeDistribution, theta0: Optional[float] = None, grid_size: int = numeric.HULL_GRID) -> IroningResult:
    """在参与者区间 [F(θ₀), 1] 上对 J̃ 求下凸包。"""
    tau0 = 0.0 if theta0 is None else float(dist.cdf(theta0))
    grid, jt = integrated_virtual(dist, grid_size, tau0)
    return convex_minorant(grid, jt)


def _theta_at(dist: TypeDistribution, tau: float) -> float:
    if tau >= dist.tau_max and not dist.bounded:
        return float("inf")
    if tau >= 1.0:
        return float(dist.support_hi)
    return float(dist.quantile(tau))


def allocation_from_hull(dist: TypeDistribution, theta0: float, result: IroningResult, gamma: float = 0.5) -> StatusAllocation:
    """凸包仿射段 → Pool（水平 γτb + (1-γ)τa），其余 → Separation。"""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma 必须在 [0,1]，收到 {gamma}")
    tau0 = float(dist.cdf(theta0))
    hi = float(dist.support_hi)
    if theta0 >= hi:
        return StatusAllocation(dist=dist, exclusion_cutoff=hi, gamma=gamma, label="empty")

    segments: List = []
    cursor = float(theta0)
    for a, b in result.pooled_intervals:
        ta, tb = max(a, tau0), b
        if tb >= dist.tau_max:
            tb = 1.0
        lo_theta, hi_theta = _theta_at(dist, ta), _theta_at(dist, tb)
        if lo_theta > cursor:
            segments.append(Separation(cursor, lo_theta))
        segments.append(Pool(lo_theta, hi_theta, gamma * tb + (1.0 - gamma) * ta))
        cursor = hi_theta
    if cursor < hi:
        segments.append(Separation(cursor, hi))
    label = "ironed" if result.pooled_intervals else "full_separation"
    return StatusAllocation(dist=dist, exclusion_cutoff=float(theta0), segments=tuple(segments), gamma=gamma, label=label)


def ironed_allocation(
    dist: TypeDistribution,
    theta0: Optional[float] = None,
    grid_size: int = numeric.HULL_GRID,
    gamma: float = 0.5,
) -> StatusAllocation:
    """
    截断 θ₀ 下的熨平最优分配：θ₀ 以下排除，熨平区间上混同，其余全分离。
    混同区间取自 γ = 1/2 的凸包；gamma 只改变混同层的地位。
    """
    c = float(dist.support_lo) if theta0 is None else float(theta0)
    result = iron(dist, c, grid_size)
    if result.pooled_intervals:
        log.info(f"{dist.label}: 熨平区间 {[(round(a, 6), round(b, 6)) for a, b in result.pooled_intervals]}")
    return allocation_from_hull(dist, c, result, gamma)


def ironed_revenue(dist: TypeDistribution, theta0: float, result: Optional[IroningResult] = None, grid_size: int = numeric.HULL_GRID) -> float:
    """
    ∫_{τ₀}^1 J·s dτ（s 为熨平分配，v = 0，U₀ = 0），逐段用 J̃ 与 R 的闭式：
      分离段 [a,b]：[J̃τ]_a^b - R(0)(b-a) + ∫_a^b R；
      混同段 [a,b]：(a+b)/2 · (J̃(b) - J̃(a))。
    """
    tau0 = float(dist.cdf(theta0))
    if tau0 >= dist.tau_max:
        return 0.0
    if result is None:
        result = iron(dist, theta0, grid_size)
    r0 = float(dist.revenue_curve(0.0))

    def jt(t: float) -> float:
        return r0 - float(dist.revenue_curve(t))

    def separated(a: float, b: float) -> float:
        if not b > a:
            return 0.0
        return jt(b) * b - jt(a) * a - r0 * (b - a) + dist.integrate_tau(dist.revenue_curve, a, b)

    total, cursor = 0.0, tau0
    for a, b in result.pooled_intervals:
        a = max(a, tau0)
        b = 1.0 if b >= dist.tau_max else b
        total += separated(cursor, a)
        total += 0.5 * (a + b) * (jt(b) - jt(a))
        cursor = b
    total += separated(cursor, 1.0)
    return total


def export_hull_csv(result: IroningResult, path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    result.to_frame().to_csv(p, index=False, float_format="%.12g", lineterminator="\n")
    return p
