from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import bisect

from ..core.distributions import TypeDistribution
from ..core.screening import classify, virtual_root
from ..errors import InapplicableConditionError, NonConvexCostError
from ..feasibility.allocation import StatusAllocation, full_separation
from ..utils import numeric
from ..utils.logger import get_logger

log = get_logger(__name__)

RealFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class CostFunction:
    """生产成本 c(q) 与边际成本 c'(q)；marginal_inverse 为闭式 c'^{-1}（可选）。"""

    c: RealFn
    dc: RealFn
    label: str
    marginal_inverse: Optional[RealFn] = None

    def validate(self, q_max: float = 10.0, n: int = 512, tol: float = numeric.MONOTONE_TOL) -> None:
        q = np.linspace(0.0, q_max, n)
        d = np.asarray(self.dc(q), dtype=float)
        if np.any(np.diff(np.asarray(self.c(q), dtype=float)) <= 0):
            raise NonConvexCostError(f"成本 {self.label} 不是严格递增")
        if np.any(np.diff(d) <= tol * max(1.0, float(np.max(np.abs(d))))):
            raise NonConvexCostError(f"成本 {self.label} 不是严格凸（边际成本不严格递增）")

    def invert_marginal(self, target: float, xtol: float = 1e-10) -> float:
        """c'(q) = target 的根，q ≥ 0；target ≤ c'(0) 时返回 0。二分法。"""
        target = float(target)
        if target <= float(self.dc(0.0)):
            return 0.0
        hi = 1.0
        while float(self.dc(hi)) < target:
            hi *= 2.0
            if hi > 1e12:
                raise NonConvexCostError(f"成本 {self.label} 的边际成本无法达到 {target:g}")
        return float(bisect(lambda q: float(self.dc(q)) - target, 0.0, hi, xtol=xtol))

    def quality_for(self, j):
        """Q = c'^{-1}(max(J, c'(0)))，向量化。"""
        j = np.asarray(j, dtype=float)
        if self.marginal_inverse is not None:
            return np.where(j > float(self.dc(0.0)), self.marginal_inverse(np.maximum(j, 0.0)), 0.0)
        flat = np.array([self.invert_marginal(x) for x in j.ravel()])
        return flat.reshape(j.shape)


def quadratic(k: float = 1.0) -> CostFunction:
    """c(q) = k q²/2。"""
    if not k > 0:
        raise NonConvexCostError(f"quadratic 需要 k > 0，收到 {k}")
    return CostFunction(
        c=lambda q: 0.5 * k * np.asarray(q, dtype=float) ** 2,
        dc=lambda q: k * np.asarray(q, dtype=float),
        label=f"quadratic({k:g})",
        marginal_inverse=lambda m: np.asarray(m, dtype=float) / k,
    )


def power_cost(k: float, a: float) -> CostFunction:
    """c(q) = k q^a / a，a > 1。"""
    if not (k > 0 and a > 1):
        raise NonConvexCostError(f"power_cost 需要 k > 0, a > 1，收到 k={k}, a={a}")
    return CostFunction(
        c=lambda q: k * np.abs(np.asarray(q, dtype=float)) ** a / a,
        dc=lambda q: k * np.abs(np.asarray(q, dtype=float)) ** (a - 1.0),
        label=f"power_cost({k:g},{a:g})",
        marginal_inverse=lambda m: (np.asarray(m, dtype=float) / k) ** (1.0 / (a - 1.0)),
    )


@dataclass(frozen=True, eq=False)
class QualitySchedule:
    """Q(θ) = c'^{-1}(J(θ))，θ₀ 以下为 0。"""

    dist: TypeDistribution
    cost: CostFunction
    cutoff: float

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        tau = np.asarray(self.dist.cdf(theta), dtype=float)
        return self.quality_tau(tau) * (theta >= self.cutoff)

    def quality_tau(self, tau):
        tau = np.asarray(tau, dtype=float)
        j = self.dist.virtual_value_tau(np.minimum(tau, self.dist.tau_max))
        return np.asarray(self.cost.quality_for(j), dtype=float)


@dataclass(frozen=True, eq=False)
class IntrinsicResult:
    cutoff: float
    quality: QualitySchedule
    allocation: StatusAllocation
    revenue_with_status: float
    revenue_pure_intrinsic: float

    @property
    def status_uplift(self) -> float:
        return self.revenue_with_status - self.revenue_pure_intrinsic

    def payment(self, theta):
        """p(θ) = θ(s+Q) − ∫_{θ₀}^θ (s+Q) dx，U(θ₀) = 0。"""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        total = lambda x: np.asarray(self.allocation(x)) + np.asarray(self.quality(x))
        pts = np.unique(np.concatenate([[self.cutoff], theta[theta >= self.cutoff]]))
        cum = numeric.cumulative_integral(total, pts)
        out = np.zeros_like(theta)
        inside = theta >= self.cutoff
        out[inside] = theta[inside] * total(theta[inside]) - cum[np.searchsorted(pts, theta[inside])]
        return out

    def to_dict(self) -> dict:
        return {
            "cutoff": self.cutoff,
            "cost": self.quality.cost.label,
            "revenue_with_status": self.revenue_with_status,
            "revenue_pure_intrinsic": self.revenue_pure_intrinsic,
            "status_uplift": self.status_uplift,
        }


def intrinsic_quality_optimum(dist: TypeDistribution, cost: CostFunction) -> IntrinsicResult:
    """
    内在质量（成本 c）+ 地位：排除 θ₀* = J^{-1}(0) 以下，Q*(θ) = c'^{-1}(J(θ))。
    revenue_with_status = ∫_{θ₀*}[J(F + Q*) − c(Q*)] dF；去掉 F 项即纯内在价值收入。
    """
    cost.validate()
    if not classify(dist).regular:
        raise InapplicableConditionError(f"{dist.label} 不满足正则性，内在质量最优机制无刻画")
    theta0 = virtual_root(dist)
    tau0 = float(dist.cdf(theta0))
    quality = QualitySchedule(dist, cost, theta0)

    def intrinsic_part(t):
        j = dist.virtual_value_tau(t)
        q = cost.quality_for(j)
        return j * q - np.asarray(cost.c(q), dtype=float)

    pure = dist.integrate_tau(intrinsic_part, tau0, 1.0)
    status = dist.integrate_tau(lambda t: dist.virtual_value_tau(t) * t, tau0, 1.0)
    log.info(f"{dist.label} + {cost.label}: θ₀*={theta0:.8g}，纯内在收入 {pure:.8g}，地位增量 {status:.8g}")
    return IntrinsicResult(
        cutoff=theta0,
        quality=quality,
        allocation=full_separation(dist, theta0),
        revenue_with_status=pure + status,
        revenue_pure_intrinsic=pure,
    )


@dataclass(frozen=True)
class QualityMonotonicityCheck:
    status_nondecreasing: bool
    quality_nondecreasing: bool
    same_strict_regions: bool

    @property
    def ok(self) -> bool:
        return self.status_nondecreasing and self.quality_nondecreasing and self.same_strict_regions


def intrinsic_monotonicity_check(result: IntrinsicResult, grid_size: int = 1024, tol: float = 1e-12) -> QualityMonotonicityCheck:
    """s* 与 Q* 在参与者上同为不减，且在相同子区间上严格递增。"""
    dist = result.quality.dist
    tau0 = float(dist.cdf(result.cutoff))
    tau = numeric.interior_tau_grid(grid_size)
    tau = tau[(tau > tau0) & (tau <= dist.tau_max)]
    s = result.allocation.status_tau(tau)
    q = result.quality.quality_tau(tau)
    ds, dq = np.diff(s), np.diff(q)
    return QualityMonotonicityCheck(
        status_nondecreasing=bool(np.all(ds >= -tol)),
        quality_nondecreasing=bool(np.all(dq >= -tol)),
        same_strict_regions=bool(np.array_equal(ds > tol, dq > tol)),
    )
