from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from ..errors import UndefinedDensityError
from ..utils import numeric
from ..utils.logger import get_logger
from .distributions import TypeDistribution
from .value_function import ValueFunction

log = get_logger(__name__)


def _density_or_raise(dist: TypeDistribution, theta: float) -> float:
    f = float(dist.pdf(theta))
    if not f > 0:
        raise UndefinedDensityError(f"{dist.label}: θ={theta:g} 处密度为 0，虚拟价值无定义")
    return f


def virtual_value(dist: TypeDistribution, theta: float) -> float:
    """J(θ) = θ - (1-F(θ))/f(θ)；在 θ̄ 处返回 θ̄。"""
    theta = float(theta)
    if dist.bounded and theta >= dist.support_hi:
        return float(dist.support_hi)
    f = _density_or_raise(dist, theta)
    return theta - float(dist.sf(theta)) / f


def reverse_virtual(dist: TypeDistribution, theta: float) -> float:
    """L(θ) = θ + F(θ)/f(θ)。"""
    theta = float(theta)
    f = _density_or_raise(dist, theta)
    return theta + float(dist.cdf(theta)) / f


def inverse_hazard(dist: TypeDistribution, theta):
    """(1-F)/f，向量化；密度为 0 处返回 inf。"""
    theta = np.asarray(theta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return dist.sf(theta) / dist.pdf(theta)


def weighted_virtual_value(dist: TypeDistribution, theta, lam: float):
    """J_λ(θ) = λθ - (λ-1)(1-F)/f。"""
    theta = np.asarray(theta, dtype=float)
    return lam * theta - (lam - 1.0) * inverse_hazard(dist, theta)


def value_virtual(dist: TypeDistribution, v: ValueFunction, theta):
    """J_v(θ) = v(θ) - (1-F)/f · v'(θ)。"""
    theta = np.asarray(theta, dtype=float)
    return v(theta) - inverse_hazard(dist, theta) * v.slope(theta)


def exclusion_foc(dist: TypeDistribution, v: ValueFunction, theta: float) -> float:
    """
    排除截断点目标 ∫_{θ0} J F dF + v(θ0)(1-F(θ0)) 对 θ0 的导数为 -f(θ0)·ψ(θ0)，
    其中 ψ(θ) = J(θ)F(θ) + J_v(θ)。
    """
    theta = float(theta)
    j = virtual_value(dist, theta)
    return j * float(dist.cdf(theta)) + float(value_virtual(dist, v, theta))


def virtual_root(dist: TypeDistribution) -> float:
    """J^{-1}(0)：J 的最小零点（若 J(θ̲) ≥ 0 则为 θ̲）。在分位数空间求根。"""
    j = lambda t: float(dist.virtual_value_tau(t))
    grid = numeric.interior_tau_grid(512)
    vals = np.asarray(dist.virtual_value_tau(grid), dtype=float)
    if vals[0] >= 0:
        return float(dist.support_lo)
    idx = np.flatnonzero(vals >= 0)
    if idx.size == 0:
        return float(dist.theta_max)
    k = int(idx[0])
    root = numeric.polish_root(j, float(grid[k - 1]), float(grid[k]))
    tau = float(grid[k]) if root is None else root
    return float(dist.quantile(tau))


def mean_residual_life(dist: TypeDistribution, tau):
    """E[θ̃ - θ | θ̃ ≥ θ]，θ = F^{-1}(τ)。"""
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    out = np.empty_like(tau)
    for i, t in enumerate(tau):
        tail = dist.integrate_tau(dist.quantile, float(t), 1.0)
        out[i] = tail / (1.0 - t) - float(dist.quantile(t))
    return out


# -----------------------------
# 分类
# -----------------------------

@dataclass(frozen=True)
class Classification:
    regular: bool
    ifr: bool
    dfr: bool
    worst_violation: Dict[str, float] = field(default_factory=dict)
    inconclusive: Dict[str, bool] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "regular": self.regular,
            "ifr": self.ifr,
            "dfr": self.dfr,
            "worst_violation": dict(self.worst_violation),
            "inconclusive": dict(self.inconclusive),
        }


def classify(dist: TypeDistribution, grid_size: int = numeric.DEFAULT_GRID, tol: float = numeric.MONOTONE_TOL) -> Classification:
    """
    在内部分位数网格上检查：
      regular: J 递增；ifr: (1-F)/f 递减；dfr: (1-F)/f 递增。
    常数风险率同时满足 IFR 与 DFR。
    """
    tau = numeric.interior_tau_grid(grid_size)
    tau = tau[tau <= dist.tau_max]
    j = dist.virtual_value_tau(tau)
    h = dist.inverse_hazard_tau(tau)

    reg = numeric.check_monotone(j, increasing=True, tol=tol)
    ifr = numeric.check_monotone(h, increasing=False, tol=tol)
    dfr = numeric.check_monotone(h, increasing=True, tol=tol)
    out = Classification(
        regular=reg.ok,
        ifr=ifr.ok,
        dfr=dfr.ok,
        worst_violation={"regular": reg.worst_violation, "ifr": ifr.worst_violation, "dfr": dfr.worst_violation},
        inconclusive={"regular": reg.inconclusive, "ifr": ifr.inconclusive, "dfr": dfr.inconclusive},
    )
    if any(out.inconclusive.values()):
        log.warning(f"{dist.label}: 单调性判定接近容差 {out.worst_violation}")
    return out


def regular_from(dist: TypeDistribution, grid_size: int = numeric.DEFAULT_GRID, tol: float = numeric.MONOTONE_TOL) -> float:
    """
    最小的分位数 τ_r，使 J 在 [τ_r, 1] 上单调不减；正则分布返回 0。
    用于排除搜索：截断点落在 τ_r 之上时无需熨平。
    """
    tau = numeric.interior_tau_grid(grid_size)
    tau = tau[tau <= dist.tau_max]
    j = np.asarray(dist.virtual_value_tau(tau), dtype=float)
    scale = max(1.0, float(np.max(np.abs(j[np.isfinite(j)]))))
    bad = np.flatnonzero(np.diff(j) < -tol * scale)
    if bad.size == 0:
        return 0.0
    return float(tau[bad[-1] + 1])
