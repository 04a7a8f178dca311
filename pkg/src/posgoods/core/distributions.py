from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from ..utils import numeric
from ..utils.logger import get_logger

log = get_logger(__name__)


class DistributionKind(str, Enum):
    UNIFORM = "uniform"
    EXPONENTIAL = "exponential"
    POWER = "power"
    PARETO = "pareto"
    EMPIRICAL = "empirical"


@dataclass(frozen=True, eq=False)
class TypeDistribution:
    """
    买家类型分布 F（支撑 [support_lo, support_hi]，support_hi 可为 inf）。

    参数族直接委托给 scipy.stats 的 frozen 分布；empirical 为样本点之间的
    分段线性 CDF（保证密度存在）。所有方法都接受标量或 numpy 数组。
    无界支撑在 quantile(1 - TAIL_QUANTILE) 处截断，见 tau_max / theta_max。
    """

    kind: DistributionKind
    params: Tuple[float, ...]
    label: str
    support_lo: float
    support_hi: float
    frozen: Any = field(default=None, repr=False)
    knots: Optional[np.ndarray] = field(default=None, repr=False)
    knot_cdf: Optional[np.ndarray] = field(default=None, repr=False)

    # ---------- 支撑与截断 ----------

    @property
    def bounded(self) -> bool:
        return bool(np.isfinite(self.support_hi))

    @property
    def tau_max(self) -> float:
        return 1.0 if self.bounded else 1.0 - numeric.TAIL_QUANTILE

    @property
    def theta_max(self) -> float:
        return float(self.support_hi) if self.bounded else float(self.quantile(self.tau_max))

    @property
    def tau_breaks(self) -> np.ndarray:
        """被积函数在分位数空间的折点（empirical 的节点），参数族为空。"""
        if self.knot_cdf is None:
            return np.zeros(0)
        return self.knot_cdf[1:-1]

    @property
    def theta_breaks(self) -> np.ndarray:
        if self.knots is None:
            return np.zeros(0)
        return self.knots[1:-1]

    # ---------- F, f, F^{-1} ----------

    def cdf(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.knots is not None:
            return np.interp(theta, self.knots, self.knot_cdf, left=0.0, right=1.0)
        return self.frozen.cdf(theta)

    def sf(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.knots is not None:
            return 1.0 - self.cdf(theta)
        return self.frozen.sf(theta)

    def pdf(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.knots is not None:
            slopes = np.diff(self.knot_cdf) / np.diff(self.knots)
            idx = np.clip(np.searchsorted(self.knots, theta, side="right") - 1, 0, len(slopes) - 1)
            inside = (theta >= self.knots[0]) & (theta <= self.knots[-1])
            return np.where(inside, slopes[idx], 0.0)
        return self.frozen.pdf(theta)

    def quantile(self, tau):
        tau = np.asarray(tau, dtype=float)
        if self.knots is not None:
            return np.interp(tau, self.knot_cdf, self.knots)
        return self.frozen.ppf(tau)

    def mean(self) -> float:
        if self.frozen is not None:
            return float(self.frozen.mean())
        return self.integrate_tau(self.quantile, 0.0, 1.0)

    # ---------- 分位数空间中的筛选量 ----------

    def density_at_quantile(self, tau):
        return self.pdf(self.quantile(tau))

    def inverse_hazard_tau(self, tau):
        """(1-F)/f 在 θ = F^{-1}(τ) 处的值。"""
        tau = np.asarray(tau, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return (1.0 - tau) / self.density_at_quantile(tau)

    def virtual_value_tau(self, tau):
        """J(F^{-1}(τ)) = F^{-1}(τ) - (1-τ)/f。"""
        return self.quantile(tau) - self.inverse_hazard_tau(tau)

    def reverse_virtual_tau(self, tau):
        """L(F^{-1}(τ)) = F^{-1}(τ) + τ/f。"""
        tau = np.asarray(tau, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.quantile(tau) + tau / self.density_at_quantile(tau)

    def revenue_curve(self, tau):
        """R(τ) = (1-τ)·F^{-1}(τ)，τ=1 处取 0（含无界支撑）。"""
        tau = np.asarray(tau, dtype=float)
        q = self.quantile(np.minimum(tau, self.tau_max))
        return np.where(tau >= 1.0, 0.0, (1.0 - tau) * q)

    # ---------- 积分 ----------

    def integrate_tau(self, g, a: float, b: float, extra_breaks: Optional[np.ndarray] = None) -> float:
        """∫_a^b g(τ) dτ，上限截断在 tau_max。"""
        b = min(b, self.tau_max)
        if not b > a:
            return 0.0
        breaks = self.tau_breaks
        if extra_breaks is not None and len(extra_breaks):
            breaks = np.concatenate([breaks, np.asarray(extra_breaks, dtype=float)])
        return numeric.integrate(g, a, b, breaks)

    def integrate_theta(self, g, a: float, b: float, extra_breaks: Optional[np.ndarray] = None) -> float:
        """∫_a^b g(θ) dθ，上限截断在 theta_max。"""
        b = min(b, self.theta_max)
        if not b > a:
            return 0.0
        breaks = self.theta_breaks
        if extra_breaks is not None and len(extra_breaks):
            breaks = np.concatenate([breaks, np.asarray(extra_breaks, dtype=float)])
        return numeric.integrate(g, a, b, breaks)

    def theta_grid(self, n: int = numeric.DEFAULT_GRID) -> np.ndarray:
        """θ 空间的内部网格（分位数网格映射过去，保证尾部也有采样）。"""
        return np.asarray(self.quantile(numeric.interior_tau_grid(n)), dtype=float)


# -----------------------------
# 构造函数
# -----------------------------

def uniform(a: float = 0.0, b: float = 1.0) -> TypeDistribution:
    if not (np.isfinite(a) and np.isfinite(b) and b > a and a >= 0):
        raise ValueError(f"uniform 需要 0 ≤ a < b，收到 a={a}, b={b}")
    return TypeDistribution(
        kind=DistributionKind.UNIFORM,
        params=(float(a), float(b)),
        label=f"uniform({a:g},{b:g})",
        support_lo=float(a),
        support_hi=float(b),
        frozen=stats.uniform(loc=a, scale=b - a),
    )


def exponential(rate: float = 1.0) -> TypeDistribution:
    if not rate > 0:
        raise ValueError(f"exponential 需要 rate > 0，收到 {rate}")
    return TypeDistribution(
        kind=DistributionKind.EXPONENTIAL,
        params=(float(rate),),
        label=f"exp({rate:g})",
        support_lo=0.0,
        support_hi=float("inf"),
        frozen=stats.expon(scale=1.0 / rate),
    )


def power(beta: float) -> TypeDistribution:
    """F(θ) = θ^β on [0,1]。"""
    if not beta > 0:
        raise ValueError(f"power 需要 beta > 0，收到 {beta}")
    return TypeDistribution(
        kind=DistributionKind.POWER,
        params=(float(beta),),
        label=f"power({beta:g})",
        support_lo=0.0,
        support_hi=1.0,
        frozen=stats.powerlaw(a=beta),
    )


def pareto(shape: float, scale: float = 1.0) -> TypeDistribution:
    """
    平移到原点的 Pareto（Lomax）：F(θ) = 1 - (1 + θ/scale)^(-shape)，支撑 [0, ∞)。
    (1-F)/f = (scale+θ)/shape 递增，即 DFR。
    """
    if not (shape > 0 and scale > 0):
        raise ValueError(f"pareto 需要 shape, scale > 0，收到 shape={shape}, scale={scale}")
    return TypeDistribution(
        kind=DistributionKind.PARETO,
        params=(float(shape), float(scale)),
        label=f"pareto({shape:g},{scale:g})",
        support_lo=0.0,
        support_hi=float("inf"),
        frozen=stats.lomax(c=shape, scale=scale),
    )


def empirical(samples: Sequence[float], weights: Optional[Sequence[float]] = None, label: Optional[str] = None) -> TypeDistribution:
    """
    样本（可带权）→ 分段线性 CDF。节点处 F 取累计权重的中点，再线性归一到 [0,1]，
    等权时即 F(x_(i)) = i/(n-1)。重复样本合并权重。
    """
    x = np.asarray(samples, dtype=float)
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    if x.shape != w.shape:
        raise ValueError("samples 与 weights 长度不一致")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
        raise ValueError("empirical 样本或权重含非有限值")
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("empirical 权重必须非负且总和为正")

    ux, inv = np.unique(x, return_inverse=True)
    uw = np.bincount(inv, weights=w)
    uw = uw / uw.sum()
    keep = uw > 0
    ux, uw = ux[keep], uw[keep]
    if ux.size < 2:
        raise ValueError("empirical 至少需要两个不同的样本值")

    mid = np.cumsum(uw) - uw / 2.0
    knot_cdf = (mid - mid[0]) / (mid[-1] - mid[0])
    return TypeDistribution(
        kind=DistributionKind.EMPIRICAL,
        params=(float(ux.size),),
        label=label or f"empirical(n={ux.size})",
        support_lo=float(ux[0]),
        support_hi=float(ux[-1]),
        knots=ux,
        knot_cdf=knot_cdf,
    )


def empirical_from_csv(path: str | Path, label: Optional[str] = None) -> TypeDistribution:
    """CSV：每行一个样本值，可选第二列为权重；'#' 开头为注释。"""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"找不到样本文件: {p}")
    df = pd.read_csv(p, header=None, comment="#")
    samples = pd.to_numeric(df.iloc[:, 0], errors="raise").to_numpy(dtype=float)
    weights = None
    if df.shape[1] > 1:
        weights = pd.to_numeric(df.iloc[:, 1], errors="raise").to_numpy(dtype=float)
    log.info(f"读取样本 {p.name}: {samples.size} 行")
    return empirical(samples, weights, label=label or f"empirical({p.name})")


def uniform_mixture(bounds: Sequence[Tuple[float, float]], n: int = 2000, weights: Optional[Sequence[float]] = None) -> TypeDistribution:
    """
    均匀分量的有限混合，用精确分位数 (i+0.5)/n 处的样本构造 empirical（确定性，无随机数）。
    分量之间的空隙就是密度缺口，J 在那里急剧下降，用作非正则分布的标准样例。
    """
    comps = [(float(a), float(b)) for a, b in bounds]
    if not comps:
        raise ValueError("uniform_mixture 至少需要一个分量")
    for a, b in comps:
        if not b > a:
            raise ValueError(f"mixture 分量需要 a < b，收到 ({a}, {b})")
    w = np.full(len(comps), 1.0 / len(comps)) if weights is None else np.asarray(weights, dtype=float)
    w = w / w.sum()

    lo = min(a for a, _ in comps)
    hi = max(b for _, b in comps)
    xs = np.unique(np.concatenate([np.linspace(lo, hi, 20001), np.array(comps).ravel()]))
    fm = np.zeros_like(xs)
    for wk, (a, b) in zip(w, comps):
        fm += wk * np.clip((xs - a) / (b - a), 0.0, 1.0)
    fm_u, first = np.unique(fm, return_index=True)
    taus = (np.arange(n) + 0.5) / n
    samples = np.interp(taus, fm_u, xs[first])
    label = "mix(" + ",".join(f"{a:g},{b:g}" for a, b in comps) + ")"
    return empirical(samples, label=label)
