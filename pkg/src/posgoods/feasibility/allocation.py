from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..core.distributions import TypeDistribution
from ..errors import WeightSumError

if TYPE_CHECKING:
    from ..extensions.phi_status import PhiTransform

RealFn = Callable[[np.ndarray], np.ndarray]


class StatusMode(str, Enum):
    QUANTILE = "quantile"     # 地位 ∈ [0,1]
    SIGNALING = "signaling"   # 地位 = E[θ | 同层]，单位与类型相同


class ExclusionSide(str, Enum):
    BELOW = "below"   # 低类型被排除（标准情形）
    ABOVE = "above"   # 高类型被排除（suffering 情形）


@dataclass(frozen=True)
class Separation:
    """s(θ) = F(θ) + shift（signaling 模式下为 θ + shift）。"""

    lo: float
    hi: float
    shift: float = 0.0


@dataclass(frozen=True)
class Pool:
    lo: float
    hi: float
    level: float


@dataclass(frozen=True, eq=False)
class Curve:
    """任意单调段，s(θ) = func(θ)；用于负地位与直接构造的测试分配。"""

    lo: float
    hi: float
    func: RealFn
    label: str = "curve"


Segment = Union[Separation, Pool, Curve]


@dataclass(frozen=True, eq=False)
class StatusAllocation:
    """
    单调分段的中期地位 s(θ)。

    - exclusion_side=BELOW：[θ̲, θ₀) 上 s=0，segments 铺满 [θ₀, θ̄]；
    - exclusion_side=ABOVE：(θ₀, θ̄] 上 s=0，segments 铺满 [θ̲, θ₀]；
    - mixture 非空时为各分量的逐点凸组合（目标函数对 s 线性，逐点平均即精确）；
    - phi 对参与者的地位逐点变换。
    段为左闭右开，最后一段右闭。
    """

    dist: TypeDistribution
    exclusion_cutoff: float
    segments: Tuple[Segment, ...] = ()
    mixture: Tuple[Tuple[float, "StatusAllocation"], ...] = ()
    gamma: float = 0.5
    phi: Optional["PhiTransform"] = None
    mode: StatusMode = StatusMode.QUANTILE
    exclusion_side: ExclusionSide = ExclusionSide.BELOW
    label: str = ""

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma 必须在 [0,1]，收到 {self.gamma}")
        if self.mixture:
            return
        lo, hi = self.participant_bounds
        if not self.segments:
            if hi > lo:
                raise ValueError("参与区间非空但没有任何段")
            return
        scale = max(1.0, abs(lo), abs(hi) if np.isfinite(hi) else 1.0)
        tol = 1e-12 * scale
        if abs(self.segments[0].lo - lo) > tol:
            raise ValueError(f"第一段起点 {self.segments[0].lo} 与参与区间起点 {lo} 不一致")
        for prev, nxt in zip(self.segments, self.segments[1:]):
            if abs(prev.hi - nxt.lo) > tol or not nxt.hi > nxt.lo:
                raise ValueError(f"段之间有重叠或空隙: {prev} / {nxt}")
        last = self.segments[-1].hi
        if not (last == hi or abs(last - hi) <= tol):
            raise ValueError(f"最后一段终点 {last} 与参与区间终点 {hi} 不一致")

    # ---------- 结构 ----------

    @property
    def is_mixture(self) -> bool:
        return bool(self.mixture)

    @property
    def participant_bounds(self) -> Tuple[float, float]:
        if self.exclusion_side is ExclusionSide.ABOVE:
            return float(self.dist.support_lo), float(self.exclusion_cutoff)
        return float(self.exclusion_cutoff), float(self.dist.support_hi)

    @property
    def participant_tau(self) -> Tuple[float, float]:
        lo, hi = self.participant_bounds
        return float(self.dist.cdf(lo)), float(self.dist.cdf(hi)) if np.isfinite(hi) else 1.0

    @property
    def exclusion_mass(self) -> float:
        a, b = self.participant_tau
        if self.is_mixture:
            return float(sum(w * c.exclusion_mass for w, c in self.mixture))
        return 1.0 - (b - a)

    def components(self) -> List[Tuple[float, "StatusAllocation"]]:
        """展开嵌套混合为 (权重, 非混合分配) 列表。"""
        if not self.is_mixture:
            return [(1.0, self)]
        out: List[Tuple[float, StatusAllocation]] = []
        for w, comp in self.mixture:
            out.extend((w * w2, c2) for w2, c2 in comp.components())
        return out

    def breaks_tau(self) -> np.ndarray:
        pts: List[float] = []
        for _, comp in self.components():
            pts.append(float(comp.dist.cdf(comp.exclusion_cutoff)))
            for seg in comp.segments:
                pts.extend([float(comp.dist.cdf(seg.lo)), float(comp.dist.cdf(seg.hi))])
        return np.unique(np.asarray(pts, dtype=float))

    def breaks_theta(self) -> np.ndarray:
        pts: List[float] = []
        for _, comp in self.components():
            pts.append(float(comp.exclusion_cutoff))
            for seg in comp.segments:
                pts.extend([float(seg.lo), float(seg.hi)])
        arr = np.asarray(pts, dtype=float)
        return np.unique(arr[np.isfinite(arr)])

    def pooled_intervals(self) -> List[Tuple[float, float]]:
        return [(s.lo, s.hi) for s in self.segments if isinstance(s, Pool)]

    def top_segment(self) -> Optional[Segment]:
        if self.is_mixture or not self.segments:
            return None
        return self.segments[-1] if self.exclusion_side is ExclusionSide.BELOW else self.segments[0]

    def with_phi(self, phi: Optional["PhiTransform"]) -> "StatusAllocation":
        return dataclasses.replace(self, phi=phi)

    # ---------- 取值 ----------

    def participates(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        lo, hi = self.participant_bounds
        return (theta >= lo) & (theta <= hi)

    def _eval(self, theta: np.ndarray, tau: np.ndarray) -> np.ndarray:
        if self.is_mixture:
            out = np.zeros_like(tau, dtype=float)
            for w, comp in self.mixture:
                out = out + w * comp._eval(theta, tau)
            return out

        out = np.zeros_like(tau, dtype=float)
        n = len(self.segments)
        for k, seg in enumerate(self.segments):
            a = float(self.dist.cdf(seg.lo))
            b = float(self.dist.cdf(seg.hi)) if np.isfinite(seg.hi) else 1.0
            mask = (tau >= a) & ((tau < b) if k < n - 1 else (tau <= b))
            if not np.any(mask):
                continue
            if isinstance(seg, Separation):
                base = tau if self.mode is StatusMode.QUANTILE else theta
                out[mask] = base[mask] + seg.shift
            elif isinstance(seg, Pool):
                out[mask] = seg.level
            else:
                out[mask] = np.asarray(seg.func(theta[mask]), dtype=float)
        if self.phi is not None and n:
            lo_t, hi_t = self.participant_tau
            inside = (tau >= lo_t) & (tau <= hi_t)
            out[inside] = np.asarray(self.phi.phi(out[inside]), dtype=float)
        return out

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        scalar = theta.ndim == 0
        th = np.atleast_1d(theta)
        out = self._eval(th, np.asarray(self.dist.cdf(th), dtype=float))
        return float(out[0]) if scalar else out

    def status_tau(self, tau):
        """s(F^{-1}(τ))，直接在分位数空间取值（Separation 段用 τ 本身）。"""
        tau = np.asarray(tau, dtype=float)
        scalar = tau.ndim == 0
        t = np.atleast_1d(tau)
        out = self._eval(np.asarray(self.dist.quantile(np.minimum(t, self.dist.tau_max)), dtype=float), t)
        return float(out[0]) if scalar else out

    def expected_status(self) -> float:
        return self.dist.integrate_tau(self.status_tau, 0.0, 1.0, self.breaks_tau())

    # ---------- 导出 ----------

    def to_frame(self, theta: Optional[np.ndarray] = None) -> pd.DataFrame:
        """两列 (theta, s)，供绘图。"""
        if theta is None:
            theta = np.concatenate([[self.dist.support_lo], self.dist.theta_grid(512), [self.dist.theta_max]])
        return pd.DataFrame({"theta": theta, "s": self(theta)})

    def waiting_time_frame(self, theta: Optional[np.ndarray] = None) -> pd.DataFrame:
        """排队解释：t(θ) = 1 - s(θ)。"""
        df = self.to_frame(theta)
        return pd.DataFrame({"theta": df["theta"], "t": 1.0 - df["s"]})


# -----------------------------
# 常用分配
# -----------------------------

def full_separation(dist: TypeDistribution, cutoff: Optional[float] = None, mode: StatusMode = StatusMode.QUANTILE) -> StatusAllocation:
    c = dist.support_lo if cutoff is None else float(cutoff)
    if c >= dist.support_hi:
        return StatusAllocation(dist=dist, exclusion_cutoff=float(dist.support_hi), label="empty")
    return StatusAllocation(
        dist=dist,
        exclusion_cutoff=c,
        segments=(Separation(c, float(dist.support_hi)),),
        mode=mode,
        label="full_separation",
    )


def total_pooling(dist: TypeDistribution, cutoff: Optional[float] = None, gamma: float = 0.5) -> StatusAllocation:
    """参与者全部同层：s = γ + (1-γ)F(θ₀)。"""
    c = dist.support_lo if cutoff is None else float(cutoff)
    tau0 = float(dist.cdf(c))
    return StatusAllocation(
        dist=dist,
        exclusion_cutoff=c,
        segments=(Pool(c, float(dist.support_hi), gamma + (1.0 - gamma) * tau0),),
        gamma=gamma,
        label="total_pooling",
    )


def curve_allocation(dist: TypeDistribution, func: RealFn, cutoff: Optional[float] = None, label: str = "curve") -> StatusAllocation:
    c = dist.support_lo if cutoff is None else float(cutoff)
    return StatusAllocation(
        dist=dist,
        exclusion_cutoff=c,
        segments=(Curve(c, float(dist.support_hi), func, label),),
        label=label,
    )


def mix(allocs: Sequence[Tuple[float, StatusAllocation]], tol: float = 1e-12) -> StatusAllocation:
    """有限混合：逐点凸组合。权重需非负且和为 1。"""
    if not allocs:
        raise WeightSumError("mix 至少需要一个分量")
    weights = np.array([w for w, _ in allocs], dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > tol:
        raise WeightSumError(f"权重需非负且和为 1，收到 {weights.tolist()}")
    kept = [(float(w), a) for w, a in allocs if w > 0]
    if len(kept) == 1:
        return kept[0][1]
    first = kept[0][1]
    return StatusAllocation(
        dist=first.dist,
        exclusion_cutoff=min(a.exclusion_cutoff for _, a in kept),
        mixture=tuple(kept),
        gamma=first.gamma,
        mode=first.mode,
        exclusion_side=first.exclusion_side,
        label="mix(" + ",".join(a.label or "?" for _, a in kept) + ")",
    )
