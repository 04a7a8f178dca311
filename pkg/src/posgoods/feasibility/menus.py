from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..core.distributions import TypeDistribution
from ..errors import EmptyIntervalError
from .allocation import Pool, StatusAllocation, StatusMode


@dataclass(frozen=True)
class PartitionMenu:
    """
    确定性菜单：断点 θ₀ < θ₁ < … < θ_m = θ̄ 定义 m 个地位层级，θ₀ 以下被排除。
    prices 可选，每层一个价格。
    """

    breakpoints: Tuple[float, ...]
    prices: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        object.__setattr__(self, "breakpoints", bp)
        if len(bp) < 2:
            raise ValueError("菜单至少需要两个断点")
        for a, b in zip(bp, bp[1:]):
            if b == a:
                raise EmptyIntervalError(f"相邻断点重合: {a}")
            if b < a:
                raise ValueError(f"断点必须严格递增: {bp}")
        if self.prices is not None:
            prices = tuple(float(p) for p in self.prices)
            object.__setattr__(self, "prices", prices)
            if len(prices) != len(bp) - 1:
                raise ValueError(f"价格个数 {len(prices)} 与层级数 {len(bp) - 1} 不一致")

    @property
    def cutoff(self) -> float:
        return self.breakpoints[0]

    @property
    def levels(self) -> int:
        return len(self.breakpoints) - 1

    def split(self, index: int, at: float) -> "PartitionMenu":
        """在第 index 层内部 at 处切分，得到更细的菜单（价格丢弃）。"""
        lo, hi = self.breakpoints[index], self.breakpoints[index + 1]
        if not lo < at < hi:
            raise ValueError(f"切分点 {at} 不在第 {index} 层内部 ({lo}, {hi})")
        bp = self.breakpoints[: index + 1] + (float(at),) + self.breakpoints[index + 1 :]
        return PartitionMenu(bp)

    # ---------- 序列化 ----------

    def to_dict(self) -> Dict[str, Any]:
        return {
            "breakpoints": [b if np.isfinite(b) else "inf" for b in self.breakpoints],
            "prices": list(self.prices) if self.prices is not None else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "PartitionMenu":
        bp = tuple(float(b) for b in d["breakpoints"])
        prices = d.get("prices")
        return cls(bp, tuple(prices) if prices is not None else None)

    @classmethod
    def from_json(cls, text: str) -> "PartitionMenu":
        return cls.from_dict(json.loads(text))

    # ---------- 常用菜单 ----------

    @classmethod
    def single_level(cls, dist: TypeDistribution, cutoff: Optional[float] = None) -> "PartitionMenu":
        c = dist.support_lo if cutoff is None else cutoff
        return cls((c, dist.support_hi))

    @classmethod
    def two_level(cls, dist: TypeDistribution, theta_star: float, cutoff: Optional[float] = None) -> "PartitionMenu":
        c = dist.support_lo if cutoff is None else cutoff
        return cls((c, theta_star, dist.support_hi))

    @classmethod
    def from_quantiles(cls, dist: TypeDistribution, taus) -> "PartitionMenu":
        """按分位数给出断点；τ=1 映射到 θ̄（含无界支撑的 inf）。"""
        taus = np.asarray(taus, dtype=float)
        bp = [float(dist.quantile(t)) if t < 1.0 else float(dist.support_hi) for t in taus]
        return cls(tuple(bp))


def _check_menu(menu: PartitionMenu, dist: TypeDistribution) -> None:
    lo, hi = dist.support_lo, dist.support_hi
    if menu.cutoff < lo - 1e-12 * max(1.0, abs(lo)):
        raise ValueError(f"断点 {menu.cutoff} 低于支撑下界 {lo}")
    last = menu.breakpoints[-1]
    if not (last == hi or (np.isfinite(hi) and abs(last - hi) <= 1e-12 * max(1.0, abs(hi)))):
        raise ValueError(f"最后一个断点必须为支撑上界 {hi}，收到 {last}")


def induced_status(
    menu: PartitionMenu,
    dist: TypeDistribution,
    mode: StatusMode | str = StatusMode.QUANTILE,
    gamma: float = 0.5,
) -> StatusAllocation:
    """
    菜单诱导的中期地位：
      quantile 模式：[θᵢ, θᵢ₊₁] 上 s = γF(θᵢ₊₁) + (1-γ)F(θᵢ)；
      signaling 模式：s = E[θ | θ ∈ [θᵢ, θᵢ₊₁]]。此时无法排除，θ₀ 以下
      作为免费的最低层，地位 E[θ | θ < θ₀]。
    """
    mode = StatusMode(mode)
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma 必须在 [0,1]，收到 {gamma}")
    _check_menu(menu, dist)

    bp = list(menu.breakpoints)
    taus = [float(dist.cdf(b)) for b in bp]
    taus[-1] = 1.0
    segments: List[Pool] = []

    if mode is StatusMode.QUANTILE:
        for (a, b), (ta, tb) in zip(zip(bp, bp[1:]), zip(taus, taus[1:])):
            segments.append(Pool(a, b, gamma * tb + (1.0 - gamma) * ta))
        return StatusAllocation(
            dist=dist,
            exclusion_cutoff=bp[0],
            segments=tuple(segments),
            gamma=gamma,
            mode=mode,
            label=f"menu[{menu.levels}]",
        )

    def cond_mean(ta: float, tb: float) -> float:
        return dist.integrate_tau(dist.quantile, ta, tb) / (tb - ta)

    lo = float(dist.support_lo)
    if bp[0] > lo:
        segments.append(Pool(lo, bp[0], cond_mean(0.0, taus[0])))
    for (a, b), (ta, tb) in zip(zip(bp, bp[1:]), zip(taus, taus[1:])):
        segments.append(Pool(a, b, cond_mean(ta, tb)))
    return StatusAllocation(
        dist=dist,
        exclusion_cutoff=lo,
        segments=tuple(segments),
        gamma=gamma,
        mode=mode,
        label=f"signaling_menu[{menu.levels}]",
    )


# -----------------------------
# 随机菜单（抽样检验用）
# -----------------------------

def random_menu(
    dist: TypeDistribution,
    rng: np.random.Generator,
    cutoff: Optional[float] = None,
    max_levels: int = 6,
) -> PartitionMenu:
    """在 (F(θ₀), 1) 内均匀抽取断点分位数，层数 1..max_levels。"""
    c = dist.support_lo if cutoff is None else float(cutoff)
    t0 = float(dist.cdf(c))
    k = int(rng.integers(1, max_levels + 1))
    inner = np.unique(rng.uniform(t0, min(1.0, dist.tau_max), size=k - 1))
    inner = inner[(inner > t0) & (inner < dist.tau_max)]
    bp = [c] + [float(dist.quantile(t)) for t in inner] + [float(dist.support_hi)]
    bp = sorted(set(bp))
    return PartitionMenu(tuple(bp))


def refinement_chain(
    dist: TypeDistribution,
    rng: np.random.Generator,
    cutoff: Optional[float] = None,
    steps: int = 20,
) -> List[PartitionMenu]:
    """从单层菜单开始，每步随机切分一层，得到 steps+1 个逐步细化的菜单。"""
    menu = PartitionMenu.single_level(dist, cutoff)
    chain = [menu]
    for _ in range(steps):
        taus = np.array([float(dist.cdf(b)) for b in menu.breakpoints])
        taus[-1] = min(1.0, dist.tau_max)
        widths = np.diff(taus)
        idx = int(rng.choice(len(widths), p=widths / widths.sum()))
        at_tau = float(rng.uniform(taus[idx], taus[idx + 1]))
        at = float(dist.quantile(at_tau))
        lo, hi = menu.breakpoints[idx], menu.breakpoints[idx + 1]
        if not lo < at < hi:
            at = 0.5 * (lo + hi) if np.isfinite(hi) else lo + 1.0
        menu = menu.split(idx, at)
        chain.append(menu)
    return chain
