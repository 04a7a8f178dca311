from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from ..errors import ModeError
from ..utils import numeric
from .distributions import TypeDistribution

RealFn = Callable[[np.ndarray], np.ndarray]


class ValueMode(str, Enum):
    STANDARD = "standard"     # v' ≥ 0, v'' ≤ 0
    SUFFERING = "suffering"   # v' ≤ -1


@dataclass(frozen=True, eq=False)
class ValueFunction:
    """商品的内在价值 v(θ) 及其导数 v'(θ)。"""

    v: RealFn
    dv: RealFn
    mode: ValueMode = ValueMode.STANDARD
    label: str = "0"

    def __call__(self, theta):
        return np.asarray(self.v(np.asarray(theta, dtype=float)), dtype=float)

    def slope(self, theta):
        return np.asarray(self.dv(np.asarray(theta, dtype=float)), dtype=float)

    def _grid(self, dist: TypeDistribution, n: int) -> np.ndarray:
        return np.concatenate([[dist.support_lo], dist.theta_grid(n), [dist.theta_max]])

    def max_abs_slope(self, dist: TypeDistribution, n: int = numeric.DEFAULT_GRID) -> float:
        return float(np.max(np.abs(self.slope(self._grid(dist, n)))))

    def is_countervailing(self, dist: TypeDistribution, n: int = numeric.DEFAULT_GRID) -> bool:
        """v' 在某处落在 (-1, 0)：抵消型激励，没有可用的机制刻画。"""
        d = self.slope(self._grid(dist, n))
        return bool(np.any((d < 0) & (d > -1)))

    def validate(self, dist: TypeDistribution, n: int = numeric.DEFAULT_GRID, tol: float = numeric.MONOTONE_TOL) -> None:
        grid = self._grid(dist, n)
        d = self.slope(grid)
        if self.mode is ValueMode.SUFFERING:
            if np.any(d > -1.0 + tol):
                worst = float(np.max(d))
                raise ModeError(f"suffering 模式要求 v' ≤ -1，{self.label} 的最大斜率为 {worst:.6g}")
            return
        vals = self(grid)
        if np.any(vals < -tol):
            raise ModeError(f"standard 模式要求 v ≥ 0，{self.label} 最小值 {float(np.min(vals)):.6g}")
        if np.any(d < -tol):
            raise ModeError(f"standard 模式要求 v' ≥ 0，{self.label} 最小斜率 {float(np.min(d)):.6g}")
        chk = numeric.check_monotone(d, increasing=False, tol=tol)
        if not chk.ok:
            raise ModeError(f"standard 模式要求 v 凹（v' 不增），{self.label} 违反量 {chk.worst_violation:.3g}")


# -----------------------------
# 常用形式
# -----------------------------

def zero() -> ValueFunction:
    return polynomial([0.0], label="0")


def linear(v0: float, alpha: float, mode: ValueMode = ValueMode.STANDARD) -> ValueFunction:
    return polynomial([v0, alpha], mode=mode, label=f"linear({v0:g},{alpha:g})")


def polynomial(coeffs: Sequence[float], mode: ValueMode = ValueMode.STANDARD, label: str | None = None) -> ValueFunction:
    """v(θ) = Σ c_k θ^k（系数按升幂）。"""
    c = np.asarray(coeffs, dtype=float)
    dc = P.polyder(c) if c.size > 1 else np.zeros(1)
    return ValueFunction(
        v=lambda t: P.polyval(t, c),
        dv=lambda t: P.polyval(t, dc) + 0.0 * t,
        mode=mode,
        label=label or "poly(" + ",".join(f"{x:g}" for x in c) + ")",
    )


def sqrt_shift(c: float) -> ValueFunction:
    """v(θ) = √(θ + c)，严格凹。"""
    if not c > 0:
        raise ValueError(f"sqrt 需要 c > 0，收到 {c}")
    return ValueFunction(
        v=lambda t: np.sqrt(t + c),
        dv=lambda t: 0.5 / np.sqrt(t + c),
        label=f"sqrt({c:g})",
    )
