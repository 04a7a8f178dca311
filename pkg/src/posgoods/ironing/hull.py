from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd


@dataclass(frozen=True, eq=False)
class IroningResult:
    """
    J̃ 的下凸包。grid 为横坐标（分位数 τ），jtilde 为采样值，
    hull 为凸包在 grid 上的取值，ironed_j 为凸包斜率（阶梯函数）。
    pooled_intervals：凸包为仿射且严格低于 J̃ 的最大区间。
    """

    grid: np.ndarray
    jtilde: np.ndarray
    hull: np.ndarray
    vertices: np.ndarray
    ironed_j: np.ndarray
    pooled_intervals: List[Tuple[float, float]] = field(default_factory=list)

    @property
    def regular(self) -> bool:
        return not self.pooled_intervals

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"tau": self.grid, "jtilde": self.jtilde, "hull": self.hull, "ironed_j": self.ironed_j})


def _lower_chain(x: np.ndarray, y: np.ndarray) -> List[int]:
    # 单调链扫描；共线点也弹出，只保留真正的顶点
    hull: List[int] = []
    for i in range(len(x)):
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o])
            if cross <= 0.0:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def convex_minorant(x, y, tol: Optional[float] = None) -> IroningResult:
    """
    最大的凸函数 ≤ 样本（下凸包）。
    tol 缺省为 1e-9 × (max y − min y)；凸包低于样本超过 tol 的仿射段记为 pooled。
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("convex_minorant 需要等长的一维样本")
    if x.size >= 2 and np.any(np.diff(x) <= 0):
        raise ValueError("横坐标必须严格递增")
    if x.size < 3:
        slopes = np.full_like(x, (y[-1] - y[0]) / (x[-1] - x[0]) if x.size == 2 else 0.0)
        return IroningResult(x, y, y.copy(), np.arange(x.size), slopes, [])

    span = float(np.max(y) - np.min(y))
    if tol is None:
        tol = 1e-9 * max(span, 1e-300)

    verts = np.asarray(_lower_chain(x, y), dtype=int)
    hull = np.interp(x, x[verts], y[verts])

    seg_slope = np.diff(y[verts]) / np.diff(x[verts])
    seg_idx = np.clip(np.searchsorted(x[verts], x, side="right") - 1, 0, len(seg_slope) - 1)
    ironed_j = seg_slope[seg_idx]

    pooled: List[Tuple[float, float]] = []
    for a, b in zip(verts[:-1], verts[1:]):
        if b - a < 2:
            continue
        gap = float(np.max(y[a + 1 : b] - hull[a + 1 : b]))
        if gap > tol:
            pooled.append((float(x[a]), float(x[b])))
    return IroningResult(x, y, hull, verts, ironed_j, pooled)
