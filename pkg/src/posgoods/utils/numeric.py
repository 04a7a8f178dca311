from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq, minimize_scalar

from .logger import get_logger

log = get_logger(__name__)


# -----------------------------
# 数值常量（可被 config.yaml 的 numerics 段覆盖）
# -----------------------------

TAIL_QUANTILE = 1e-9          # 无界支撑截断在 quantile(1 - TAIL_QUANTILE)
DEFAULT_GRID = 2048           # 分类 / 可行性检查的内部网格点数
HULL_GRID = 4096              # 熨平（凸包）使用的分位数网格
COARSE_SCAN = 512             # 标量最大化的粗扫描点数
MONOTONE_TOL = 1e-9           # 单调性判定：增量 ≥ -tol·scale 视为单调
BINDING_TOL = 1e-6            # 约束取等的判定容差
GL_ORDER = 8                  # 每个面板上的 Gauss-Legendre 节点数

_NODES, _WEIGHTS = leggauss(GL_ORDER)

RealFn = Callable[[np.ndarray], np.ndarray]


# -----------------------------
# 积分
# -----------------------------

def graded_breaks(a: float, b: float, panels: int = 32, depth: int = 34) -> np.ndarray:
    """
    [a, b] 上的面板分点：均匀分点 + 两端几何加密（宽度按 2^-k 递减）。
    端点处被积函数常有对数 / 幂次奇性（风险率发散、无界支撑截断），加密后
    Gauss-Legendre 仍能给出 1e-10 量级的精度。
    """
    if not b > a:
        return np.array([a, b], dtype=float)
    w = b - a
    frac = 2.0 ** -np.arange(5, depth + 1)
    pts = np.concatenate([np.linspace(a, b, panels + 1), a + w * frac, b - w * frac])
    pts = pts[(pts >= a) & (pts <= b)]
    return np.unique(pts)


def _merge_breaks(base: np.ndarray, extra: Optional[np.ndarray], a: float, b: float) -> np.ndarray:
    if extra is None or len(extra) == 0:
        return base
    extra = np.asarray(extra, dtype=float)
    extra = extra[np.isfinite(extra) & (extra > a) & (extra < b)]
    return np.unique(np.concatenate([base, extra]))


def panel_integrals(g: RealFn, breaks: np.ndarray) -> np.ndarray:
    """每个面板 [breaks[i], breaks[i+1]] 上的积分（g 需向量化）。"""
    breaks = np.asarray(breaks, dtype=float)
    if breaks.size < 2:
        return np.zeros(0)
    lo, hi = breaks[:-1], breaks[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    vals = np.asarray(g(x.ravel()), dtype=float).reshape(x.shape)
    return np.sum(half[:, None] * _WEIGHTS[None, :] * vals, axis=1)


def integrate(g: RealFn, a: float, b: float, extra_breaks: Optional[np.ndarray] = None) -> float:
    """∫_a^b g，分段 Gauss-Legendre；extra_breaks 为被积函数的间断 / 折点。"""
    if a == b:
        return 0.0
    if b < a:
        return -integrate(g, b, a, extra_breaks)
    breaks = _merge_breaks(graded_breaks(a, b), extra_breaks, a, b)
    return float(np.sum(panel_integrals(g, breaks)))


def cumulative_integral(g: RealFn, grid: np.ndarray, extra_breaks: Optional[np.ndarray] = None) -> np.ndarray:
    """返回 C[k] = ∫_{grid[0]}^{grid[k]} g，grid 必须升序。"""
    grid = np.asarray(grid, dtype=float)
    a, b = float(grid[0]), float(grid[-1])
    breaks = np.unique(np.concatenate([grid, graded_breaks(a, b)]))
    breaks = _merge_breaks(breaks, extra_breaks, a, b)
    cum = np.concatenate([[0.0], np.cumsum(panel_integrals(g, breaks))])
    return cum[np.searchsorted(breaks, grid)]


# -----------------------------
# 网格与单调性
# -----------------------------

def interior_tau_grid(n: int = DEFAULT_GRID, depth: int = 29) -> np.ndarray:
    """(0,1) 内部分位数网格：中点网格 + 靠近 0、1 的几何加密。"""
    base = (np.arange(n) + 0.5) / n
    refine = 2.0 ** -np.arange(int(np.log2(n)) + 1, depth + 1)
    return np.unique(np.concatenate([base, refine, 1.0 - refine]))


@dataclass(frozen=True)
class MonotoneCheck:
    ok: bool
    worst_violation: float
    inconclusive: bool


def check_monotone(values: Sequence[float], increasing: bool = True, tol: float = MONOTONE_TOL) -> MonotoneCheck:
    """
    网格增量 ≥ -tol·scale 视为单调。
    inconclusive：判为单调，但存在低于容差的微小反向增量。
    """
    vals = np.asarray(values, dtype=float)
    vals = vals[np.isfinite(vals)]
    if vals.size < 2:
        return MonotoneCheck(True, 0.0, False)
    d = np.diff(vals) if increasing else -np.diff(vals)
    scale = max(1.0, float(np.max(np.abs(vals))))
    drop = max(0.0, float(-np.min(d)))
    ok = drop <= tol * scale
    return MonotoneCheck(ok=ok, worst_violation=drop, inconclusive=ok and drop > 0.0)


# -----------------------------
# 标量优化
# -----------------------------

@dataclass(frozen=True)
class ScalarMax:
    x: float
    value: float


def maximize_scalar(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    coarse: int = COARSE_SCAN,
    xatol: float = 1e-12,
) -> ScalarMax:
    """
    粗扫描 + 有界 Brent（黄金分割回退）细化。
    平局取最小的 x：只有严格更优时才替换扫描结果。
    """
    if not hi > lo:
        return ScalarMax(float(lo), float(f(lo)))
    xs = np.linspace(lo, hi, max(3, coarse))
    vals = np.array([f(float(x)) for x in xs], dtype=float)
    vals = np.where(np.isfinite(vals), vals, -np.inf)
    i = int(np.argmax(vals))
    best_x, best_v = float(xs[i]), float(vals[i])

    a = float(xs[max(i - 1, 0)])
    b = float(xs[min(i + 1, len(xs) - 1)])
    res = minimize_scalar(lambda x: -f(x), bounds=(a, b), method="bounded", options={"xatol": xatol})
    if res.success and np.isfinite(res.fun):
        cand = float(-res.fun)
        if cand > best_v + 1e-15 * max(1.0, abs(best_v)):
            best_x, best_v = float(res.x), cand
    log.debug(f"maximize_scalar: bracket=[{a:.6g}, {b:.6g}] x*={best_x:.10g} value={best_v:.12g}")
    return ScalarMax(best_x, best_v)


def polish_root(g: Callable[[float], float], a: float, b: float, xtol: float = 1e-14) -> Optional[float]:
    """若 g 在 [a,b] 上变号则用 brentq 求根，否则返回 None。"""
    if not b > a:
        return None
    ga, gb = g(a), g(b)
    if not (np.isfinite(ga) and np.isfinite(gb)):
        return None
    if ga == 0.0:
        return a
    if gb == 0.0:
        return b
    if ga * gb > 0:
        return None
    return float(brentq(g, a, b, xtol=xtol))
