from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from ..core.distributions import TypeDistribution
from ..errors import NonMonotoneError
from ..utils import numeric
from ..utils.logger import get_logger
from .allocation import ExclusionSide, StatusAllocation, StatusMode

log = get_logger(__name__)


@dataclass(frozen=True)
class MajorizationReport:
    feasible: bool
    worst_violation: float
    binding_points: List[float] = field(default_factory=list)
    expected_status: float = 0.0
    worst_at: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "worst_violation": self.worst_violation,
            "worst_at": self.worst_at,
            "expected_status": self.expected_status,
            "binding_points": list(self.binding_points),
        }


def _reference_tau(s: StatusAllocation, reference: Optional[StatusAllocation]) -> Tuple[Callable, np.ndarray]:
    """参照函数（分位数空间）及其折点。"""
    dist = s.dist
    if reference is not None:
        return reference.status_tau, reference.breaks_tau()
    if s.mode is StatusMode.SIGNALING:
        return (lambda t: dist.quantile(np.minimum(t, dist.tau_max))), np.zeros(0)
    if s.exclusion_side is ExclusionSide.ABOVE:
        # 高类型被排除时，被排除的质量排在所有参与者之下
        t0 = float(dist.cdf(s.exclusion_cutoff))
        return (lambda t: np.where(t <= t0, (1.0 - t0) + t, 0.0)), np.array([t0])
    return (lambda t: np.asarray(t, dtype=float)), np.zeros(0)


def _assert_monotone(s: StatusAllocation, tol: float) -> None:
    a, b = s.participant_tau
    grid = numeric.interior_tau_grid(1024)
    grid = grid[(grid >= a) & (grid <= min(b, s.dist.tau_max))]
    if grid.size < 2:
        return
    chk = numeric.check_monotone(s.status_tau(grid), increasing=True, tol=max(tol, numeric.MONOTONE_TOL))
    if not chk.ok:
        raise NonMonotoneError(f"地位分配 {s.label} 在参与者上非单调，最大下降 {chk.worst_violation:.3g}")


def tail_gap(
    s: StatusAllocation,
    grid_size: int = numeric.DEFAULT_GRID,
    reference: Optional[StatusAllocation] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    D(x) = ∫_x^1 (ref(τ) - s(τ)) dτ 在分位数网格上的值。
    可行 ⇔ D ≥ 0 处处成立；参照默认为 F（即 τ）。
    """
    dist = s.dist
    ref, ref_breaks = _reference_tau(s, reference)
    top = dist.tau_max
    grid = np.unique(np.concatenate([
        np.linspace(0.0, top, grid_size + 1),
        np.clip(s.breaks_tau(), 0.0, top),
        np.clip(ref_breaks, 0.0, top),
    ]))
    breaks = np.concatenate([s.breaks_tau(), ref_breaks, dist.tau_breaks])
    cum = numeric.cumulative_integral(lambda t: ref(t) - s.status_tau(t), grid, breaks)
    return grid, cum[-1] - cum


def check_weak_majorization(
    s: StatusAllocation,
    dist: Optional[TypeDistribution] = None,
    tol: float = 1e-9,
    grid_size: int = numeric.DEFAULT_GRID,
    reference: Optional[StatusAllocation] = None,
    binding_tol: float = numeric.BINDING_TOL,
) -> MajorizationReport:
    """
    弱优超检验：∫_x^θ̄ s dF ≤ ∫_x^θ̄ F dF + tol 对所有网格 x 成立。
    非单调输入直接拒绝；可行与否只报告，不抛异常。
    """
    if dist is not None and dist is not s.dist:
        raise ValueError("分配与分布对象不一致")
    _assert_monotone(s, tol)
    grid, gap = tail_gap(s, grid_size, reference)
    worst_idx = int(np.argmin(gap))
    violation = max(0.0, float(-gap[worst_idx]))
    binding = np.asarray(s.dist.quantile(np.minimum(grid[np.abs(gap) <= binding_tol], s.dist.tau_max)), dtype=float)
    rep = MajorizationReport(
        feasible=violation <= tol,
        worst_violation=violation,
        binding_points=[float(x) for x in binding],
        expected_status=_reference_mean(s, reference) - float(gap[0]),
        worst_at=float(s.dist.quantile(min(grid[worst_idx], s.dist.tau_max))),
    )
    if not rep.feasible:
        log.info(f"{s.label}: 弱优超不成立，最大违反 {violation:.6g} @ θ={rep.worst_at:.6g}")
    return rep


def _reference_mean(s: StatusAllocation, reference: Optional[StatusAllocation]) -> float:
    ref, ref_breaks = _reference_tau(s, reference)
    return s.dist.integrate_tau(ref, 0.0, 1.0, np.concatenate([ref_breaks, s.dist.tau_breaks]))


def check_mps(
    s: StatusAllocation,
    dist: Optional[TypeDistribution] = None,
    tol: float = 1e-9,
    grid_size: int = numeric.DEFAULT_GRID,
) -> bool:
    """均值保持展形：弱优超 + E[s] = E[F] = 1/2（signaling 模式为 E[θ]）。"""
    rep = check_weak_majorization(s, dist, tol, grid_size)
    target = _reference_mean(s, None)
    return rep.feasible and abs(rep.expected_status - target) <= tol


def check_dominated_feasibility(
    s: StatusAllocation,
    tol: float = 1e-9,
    grid_size: int = numeric.DEFAULT_GRID,
) -> MajorizationReport:
    """
    允许负地位时的可行性：存在 ŝ ∈ MPS_w(F) 使 s ≤ ŝ。
    MPS_w(F) 对单调函数向下封闭，等价于检验 max(s, 0)。
    """
    _assert_monotone(s, tol)
    dist = s.dist
    grid = np.unique(np.concatenate([np.linspace(0.0, dist.tau_max, grid_size + 1), np.clip(s.breaks_tau(), 0.0, dist.tau_max)]))
    breaks = np.concatenate([s.breaks_tau(), dist.tau_breaks])
    cum = numeric.cumulative_integral(lambda t: t - np.maximum(s.status_tau(t), 0.0), grid, breaks)
    gap = cum[-1] - cum
    worst_idx = int(np.argmin(gap))
    violation = max(0.0, float(-gap[worst_idx]))
    return MajorizationReport(
        feasible=violation <= tol,
        worst_violation=violation,
        binding_points=[],
        expected_status=s.expected_status(),
        worst_at=float(dist.quantile(min(grid[worst_idx], dist.tau_max))),
    )
