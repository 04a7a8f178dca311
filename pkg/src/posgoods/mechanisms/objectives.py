from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..core.distributions import TypeDistribution
from ..core.value_function import ValueFunction, zero
from ..errors import InfeasibleAllocationError
from ..feasibility.allocation import ExclusionSide, StatusAllocation
from ..feasibility.majorization import check_dominated_feasibility, check_weak_majorization
from ..utils import numeric
from ..utils.logger import get_logger
from .mechanism import Mechanism

log = get_logger(__name__)


# -----------------------------
# 可行性前置检查
# -----------------------------

def ensure_feasible(alloc: StatusAllocation, tol: float = 1e-7) -> None:
    """
    弱优超不成立时抛 InfeasibleAllocationError；含负地位时检验 max(s, 0)。
    带 φ 变换的分配检验变换前的地位。
    """
    if alloc.phi is not None:
        alloc = alloc.with_phi(None)
    sampled = alloc.status_tau(numeric.interior_tau_grid(256))
    if np.min(sampled) < 0.0:
        rep = check_dominated_feasibility(alloc, tol=tol)
    else:
        rep = check_weak_majorization(alloc, tol=tol)
    if not rep.feasible:
        raise InfeasibleAllocationError(
            f"{alloc.label or '分配'} 不可行：最大违反 {rep.worst_violation:.6g} @ θ={rep.worst_at:.6g}"
        )


def _setup(alloc: StatusAllocation, dist: Optional[TypeDistribution], v: Optional[ValueFunction]):
    if dist is not None and dist is not alloc.dist:
        raise ValueError("分配与分布对象不一致")
    return alloc.dist, (v or zero())


def _participant_tau(alloc: StatusAllocation):
    a, b = alloc.participant_tau
    return a, b, alloc.breaks_tau()


# -----------------------------
# 收入 / 消费者剩余 / 社会福利
# -----------------------------

def revenue(
    alloc: StatusAllocation,
    dist: Optional[TypeDistribution] = None,
    v: Optional[ValueFunction] = None,
    U0: float = 0.0,
    check: bool = True,
) -> float:
    """
    R = ∫_{θ₀}^θ̄ J s dF − U₀(1−F(θ₀)) + v(θ₀)(1−F(θ₀))。
    suffering 分配（高类型被排除）：R = ∫_θ̲^{θ₀} L s dF + (v(θ₀) − U₀)F(θ₀)。
    """
    dist, v = _setup(alloc, dist, v)
    if check:
        ensure_feasible(alloc)
    a, b, breaks = _participant_tau(alloc)
    c = float(alloc.exclusion_cutoff)

    if alloc.exclusion_side is ExclusionSide.ABOVE:
        core = dist.integrate_tau(lambda t: dist.reverse_virtual_tau(t) * alloc.status_tau(t), a, b, breaks)
        return core + (float(v(c)) - U0) * b

    mass = 1.0 - a
    core = dist.integrate_tau(lambda t: dist.virtual_value_tau(t) * alloc.status_tau(t), a, 1.0, breaks)
    return core - U0 * mass + float(v(c)) * mass


def consumer_surplus(
    alloc: StatusAllocation,
    dist: Optional[TypeDistribution] = None,
    v: Optional[ValueFunction] = None,
    U0: float = 0.0,
    check: bool = True,
) -> float:
    """
    W = ∫_{θ₀}^θ̄ [(1−F)/f · (s + v') + U₀] dF。
    suffering：W = U₀F(θ₀) − ∫_θ̲^{θ₀} F/f · (s + v') dF。
    """
    dist, v = _setup(alloc, dist, v)
    if check:
        ensure_feasible(alloc)
    a, b, breaks = _participant_tau(alloc)

    def slope_tau(t):
        return v.slope(dist.quantile(np.minimum(t, dist.tau_max)))

    if alloc.exclusion_side is ExclusionSide.ABOVE:
        def g(t):
            with np.errstate(divide="ignore", invalid="ignore"):
                rh = t / dist.density_at_quantile(t)
            return rh * (alloc.status_tau(t) + slope_tau(t))

        return U0 * b - dist.integrate_tau(g, a, b, breaks)

    def g(t):
        return dist.inverse_hazard_tau(t) * (alloc.status_tau(t) + slope_tau(t))

    return dist.integrate_tau(g, a, 1.0, breaks) + U0 * (1.0 - a)


def social_welfare(
    alloc: StatusAllocation,
    dist: Optional[TypeDistribution] = None,
    v: Optional[ValueFunction] = None,
    lam: float = 1.0,
    U0: float = 0.0,
    check: bool = True,
) -> float:
    """
    W_S = λR + W
        = ∫ J_λ s dF + ∫ [λv − (λ−1)(1−F)/f · v'] dF + (1−λ)U₀(1−F(θ₀))，积分取参与者。
    J_λ = λθ − (λ−1)(1−F)/f。suffering 分配直接用 λR + W。
    """
    if lam < 0:
        raise ValueError(f"λ 必须非负，收到 {lam}")
    dist, v = _setup(alloc, dist, v)
    if check:
        ensure_feasible(alloc)
    if alloc.exclusion_side is ExclusionSide.ABOVE:
        return lam * revenue(alloc, dist, v, U0, check=False) + consumer_surplus(alloc, dist, v, U0, check=False)

    a, _, breaks = _participant_tau(alloc)

    def g(t):
        q = dist.quantile(np.minimum(t, dist.tau_max))
        h = dist.inverse_hazard_tau(t)
        j_lam = lam * q - (lam - 1.0) * h
        return j_lam * alloc.status_tau(t) + lam * v(q) - (lam - 1.0) * h * v.slope(q)

    return dist.integrate_tau(g, a, 1.0, breaks) + (1.0 - lam) * U0 * (1.0 - a)


# -----------------------------
# 汇总报告
# -----------------------------

@dataclass(frozen=True)
class EvalReport:
    label: str
    revenue: float
    consumer_surplus: float
    social_welfare: Dict[float, float]
    exclusion_mass: float
    cutoff: float
    boundary_utility: float
    utility_samples: List[List[float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "revenue": self.revenue,
            "consumer_surplus": self.consumer_surplus,
            "social_welfare": {f"{k:g}": v for k, v in self.social_welfare.items()},
            "exclusion_mass": self.exclusion_mass,
            "cutoff": self.cutoff,
            "boundary_utility": self.boundary_utility,
            "utility_samples": self.utility_samples,
        }

    def to_row(self) -> dict:
        """一行扁平记录，供 CSV 汇总。"""
        row = {
            "label": self.label,
            "revenue": self.revenue,
            "consumer_surplus": self.consumer_surplus,
            "exclusion_mass": self.exclusion_mass,
            "cutoff": self.cutoff,
        }
        for k, val in self.social_welfare.items():
            row[f"welfare_{k:g}"] = val
        return row


def evaluate(mech: Mechanism, lambdas: Sequence[float] = (1.0,), samples: int = 11, check: bool = True) -> EvalReport:
    alloc, v, U0 = mech.alloc, mech.v, mech.boundary_utility
    if check:
        ensure_feasible(alloc)
    rev = revenue(alloc, v=v, U0=U0, check=False)
    cs = consumer_surplus(alloc, v=v, U0=U0, check=False)
    sw = {float(lam): social_welfare(alloc, v=v, lam=lam, U0=U0, check=False) for lam in lambdas}
    taus = (np.arange(samples) + 0.5) / samples
    theta = np.asarray(mech.dist.quantile(taus), dtype=float)
    util = mech.utility(theta)
    return EvalReport(
        label=mech.label,
        revenue=rev,
        consumer_surplus=cs,
        social_welfare=sw,
        exclusion_mass=alloc.exclusion_mass,
        cutoff=mech.cutoff,
        boundary_utility=U0,
        utility_samples=[[float(t), float(u)] for t, u in zip(theta, util)],
    )
