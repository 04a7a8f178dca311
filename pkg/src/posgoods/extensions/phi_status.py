from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from ..core.distributions import TypeDistribution
from ..core.value_function import ValueFunction, zero
from ..errors import InapplicableConditionError
from ..feasibility.allocation import full_separation
from ..mechanisms.mechanism import Mechanism, build_mechanism
from ..utils import numeric
from ..utils.logger import get_logger

log = get_logger(__name__)

RealFn = Callable[[np.ndarray], np.ndarray]


class PhiShape(str, Enum):
    CONVEX = "convex"
    CONCAVE = "concave"
    GENERAL = "general"


def infer_shape(phi: RealFn, n: int = 513, tol: float = 1e-12) -> PhiShape:
    """按 [0,1] 网格上的二阶差分判断；线性函数归为 convex。"""
    x = np.linspace(0.0, 1.0, n)
    d2 = np.diff(np.asarray(phi(x), dtype=float), 2)
    if np.all(d2 >= -tol):
        return PhiShape.CONVEX
    if np.all(d2 <= tol):
        return PhiShape.CONCAVE
    return PhiShape.GENERAL


@dataclass(frozen=True, eq=False)
class PhiTransform:
    """地位的逐点变换 S̃ = φ(S)，φ 在 [0,1] 上严格递增。"""

    phi: RealFn
    dphi: RealFn
    shape: PhiShape
    label: str

    def __post_init__(self):
        x = np.linspace(0.0, 1.0, 513)
        if np.any(np.diff(np.asarray(self.phi(x), dtype=float)) <= 0):
            raise ValueError(f"φ={self.label} 在 [0,1] 上不是严格递增")
        inferred = infer_shape(self.phi)
        if self.shape is not PhiShape.GENERAL and inferred is not self.shape:
            raise ValueError(f"φ={self.label}: 声明形状 {self.shape.value} 与二阶差分 ({inferred.value}) 不一致")

    def __call__(self, x):
        return self.phi(np.asarray(x, dtype=float))


def make_phi(phi: RealFn, dphi: RealFn, label: str) -> PhiTransform:
    return PhiTransform(phi=phi, dphi=dphi, shape=infer_shape(phi), label=label)


def identity_phi() -> PhiTransform:
    return make_phi(lambda x: np.asarray(x, dtype=float), lambda x: np.ones_like(np.asarray(x, dtype=float)), "identity")


def power_phi(a: float) -> PhiTransform:
    """φ(x) = x^a，a > 0（a > 1 凸，a < 1 凹）。"""
    if not a > 0:
        raise ValueError(f"pow 需要 a > 0，收到 {a}")
    a = float(a)

    def dphi(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return a * np.power(x, a - 1.0)

    return make_phi(lambda x: np.power(np.maximum(np.asarray(x, dtype=float), 0.0), a), dphi, f"pow({a:g})")


def sqrt_phi() -> PhiTransform:
    p = power_phi(0.5)
    return PhiTransform(phi=p.phi, dphi=p.dphi, shape=p.shape, label="sqrt")


# -----------------------------
# 条件检查
# -----------------------------

@dataclass(frozen=True)
class PhiConditions:
    regular: bool     # J·φ'(F) 递增
    ifr: bool         # (1−F)/f·φ'(F) 递减
    dfr: bool         # (1−F)/f·φ'(F) 递增
    social: bool      # J_λ·φ'(F) 递增
    lam: float
    worst_violation: dict

    def to_dict(self) -> dict:
        return {
            "regular": self.regular,
            "ifr": self.ifr,
            "dfr": self.dfr,
            "social": self.social,
            "lambda": self.lam,
            "worst_violation": dict(self.worst_violation),
        }


def phi_condition_check(
    dist: TypeDistribution,
    phi: PhiTransform,
    lam: float = 1.0,
    grid_size: int = numeric.DEFAULT_GRID,
    tol: float = numeric.MONOTONE_TOL,
    tau_lo: float = 0.0,
) -> PhiConditions:
    """φ = identity 时退化为 classify 的三个标志。tau_lo > 0 时只检查参与者 [tau_lo, 1]。"""
    tau = numeric.interior_tau_grid(grid_size)
    tau = tau[(tau >= tau_lo) & (tau <= dist.tau_max)]
    dp = np.asarray(phi.dphi(tau), dtype=float)
    j = np.asarray(dist.virtual_value_tau(tau), dtype=float)
    h = np.asarray(dist.inverse_hazard_tau(tau), dtype=float)
    q = np.asarray(dist.quantile(tau), dtype=float)
    j_lam = lam * q - (lam - 1.0) * h

    reg = numeric.check_monotone(j * dp, increasing=True, tol=tol)
    ifr = numeric.check_monotone(h * dp, increasing=False, tol=tol)
    dfr = numeric.check_monotone(h * dp, increasing=True, tol=tol)
    soc = numeric.check_monotone(j_lam * dp, increasing=True, tol=tol)
    return PhiConditions(
        regular=reg.ok,
        ifr=ifr.ok,
        dfr=dfr.ok,
        social=soc.ok,
        lam=float(lam),
        worst_violation={
            "regular": reg.worst_violation,
            "ifr": ifr.worst_violation,
            "dfr": dfr.worst_violation,
            "social": soc.worst_violation,
        },
    )


# -----------------------------
# 变换后的最优机制
# -----------------------------

def phi_objective(dist: TypeDistribution, v: ValueFunction, phi: PhiTransform, tau0: float) -> float:
    """∫_{τ₀}^1 J·φ(τ) dτ + v(θ₀)(1−τ₀)。"""
    core = dist.integrate_tau(lambda t: dist.virtual_value_tau(t) * phi(t), tau0, 1.0)
    return core + float(v(dist.quantile(tau0))) * (1.0 - tau0)


def phi_transformed_optimum(
    dist: TypeDistribution,
    v: Optional[ValueFunction] = None,
    phi: Optional[PhiTransform] = None,
    coarse: int = numeric.COARSE_SCAN,
) -> Mechanism:
    """
    s̃* = φ∘s*，s* 为带排除的全分离极点；截断点在变换后的目标上重新优化。
    需要 J·φ'∘F 在参与者上递增，否则报告不适用（被排除区间上的非单调不影响）。
    """
    v = v or zero()
    phi = phi or identity_phi()

    best = numeric.maximize_scalar(lambda t: phi_objective(dist, v, phi, t), 0.0, dist.tau_max, coarse=coarse)
    tau0 = best.x
    if tau0 > 0.0:
        # 导数为 −[J·φ(τ₀) + v − (1−F)/f·v']
        def foc(t: float) -> float:
            q = float(dist.quantile(t))
            return float(dist.virtual_value_tau(t)) * float(phi(t)) + float(v(q)) - float(dist.inverse_hazard_tau(t)) * float(v.slope(q))

        step = dist.tau_max / (max(3, coarse) - 1)
        root = numeric.polish_root(foc, max(0.0, tau0 - step), min(dist.tau_max, tau0 + step))
        if root is not None and phi_objective(dist, v, phi, root) >= best.value - 1e-12 * max(1.0, abs(best.value)):
            tau0 = root
    cond = phi_condition_check(dist, phi, tau_lo=tau0)
    if not cond.regular:
        raise InapplicableConditionError(
            f"{dist.label}: J·φ'(F) 在 τ ≥ {tau0:.6g} 上非单调（φ={phi.label}），违反量 {cond.worst_violation['regular']:.3g}"
        )
    theta0 = float(dist.quantile(tau0)) if tau0 > 0 else float(dist.support_lo)
    alloc = full_separation(dist, theta0).with_phi(phi)
    log.info(f"{dist.label}: φ={phi.label} 截断 θ₀={theta0:.10g}")
    return build_mechanism(alloc, v, 0.0, label=f"phi_optimum[{phi.label}]")
