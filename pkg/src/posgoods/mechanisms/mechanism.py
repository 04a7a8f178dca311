from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from ..core.distributions import TypeDistribution
from ..core.value_function import ValueFunction, zero
from ..feasibility.allocation import StatusAllocation
from ..utils import numeric


def _cumulative_status(alloc: StatusAllocation, theta0: float, theta: np.ndarray) -> np.ndarray:
    """∫_{θ₀}^{θ} s(x) dx（θ 可在 θ₀ 两侧，逐点精确求积）。"""
    out = np.zeros_like(theta, dtype=float)
    if theta.size == 0:
        return out
    pts = np.unique(np.concatenate([[theta0], theta]))
    cum = numeric.cumulative_integral(alloc, pts, alloc.breaks_theta())
    base = cum[np.searchsorted(pts, theta0)]
    return cum[np.searchsorted(pts, theta)] - base


@dataclass(frozen=True, eq=False)
class PaymentSchedule:
    """
    包络定理给出的付款 p(θ)（U(θ₀) = boundary_utility）。

    standard：p(θ) = θ s(θ) − ∫_{θ₀}^θ s dx + v(θ₀) − U₀，θ ≥ θ₀；
    suffering：p(θ) = θ s(θ) + ∫_θ^{θ₀} s dx + v(θ₀) − U₀，θ ≤ θ₀。
    被排除的类型付 0。等价于 θ₀s(θ₀) + v(θ₀) + ∫ x ds(x)（跳跃按左极限计入）。
    """

    alloc: StatusAllocation
    v: ValueFunction
    boundary_utility: float = 0.0

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        scalar = theta.ndim == 0
        th = np.atleast_1d(theta)
        c = float(self.alloc.exclusion_cutoff)
        inside = self.alloc.participates(th) & np.isfinite(th)
        s = np.asarray(self.alloc(th), dtype=float)
        integral = _cumulative_status(self.alloc, c, np.where(inside, th, c))
        const = float(self.v(c)) - self.boundary_utility
        # suffering 一侧 θ < θ₀，integral 为负，即 +∫_θ^{θ₀} s
        p = th * s - integral + const
        out = np.where(inside, p, 0.0)
        return float(out[0]) if scalar else out


@dataclass(frozen=True, eq=False)
class Mechanism:
    """直接机制 {s(θ), p(θ)}，U(θ₀) 为边界效用。"""

    alloc: StatusAllocation
    payment: PaymentSchedule
    boundary_utility: float = 0.0
    label: str = ""

    @property
    def dist(self) -> TypeDistribution:
        return self.alloc.dist

    @property
    def v(self) -> ValueFunction:
        return self.payment.v

    @property
    def cutoff(self) -> float:
        return float(self.alloc.exclusion_cutoff)

    def utility(self, theta):
        """U(θ) = θ s(θ) − p(θ) + v(θ)；被排除者为 0。"""
        theta = np.asarray(theta, dtype=float)
        scalar = theta.ndim == 0
        th = np.atleast_1d(theta)
        u = th * np.asarray(self.alloc(th)) - np.asarray(self.payment(th)) + self.v(th)
        out = np.where(self.alloc.participates(th), u, 0.0)
        return float(out[0]) if scalar else out

    def envelope_residual(self, theta: Optional[np.ndarray] = None) -> float:
        """max |U(θ) − U₀ − ∫_{θ₀}^θ (s + v') dx|，只在参与者上取。"""
        if theta is None:
            theta = self.dist.theta_grid(512)
        theta = np.asarray(theta, dtype=float)
        theta = theta[self.alloc.participates(theta)]
        if theta.size == 0:
            return 0.0
        c = self.cutoff
        integral = _cumulative_status(self.alloc, c, theta) + self.v(theta) - float(self.v(c))
        expected = self.boundary_utility + integral
        return float(np.max(np.abs(self.utility(theta) - expected)))

    def to_frame(self, theta: Optional[np.ndarray] = None) -> pd.DataFrame:
        """(theta, s, p, U) 四列。"""
        if theta is None:
            theta = self.dist.theta_grid(512)
        theta = np.asarray(theta, dtype=float)
        return pd.DataFrame({
            "theta": theta,
            "s": self.alloc(theta),
            "p": self.payment(theta),
            "U": self.utility(theta),
        })


def payment_schedule(
    alloc: StatusAllocation,
    dist: Optional[TypeDistribution] = None,
    v: Optional[ValueFunction] = None,
    boundary_utility: float = 0.0,
) -> PaymentSchedule:
    if dist is not None and dist is not alloc.dist:
        raise ValueError("分配与分布对象不一致")
    return PaymentSchedule(alloc=alloc, v=v or zero(), boundary_utility=float(boundary_utility))


def build_mechanism(
    alloc: StatusAllocation,
    v: Optional[ValueFunction] = None,
    boundary_utility: float = 0.0,
    label: str = "",
) -> Mechanism:
    pay = payment_schedule(alloc, None, v, boundary_utility)
    return Mechanism(alloc=alloc, payment=pay, boundary_utility=float(boundary_utility), label=label or alloc.label)
