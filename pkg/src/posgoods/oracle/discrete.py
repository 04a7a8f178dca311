from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from ..core.value_function import ValueMode
from ..errors import NonMonotoneError
from ..feasibility.menus import PartitionMenu
from ..mechanisms.mechanism import Mechanism
from ..utils.logger import get_logger
from .economy import DiscreteEconomy

log = get_logger(__name__)

EXCLUDED = -1


# -----------------------------
# 由分层直接计算地位
# -----------------------------

def status_from_assignment(assignment: Sequence[int], economy: DiscreteEconomy, gamma: float = 0.5) -> np.ndarray:
    """
    每个类型的层级标签（负数表示被排除）→ 地位。
    地位 = 严格低层的质量 + γ·同层质量；被排除的质量算作严格低于所有参与者，被排除者地位为 0。
    标签不要求随类型单调。
    """
    labels = np.asarray(assignment, dtype=int).ravel()
    if labels.size != economy.K:
        raise ValueError(f"标签个数 {labels.size} 与类型数 {economy.K} 不一致")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma 必须在 [0,1]，收到 {gamma}")
    m = economy.masses
    part = labels >= 0
    out = np.zeros(economy.K)
    if not np.any(part):
        return out
    excluded = float(np.sum(m[~part]))
    levels, inverse = np.unique(labels[part], return_inverse=True)
    level_mass = np.bincount(inverse, weights=m[part], minlength=levels.size)
    below = np.concatenate([[0.0], np.cumsum(level_mass)[:-1]])
    out[part] = excluded + below[inverse] + gamma * level_mass[inverse]
    return out


def assignment_from_menu(menu: PartitionMenu, economy: DiscreteEconomy) -> np.ndarray:
    """类型落在 [θᵢ, θᵢ₊₁) 记为第 i 层，低于 θ₀ 记为排除。"""
    bp = np.asarray(menu.breakpoints, dtype=float)
    labels = np.searchsorted(bp, economy.types, side="right") - 1
    labels = np.minimum(labels, menu.levels - 1)
    return np.where(economy.types < menu.cutoff, EXCLUDED, labels)


# -----------------------------
# 离散机制
# -----------------------------

@dataclass(frozen=True, eq=False)
class DiscreteMechanism:
    """逐类型的地位、付款与参与标记。被排除者地位与付款都为 0。"""

    status: np.ndarray
    payment: np.ndarray
    participates: np.ndarray
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "status", np.asarray(self.status, dtype=float).ravel())
        object.__setattr__(self, "payment", np.asarray(self.payment, dtype=float).ravel())
        object.__setattr__(self, "participates", np.asarray(self.participates, dtype=bool).ravel())
        k = self.status.size
        if self.payment.size != k or self.participates.size != k:
            raise ValueError("status / payment / participates 长度不一致")
        out = ~self.participates
        if np.any(self.status[out] != 0.0) or np.any(self.payment[out] != 0.0):
            raise ValueError("被排除的类型地位与付款必须为 0")
        s = self.status[self.participates]
        if s.size > 1 and float(np.min(np.diff(s))) < -1e-12:
            raise NonMonotoneError(f"{self.label or '离散机制'}: 参与者地位非单调")

    @property
    def K(self) -> int:
        return int(self.status.size)

    def utility(self, economy: DiscreteEconomy) -> np.ndarray:
        u = economy.types * self.status - self.payment + economy.v_values
        return np.where(self.participates, u, 0.0)

    def to_frame(self, economy: DiscreteEconomy) -> pd.DataFrame:
        return pd.DataFrame({
            "theta": economy.types,
            "s": self.status,
            "p": self.payment,
            "U": self.utility(economy),
            "participates": self.participates,
        })


def participation_mask(economy: DiscreteEconomy, cutoff: int, suffering: Optional[bool] = None) -> np.ndarray:
    """standard：i ≥ cutoff 参与；suffering：i ≤ cutoff 参与。"""
    suffering = economy.mode is ValueMode.SUFFERING if suffering is None else suffering
    idx = np.arange(economy.K)
    return idx <= cutoff if suffering else idx >= cutoff


def envelope_payments(
    economy: DiscreteEconomy,
    status: np.ndarray,
    cutoff: int,
    boundary_utility: float = 0.0,
    suffering: Optional[bool] = None,
) -> np.ndarray:
    """
    离散包络付款，边际参与者 c 的效用为 boundary_utility：
      p_c = θ_c s_c + v_c − u；
      standard 向上：p_i = p_{i−1} + θ_i (s_i − s_{i−1})；
      suffering 向下：p_i = p_{i+1} − θ_i (s_{i+1} − s_i)。
    """
    suffering = economy.mode is ValueMode.SUFFERING if suffering is None else suffering
    theta, s = economy.types, np.asarray(status, dtype=float)
    c = int(cutoff)
    p = np.zeros(economy.K)
    p_c = theta[c] * s[c] + economy.v_values[c] - boundary_utility
    if suffering:
        d = theta[:c] * np.diff(s[: c + 1])
        p[: c + 1] = p_c - np.concatenate([np.cumsum(d[::-1])[::-1], [0.0]])
    else:
        steps = theta[c + 1 :] * np.diff(s[c:])
        p[c:] = p_c + np.concatenate([[0.0], np.cumsum(steps)])
    return p


def build_discrete_mechanism(
    economy: DiscreteEconomy,
    status: np.ndarray,
    cutoff: int,
    boundary_utility: float = 0.0,
    label: str = "",
) -> DiscreteMechanism:
    part = participation_mask(economy, cutoff)
    s = np.where(part, np.asarray(status, dtype=float), 0.0)
    p = np.where(part, envelope_payments(economy, s, cutoff, boundary_utility), 0.0)
    return DiscreteMechanism(status=s, payment=p, participates=part, label=label)


def discretize_mechanism(mech: Mechanism, economy: DiscreteEconomy) -> DiscreteMechanism:
    """在离散类型上取连续机制的 s(θᵢ)、p(θᵢ)。"""
    theta = economy.types
    part = np.asarray(mech.alloc.participates(theta), dtype=bool)
    s = np.where(part, np.asarray(mech.alloc(theta), dtype=float), 0.0)
    p = np.where(part, np.asarray(mech.payment(theta), dtype=float), 0.0)
    return DiscreteMechanism(status=s, payment=p, participates=part, label=mech.label)


# -----------------------------
# 目标值
# -----------------------------

@dataclass(frozen=True)
class DiscreteValues:
    revenue: float
    consumer_surplus: float
    lam: float

    @property
    def social_welfare(self) -> float:
        return self.lam * self.revenue + self.consumer_surplus

    def to_dict(self) -> dict:
        return {
            "revenue": self.revenue,
            "consumer_surplus": self.consumer_surplus,
            "lam": self.lam,
            "social_welfare": self.social_welfare,
        }


def discrete_objectives(mech: DiscreteMechanism, economy: DiscreteEconomy, lam: float = 1.0) -> DiscreteValues:
    m = economy.masses
    rev = float(np.dot(m, mech.payment))
    cs = float(np.dot(m, mech.utility(economy)))
    return DiscreteValues(revenue=rev, consumer_surplus=cs, lam=float(lam))


# -----------------------------
# IC / IR 检查
# -----------------------------

@dataclass(frozen=True)
class ICReport:
    ok: bool
    worst_deviation: float
    worst_type: int
    worst_report: int   # -1 表示退出更优（IR 违反）
    ir_ok: bool

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "worst_deviation": self.worst_deviation,
            "worst_type": self.worst_type,
            "worst_report": self.worst_report,
            "ir_ok": self.ir_ok,
        }


def ic_check(mech: DiscreteMechanism, economy: DiscreteEconomy, tol: float = 1e-7) -> ICReport:
    """
    对所有 i, j：θᵢ s_j − p_j + v(θᵢ) ≤ U(θᵢ) + tol，且退出（效用 0）不优于如实报告。
    被排除的类型同样不能通过冒充参与者获益。
    """
    theta, v = economy.types, economy.v_values
    U = mech.utility(economy)
    reports = np.flatnonzero(mech.participates)
    if reports.size == 0:
        return ICReport(ok=True, worst_deviation=0.0, worst_type=-1, worst_report=-1, ir_ok=True)
    dev = theta[:, None] * mech.status[None, reports] - mech.payment[None, reports] + v[:, None]
    best_j = np.argmax(dev, axis=1)
    best = dev[np.arange(economy.K), best_j]
    opt_out = best < 0.0
    alt = np.where(opt_out, 0.0, best)
    gain = alt - U
    i = int(np.argmax(gain))
    worst = float(gain[i])
    ir_ok = bool(np.all(U[mech.participates] >= -tol))
    report = -1 if opt_out[i] else int(reports[best_j[i]])
    if worst > tol:
        log.debug(f"ic_check: 类型 {i} 报告 {report} 获益 {worst:.3g}")
    return ICReport(ok=worst <= tol and ir_ok, worst_deviation=max(worst, 0.0), worst_type=i, worst_report=report, ir_ok=ir_ok)


# -----------------------------
# 全支付拍卖模拟
# -----------------------------

@dataclass(frozen=True)
class AllPayOutcome:
    statuses: np.ndarray
    bids: np.ndarray
    levels: np.ndarray
    revenue: float
    max_status_gap: float

    def matches(self, tol: float = 1e-9) -> bool:
        return self.max_status_gap <= tol


def all_pay_simulation(mech: DiscreteMechanism, economy: DiscreteEconomy, gamma: float = 0.5, tol: float = 1e-12) -> AllPayOutcome:
    """
    参与者出价 p(θᵢ)，按出价排序（相等出价同层），不出价者排在最底层。
    suffering 模式下不出价的是高类型，已实现的等待时间为 t = 1 − s。
    """
    bids = np.where(mech.participates, mech.payment, 0.0)
    labels = np.full(economy.K, EXCLUDED, dtype=int)
    idx = np.flatnonzero(mech.participates)
    if idx.size:
        order = idx[np.argsort(bids[idx], kind="mergesort")]
        sorted_bids = bids[order]
        scale = np.maximum(1.0, np.abs(sorted_bids[1:]))
        new_level = np.concatenate([[0], (np.diff(sorted_bids) > tol * scale).astype(int)])
        labels[order] = np.cumsum(new_level)
    realized = status_from_assignment(labels, economy, gamma)
    gap = float(np.max(np.abs(realized - mech.status))) if economy.K else 0.0
    revenue = float(np.dot(economy.masses, bids))
    return AllPayOutcome(statuses=realized, bids=bids, levels=labels, revenue=revenue, max_status_gap=gap)
