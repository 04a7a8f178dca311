from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from math import comb
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..core.value_function import ValueMode
from ..errors import ModeError, SizeGuardError
from ..utils.logger import get_logger
from .discrete import (
    DiscreteMechanism,
    build_discrete_mechanism,
    discrete_objectives,
    envelope_payments,
    participation_mask,
    status_from_assignment,
)
from .economy import DiscreteEconomy

log = get_logger(__name__)

EXHAUSTIVE_MAX_TYPES = 40
EXHAUSTIVE_MAX_COMBINATIONS = 2_000_000
LOWERING_MAX_TYPES = 10
TIE_TOL = 1e-12


class Objective(str, Enum):
    REVENUE = "revenue"
    CONSUMER_SURPLUS = "consumer_surplus"
    SOCIAL = "social"


_ALIASES = {"cs": Objective.CONSUMER_SURPLUS, "welfare": Objective.SOCIAL}


def parse_objective(name: str | Objective) -> Objective:
    if isinstance(name, Objective):
        return name
    key = str(name).strip().lower()
    return _ALIASES.get(key) or Objective(key)


def objective_weights(objective: Objective, lam: float = 1.0) -> Tuple[float, float]:
    """目标 = α·收入 + β·消费者剩余。"""
    if objective is Objective.REVENUE:
        return 1.0, 0.0
    if objective is Objective.CONSUMER_SURPLUS:
        return 0.0, 1.0
    return float(lam), 1.0


def default_pricing(objective: Objective, lam: float = 1.0) -> str:
    """ir：边际参与者效用为 0；nonneg：最低价格为 0。"""
    if objective is Objective.REVENUE:
        return "ir"
    if objective is Objective.CONSUMER_SURPLUS:
        return "nonneg"
    return "ir" if lam >= 1.0 else "nonneg"


@dataclass(frozen=True, eq=False)
class MenuSearchResult:
    mechanism: DiscreteMechanism
    value: float
    cutoff_index: int
    cutoff: float
    levels: int
    group_starts: Tuple[int, ...]
    method: str
    objective: Objective
    lam: float
    pricing: str

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "cutoff_index": self.cutoff_index,
            "cutoff": self.cutoff,
            "levels": self.levels,
            "group_starts": list(self.group_starts),
            "method": self.method,
            "objective": self.objective.value,
            "lam": self.lam,
            "pricing": self.pricing,
        }


# -----------------------------
# 公共部分
# -----------------------------

def _phi_fn(phi: Optional[Callable]) -> Callable[[np.ndarray], np.ndarray]:
    if phi is None:
        return lambda x: np.asarray(x, dtype=float)
    return lambda x: np.asarray(phi(np.asarray(x, dtype=float)), dtype=float)


def _labels(K: int, groups: Sequence[Tuple[int, int]]) -> np.ndarray:
    labels = np.full(K, -1, dtype=int)
    for k, (a, b) in enumerate(groups):
        labels[a : b + 1] = k
    return labels


def _realize(
    economy: DiscreteEconomy,
    groups: Sequence[Tuple[int, int]],
    gamma: float,
    phi: Callable,
    pricing: str,
    label: str,
) -> DiscreteMechanism:
    """按分组直接计算地位（status_from_assignment）与包络付款。"""
    c = groups[0][0]
    s = phi(status_from_assignment(_labels(economy.K, groups), economy, gamma))
    s = np.where(participation_mask(economy, c, suffering=False), s, 0.0)
    u = economy.types[c] * s[c] + economy.v_values[c] if pricing == "nonneg" else 0.0
    return build_discrete_mechanism(economy, s, c, boundary_utility=u, label=label)


def _direct_value(mech: DiscreteMechanism, economy: DiscreteEconomy, alpha: float, beta: float) -> float:
    vals = discrete_objectives(mech, economy)
    return alpha * vals.revenue + beta * vals.consumer_surplus


def _better(value: float, key: Tuple[int, int], best_value: float, best_key: Tuple[int, int]) -> bool:
    """严格更优，或在容差内相等且（层数，截断）更小。"""
    eps = TIE_TOL * max(1.0, abs(best_value))
    if value > best_value + eps:
        return True
    return abs(value - best_value) <= eps and key < best_key


def _pick(cand: np.ndarray, lev: np.ndarray) -> int:
    finite = np.isfinite(cand)
    if not np.any(finite):
        return -1
    best = float(np.max(cand[finite]))
    near = np.flatnonzero(finite & (cand >= best - TIE_TOL * max(1.0, abs(best))))
    return int(near[np.argmin(lev[near])])


# -----------------------------
# 动态规划
# -----------------------------

def _dp(
    economy: DiscreteEconomy,
    alpha: float,
    beta: float,
    gamma: float,
    phi: Callable,
    max_levels: int,
    pricing: str,
    cutoffs: Sequence[int],
) -> Tuple[int, List[Tuple[int, int]], float]:
    """
    分组 [a, b] 的贡献 φ(s_ab)·Σ_{a..b} wᵢ 可分离，按断点做 DP：
      s_ab = 1 − M_a + γ(M_a − M_{b+1})，M_a 为 a 及以上的质量；
      收入权重 mᵢθᵢ − (θᵢ₊₁ − θᵢ)Mᵢ₊₁，剩余权重 (θᵢ₊₁ − θᵢ)Mᵢ₊₁。
    截断 c 的常数项与 nonneg 定价下首组的额外项单独处理。
    """
    K = economy.K
    theta, m, v = economy.types, economy.masses, economy.v_values
    M = economy.mass_at_or_above
    dtheta = np.concatenate([np.diff(theta), [0.0]])
    w = alpha * (m * theta - dtheta * M[1:]) + beta * dtheta * M[1:]
    Wc = np.concatenate([[0.0], np.cumsum(w)])
    v_suffix = np.concatenate([np.cumsum((m * v)[::-1])[::-1], [0.0]])
    nonneg = pricing == "nonneg"

    def seg(a: int) -> Tuple[np.ndarray, np.ndarray]:
        b = np.arange(a, K)
        s = phi(1.0 - M[a] + gamma * (M[a] - M[b + 1]))
        return b, s * (Wc[b + 1] - Wc[a])

    unlimited = max_levels >= K
    layers = 1 if unlimited else max_levels
    # rest[j][a]：用不超过 j 组覆盖 a..K-1 的最优值（unlimited 时只有一层，自引用）
    rest = np.full((layers + 1, K + 1), -np.inf)
    lev = np.zeros((layers + 1, K + 1), dtype=int)
    nxt = np.full((layers + 1, K + 1), K, dtype=int)
    rest[:, K] = 0.0
    for j in range(1, layers + 1):
        prev = j if unlimited else j - 1
        for a in range(K - 1, -1, -1):
            b, g = seg(a)
            cand = g + rest[prev, b + 1]
            i = _pick(cand, lev[prev, b + 1] + 1)
            if i < 0:
                continue
            rest[j, a] = cand[i]
            lev[j, a] = lev[prev, b[i] + 1] + 1
            nxt[j, a] = b[i] + 1

    tail = layers if unlimited else layers - 1
    best_value, best_key, best_groups = -np.inf, (K + 1, K + 1), None
    for c in cutoffs:
        b, g = seg(c)
        if nonneg:
            g = g + (beta - alpha) * M[c] * theta[c] * phi(1.0 - M[c] + gamma * (M[c] - M[b + 1]))
        cand = g + rest[tail, b + 1]
        i = _pick(cand, lev[tail, b + 1] + 1)
        if i < 0:
            continue
        k_c = alpha * v[c] * M[c] + beta * (v_suffix[c] - v[c] * M[c])
        if nonneg:
            k_c += (beta - alpha) * v[c] * M[c]
        value = float(cand[i] + k_c)
        levels = int(lev[tail, b[i] + 1] + 1)
        if best_groups is None or _better(value, (levels, c), best_value, best_key):
            groups = [(c, int(b[i]))]
            a, j = int(b[i]) + 1, tail
            while a < K:
                nb = int(nxt[j, a])
                groups.append((a, nb - 1))
                a = nb
                if not unlimited:
                    j -= 1
            best_value, best_key, best_groups = value, (levels, c), groups
    return best_key[1], best_groups, best_value


# -----------------------------
# 穷举
# -----------------------------

def count_menus(K: int, max_levels: int, cutoffs: Sequence[int]) -> int:
    total = 0
    for c in cutoffs:
        n = K - c
        total += sum(comb(n - 1, j - 1) for j in range(1, min(max_levels, n) + 1))
    return total


def _exhaustive(
    economy: DiscreteEconomy,
    alpha: float,
    beta: float,
    gamma: float,
    phi: Callable,
    max_levels: int,
    pricing: str,
    cutoffs: Sequence[int],
    max_combinations: int,
) -> Tuple[int, List[Tuple[int, int]], float]:
    K = economy.K
    if K > EXHAUSTIVE_MAX_TYPES:
        raise SizeGuardError(f"穷举只支持 K ≤ {EXHAUSTIVE_MAX_TYPES}，收到 K={K}")
    total = count_menus(K, max_levels, cutoffs)
    if total > max_combinations:
        raise SizeGuardError(f"穷举菜单数 {total} 超过上限 {max_combinations}")
    log.debug(f"穷举 {total} 个菜单（K={K}, m≤{max_levels}）")

    best_value, best_key, best_groups = -np.inf, (K + 1, K + 1), None
    for c in cutoffs:
        inner = range(c + 1, K)
        for j in range(1, min(max_levels, K - c) + 1):
            for cuts in combinations(inner, j - 1):
                starts = (c,) + cuts
                ends = cuts + (K,)
                groups = [(a, e - 1) for a, e in zip(starts, ends)]
                mech = _realize(economy, groups, gamma, phi, pricing, "exhaustive")
                value = _direct_value(mech, economy, alpha, beta)
                if best_groups is None or _better(value, (j, c), best_value, best_key):
                    best_value, best_key, best_groups = value, (j, c), groups
    return best_key[1], best_groups, best_value


# -----------------------------
# 入口
# -----------------------------

def best_menu_search(
    economy: DiscreteEconomy,
    objective: str | Objective = Objective.REVENUE,
    max_levels: Optional[int] = None,
    allow_exclusion: bool = True,
    lam: float = 1.0,
    pricing: Optional[str] = None,
    gamma: float = 0.5,
    method: str = "dp",
    phi: Optional[Callable] = None,
    max_combinations: int = EXHAUSTIVE_MAX_COMBINATIONS,
) -> MenuSearchResult:
    """
    在至多 max_levels 层的单调阶梯分配上求最优菜单。
    地位由 status_from_assignment 计算，付款为离散包络（定价规则见 default_pricing）。
    平局时取层数更少者，再取截断更低者。
    """
    if economy.mode is ValueMode.SUFFERING:
        raise ModeError("best_menu_search 只支持 standard 模式，suffering 请用 suffering_lowering_search")
    obj = parse_objective(objective)
    alpha, beta = objective_weights(obj, lam)
    pricing = pricing or default_pricing(obj, lam)
    if pricing not in ("ir", "nonneg"):
        raise ValueError(f"未知定价规则: {pricing}")
    K = economy.K
    m = K if max_levels is None else int(max_levels)
    if m < 1:
        raise ValueError(f"max_levels 必须 ≥ 1，收到 {max_levels}")
    m = min(m, K)
    cutoffs = list(range(K)) if allow_exclusion else [0]
    fn = _phi_fn(phi)

    if method == "dp":
        c, groups, dp_value = _dp(economy, alpha, beta, gamma, fn, m, pricing, cutoffs)
    elif method == "exhaustive":
        c, groups, dp_value = _exhaustive(economy, alpha, beta, gamma, fn, m, pricing, cutoffs, max_combinations)
    else:
        raise ValueError(f"未知搜索方法: {method}")

    mech = _realize(economy, groups, gamma, fn, pricing, f"best_menu:{obj.value}")
    value = _direct_value(mech, economy, alpha, beta)
    if abs(value - dp_value) > 1e-9 * max(1.0, abs(value)):
        log.warning(f"best_menu_search: 分解值 {dp_value:.12g} 与直接计算 {value:.12g} 不一致")
    log.info(f"{economy.label}: {obj.value} 最优菜单 {len(groups)} 层，截断 θ={economy.types[c]:.6g}，值 {value:.10g}")
    return MenuSearchResult(
        mechanism=mech,
        value=value,
        cutoff_index=c,
        cutoff=float(economy.types[c]),
        levels=len(groups),
        group_starts=tuple(a for a, _ in groups),
        method=method,
        objective=obj,
        lam=float(lam),
        pricing=pricing,
    )


# -----------------------------
# suffering：把地位压到 0 以下
# -----------------------------

@dataclass(frozen=True)
class LoweringSearchResult:
    base_revenue: float
    lowered_revenue: float
    improved: bool
    candidates: int

    @property
    def gap(self) -> float:
        return self.lowered_revenue - self.base_revenue

    def to_dict(self) -> dict:
        return {
            "base_revenue": self.base_revenue,
            "lowered_revenue": self.lowered_revenue,
            "improved": self.improved,
            "gap": self.gap,
            "candidates": self.candidates,
        }


def suffering_lowering_search(
    economy: DiscreteEconomy,
    deltas: Sequence[float] = (0.05, 0.1, 0.25, 0.5, 1.0),
    gamma: float = 0.5,
    tol: float = 1e-12,
) -> LoweringSearchResult:
    """
    suffering 模式（高类型被排除，参与者为 0..c）：枚举所有截断与单调分组，
    再把最低的 j 个参与者的地位整体降低 δ（可以为负），比较最高收入。
    付款为向下的离散包络，边际参与者 c 的效用为 0。
    """
    if economy.mode is not ValueMode.SUFFERING:
        raise ModeError("suffering_lowering_search 需要 suffering 模式的经济")
    K = economy.K
    if K > LOWERING_MAX_TYPES:
        raise SizeGuardError(f"降地位搜索只支持 K ≤ {LOWERING_MAX_TYPES}，收到 K={K}")
    m = economy.masses

    def revenue(s: np.ndarray, c: int) -> float:
        p = envelope_payments(economy, s, c, 0.0, suffering=True)
        return float(np.dot(m[: c + 1], p[: c + 1]))

    base, lowered, n = -np.inf, -np.inf, 0
    for c in range(K):
        for j in range(1, c + 2):
            for cuts in combinations(range(1, c + 1), j - 1):
                starts = (0,) + cuts
                ends = cuts + (c + 1,)
                labels = np.full(K, -1, dtype=int)
                for k, (a, e) in enumerate(zip(starts, ends)):
                    labels[a:e] = k
                s = status_from_assignment(labels, economy, gamma)
                base = max(base, revenue(s, c))
                n += 1
                for delta in deltas:
                    for depth in range(1, c + 2):
                        low = s.copy()
                        low[:depth] -= float(delta)
                        lowered = max(lowered, revenue(low, c))
                        n += 1
    improved = lowered > base + tol * max(1.0, abs(base))
    if improved:
        log.warning(f"{economy.label}: 降低地位后收入 {lowered:.12g} 高于 {base:.12g}")
    return LoweringSearchResult(base_revenue=base, lowered_revenue=lowered, improved=improved, candidates=n)
