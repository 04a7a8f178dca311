from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from ..core.distributions import TypeDistribution
from ..core.value_function import ValueFunction, ValueMode, zero
from ..errors import WeightSumError
from ..utils.logger import get_logger

log = get_logger(__name__)

MASS_TOL = 1e-12
# 手写 CSV 的质量和允许的误差，超出即报错，之内重新归一化
IMPORT_MASS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DiscreteEconomy:
    """
    K 个类型的离散经济：类型严格递增，质量非负且和为 1，
    每个类型带 v(θᵢ) 与 v'(θᵢ)。
    """

    types: np.ndarray
    masses: np.ndarray
    v_values: np.ndarray
    v_slopes: np.ndarray
    mode: ValueMode = ValueMode.STANDARD
    label: str = ""

    def __post_init__(self):
        for name in ("types", "masses", "v_values", "v_slopes"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).ravel())
        k = self.types.size
        if k < 1:
            raise ValueError("离散经济至少需要一个类型")
        if any(getattr(self, n).size != k for n in ("masses", "v_values", "v_slopes")):
            raise ValueError("types / masses / v / v' 长度不一致")
        if not np.all(np.isfinite(self.types)):
            raise ValueError("类型必须为有限实数")
        if np.any(np.diff(self.types) <= 0):
            raise ValueError("类型必须严格递增")
        if np.any(self.masses < 0):
            raise WeightSumError("质量必须非负")
        total = float(np.sum(self.masses))
        if abs(total - 1.0) > MASS_TOL:
            raise WeightSumError(f"质量之和为 {total:.15g}，应为 1")

    @property
    def K(self) -> int:
        return int(self.types.size)

    @property
    def mass_at_or_above(self) -> np.ndarray:
        """M[i] = Σ_{j≥i} m_j，长度 K+1，M[K] = 0。"""
        return np.concatenate([np.cumsum(self.masses[::-1])[::-1], [0.0]])

    def mean(self) -> float:
        return float(np.dot(self.masses, self.types))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"type": self.types, "mass": self.masses, "v": self.v_values, "dv": self.v_slopes})

    def to_csv(self, path: str | Path) -> Path:
        """列为 type, mass, v, dv；17 位有效数字保证读回后逐位一致。"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        return path

    @classmethod
    def from_csv(cls, path: str | Path, mode: ValueMode = ValueMode.STANDARD, label: Optional[str] = None) -> "DiscreteEconomy":
        df = pd.read_csv(path)
        missing = {"type", "mass"} - set(df.columns)
        if missing:
            raise ValueError(f"{path} 缺少列: {sorted(missing)}")
        df = df.sort_values("type", kind="mergesort")
        masses = df["mass"].to_numpy(dtype=float)
        total = float(masses.sum())
        if abs(total - 1.0) > IMPORT_MASS_TOL:
            raise WeightSumError(f"{path}: 质量之和为 {total:.15g}")
        if total != 1.0:
            log.debug(f"{path}: 质量之和 {total:.17g}，重新归一化")
            masses = masses / total
            masses[-1] = 1.0 - float(np.sum(masses[:-1]))
        k = len(df)
        v = df["v"].to_numpy(dtype=float) if "v" in df.columns else np.zeros(k)
        dv = df["dv"].to_numpy(dtype=float) if "dv" in df.columns else np.zeros(k)
        return cls(
            types=df["type"].to_numpy(dtype=float),
            masses=masses,
            v_values=v,
            v_slopes=dv,
            mode=mode,
            label=label or Path(path).stem,
        )


def discretize(dist: TypeDistribution, v: Optional[ValueFunction] = None, K: int = 200) -> DiscreteEconomy:
    """类型取分位数中点 τ = (i+0.5)/K，每个类型质量 1/K。"""
    if K < 2:
        raise ValueError(f"K 必须 ≥ 2，收到 {K}")
    v = v or zero()
    taus = (np.arange(K) + 0.5) / K
    types = np.asarray(dist.quantile(taus), dtype=float)
    masses = np.full(K, 1.0 / K)
    masses[-1] = 1.0 - float(np.sum(masses[:-1]))
    return DiscreteEconomy(
        types=types,
        masses=masses,
        v_values=v(types),
        v_slopes=v.slope(types),
        mode=v.mode,
        label=f"{dist.label}@K={K}",
    )
