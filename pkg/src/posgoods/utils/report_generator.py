from __future__ import annotations

import io
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from ..config_loader import AppConfig, resolve_path
from ..ironing.hull import IroningResult
from ..ironing.ironing import export_hull_csv
from ..mechanisms.mechanism import Mechanism
from .json_utils import to_pretty_json
from .logger import get_logger


log = get_logger(__name__)

FLOAT_FORMAT = "%.12g"


def quantile_midpoints(mech: Mechanism, points: int) -> np.ndarray:
    """θᵢ = F^{-1}((i+0.5)/N)，等权。"""
    taus = (np.arange(points) + 0.5) / points
    return np.asarray(mech.dist.quantile(taus), dtype=float)


def frame_to_csv_text(df: pd.DataFrame) -> str:
    buf = io.StringIO()
    df.to_csv(buf, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return buf.getvalue()


def grid_check_from_frame(df: pd.DataFrame) -> Dict[str, float]:
    """等权网格上的平均付款与平均效用。"""
    return {
        "points": int(len(df)),
        "mean_payment": float(np.mean(df["p"].to_numpy(dtype=float))),
        "mean_utility": float(np.mean(df["U"].to_numpy(dtype=float))),
    }


def grid_check_from_csv(path: str | Path) -> Dict[str, float]:
    return grid_check_from_frame(pd.read_csv(path))


class ReportGenerator:
    """把一次运行的结果写到输出目录：report.json / mechanism.csv / hull.csv / ratio.csv / verify.json。"""

    def __init__(self, config: AppConfig, out_dir: Optional[str] = None):
        self.config = config
        self.out_dir = resolve_path(config, out_dir or config.paths.outputs_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def write_json(self, name: str, payload: Any) -> Path:
        path = self.out_dir / name
        path.write_text(to_pretty_json(payload) + "\n", encoding="utf-8")
        log.info(f"已写入 {path}")
        return path

    def write_mechanism_csv(self, mech: Mechanism, points: Optional[int] = None) -> Dict[str, Any]:
        """
        (θ, s, p, U) 写在分位数中点网格上。grid_check 由写出的文本重新解析后计算，
        因此从 CSV 读回即可逐位复现。
        """
        n = points or self.config.numerics.csv_points
        text = frame_to_csv_text(mech.to_frame(quantile_midpoints(mech, n)))
        path = self.out_dir / "mechanism.csv"
        path.write_text(text, encoding="utf-8", newline="")
        check = grid_check_from_frame(pd.read_csv(io.StringIO(text)))
        log.info(f"已写入 {path}（{n} 行）")
        return {"path": str(path), "grid_check": check}

    def write_hull_csv(self, hull: IroningResult) -> Path:
        path = export_hull_csv(hull, self.out_dir / "hull.csv")
        log.info(f"已写入 {path}")
        return path

    def write_ratio_table(self, rows: List[Dict[str, Any]], name: str = "ratio.csv") -> Path:
        path = self.out_dir / name
        text = frame_to_csv_text(pd.DataFrame(rows))
        path.write_text(text, encoding="utf-8", newline="")
        log.info(f"已写入 {path}（{len(rows)} 行）")
        return path
