from __future__ import annotations

import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, model_validator

from .utils import numeric


# -----------------------------
# Pydantic 配置模型
# -----------------------------

class ProjectConfig(BaseModel):
    name: str = "posgoods"
    root_path: str = "."


class PathsConfig(BaseModel):
    outputs_dir: str = "outputs"


class NumericsConfig(BaseModel):
    # 分类 / 可行性检查的网格点数
    default_grid: int = numeric.DEFAULT_GRID
    # 熨平使用的分位数网格（--grid 覆盖）
    hull_grid: int = numeric.HULL_GRID
    # 标量搜索的粗扫描点数
    coarse_scan: int = numeric.COARSE_SCAN
    feasibility_tol: float = 1e-7
    ic_tol: float = 1e-7
    # mechanism.csv 的行数（分位数中点网格）
    csv_points: int = 1000


class OracleConfig(BaseModel):
    exhaustive_max_types: int = 40
    exhaustive_max_combinations: int = 2_000_000
    default_K: int = 2000
    max_levels: int = 12


class VerifyConfig(BaseModel):
    # 半收入保证与可行性检查使用的分布组
    battery: List[str] = Field(default_factory=lambda: [
        "uniform(0,1)", "uniform(1,2)", "exp(1)", "exp(2)",
        "power(0.25)", "power(0.5)", "power(2)", "power(4)",
        "pareto(2,1)", "pareto(3,1)", "mix(0,1,2,3)", "mix(0,1,4,5)",
    ])
    # 与离散 oracle 逐一比对的分布
    oracle_dists: List[str] = Field(default_factory=lambda: ["uniform(0,1)", "exp(1)", "power(0.5)", "power(2)"])
    ic_K: int = 500
    oracle_K: int = 2000
    exhaustive_K: int = 40
    exhaustive_levels: int = 4
    chain_steps: int = 20
    chains: int = 5
    menus: int = 200
    seed: int = 0
    oracle_tol: float = 2e-3
    exhaustive_tol: float = 1e-2
    fault_shift: float = 0.05


class RatioConfig(BaseModel):
    dists: List[str] = Field(default_factory=lambda: [
        "uniform(0,1)", "exp(1)", "power(0.25)", "power(0.5)", "power(1)", "power(2)", "power(4)",
    ])


class LoggingConfig(BaseModel):
    level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"
    # 纯文本日志文件（相对项目根），为空则只输出到终端
    file: Optional[str] = None


class AppConfig(BaseModel):
    project: ProjectConfig = Field(default_factory=ProjectConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)
    numerics: NumericsConfig = Field(default_factory=NumericsConfig)
    oracle: OracleConfig = Field(default_factory=OracleConfig)
    verify: VerifyConfig = Field(default_factory=VerifyConfig)
    ratio: RatioConfig = Field(default_factory=RatioConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)

    @model_validator(mode="after")
    def _validate_cross_fields(self):
        n = self.numerics
        for name in ("default_grid", "hull_grid", "coarse_scan", "csv_points"):
            if getattr(n, name) < 16:
                raise ValueError(f"numerics.{name} 必须 ≥ 16，收到 {getattr(n, name)}")
        for name in ("feasibility_tol", "ic_tol"):
            if not getattr(n, name) > 0:
                raise ValueError(f"numerics.{name} 必须为正")
        if not (self.verify.oracle_tol > 0 and self.verify.exhaustive_tol > 0):
            raise ValueError("verify 的容差必须为正")
        if self.verify.exhaustive_K > self.oracle.exhaustive_max_types:
            raise ValueError(
                f"verify.exhaustive_K={self.verify.exhaustive_K} 超过 oracle.exhaustive_max_types={self.oracle.exhaustive_max_types}"
            )

        # 分布规格必须可解析
        from .core.spec_parser import parse_distribution
        from .errors import SpecParseError

        for where, specs in (("verify.battery", self.verify.battery), ("verify.oracle_dists", self.verify.oracle_dists), ("ratio.dists", self.ratio.dists)):
            for spec in specs:
                try:
                    parse_distribution(spec)
                except SpecParseError as e:
                    raise ValueError(f"{where} 中的分布 {spec!r} 无法解析: {e}") from e
        return self


class RunConfig(BaseModel):
    """
    一次 CLI 运行的参数。层次：模型默认值 ← --config 运行文件 ← 命令行参数。
    键名与命令行参数一致（连字符换成下划线）。
    """

    dist: str = "uniform(0,1)"
    value: str = "0"
    objective: Literal["revenue", "cs", "welfare"] = "revenue"
    lam: float = Field(default=1.0, alias="lambda")
    no_exclusion: bool = False
    nonneg_prices: bool = False
    gamma: float = 0.5
    phi: Optional[str] = None
    suffering: bool = False
    neg_status: Optional[float] = None
    grid: Optional[int] = None
    out: str = "outputs"
    dists: Optional[List[str]] = None
    inject_fault: bool = False
    tol: Optional[float] = None

    model_config = {"populate_by_name": True}

    @model_validator(mode="after")
    def _validate_run(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma 必须在 [0,1]，收到 {self.gamma}")
        if self.lam < 0:
            raise ValueError(f"lambda 必须非负，收到 {self.lam}")
        if self.grid is not None and self.grid < 16:
            raise ValueError(f"grid 必须 ≥ 16，收到 {self.grid}")
        if self.tol is not None and not self.tol > 0:
            raise ValueError("tol 必须为正")
        if self.neg_status is not None and self.neg_status < 0:
            raise ValueError("neg_status 的下界 M 必须非负")
        return self


# -----------------------------
# 加载配置
# -----------------------------

ROOT_ENV = "POSGOODS_ROOT"
_PACKAGE_ROOT = Path(__file__).resolve().parents[2]


def _is_project_root(path: Path) -> bool:
    return (path / "config" / "config.yaml").is_file() and (path / "src" / "posgoods").is_dir()


def _find_project_root(start: Optional[Path] = None) -> Path:
    """
    项目根：POSGOODS_ROOT 环境变量 > 从 start（缺省 cwd）向上第一个同时含
    config/config.yaml 与 src/posgoods 的目录 > 本包所在的源码目录 > start。
    """
    env_root = os.environ.get(ROOT_ENV)
    if env_root:
        return Path(env_root).expanduser().resolve()
    start = (start or Path.cwd()).resolve()
    for cur in (start, *start.parents):
        if _is_project_root(cur):
            return cur
    if _is_project_root(_PACKAGE_ROOT):
        return _PACKAGE_ROOT
    return start


def load_config(config_path: Optional[str] = None, env_path: Optional[str] = None) -> AppConfig:
    """
    加载 config/config.yaml 并结合 .env 环境变量。
    - config_path: 默认自动寻找项目根下的 config/config.yaml；找不到时使用模型默认值
    - env_path: 默认自动寻找项目根下的 .env
    """
    project_root = _find_project_root()

    if env_path:
        load_dotenv(env_path)
    else:
        env_file = project_root / ".env"
        if env_file.exists():
            load_dotenv(env_file)

    if config_path:
        cfg_file = Path(config_path).expanduser().resolve()
        if not cfg_file.exists():
            raise FileNotFoundError(f"找不到配置文件: {cfg_file}")
    else:
        cfg_file = project_root / "config" / "config.yaml"

    if cfg_file.exists():
        raw = yaml.safe_load(cfg_file.read_text(encoding="utf-8"))
        if raw is None:
            raise ValueError(f"配置文件为空: {cfg_file}")
    else:
        raw = {}

    raw.setdefault("project", {})
    raw["project"].setdefault("root_path", str(project_root))

    try:
        config = AppConfig.model_validate(raw)
    except ValidationError as e:
        raise ValueError(f"配置校验失败: {e}") from e

    return config


def load_run_config(path: Optional[str], overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """读取 --config 运行文件（YAML），再用命令行中显式给出的参数覆盖。"""
    raw: Dict[str, Any] = {}
    if path:
        p = Path(path).expanduser()
        if not p.exists():
            raise FileNotFoundError(f"找不到运行配置: {p}")
        raw = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
        if not isinstance(raw, dict):
            raise ValueError(f"运行配置必须是映射: {p}")
        raw = {str(k).replace("-", "_"): v for k, v in raw.items()}
        if "lam" in raw and "lambda" not in raw:
            raw["lambda"] = raw.pop("lam")
    for k, v in (overrides or {}).items():
        if v is not None:
            raw["lambda" if k == "lam" else k] = v
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ValueError(f"运行配置校验失败: {e}") from e


def resolve_path(config: AppConfig, path_str: str) -> Path:
    """把 config 中的相对路径解析为绝对路径。"""
    root = Path(config.project.root_path).expanduser().resolve()
    p = Path(path_str)
    return p if p.is_absolute() else (root / p).resolve()


def ensure_dirs(config: AppConfig) -> None:
    """确保输出目录存在。"""
    resolve_path(config, config.paths.outputs_dir).mkdir(parents=True, exist_ok=True)
