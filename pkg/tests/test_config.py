from pathlib import Path

import pytest
from pydantic import ValidationError

from posgoods import config_loader
from posgoods.config_loader import (
    ROOT_ENV,
    AppConfig,
    RunConfig,
    _find_project_root,
    ensure_dirs,
    load_config,
    load_run_config,
    resolve_path,
)


def test_defaults_are_valid():
    cfg = AppConfig()
    assert cfg.project.name == "posgoods"
    assert cfg.verify.exhaustive_K <= cfg.oracle.exhaustive_max_types
    assert "uniform(0,1)" in cfg.ratio.dists


@pytest.mark.parametrize(
    "raw",
    [
        {"numerics": {"default_grid": 8}},
        {"verify": {"exhaustive_K": 50}},
        {"ratio": {"dists": ["uniform(0,x)"]}},
        {"numerics": {"ic_tol": 0.0}},
        {"logging": {"level": "LOUD"}},
    ],
)
def test_invalid_app_config(raw):
    with pytest.raises(ValidationError):
        AppConfig.model_validate(raw)


def test_load_config_from_file(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("numerics:\n  csv_points: 64\nlogging:\n  level: DEBUG\n", encoding="utf-8")
    cfg = load_config(str(path))
    assert cfg.numerics.csv_points == 64
    assert cfg.logging.level == "DEBUG"
    assert cfg.numerics.hull_grid == AppConfig().numerics.hull_grid


def test_load_config_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(str(tmp_path / "missing.yaml"))
    empty = tmp_path / "empty.yaml"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(ValueError):
        load_config(str(empty))
    bad = tmp_path / "bad.yaml"
    bad.write_text("numerics:\n  coarse_scan: 4\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_config(str(bad))


def test_run_config_layers(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("dist: exp(1)\nlambda: 2\nno-exclusion: true\nobjective: welfare\n", encoding="utf-8")
    run = load_run_config(str(path))
    assert run.dist == "exp(1)"
    assert run.lam == 2.0
    assert run.no_exclusion is True

    # 命令行覆盖文件，None 不覆盖
    run = load_run_config(str(path), {"lam": 3.0, "dist": None, "gamma": 0.25})
    assert run.lam == 3.0
    assert run.dist == "exp(1)"
    assert run.gamma == 0.25


def test_run_config_defaults_and_errors(tmp_path):
    run = load_run_config(None)
    assert run == RunConfig()
    assert run.objective == "revenue"
    with pytest.raises(ValueError):
        load_run_config(None, {"gamma": 1.5})
    with pytest.raises(ValueError):
        load_run_config(None, {"lam": -1.0})
    with pytest.raises(ValueError):
        load_run_config(None, {"grid": 4})
    with pytest.raises(FileNotFoundError):
        load_run_config(str(tmp_path / "nope.yaml"))
    listy = tmp_path / "list.yaml"
    listy.write_text("- a\n- b\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_run_config(str(listy))


def test_resolve_path(tmp_path, small_config):
    assert resolve_path(small_config, "outputs") == (tmp_path / "outputs").resolve()
    absolute = tmp_path / "elsewhere"
    assert resolve_path(small_config, str(absolute)) == absolute
    ensure_dirs(small_config)
    assert Path(tmp_path / "outputs").is_dir()


def test_find_project_root(tmp_path, monkeypatch):
    monkeypatch.delenv(ROOT_ENV, raising=False)
    monkeypatch.setattr(config_loader, "_PACKAGE_ROOT", tmp_path / "missing")
    proj = tmp_path / "proj"
    (proj / "config").mkdir(parents=True)
    (proj / "config" / "config.yaml").write_text("project:\n  name: posgoods\n", encoding="utf-8")
    (proj / "src" / "posgoods").mkdir(parents=True)
    nested = proj / "outputs" / "run1"
    nested.mkdir(parents=True)
    assert _find_project_root(nested) == proj.resolve()

    # 只有 config/config.yaml 不算项目根，找不到时回落到起点
    stray = tmp_path / "stray"
    (stray / "config").mkdir(parents=True)
    (stray / "config" / "config.yaml").write_text("{}\n", encoding="utf-8")
    assert _find_project_root(stray / "config") == (stray / "config").resolve()

    monkeypatch.setenv(ROOT_ENV, str(stray))
    assert _find_project_root(nested) == stray.resolve()
