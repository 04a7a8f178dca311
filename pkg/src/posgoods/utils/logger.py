from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Optional

from rich.console import Console
from rich.logging import RichHandler


_console: Optional[Console] = None

# 求解器的逐步日志写文件时使用的格式
FILE_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"


def get_console() -> Console:
    """表格等结果输出用的共享 console（stdout）。"""
    global _console
    if _console is None:
        _console = Console()
    return _console


def setup_logging(level: str = "INFO", log_file: Optional[str | Path] = None) -> None:
    """
    Rich 日志走 stderr，和 stdout 上的结果表格分开。
    log_file 给出时另写一份纯文本日志，级别不低于 DEBUG 的求解细节都会落盘。
    """
    lvl = getattr(logging, level.upper(), logging.INFO)
    handlers: List[logging.Handler] = [
        RichHandler(console=Console(stderr=True), rich_tracebacks=True, markup=False, show_path=False, level=lvl)
    ]
    if log_file is not None:
        path = Path(log_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        fh = logging.FileHandler(path, encoding="utf-8")
        fh.setLevel(logging.DEBUG)
        fh.setFormatter(logging.Formatter(FILE_FORMAT))
        handlers.append(fh)
    logging.basicConfig(
        level=logging.DEBUG if log_file is not None else lvl,
        format="%(message)s",
        datefmt="[%X]",
        handlers=handlers,
        force=True,
    )


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)
