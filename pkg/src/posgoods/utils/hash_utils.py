from __future__ import annotations

import hashlib
import json
from typing import Any

from pydantic import BaseModel


def sha256_json(obj: Any) -> str:
    """对可 JSON 化对象做稳定哈希；键排序，非 JSON 类型按 str 处理。"""
    dumped = json.dumps(obj, ensure_ascii=False, sort_keys=True, default=str)
    return hashlib.sha256(dumped.encode("utf-8")).hexdigest()


def config_fingerprint(config: BaseModel, short: int = 0) -> str:
    """report.json / verify.json 中的配置指纹。short > 0 时截取前 short 位。"""
    digest = sha256_json(config.model_dump(mode="json"))
    return digest[:short] if short > 0 else digest
