from __future__ import annotations

from typing import Optional


class PosGoodsError(Exception):
    """所有业务异常的基类。"""


class SpecParseError(PosGoodsError):
    """分布 / 价值函数 / φ 的文本规格解析失败。"""

    def __init__(self, message: str, line: int = 1, column: int = 1, text: Optional[str] = None):
        self.line = line
        self.column = column
        self.text = text
        super().__init__(f"{message} (line {line}, column {column})")


class UndefinedDensityError(PosGoodsError):
    pass


class InfeasibleAllocationError(PosGoodsError):
    pass


class InapplicableConditionError(PosGoodsError):
    """求解器的前提条件（IFR/DFR/正则性等）不满足。"""


class CountervailingRegimeError(InapplicableConditionError):
    pass


class EmptyIntervalError(PosGoodsError):
    pass


class WeightSumError(PosGoodsError):
    pass


class NonMonotoneError(PosGoodsError):
    pass


class BoundTooSmallError(PosGoodsError):
    pass


class ModeError(PosGoodsError):
    pass


class UnboundedSupportError(PosGoodsError):
    pass


class NonConvexCostError(PosGoodsError):
    pass


class SizeGuardError(PosGoodsError):
    pass
