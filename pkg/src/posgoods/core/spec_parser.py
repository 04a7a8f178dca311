from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

from ..errors import SpecParseError
from . import distributions as D
from . import value_function as V
from .distributions import TypeDistribution
from .value_function import ValueFunction, ValueMode

# 语法：
#   spec   := NAME [ "(" args ")" ] | NUMBER
#   args   := arg ("," arg)*
#   分布：   uniform(a,b) | exp(rate) | power(beta) | pareto(shape,scale)
#           | empirical(path.csv) | mix(a1,b1,a2,b2,...)
#   价值：   0 | const(c) | linear(v0,alpha) | poly(c0,c1,...) | sqrt(c)
#   φ：     identity | pow(a) | sqrt

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")


@dataclass(frozen=True)
class ParsedCall:
    name: str
    args: Tuple[str, ...]
    arg_columns: Tuple[int, ...]
    column: int
    line: int

    def number(self, i: int) -> float:
        raw = self.args[i]
        if not _NUMBER_RE.fullmatch(raw):
            raise SpecParseError(f"期望数值，得到 {raw!r}", self.line, self.arg_columns[i])
        return float(raw)

    def numbers(self) -> List[float]:
        return [self.number(i) for i in range(len(self.args))]

    def expect_arity(self, *allowed: int) -> None:
        if len(self.args) not in allowed:
            want = " 或 ".join(str(a) for a in allowed)
            raise SpecParseError(f"{self.name} 需要 {want} 个参数，得到 {len(self.args)}", self.line, self.column)


def parse_call(text: str, line: int = 1, raw_args: bool = False) -> ParsedCall:
    """
    解析单个 NAME(args) 形式；列号从 1 开始。
    raw_args=True 时括号内整体作为一个参数（用于文件路径）。
    """
    s = text
    pos = 0
    n = len(s)

    def skip_ws(p: int) -> int:
        while p < n and s[p].isspace():
            p += 1
        return p

    pos = skip_ws(pos)
    if pos >= n:
        raise SpecParseError("规格为空", line, 1)

    num = _NUMBER_RE.match(s, pos)
    if num and not _NAME_RE.match(s, pos):
        end = skip_ws(num.end())
        if end != n:
            raise SpecParseError(f"多余的字符 {s[end]!r}", line, end + 1)
        return ParsedCall("number", (num.group(0),), (pos + 1,), pos + 1, line)

    m = _NAME_RE.match(s, pos)
    if not m:
        raise SpecParseError(f"无法识别的字符 {s[pos]!r}", line, pos + 1)
    name, name_col = m.group(0), pos + 1
    pos = skip_ws(m.end())
    if pos >= n:
        return ParsedCall(name.lower(), (), (), name_col, line)
    if s[pos] != "(":
        raise SpecParseError(f"期望 '('，得到 {s[pos]!r}", line, pos + 1)
    close = s.rfind(")")
    if close < pos:
        raise SpecParseError("缺少 ')'", line, n + 1)
    tail = skip_ws(close + 1)
    if tail != n:
        raise SpecParseError(f"多余的字符 {s[tail]!r}", line, tail + 1)

    inner_start = pos + 1
    inner = s[inner_start:close]
    if raw_args:
        stripped = inner.strip()
        if not stripped:
            raise SpecParseError(f"{name} 缺少参数", line, inner_start + 1)
        col = inner_start + (len(inner) - len(inner.lstrip())) + 1
        return ParsedCall(name.lower(), (stripped,), (col,), name_col, line)

    args: List[str] = []
    cols: List[int] = []
    if inner.strip():
        offset = inner_start
        for piece in inner.split(","):
            lead = len(piece) - len(piece.lstrip())
            val = piece.strip()
            if not val:
                raise SpecParseError("空参数", line, offset + lead + 1)
            args.append(val)
            cols.append(offset + lead + 1)
            offset += len(piece) + 1
    return ParsedCall(name.lower(), tuple(args), tuple(cols), name_col, line)


def _guard(call: ParsedCall, fn, *a):
    try:
        return fn(*a)
    except ValueError as e:
        raise SpecParseError(str(e), call.line, call.column) from e


def parse_distribution(text: str, line: int = 1, base_dir: Optional[Path] = None) -> TypeDistribution:
    head = _NAME_RE.match(text.strip())
    raw = bool(head and head.group(0).lower() == "empirical")
    call = parse_call(text, line=line, raw_args=raw)

    if call.name == "uniform":
        call.expect_arity(0, 2)
        a, b = call.numbers() if call.args else (0.0, 1.0)
        return _guard(call, D.uniform, a, b)
    if call.name in ("exp", "exponential"):
        call.expect_arity(0, 1)
        rate = call.number(0) if call.args else 1.0
        return _guard(call, D.exponential, rate)
    if call.name == "power":
        call.expect_arity(1)
        return _guard(call, D.power, call.number(0))
    if call.name == "pareto":
        call.expect_arity(1, 2)
        nums = call.numbers()
        return _guard(call, D.pareto, nums[0], nums[1] if len(nums) > 1 else 1.0)
    if call.name == "mix":
        nums = call.numbers()
        if len(nums) < 2 or len(nums) % 2:
            raise SpecParseError("mix 需要成对的 (a,b) 参数", call.line, call.column)
        pairs = list(zip(nums[0::2], nums[1::2]))
        return _guard(call, D.uniform_mixture, pairs)
    if call.name == "empirical":
        path = Path(call.args[0])
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        try:
            return D.empirical_from_csv(path)
        except FileNotFoundError as e:
            raise SpecParseError(str(e), call.line, call.arg_columns[0]) from e
        except ValueError as e:
            raise SpecParseError(f"样本文件无效: {e}", call.line, call.arg_columns[0]) from e
    raise SpecParseError(f"未知分布 {call.name!r}", call.line, call.column)


def parse_value(text: str, suffering: bool = False, line: int = 1) -> ValueFunction:
    call = parse_call(text, line=line)
    mode = ValueMode.SUFFERING if suffering else ValueMode.STANDARD

    if call.name == "number":
        c = call.number(0)
        return V.polynomial([c], mode=mode, label=f"{c:g}")
    if call.name == "const":
        call.expect_arity(1)
        return V.polynomial([call.number(0)], mode=mode, label=f"const({call.number(0):g})")
    if call.name == "linear":
        call.expect_arity(2)
        v0, alpha = call.numbers()
        return V.linear(v0, alpha, mode=mode)
    if call.name == "poly":
        if not call.args:
            raise SpecParseError("poly 至少需要一个系数", call.line, call.column)
        return V.polynomial(call.numbers(), mode=mode)
    if call.name == "sqrt":
        call.expect_arity(1)
        if suffering:
            raise SpecParseError("sqrt 价值函数不满足 suffering 模式", call.line, call.column)
        return _guard(call, V.sqrt_shift, call.number(0))
    raise SpecParseError(f"未知价值函数 {call.name!r}", call.line, call.column)


def parse_phi(text: str, line: int = 1):
    from ..extensions.phi_status import identity_phi, power_phi, sqrt_phi

    call = parse_call(text, line=line)
    if call.name == "identity":
        return identity_phi()
    if call.name == "sqrt":
        call.expect_arity(0)
        return sqrt_phi()
    if call.name == "pow":
        call.expect_arity(1)
        return _guard(call, power_phi, call.number(0))
    raise SpecParseError(f"未知 φ 变换 {call.name!r}", call.line, call.column)
