"""
整系数稀疏多元多项式
提供求值、代换、齐次化、切片、梯度、容量(content)、高度与模 p 约化，
以及文本语法和 JSON 两种序列化形式
"""

import json
import logging
import math
import re
from dataclasses import dataclass
from functools import reduce
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.errors import (
    ArityMismatchError,
    DegreeError,
    PolynomialParseError,
    ZeroPolynomialError,
)

logger = logging.getLogger(__name__)

Monomial = Tuple[int, ...]
LatticePoint = Tuple[int, ...]

# 零多项式的次数
ZERO_DEGREE = float("-inf")

# int64 快速路径允许的最大中间值
INT64_SAFE_BOUND = 2 ** 62


def _graded_lex_key(item: Tuple[Monomial, int]) -> Tuple[int, Monomial]:
    exponents = item[0]
    return (sum(exponents), exponents)


@dataclass(frozen=True)
class IntPolynomial:
    """
    稀疏整系数多项式，创建后不可变

    terms 按分次字典序降序存放 (单项式指数, 系数)，不保存零系数，
    因此相等的多项式具有完全相同的表示
    """

    arity: int
    terms: Tuple[Tuple[Monomial, int], ...] = ()

    def __post_init__(self):
        if self.arity < 1:
            raise ArityMismatchError(f"多项式元数必须为正: {self.arity}")
        merged: Dict[Monomial, int] = {}
        for exponents, coeff in self.terms:
            exponents = tuple(int(e) for e in exponents)
            if len(exponents) != self.arity:
                raise ArityMismatchError(
                    f"单项式 {exponents} 的长度与元数 {self.arity} 不一致"
                )
            if any(e < 0 for e in exponents):
                raise DegreeError(f"指数必须非负: {exponents}")
            merged[exponents] = merged.get(exponents, 0) + int(coeff)
        canonical = tuple(
            sorted(
                ((e, c) for e, c in merged.items() if c != 0),
                key=_graded_lex_key,
                reverse=True,
            )
        )
        object.__setattr__(self, "terms", canonical)

    # ---------- 构造 ----------

    @classmethod
    def from_dict(cls, arity: int, mapping: Mapping[Monomial, int]) -> "IntPolynomial":
        return cls(arity, tuple(mapping.items()))

    @classmethod
    def zero(cls, arity: int) -> "IntPolynomial":
        return cls(arity)

    @classmethod
    def constant(cls, arity: int, value: int) -> "IntPolynomial":
        return cls(arity, (((0,) * arity, int(value)),))

    @classmethod
    def variable(cls, arity: int, index: int) -> "IntPolynomial":
        if not 0 <= index < arity:
            raise ArityMismatchError(f"变量下标 {index} 超出元数 {arity}")
        exponents = tuple(1 if i == index else 0 for i in range(arity))
        return cls(arity, ((exponents, 1),))

    @classmethod
    def linear(
        cls, arity: int, coefficients: Sequence[int], constant: int = 0
    ) -> "IntPolynomial":
        """构造线性多项式 Σ c_i X_i + constant"""
        if len(coefficients) != arity:
            raise ArityMismatchError("线性形式的系数个数与元数不一致")
        terms = [
            (tuple(1 if j == i else 0 for j in range(arity)), int(c))
            for i, c in enumerate(coefficients)
        ]
        terms.append(((0,) * arity, int(constant)))
        return cls(arity, tuple(terms))

    # ---------- 基本属性 ----------

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> Union[int, float]:
        if not self.terms:
            return ZERO_DEGREE
        return sum(self.terms[0][0])

    @property
    def leading_coefficient(self) -> int:
        if not self.terms:
            raise ZeroPolynomialError("零多项式没有首项系数")
        return self.terms[0][1]

    @property
    def is_homogeneous(self) -> bool:
        return len({sum(e) for e, _ in self.terms}) <= 1

    @property
    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e, _ in self.terms)

    def coefficient_map(self) -> Dict[Monomial, int]:
        return dict(self.terms)

    def variables_used(self) -> Tuple[int, ...]:
        used = set()
        for exponents, _ in self.terms:
            used.update(i for i, e in enumerate(exponents) if e)
        return tuple(sorted(used))

    def degree_in(self, index: int) -> int:
        return max((e[index] for e, _ in self.terms), default=0)

    def __str__(self) -> str:
        return self.to_text()

    # ---------- 算术 ----------

    def _check_arity(self, other: "IntPolynomial"):
        if other.arity != self.arity:
            raise ArityMismatchError(f"元数不一致: {self.arity} 与 {other.arity}")

    def _coerce(self, other: Any) -> "IntPolynomial":
        if isinstance(other, IntPolynomial):
            self._check_arity(other)
            return other
        if isinstance(other, (int, np.integer)):
            return IntPolynomial.constant(self.arity, int(other))
        return NotImplemented

    def __add__(self, other: Any) -> "IntPolynomial":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return IntPolynomial(self.arity, self.terms + other.terms)

    __radd__ = __add__

    def __neg__(self) -> "IntPolynomial":
        return IntPolynomial(self.arity, tuple((e, -c) for e, c in self.terms))

    def __sub__(self, other: Any) -> "IntPolynomial":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other: Any) -> "IntPolynomial":
        return (-self) + other

    def __mul__(self, other: Any) -> "IntPolynomial":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        product: Dict[Monomial, int] = {}
        for e1, c1 in self.terms:
            for e2, c2 in other.terms:
                key = tuple(a + b for a, b in zip(e1, e2))
                product[key] = product.get(key, 0) + c1 * c2
        return IntPolynomial.from_dict(self.arity, product)

    __rmul__ = __mul__

    def __pow__(self, exponent: int) -> "IntPolynomial":
        if exponent < 0:
            raise DegreeError("不支持负指数")
        result = IntPolynomial.constant(self.arity, 1)
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    # ---------- 求值 ----------

    def evaluate(self, point: Sequence[int]) -> int:
        """精确求值（任意精度整数）"""
        if len(point) != self.arity:
            raise ArityMismatchError(
                f"点的维数 {len(point)} 与多项式元数 {self.arity} 不一致"
            )
        values = [int(v) for v in point]
        total = 0
        for exponents, coeff in self.terms:
            term = coeff
            for v, e in zip(values, exponents):
                if e:
                    term *= v ** e
            total += term
        return total

    def evaluate_mod(self, point: Sequence[int], prime: int) -> int:
        if len(point) != self.arity:
            raise ArityMismatchError("点的维数与多项式元数不一致")
        total = 0
        for exponents, coeff in self.terms:
            term = coeff % prime
            for v, e in zip(point, exponents):
                if e:
                    term = term * pow(int(v), e, prime) % prime
            total += term
        return total % prime

    def magnitude_bound(self, box: int) -> int:
        """|p(x)| 在 |x| ≤ box 上的上界 Σ|c|·box^deg(term)"""
        return sum(abs(c) * box ** sum(e) for e, c in self.terms)

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        """
        批量求值

        当系数和坐标的上界保证不溢出时走 int64 快速路径，
        否则自动转为 Python 整数（object 数组）计算
        """
        points = np.asarray(points)
        if points.ndim != 2 or points.shape[1] != self.arity:
            raise ArityMismatchError("点阵形状与多项式元数不一致")
        if points.shape[0] == 0:
            return np.zeros(0, dtype=np.int64)
        box = int(np.abs(points).max()) if points.dtype != object else max(
            abs(int(v)) for v in points.ravel()
        )
        if self.magnitude_bound(box) < INT64_SAFE_BOUND:
            columns = points.astype(np.int64)
            dtype: Any = np.int64
        else:
            columns = points.astype(object)
            dtype = object
        result = np.zeros(points.shape[0], dtype=dtype)
        cache: Dict[Tuple[int, int], np.ndarray] = {}
        for exponents, coeff in self.terms:
            term = np.full(points.shape[0], coeff, dtype=dtype)
            for i, e in enumerate(exponents):
                if e:
                    key = (i, e)
                    if key not in cache:
                        cache[key] = columns[:, i] ** e
                    term = term * cache[key]
            result = result + term
        return result

    def evaluate_mod_many(self, points: np.ndarray, prime: int) -> np.ndarray:
        """在 F_p 上批量求值，points 的分量须已约化到 [0, p)"""
        points = np.asarray(points, dtype=np.int64)
        if points.ndim != 2 or points.shape[1] != self.arity:
            raise ArityMismatchError("点阵形状与多项式元数不一致")
        result = np.zeros(points.shape[0], dtype=np.int64)
        powers: Dict[Tuple[int, int], np.ndarray] = {}
        for exponents, coeff in self.terms:
            term = np.full(points.shape[0], coeff % prime, dtype=np.int64)
            for i, e in enumerate(exponents):
                if not e:
                    continue
                key = (i, e)
                if key not in powers:
                    acc = np.ones(points.shape[0], dtype=np.int64)
                    for _ in range(e):
                        acc = acc * points[:, i] % prime
                    powers[key] = acc
                term = term * powers[key] % prime
            result = (result + term) % prime
        return result

    # ---------- 代换与变形 ----------

    def homogenize(self, delta: Optional[int] = None) -> "IntPolynomial":
        """X_0^δ f(X_1/X_0, …)，新变量 X_0 放在最前"""
        if delta is None:
            delta = 0 if self.is_zero else int(self.degree)
        if not self.is_zero and delta < self.degree:
            raise DegreeError(f"齐次化次数 {delta} 小于多项式次数 {self.degree}")
        return IntPolynomial(
            self.arity + 1,
            tuple(((delta - sum(e),) + e, c) for e, c in self.terms),
        )

    def slice(self, var_index: int, value: int) -> "IntPolynomial":
        """把第 var_index 个变量代换为常数，元数减一"""
        if not 0 <= var_index < self.arity:
            raise ArityMismatchError(f"变量下标 {var_index} 超出元数 {self.arity}")
        if self.arity == 1:
            raise ArityMismatchError("一元多项式切片后没有剩余变量，请使用 evaluate")
        value = int(value)
        sliced: Dict[Monomial, int] = {}
        for exponents, coeff in self.terms:
            e = exponents[var_index]
            key = exponents[:var_index] + exponents[var_index + 1:]
            sliced[key] = sliced.get(key, 0) + coeff * value ** e
        return IntPolynomial.from_dict(self.arity - 1, sliced)

    def substitute(self, images: Sequence["IntPolynomial"]) -> "IntPolynomial":
        """把第 i 个变量替换为 images[i]（所有像具有相同元数）"""
        if len(images) != self.arity:
            raise ArityMismatchError("代换像的个数与元数不一致")
        target = images[0].arity
        for image in images:
            if image.arity != target:
                raise ArityMismatchError("代换像的元数不一致")
        power_cache: Dict[Tuple[int, int], IntPolynomial] = {}

        def power(i: int, e: int) -> IntPolynomial:
            if (i, e) not in power_cache:
                power_cache[(i, e)] = images[i] ** e
            return power_cache[(i, e)]

        result = IntPolynomial.zero(target)
        for exponents, coeff in self.terms:
            term = IntPolynomial.constant(target, coeff)
            for i, e in enumerate(exponents):
                if e:
                    term = term * power(i, e)
            result = result + term
        return result

    def transform(
        self, matrix: Sequence[Sequence[int]], shift: Optional[Sequence[int]] = None
    ) -> "IntPolynomial":
        """代换 T = M·S + shift，返回关于 S 的多项式"""
        size = len(matrix[0])
        if len(matrix) != self.arity:
            raise ArityMismatchError("变换矩阵行数与元数不一致")
        shift = shift or [0] * self.arity
        images = [
            IntPolynomial.linear(size, list(row), shift[j]) for j, row in enumerate(matrix)
        ]
        return self.substitute(images)

    def derivative(self, index: int) -> "IntPolynomial":
        if not 0 <= index < self.arity:
            raise ArityMismatchError(f"变量下标 {index} 超出元数 {self.arity}")
        derived: Dict[Monomial, int] = {}
        for exponents, coeff in self.terms:
            e = exponents[index]
            if e:
                key = exponents[:index] + (e - 1,) + exponents[index + 1:]
                derived[key] = derived.get(key, 0) + coeff * e
        return IntPolynomial.from_dict(self.arity, derived)

    def gradient(self) -> Tuple["IntPolynomial", ...]:
        return tuple(self.derivative(i) for i in range(self.arity))

    def univariate_coefficients(self, index: int) -> List["IntPolynomial"]:
        """
        把多项式看作第 index 个变量的一元多项式，
        返回各次幂的系数（关于其余变量的多项式，低次在前）
        """
        if self.arity == 1:
            raise ArityMismatchError("一元多项式请直接使用 dense_coefficients")
        buckets: Dict[int, Dict[Monomial, int]] = {}
        for exponents, coeff in self.terms:
            e = exponents[index]
            key = exponents[:index] + exponents[index + 1:]
            bucket = buckets.setdefault(e, {})
            bucket[key] = bucket.get(key, 0) + coeff
        top = max(buckets, default=-1)
        return [
            IntPolynomial.from_dict(self.arity - 1, buckets.get(k, {}))
            for k in range(top + 1)
        ]

    def dense_coefficients(self) -> List[int]:
        """一元多项式的稠密系数表（低次在前）"""
        if self.arity != 1:
            raise ArityMismatchError("dense_coefficients 只适用于一元多项式")
        if self.is_zero:
            return []
        coeffs = [0] * (int(self.degree) + 1)
        for (e,), c in self.terms:
            coeffs[e] = c
        return coeffs

    # ---------- 数论量 ----------

    def content(self) -> int:
        if self.is_zero:
            raise ZeroPolynomialError("零多项式的容量无定义")
        return reduce(math.gcd, (abs(c) for _, c in self.terms))

    def primitive_part(self) -> "IntPolynomial":
        """除以容量；首项系数保持原符号"""
        g = self.content()
        return IntPolynomial(self.arity, tuple((e, c // g) for e, c in self.terms))

    def height(self) -> int:
        """系数最大模 ‖F‖"""
        if self.is_zero:
            raise ZeroPolynomialError("零多项式的高度无定义")
        return max(abs(c) for _, c in self.terms)

    def reduce_mod_p(self, prime: int) -> "IntPolynomial":
        if prime < 2:
            raise ValueError(f"模数必须不小于 2: {prime}")
        reduced = IntPolynomial(self.arity, tuple((e, c % prime) for e, c in self.terms))
        if reduced.is_zero and not self.is_zero:
            logger.debug(f"多项式模 {prime} 后恒为零")
        return reduced

    # ---------- 序列化 ----------

    def to_text(self, style: str = "x") -> str:
        """
        规范文本形式，例如 x0^4 + x1^4 - x2^4 - x3^4

        style='x' 使用 x0..x9，style='t' 使用 t1..t9
        """
        if style not in ("x", "t"):
            raise ValueError(f"未知变量风格: {style}")
        if self.is_zero:
            return "0"
        offset = 0 if style == "x" else 1
        pieces = []
        for position, (exponents, coeff) in enumerate(self.terms):
            factors = []
            for i, e in enumerate(exponents):
                if e == 1:
                    factors.append(f"{style}{i + offset}")
                elif e > 1:
                    factors.append(f"{style}{i + offset}^{e}")
            magnitude = abs(coeff)
            if not factors:
                body = str(magnitude)
            elif magnitude == 1:
                body = "*".join(factors)
            else:
                body = "*".join([str(magnitude)] + factors)
            if position == 0:
                pieces.append(("-" if coeff < 0 else "") + body)
            else:
                pieces.append(("- " if coeff < 0 else "+ ") + body)
        return " ".join(pieces)

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            "arity": self.arity,
            "terms": [{"e": list(e), "c": str(c)} for e, c in self.terms],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def polynomial_from_json(payload: Union[str, Mapping[str, Any]]) -> IntPolynomial:
    data = json.loads(payload) if isinstance(payload, str) else payload
    try:
        arity = int(data["arity"])
        terms = tuple((tuple(t["e"]), int(t["c"])) for t in data["terms"])
    except (KeyError, TypeError, ValueError) as e:
        raise PolynomialParseError(f"JSON 多项式格式错误: {e}") from e
    return IntPolynomial(arity, terms)


_TOKEN = re.compile(
    r"\s*(?:(?P<int>\d+)|(?P<var>[xXtT])(?P<idx>\d+)|(?P<pow>\^|\*\*)|(?P<mul>\*)"
    r"|(?P<sign>[+-]))"
)


def _tokenize(text: str) -> List[Tuple[str, str, int]]:
    tokens = []
    position = 0
    while position < len(text):
        if text[position:].strip() == "":
            break
        match = _TOKEN.match(text, position)
        if not match:
            stripped = len(text[position:]) - len(text[position:].lstrip())
            raise PolynomialParseError("无法识别的字符", text, position + stripped)
        kind = "var" if match.group("var") else match.lastgroup
        start = match.start(kind)
        if kind == "var":
            tokens.append(("var", match.group("var").lower() + match.group("idx"), start))
        else:
            tokens.append((kind, match.group(kind), start))
        position = match.end()
    return tokens


def parse_polynomial(text: str, arity: Optional[int] = None) -> IntPolynomial:
    """
    解析文本多项式

    语法: 变量 x0..x9 或 t1..t9，整数系数，^ 表示幂，* 可省略，
    例如 "x0^4 + x1^4 - x2^4 - x3^4" 或 "t1^3 + t2 t3 - 1"
    """
    tokens = _tokenize(text)
    if not tokens:
        raise PolynomialParseError("空的多项式文本", text, 0)
    style: Optional[str] = None
    raw_terms: List[Tuple[Dict[int, int], int]] = []
    i = 0
    expect_term = True
    sign = 1
    while i < len(tokens):
        kind, value, pos = tokens[i]
        if kind == "sign":
            expect_term = True
            sign = sign * (-1 if value == "-" else 1)
            i += 1
            continue
        if not expect_term:
            raise PolynomialParseError("缺少 + 或 -", text, pos)
        coeff = sign
        powers: Dict[int, int] = {}
        saw_factor = False
        while i < len(tokens) and tokens[i][0] in ("int", "var", "mul"):
            kind, value, pos = tokens[i]
            if kind == "mul":
                if not saw_factor:
                    raise PolynomialParseError("乘号前缺少因子", text, pos)
                i += 1
                if i >= len(tokens) or tokens[i][0] not in ("int", "var"):
                    raise PolynomialParseError("乘号后缺少因子", text, pos)
                continue
            i += 1
            exponent = 1
            if i < len(tokens) and tokens[i][0] == "pow":
                if i + 1 >= len(tokens) or tokens[i + 1][0] != "int":
                    raise PolynomialParseError("幂次必须是非负整数", text, tokens[i][2])
                exponent = int(tokens[i + 1][1])
                i += 2
            if kind == "int":
                coeff *= int(value) ** exponent
            else:
                letter, index = value[0], int(value[1:])
                if style is None:
                    style = letter
                elif style != letter:
                    raise PolynomialParseError("不能混用 x 与 t 变量", text, pos)
                if letter == "t":
                    if index < 1:
                        raise PolynomialParseError("t 变量从 t1 开始编号", text, pos)
                    index -= 1
                powers[index] = powers.get(index, 0) + exponent
            saw_factor = True
        if not saw_factor:
            raise PolynomialParseError("缺少项", text, pos)
        raw_terms.append((powers, coeff))
        sign = 1
        expect_term = False
    if expect_term:
        raise PolynomialParseError("表达式以运算符结尾", text, len(text))
    needed = max((max(p, default=-1) + 1 for p, _ in raw_terms), default=0)
    if arity is None:
        arity = max(needed, 1)
    elif arity < needed:
        raise ArityMismatchError(f"文本使用了 {needed} 个变量，超过指定元数 {arity}")
    terms = tuple(
        (tuple(powers.get(k, 0) for k in range(arity)), coeff)
        for powers, coeff in raw_terms
    )
    return IntPolynomial(arity, terms)


def load_polynomial(source: str, arity: Optional[int] = None) -> IntPolynomial:
    """接受文本语法或 JSON 两种形式"""
    stripped = source.strip()
    if stripped.startswith("{"):
        poly = polynomial_from_json(stripped)
        if arity is not None and poly.arity != arity:
            raise ArityMismatchError("JSON 多项式元数与指定元数不一致")
        return poly
    return parse_polynomial(stripped, arity)


def is_primitive_vector(coords: Iterable[int]) -> bool:
    return reduce(math.gcd, (abs(int(c)) for c in coords), 0) == 1


def sup_norm(coords: Iterable[int]) -> int:
    return max((abs(int(c)) for c in coords), default=0)
