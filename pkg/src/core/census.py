"""
整点计数引擎

- M(f;B)：盒 |t| ≤ B 内仿射零点个数（brute / slice / sieve / split 四种引擎，结果必须一致）
- N(F;B)：本原向量零点个数（正负向量分别计数）
- 有限域上的射影点数、奇异点数与 U_p 点数
- 平面曲线整点计数与直线检测（X 去掉直线后的开子集）
"""

import logging
import math
import time
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from sympy import Matrix, divisors, integer_nthroot, isprime, mobius, nextprime

from config.settings import settings
from src.core.errors import (
    ArityMismatchError,
    DegenerateTangentSectionError,
    NotHomogeneousError,
    ParameterRangeError,
    ResourceCapError,
    SeriesError,
    ZeroPolynomialError,
)
from src.core.polyring import INT64_SAFE_BOUND, IntPolynomial, LatticePoint
from src.core.sharding import run_sharded, split_range
from src.core.smoothcheck import chunk_points, projective_chunks, tangent_section_multiplicity

logger = logging.getLogger(__name__)

ENGINES = ("brute", "slice", "sieve", "split", "auto")

# 单次向量化求值的最大行数
CHUNK_ROWS = 1 << 18

# 常数项不超过该值时用因数枚举求整根
DIVISOR_LIMIT = 10 ** 6

# 仿射点数在 p^m 不超过该值时穷举，否则由射影点数推出
AFFINE_SCAN_CAP = 1 << 24


@dataclass(frozen=True)
class PointRecord:
    coords: LatticePoint
    primitive: bool
    on_detected_line: Optional[bool] = None

    def to_row(self) -> List:
        flag = "" if self.on_detected_line is None else int(self.on_detected_line)
        return list(self.coords) + [int(self.primitive), flag]


@dataclass
class ModPSummary:
    """F_p 上的点数统计"""

    prime: int
    affine_zero_count: int
    projective_count: int
    u_count: int
    singular_count: int = 0
    degenerate_count: int = 0
    affine_exhaustive: bool = True

    def to_dict(self) -> Dict:
        return {
            "prime": self.prime,
            "affine_zero_count": self.affine_zero_count,
            "projective_count": self.projective_count,
            "u_count": self.u_count,
            "singular_count": self.singular_count,
            "degenerate_count": self.degenerate_count,
            "affine_exhaustive": self.affine_exhaustive,
        }


@dataclass
class CountSeries:
    """一次实验得到的 (B, count) 序列，B 严格递增"""

    experiment_id: str
    points: List[Tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        bounds = [b for b, _ in self.points]
        if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
            raise SeriesError(f"序列 {self.experiment_id} 的 B 不是严格递增")

    def append(self, bound: int, count: int):
        if self.points and bound <= self.points[-1][0]:
            raise SeriesError(f"B = {bound} 不大于序列中已有的最大 B")
        if self.points and count < self.points[-1][1]:
            logger.warning(f"序列 {self.experiment_id} 在 B = {bound} 处计数下降")
        self.points.append((int(bound), int(count)))

    @property
    def bounds(self) -> List[int]:
        return [b for b, _ in self.points]

    @property
    def counts(self) -> List[int]:
        return [c for _, c in self.points]

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class Line:
    """射影直线，basis 为两行约化阶梯形的本原整数基"""

    basis: Tuple[Tuple[int, ...], Tuple[int, ...]]

    def to_dict(self) -> Dict:
        return {"basis": [list(row) for row in self.basis]}


@dataclass
class LineCensus:
    total: int
    on_lines: int
    off_lines: int
    lines: List[Line] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "total": self.total,
            "on_lines": self.on_lines,
            "off_lines": self.off_lines,
            "lines": [line.to_dict() for line in self.lines],
        }


@dataclass
class HeightRegime:
    height: int
    bound: int
    constant: float
    log_height: float
    log_bound: float

    @property
    def within(self) -> bool:
        return self.log_height <= self.constant * self.log_bound

    def to_dict(self) -> Dict:
        return {
            "height": str(self.height),
            "bound": self.bound,
            "constant": self.constant,
            "log_height": self.log_height,
            "log_bound": self.log_bound,
            "within": self.within,
        }


# ---------- 一元整根 ----------


def _horner(coeffs: Sequence[int], x: int) -> int:
    value = 0
    for c in reversed(coeffs):
        value = value * x + c
    return value


def _sign(value: int) -> int:
    return (value > 0) - (value < 0)


def _forward_difference(coeffs: Sequence[int]) -> List[int]:
    """q(t+1) - q(t) 的系数（低次在前）"""
    shifted = [0] * len(coeffs)
    for k, c in enumerate(coeffs):
        if c:
            for j in range(k + 1):
                shifted[j] += c * math.comb(k, j)
    diff = [s - c for s, c in zip(shifted, coeffs)]
    while diff and diff[-1] == 0:
        diff.pop()
    return diff


def _monotone_breakpoints(coeffs: Sequence[int], low: int, high: int) -> List[int]:
    """在 q 严格单调（或只有两点）的区间上找零点或变号位置"""
    v_low, v_high = _horner(coeffs, low), _horner(coeffs, high)
    found = []
    if v_low == 0:
        found.append(low)
    if v_high == 0 and high != low:
        found.append(high)
    if v_low and v_high and _sign(v_low) != _sign(v_high):
        lo, hi = low, high
        while hi - lo > 1:
            mid = (lo + hi) // 2
            v_mid = _horner(coeffs, mid)
            if v_mid == 0:
                found.append(mid)
                break
            if _sign(v_mid) == _sign(v_low):
                lo = mid
            else:
                hi = mid
        else:
            found.append(lo)
    return found


def _breakpoints(coeffs: Sequence[int], low: int, high: int) -> List[int]:
    """
    [low, high] 内所有 q(m) = 0 或 q(m)、q(m+1) 异号的整数 m

    对前向差分递归，得到 q 的严格单调段后逐段二分，全程整数运算
    """
    if high < low or len(coeffs) <= 1:
        return []
    inner = _breakpoints(_forward_difference(coeffs), low, high - 1)
    cuts = {low, high}
    for m in inner:
        cuts.add(m)
        cuts.add(m + 1)
    cuts = sorted(c for c in cuts if low <= c <= high)
    found = set()
    if len(cuts) == 1:
        found.update(_monotone_breakpoints(coeffs, low, high))
    for a, b in zip(cuts, cuts[1:]):
        found.update(_monotone_breakpoints(coeffs, a, b))
    return sorted(found)


def integer_roots(coeffs: Sequence[int], low: int, high: int) -> List[int]:
    """
    一元整系数多项式在 [low, high] 内的全部整根（系数低次在前）

    常数项为零时先提出 t^k；常数项较小时枚举其因数，
    否则用有限差分隔离单调段后二分
    """
    coeffs = [int(c) for c in coeffs]
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    if not coeffs:
        raise ZeroPolynomialError("零多项式的整根是整个区间，请使用 count_integer_roots")
    roots = []
    k = next(i for i, c in enumerate(coeffs) if c)
    if k and low <= 0 <= high:
        roots.append(0)
    q = coeffs[k:]
    if len(q) == 1:
        return roots
    if len(q) == 2:
        if q[0] % q[1] == 0 and low <= -q[0] // q[1] <= high and q[0] != 0:
            roots.append(-q[0] // q[1])
        return sorted(roots)

    cauchy = 1 + -(-max(abs(c) for c in q[:-1]) // abs(q[-1]))
    low, high = max(low, -cauchy), min(high, cauchy)
    if high < low:
        return sorted(roots)
    if abs(q[0]) <= DIVISOR_LIMIT:
        for d in divisors(abs(q[0])):
            for t in (d, -d):
                if low <= t <= high and _horner(q, t) == 0:
                    roots.append(t)
    else:
        roots.extend(m for m in _breakpoints(q, low, high) if _horner(q, m) == 0)
    return sorted(roots)


def count_integer_roots(coeffs: Sequence[int], low: int, high: int) -> int:
    if not any(coeffs):
        return max(0, high - low + 1)
    return len(integer_roots(coeffs, low, high))


# ---------- 盒内网格 ----------


def box_chunks(dim: int, bound: int, max_rows: int = CHUNK_ROWS) -> Iterator[np.ndarray]:
    """按字典序分块生成 [-B, B]^dim 的全部整点"""
    if dim == 0:
        yield np.zeros((1, 0), dtype=np.int64)
        return
    side = 2 * bound + 1
    if side ** dim <= max_rows:
        axis = np.arange(-bound, bound + 1, dtype=np.int64)
        grids = np.meshgrid(*([axis] * dim), indexing="ij")
        yield np.stack([g.ravel() for g in grids], axis=1)
        return
    for value in range(-bound, bound + 1):
        for rest in box_chunks(dim - 1, bound, max_rows):
            head = np.full((rest.shape[0], 1), value, dtype=np.int64)
            yield np.hstack([head, rest])


def _count_rows_roots(columns: List[np.ndarray], bound: int) -> int:
    """
    每行给出最后一个变量的一元多项式系数（低次在前），
    统计所有行在 [-B, B] 内的整根总数
    """
    if not columns:
        return 0
    rows = columns[0].shape[0]
    nonzero = [c != 0 for c in columns]
    top = np.full(rows, -1, dtype=np.int64)
    for k, mask in enumerate(nonzero):
        top[mask] = k
    side = 2 * bound + 1
    total = side * int((top == -1).sum())

    if len(columns) >= 2:
        linear = top == 1
        if linear.any():
            c0 = columns[0][linear]
            c1 = columns[1][linear]
            divisible = (c0 % c1) == 0
            roots = -(c0[divisible] // c1[divisible])
            total += int(((roots >= -bound) & (roots <= bound)).sum())

    for row in np.nonzero(top >= 2)[0]:
        coeffs = [int(c[row]) for c in columns[: top[row] + 1]]
        total += len(integer_roots(coeffs, -bound, bound))
    return total


def _last_variable_count(poly: IntPolynomial, bound: int) -> int:
    """对前 ν-1 个坐标逐点求最后一个变量的精确整根"""
    if poly.is_zero:
        return (2 * bound + 1) ** poly.arity
    if poly.arity == 1:
        return count_integer_roots(poly.dense_coefficients(), -bound, bound)
    coefficient_polys = poly.univariate_coefficients(poly.arity - 1)
    total = 0
    for grid in box_chunks(poly.arity - 1, bound):
        columns = [c.evaluate_many(grid) for c in coefficient_polys]
        total += _count_rows_roots(columns, bound)
    return total


# ---------- 引擎 ----------


def _brute_task(task: Tuple[IntPolynomial, int, int, int]) -> int:
    poly, bound, low, high = task
    total = 0
    for value in range(low, high + 1):
        sliced = poly.slice(0, value)
        if sliced.is_zero:
            total += (2 * bound + 1) ** sliced.arity
            continue
        for grid in box_chunks(sliced.arity, bound):
            total += int((sliced.evaluate_many(grid) == 0).sum())
    return total


def _slice_task(task: Tuple[IntPolynomial, int, int, int]) -> int:
    poly, bound, low, high = task
    return sum(_last_variable_count(poly.slice(0, value), bound) for value in range(low, high + 1))


def _sharded_first_coordinate(worker, poly: IntPolynomial, bound: int, shards: int) -> int:
    tasks = [(poly, bound, lo, hi) for lo, hi in split_range(-bound, bound, shards)]
    for i, (_, _, lo, hi) in enumerate(tasks):
        logger.debug(f"分片 {i}: 首坐标 [{lo}, {hi}]")
    return sum(run_sharded(worker, tasks, shards))


def sieve_prime(bound: int, degree: int) -> int:
    """不小于 B^{1/√δ} 的最小素数"""
    if bound < 2:
        return 2
    return select_primes(bound, max(int(degree), 2), 1)[0]


def _sieve_task(task: Tuple[IntPolynomial, int, int, int, int, np.ndarray]) -> int:
    poly, bound, prime, low, high, table = task
    last = np.arange(-bound, bound + 1, dtype=np.int64)
    last_residues = last % prime
    total = 0
    for value in range(low, high + 1):
        head = value % prime
        for middle in box_chunks(poly.arity - 2, bound, max(1, CHUNK_ROWS // (2 * bound + 1))):
            index = (head,) + tuple(middle[:, i] % prime for i in range(middle.shape[1]))
            allowed = table[index] if middle.shape[1] else table[head][None, :]
            mask = allowed[:, last_residues]
            rows, cols = np.nonzero(mask)
            if rows.size == 0:
                continue
            points = np.empty((rows.size, poly.arity), dtype=np.int64)
            points[:, 0] = value
            points[:, 1:-1] = middle[rows]
            points[:, -1] = last[cols]
            total += int((poly.evaluate_many(points) == 0).sum())
    return total


def count_affine_sieved(
    poly: IntPolynomial,
    bound: int,
    prime: Optional[int] = None,
    shards: int = 1,
    mem_cap: Optional[int] = None,
) -> int:
    """
    模 p 筛选加速的仿射计数

    先对前 ν-1 个坐标的每个剩余类算出最后一个坐标的根类，
    只对根类的提升做精确检验，结果与 count_affine 完全一致
    """
    _check_count_args(poly, bound)
    mem_cap = mem_cap or settings.MEM_CAP_BYTES
    prime = prime or sieve_prime(bound, int(poly.degree))
    while poly.reduce_mod_p(prime).is_zero:
        logger.info(f"多项式模 {prime} 恒为零，换用下一个素数")
        prime = int(nextprime(prime))
    if prime ** poly.arity > mem_cap:
        raise ResourceCapError(f"筛表 {prime}^{poly.arity} 超出内存上限 {mem_cap}")

    residues = np.indices((prime,) * poly.arity, dtype=np.int64).reshape(poly.arity, -1).T
    table = (poly.evaluate_mod_many(residues, prime) == 0).reshape((prime,) * poly.arity)
    logger.debug(f"筛素数 p = {prime}，根类占比 {table.mean():.4f}")

    if poly.arity == 1:
        candidates = np.arange(-bound, bound + 1, dtype=np.int64)
        candidates = candidates[table[candidates % prime]]
        return int((poly.evaluate_many(candidates[:, None]) == 0).sum())

    tasks = [(poly, bound, prime, lo, hi, table) for lo, hi in split_range(-bound, bound, shards)]
    return sum(run_sharded(_sieve_task, tasks, shards))


def _union_components(poly: IntPolynomial) -> List[List[int]]:
    parent = list(range(poly.arity))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for exponents, _ in poly.terms:
        support = [i for i, e in enumerate(exponents) if e]
        for a, b in zip(support, support[1:]):
            parent[find(a)] = find(b)
    used = set(poly.variables_used())
    groups: Dict[int, List[int]] = {}
    for i in sorted(used):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def separable_split(poly: IntPolynomial) -> Optional[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
    """
    变量能否分成两组且没有跨组单项式

    返回 (左组, 右组)，左组不小于右组；不可分时返回 None
    """
    components = _union_components(poly)
    if len(components) < 2:
        return None
    left: List[int] = []
    right: List[int] = []
    for component in sorted(components, key=lambda c: (-len(c), c)):
        (left if len(left) <= len(right) else right).extend(component)
    used = set(poly.variables_used())
    for i in range(poly.arity):
        if i not in used:
            (left if len(left) <= len(right) else right).append(i)
    if len(left) < len(right):
        left, right = right, left
    return tuple(sorted(left)), tuple(sorted(right))


def _restrict(poly: IntPolynomial, indices: Sequence[int], keep_constant: bool) -> IntPolynomial:
    terms = []
    for exponents, coeff in poly.terms:
        if any(e for i, e in enumerate(exponents) if i not in indices):
            continue
        if not any(exponents) and not keep_constant:
            continue
        terms.append((tuple(exponents[i] for i in indices), coeff))
    return IntPolynomial(len(indices), tuple(terms))


def _tabulate(part: IntPolynomial, bound: int, first: Optional[Tuple[int, int]] = None) -> np.ndarray:
    chunks = []
    if first is None:
        for grid in box_chunks(part.arity, bound):
            chunks.append(part.evaluate_many(grid))
    else:
        for value in range(first[0], first[1] + 1):
            for rest in box_chunks(part.arity - 1, bound):
                head = np.full((rest.shape[0], 1), value, dtype=np.int64)
                chunks.append(part.evaluate_many(np.hstack([head, rest])))
    if any(c.dtype == object for c in chunks):
        chunks = [c.astype(object) for c in chunks]
    return np.concatenate(chunks)


def _match_count(left: np.ndarray, right_negated: np.ndarray) -> int:
    """Σ_v #{左值 = v}·#{右值 = -v}"""
    if left.dtype == object or right_negated.dtype == object:
        right_counts = Counter(int(v) for v in right_negated)
        return sum(c * right_counts.get(int(v), 0) for v, c in Counter(int(v) for v in left).items())
    values_l, counts_l = np.unique(left, return_counts=True)
    values_r, counts_r = np.unique(right_negated, return_counts=True)
    index = np.searchsorted(values_r, values_l)
    valid = index < values_r.size
    index = index[valid]
    hit = values_r[index] == values_l[valid]
    return int((counts_l[valid][hit] * counts_r[index[hit]]).sum())


def _split_task(task: Tuple[IntPolynomial, int, int, int, np.ndarray]) -> int:
    left_part, bound, low, high, right_negated = task
    return _match_count(_tabulate(left_part, bound, (low, high)), right_negated)


def count_affine_split(
    poly: IntPolynomial, bound: int, shards: int = 1, mem_cap: Optional[int] = None
) -> int:
    """中途相遇计数：f = g(左组) + h(右组) 时匹配 g = -h 的值表"""
    _check_count_args(poly, bound)
    groups = separable_split(poly)
    if groups is None:
        raise ValueError("多项式的变量不能分成互不交叉的两组")
    mem_cap = mem_cap or settings.MEM_CAP_BYTES
    left_vars, right_vars = groups
    left_part = _restrict(poly, left_vars, keep_constant=True)
    right_part = _restrict(poly, right_vars, keep_constant=False)
    side = 2 * bound + 1

    right_bytes = side ** len(right_vars) * 8 * (len(right_vars) + 2)
    if right_bytes > mem_cap:
        raise ResourceCapError(f"右半值表约 {right_bytes} 字节，超出内存上限 {mem_cap}")
    right_negated = -_tabulate(right_part, bound)

    left_bytes = side ** len(left_vars) * 8 * (len(left_vars) + 2)
    pieces = max(shards, -(-left_bytes // max(1, mem_cap - right_bytes)))
    if pieces > shards:
        logger.info(f"左半值表约 {left_bytes} 字节，自动切成 {pieces} 片")
    tasks = [
        (left_part, bound, lo, hi, right_negated) for lo, hi in split_range(-bound, bound, pieces)
    ]
    return sum(run_sharded(_split_task, tasks, shards))


def _check_count_args(poly: IntPolynomial, bound: int):
    if poly.is_zero:
        raise ZeroPolynomialError("零多项式的零点计数无意义")
    if bound < 1:
        raise ParameterRangeError(f"B 必须为正整数: {bound}")


def resolve_engine(poly: IntPolynomial, engine: str) -> str:
    """auto 在变量可分时解析为 split，否则为 slice"""
    if engine not in ENGINES:
        raise ValueError(f"未知引擎: {engine}")
    if engine == "auto":
        return "split" if separable_split(poly) is not None else "slice"
    return engine


def count_affine(
    poly: IntPolynomial,
    bound: int,
    engine: str = "auto",
    shards: int = 1,
    prime: Optional[int] = None,
    mem_cap: Optional[int] = None,
) -> int:
    """
    M(f;B)：满足 max|t_i| ≤ B 且 f(t) = 0 的整点个数

    auto 在变量可分时用 split，否则用 slice
    """
    _check_count_args(poly, bound)
    engine = resolve_engine(poly, engine)

    started = time.perf_counter()
    if engine == "split":
        count = count_affine_split(poly, bound, shards, mem_cap)
    elif engine == "sieve":
        count = count_affine_sieved(poly, bound, prime, shards, mem_cap)
    elif poly.arity == 1 and engine == "brute":
        values = poly.evaluate_many(np.arange(-bound, bound + 1, dtype=np.int64)[:, None])
        count = int((values == 0).sum())
    elif poly.arity == 1:
        count = _last_variable_count(poly, bound)
    elif engine == "slice":
        count = _sharded_first_coordinate(_slice_task, poly, bound, shards)
    else:
        count = _sharded_first_coordinate(_brute_task, poly, bound, shards)
    elapsed = (time.perf_counter() - started) * 1000
    logger.info(f"M(f;{bound}) = {count} [{engine}, {shards} 片, {elapsed:.1f} ms]")
    return count


# ---------- 射影计数 ----------


def check_homogeneous(form: IntPolynomial):
    """非齐次时抛出 NotHomogeneousError，并指出第一个次数不符的项"""
    if form.is_zero:
        raise ZeroPolynomialError("零多项式不定义超曲面")
    if form.is_homogeneous:
        return
    top = int(form.degree)
    for exponents, coeff in form.terms:
        if sum(exponents) != top:
            term = IntPolynomial(form.arity, ((exponents, coeff),)).to_text()
            raise NotHomogeneousError(
                f"多项式不是齐次的：项 {term} 的次数为 {sum(exponents)}，应为 {top}",
                offending_term=term,
            )


def _primitive_mask(points: np.ndarray) -> np.ndarray:
    return np.gcd.reduce(np.abs(points), axis=1) == 1


def _projective_task(task: Tuple[IntPolynomial, int, int, int]) -> int:
    form, bound, low, high = task
    total = 0
    for value in range(low, high + 1):
        for rest in box_chunks(form.arity - 1, bound):
            head = np.full((rest.shape[0], 1), value, dtype=np.int64)
            points = np.hstack([head, rest])
            mask = _primitive_mask(points)
            total += int((form.evaluate_many(points[mask]) == 0).sum())
    return total


def count_all_solutions(
    form: IntPolynomial, bound: int, engine: str = "auto", shards: int = 1, prime: Optional[int] = None
) -> int:
    """|x| ≤ B 的非零整数解个数（不要求本原）"""
    check_homogeneous(form)
    if form.degree < 1:
        return 0
    if bound < 1:
        return 0
    return count_affine(form, bound, engine, shards, prime) - 1


def count_projective_mobius(
    form: IntPolynomial, bound: int, engine: str = "auto", shards: int = 1, prime: Optional[int] = None
) -> int:
    """N(F;B) = Σ_m μ(m)·A(⌊B/m⌋)，A 为非零解个数"""
    check_homogeneous(form)
    cache: Dict[int, int] = {}
    total = 0
    for m in range(1, bound + 1):
        mu = int(mobius(m))
        if mu == 0:
            continue
        q = bound // m
        if q not in cache:
            cache[q] = count_all_solutions(form, q, engine, shards, prime)
        total += mu * cache[q]
    return total


def count_projective(
    form: IntPolynomial,
    bound: int,
    engine: str = "auto",
    shards: int = 1,
    identify_antipodes: bool = False,
    prime: Optional[int] = None,
) -> int:
    """
    N(F;B)：gcd 为 1、|x| ≤ B 且 F(x) = 0 的整数向量个数

    x 与 -x 分别计数；identify_antipodes 时除以 2 得到射影点数。
    brute 引擎直接枚举本原向量，其余引擎经 Möbius 反演
    """
    check_homogeneous(form)
    if bound < 1:
        raise ParameterRangeError(f"B 必须为正整数: {bound}")
    if engine not in ENGINES:
        raise ValueError(f"未知引擎: {engine}")
    if form.degree < 1:
        count = 0
    elif engine == "brute":
        count = _sharded_first_coordinate(_projective_task, form, bound, shards)
    else:
        count = count_projective_mobius(form, bound, engine, shards, prime)
    logger.info(f"N(F;{bound}) = {count} [{engine}]")
    return count // 2 if identify_antipodes else count


# ---------- 点枚举 ----------


def _split_solutions(poly: IntPolynomial, bound: int) -> Optional[np.ndarray]:
    """可分多项式的全部零点坐标；值超出 int64 时返回 None"""
    groups = separable_split(poly)
    if groups is None:
        return None
    left_vars, right_vars = groups
    left_part = _restrict(poly, left_vars, keep_constant=True)
    right_part = _restrict(poly, right_vars, keep_constant=False)
    left_grid = np.concatenate(list(box_chunks(len(left_vars), bound)))
    right_grid = np.concatenate(list(box_chunks(len(right_vars), bound)))
    left_values = left_part.evaluate_many(left_grid)
    right_values = -right_part.evaluate_many(right_grid)
    if left_values.dtype == object or right_values.dtype == object:
        return None

    order_l = np.argsort(left_values, kind="stable")
    order_r = np.argsort(right_values, kind="stable")
    sorted_l, sorted_r = left_values[order_l], right_values[order_r]
    common = np.intersect1d(sorted_l, sorted_r)
    start_l = np.searchsorted(sorted_l, common, side="left")
    size_l = np.searchsorted(sorted_l, common, side="right") - start_l
    start_r = np.searchsorted(sorted_r, common, side="left")
    size_r = np.searchsorted(sorted_r, common, side="right") - start_r

    pairs = size_l * size_r
    group = np.repeat(np.arange(common.size), pairs)
    offset = np.arange(int(pairs.sum())) - np.repeat(np.cumsum(pairs) - pairs, pairs)
    left_rows = order_l[start_l[group] + offset // size_r[group]]
    right_rows = order_r[start_r[group] + offset % size_r[group]]

    points = np.empty((left_rows.size, poly.arity), dtype=np.int64)
    points[:, list(left_vars)] = left_grid[left_rows]
    points[:, list(right_vars)] = right_grid[right_rows]
    return points


def affine_solutions(poly: IntPolynomial, bound: int) -> np.ndarray:
    """盒内全部零点，按字典序排列的 (k, ν) 数组"""
    _check_count_args(poly, bound)
    points = _split_solutions(poly, bound)
    if points is None:
        found = []
        for grid in box_chunks(poly.arity, bound):
            values = poly.evaluate_many(grid)
            found.append(grid[values == 0])
        points = np.concatenate(found) if found else np.zeros((0, poly.arity), dtype=np.int64)
    if points.shape[0]:
        points = points[np.lexsort(points.T[::-1])]
    return points


def projective_solutions(form: IntPolynomial, bound: int) -> np.ndarray:
    check_homogeneous(form)
    points = affine_solutions(form, bound)
    return points[_primitive_mask(points)] if points.shape[0] else points


def _records(points: np.ndarray, on_line: Optional[np.ndarray] = None) -> List[PointRecord]:
    primitive = _primitive_mask(points) if points.shape[0] else np.zeros(0, dtype=bool)
    return [
        PointRecord(
            tuple(int(v) for v in row),
            bool(primitive[i]),
            None if on_line is None else bool(on_line[i]),
        )
        for i, row in enumerate(points)
    ]


def enumerate_affine(poly: IntPolynomial, bound: int) -> List[PointRecord]:
    return _records(affine_solutions(poly, bound))


def enumerate_projective(
    form: IntPolynomial, bound: int, lines: Optional[Sequence[Line]] = None
) -> List[PointRecord]:
    points = projective_solutions(form, bound)
    on_line = classify_points(points, lines) if lines is not None else None
    return _records(points, on_line)


def fiber_counts(poly: IntPolynomial, bound: int, prime: int) -> Dict[Tuple[int, ...], int]:
    """按前 ν-1 个坐标模 p 的剩余类统计盒内零点，各类之和为 M(f;B)"""
    if poly.arity < 2:
        raise ArityMismatchError("剩余类纤维至少需要两个变量")
    points = affine_solutions(poly, bound)
    residues = points[:, :-1] % prime
    return dict(sorted(Counter(tuple(int(v) for v in row) for row in residues).items()))


def height_regime(form: IntPolynomial, bound: int, constant: float = 1.0) -> HeightRegime:
    """log‖F‖ ≤ constant·log B 是否成立"""
    if bound < 2:
        raise ParameterRangeError("高度比较需要 B ≥ 2")
    height = form.height()
    return HeightRegime(height, bound, constant, math.log(height), math.log(bound))


# ---------- 有限域 ----------


def _modp_chunk(task: Tuple[IntPolynomial, int, int, Optional[int]]) -> Tuple[int, int, int, int]:
    form, prime, lead, value = task
    points = chunk_points(form.arity, prime, lead, value)
    zeros = points[form.evaluate_mod_many(points, prime) == 0]
    if zeros.shape[0] == 0:
        return 0, 0, 0, 0
    singular = np.ones(zeros.shape[0], dtype=bool)
    for partial in form.gradient():
        singular &= partial.evaluate_mod_many(zeros, prime) == 0
    u_count = 0
    degenerate = 0
    for row in zeros[~singular]:
        try:
            if tangent_section_multiplicity(form, [int(v) for v in row], prime) <= 2:
                u_count += 1
        except DegenerateTangentSectionError:
            degenerate += 1
            logger.info(f"点 {tuple(int(v) for v in row)} 的切平面包含于 X_{prime}，不计入 U")
    return zeros.shape[0], int(singular.sum()), u_count, degenerate


def _affine_zero_task(task: Tuple[IntPolynomial, int, int]) -> int:
    form, prime, value = task
    size = form.arity - 1
    grid = np.indices((prime,) * size, dtype=np.int64).reshape(size, -1).T if size else np.zeros((1, 0), dtype=np.int64)
    points = np.hstack([np.full((grid.shape[0], 1), value, dtype=np.int64), grid])
    return int((form.evaluate_mod_many(points, prime) == 0).sum())


def count_mod_p(form: IntPolynomial, prime: int, shards: int = 1) -> ModPSummary:
    """
    穷举 F_p 上的射影点

    U_p 为切平面截线重数不超过 2 的光滑点；切平面整个落在 X_p 内的点单独计数
    """
    check_homogeneous(form)
    if not isprime(prime) or prime >= 2 ** 31:
        raise ParameterRangeError(f"{prime} 不是 2^31 以内的素数")
    reduced = form.reduce_mod_p(prime)
    if reduced.is_zero:
        raise ZeroPolynomialError(f"多项式模 {prime} 恒为零")

    started = time.perf_counter()
    tasks = [(reduced, prime, lead, value) for lead, value in projective_chunks(form.arity, prime)]
    projective = singular = u_count = degenerate = 0
    for z, s, u, g in run_sharded(_modp_chunk, tasks, shards):
        projective += z
        singular += s
        u_count += u
        degenerate += g

    derived = 1 + (prime - 1) * projective
    if prime ** form.arity <= AFFINE_SCAN_CAP:
        affine_tasks = [(reduced, prime, value) for value in range(prime)]
        affine = sum(run_sharded(_affine_zero_task, affine_tasks, shards))
        if affine != derived:
            logger.error(f"仿射零点 {affine} 与射影点数推出的 {derived} 不一致")
        exhaustive = True
    else:
        affine = derived
        exhaustive = False
        logger.info(f"p^{form.arity} 过大，仿射零点数由射影点数推出")

    elapsed = (time.perf_counter() - started) * 1000
    logger.info(f"#X_{prime}(F_{prime}) = {projective}, #U = {u_count} ({elapsed:.1f} ms)")
    return ModPSummary(prime, affine, projective, u_count, singular, degenerate, exhaustive)


def select_primes(bound: int, degree: int, count: int = 1) -> List[int]:
    """不小于 B^{1/√d} 的最小 count 个素数"""
    if bound < 2 or degree < 2:
        raise ParameterRangeError("select_primes 要求 B ≥ 2 且 d ≥ 2")
    if count < 1:
        return []
    root = math.isqrt(degree)
    if root * root == degree:
        value, exact = integer_nthroot(bound, root)
        threshold = int(value) if exact else int(value) + 1
    else:
        # 非平方次数时 B^{1/√d} 不会恰为大于 1 的整数
        threshold = math.ceil(bound ** (1 / math.sqrt(degree)))
    primes = [int(nextprime(threshold - 1))]
    while len(primes) < count:
        primes.append(int(nextprime(primes[-1])))
    return primes


# ---------- 曲线与直线 ----------


def count_curve_points(curve: IntPolynomial, bound: int) -> int:
    """二元多项式在 |t| ≤ B 内的整点数：枚举一个变量，精确求解另一个"""
    if curve.arity != 2:
        raise ArityMismatchError("count_curve_points 只接受二元多项式")
    _check_count_args(curve, bound)
    solve_for = 1 if curve.degree_in(1) <= curve.degree_in(0) or curve.degree_in(0) == 0 else 0
    coefficient_polys = curve.univariate_coefficients(solve_for)
    outer = np.arange(-bound, bound + 1, dtype=np.int64)[:, None]
    total = 0
    for start in range(0, outer.shape[0], CHUNK_ROWS):
        block = outer[start:start + CHUNK_ROWS]
        columns = [c.evaluate_many(block) for c in coefficient_polys]
        total += _count_rows_roots(columns, bound)
    logger.info(f"曲线整点数({bound}) = {total}")
    return total


def _integer_row(row: Sequence) -> Tuple[int, ...]:
    """有理行向量放大为本原整数向量"""
    values = [Fraction(int(v.p), int(v.q)) for v in row]
    scale = math.lcm(*(v.denominator for v in values))
    ints = [int(v * scale) for v in values]
    g = math.gcd(*ints) or 1
    return tuple(v // g for v in ints)


def canonical_line(first: Sequence[int], second: Sequence[int]) -> Optional[Line]:
    reduced, pivots = Matrix([list(first), list(second)]).rref()
    if len(pivots) < 2:
        return None
    return Line((_integer_row(reduced.row(0)), _integer_row(reduced.row(1))))


def _normalize_sign(points: np.ndarray) -> np.ndarray:
    first_nonzero = np.argmax(points != 0, axis=1)
    signs = np.sign(points[np.arange(points.shape[0]), first_nonzero])
    return points * signs[:, None]


def _line_sample(points: np.ndarray, size: int, seed: int) -> np.ndarray:
    """高度最低的一半确定性选取，其余按种子随机补足"""
    if points.shape[0] == 0:
        return points
    points = np.unique(_normalize_sign(points), axis=0)
    heights = np.abs(points).max(axis=1)
    order = np.lexsort(tuple(points.T[::-1]) + (heights,))
    points = points[order]
    if points.shape[0] <= size:
        return points
    lowest = points[: size // 2]
    rest = points[size // 2:]
    rng = np.random.default_rng(seed)
    extra = rest[np.sort(rng.choice(rest.shape[0], size - lowest.shape[0], replace=False))]
    return np.concatenate([lowest, extra])


def detect_lines(
    form: IntPolynomial,
    sample: np.ndarray,
    sample_size: Optional[int] = None,
    seed: Optional[int] = None,
) -> List[Line]:
    """
    对样本点两两检验连线是否落在 X 上

    直线上取 d+1 个点 x + j·y (j = 0..d) 精确求值，全为零即整条直线在 X 上。
    结果只是检测到的直线，是真实直线集合的下界
    """
    check_homogeneous(form)
    sample = np.asarray(sample, dtype=np.int64).reshape(-1, form.arity)
    size = sample_size or settings.LINE_SAMPLE_SIZE
    seed = settings.SEED if seed is None else seed
    chosen = _line_sample(sample, size, seed)
    if chosen.shape[0] < 2:
        return []

    degree = int(form.degree)
    first, second = np.triu_indices(chosen.shape[0], k=1)
    steps = np.arange(degree + 1, dtype=np.int64)
    x = chosen[first][:, None, :]
    y = chosen[second][:, None, :]
    on_line_points = (x + steps[None, :, None] * y).reshape(-1, form.arity)
    values = form.evaluate_many(on_line_points).reshape(first.size, degree + 1)
    vanishing = np.nonzero((values == 0).all(axis=1))[0]

    lines = set()
    for k in vanishing:
        line = canonical_line(chosen[first[k]].tolist(), chosen[second[k]].tolist())
        if line is not None:
            lines.add(line)
    logger.info(f"样本 {chosen.shape[0]} 个点中检测到 {len(lines)} 条直线")
    return sorted(lines, key=lambda line: line.basis)


def line_annihilators(line: Line) -> np.ndarray:
    """零化直线的整数线性型，x 在直线上当且仅当全部型在 x 处为零"""
    space = Matrix([list(row) for row in line.basis]).nullspace()
    forms = []
    for vector in space:
        forms.append(_integer_row(vector))
    return np.array(forms, dtype=object)


def classify_points(points: np.ndarray, lines: Sequence[Line]) -> np.ndarray:
    """每个点是否落在某条给定直线上"""
    points = np.asarray(points)
    on_line = np.zeros(points.shape[0], dtype=bool)
    if points.shape[0] == 0:
        return on_line
    largest = int(np.abs(points).max())
    for line in lines:
        forms = line_annihilators(line)
        scale = max(abs(int(v)) for v in forms.ravel()) * largest * points.shape[1]
        if scale < INT64_SAFE_BOUND:
            products = points.astype(np.int64) @ forms.astype(np.int64).T
        else:
            products = points.astype(object) @ forms.T
        on_line |= (products == 0).all(axis=1)
    return on_line


def count_off_lines(
    form: IntPolynomial,
    bound: int,
    sample_size: Optional[int] = None,
    seed: Optional[int] = None,
) -> LineCensus:
    """把 N(F;B) 精确划分为检测到的直线上的点与其余点"""
    points = projective_solutions(form, bound)
    lines = detect_lines(form, points, sample_size, seed)
    on_line = classify_points(points, lines)
    total = points.shape[0]
    on_count = int(on_line.sum())
    logger.info(f"B = {bound}: 共 {total} 个向量，直线上 {on_count} 个")
    return LineCensus(total, on_count, total - on_count, lines)


def slice_counts(poly: IntPolynomial, bound: int, engine: str = "auto") -> Dict[int, int]:
    """按首坐标 κ 切片后的计数，各项之和等于 M(f;B)"""
    if poly.arity < 2:
        raise ArityMismatchError("切片至少需要两个变量")
    counts = {}
    for kappa in range(-bound, bound + 1):
        sliced = poly.slice(0, kappa)
        counts[kappa] = (2 * bound + 1) ** sliced.arity if sliced.is_zero else count_affine(sliced, bound, engine)
    return counts

