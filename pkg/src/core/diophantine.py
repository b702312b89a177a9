"""
三个 d 次方之和的表示数 r_d(N) 与等幂和 L_s(f;B) 计数
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from sympy import integer_nthroot
from sympy.utilities.iterables import partitions

from config.settings import settings
from src.core.errors import ArityMismatchError, ParameterRangeError, ResourceCapError
from src.core.polyring import INT64_SAFE_BOUND, IntPolynomial
from src.core.sharding import run_sharded

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RepCount:
    N: int
    d: int
    r: int

    def to_dict(self) -> Dict:
        return {"N": self.N, "d": self.d, "r": self.r}


@dataclass
class RepBatch:
    """N ≤ X 的全部 r_d(N)，只保存非零项"""

    limit: int
    d: int
    counts: Dict[int, int] = field(default_factory=dict)

    def get(self, n: int) -> int:
        return self.counts.get(n, 0)

    @property
    def max_r(self) -> int:
        return max(self.counts.values(), default=0)

    @property
    def argmax(self) -> Optional[int]:
        """取得最大值的最小 N"""
        best = self.max_r
        return min((n for n, r in self.counts.items() if r == best), default=None)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def to_dict(self) -> Dict:
        return {
            "limit": self.limit,
            "d": self.d,
            "nonzero": len(self.counts),
            "max_r": self.max_r,
            "argmax": self.argmax,
            "total": self.total,
        }


@dataclass
class EqualSumsTally:
    s: int
    B: int
    total: int
    trivial: int
    nontrivial: int

    @property
    def asymptotic_leading_term(self) -> int:
        """s!·B^s，渐近意义下的平凡解个数"""
        return math.factorial(self.s) * self.B ** self.s

    def density(self, power: int = 2) -> float:
        """nontrivial / B^power"""
        return self.nontrivial / self.B ** power

    def to_dict(self) -> Dict:
        return {
            "s": self.s,
            "B": self.B,
            "total": self.total,
            "trivial": self.trivial,
            "nontrivial": self.nontrivial,
            "asymptotic_leading_term": self.asymptotic_leading_term,
        }


def _power_table(limit: int, d: int) -> np.ndarray:
    """t^d (t = 1..m)，其中 m 为满足 t^d ≤ limit 的最大整数"""
    if limit < 1:
        return np.zeros(0, dtype=np.int64)
    top = int(integer_nthroot(limit, d)[0])
    dtype = np.int64 if 2 * limit < INT64_SAFE_BOUND else object
    bases = np.arange(1, top + 1, dtype=np.int64).astype(dtype)
    return bases ** d


def _pair_sums(powers: np.ndarray, limit: int) -> Tuple[np.ndarray, np.ndarray]:
    """t1^d + t2^d ≤ limit 的有序对，压缩为 (值, 重数) 的有序数组"""
    if powers.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    sums = (powers[:, None] + powers[None, :]).ravel()
    sums = sums[sums <= limit]
    return np.unique(sums, return_counts=True)


def _check_rd(n: int, d: int):
    if n < 1 or d < 2:
        raise ParameterRangeError(f"r_d(N) 要求 N ≥ 1 且 d ≥ 2 (N={n}, d={d})")


def r_d(n: int, d: int, mem_cap: Optional[int] = None) -> RepCount:
    """
    t1^d + t2^d + t3^d = N 的有序正整数解个数

    二元和表能放进内存时查表，否则对每个 t3 在 d 次方表上二分
    """
    _check_rd(n, d)
    mem_cap = mem_cap or settings.MEM_CAP_BYTES
    powers = _power_table(n - 2, d)
    if powers.size == 0:
        return RepCount(n, d, 0)

    if powers.size ** 2 * 16 <= mem_cap and powers.dtype != object:
        values, counts = _pair_sums(powers, n - 1)
        targets = n - powers
        index = np.searchsorted(values, targets)
        valid = index < values.size
        hit = values[index[valid]] == targets[valid]
        r = int(counts[index[valid][hit]].sum())
    else:
        lookup = set(int(v) for v in powers)
        r = 0
        for t3 in powers:
            residual = n - int(t3)
            r += sum(1 for t1 in powers if residual - int(t1) in lookup)
    logger.debug(f"r_{d}({n}) = {r}")
    return RepCount(n, d, r)


def _batch_class_task(task: Tuple[np.ndarray, np.ndarray, np.ndarray, int, int, int]) -> Dict[int, int]:
    values, counts, powers, limit, modulus, residue = task
    size = (limit - residue) // modulus + 1
    table = np.zeros(size, dtype=np.int64)
    for t3 in powers:
        targets = values + t3
        mask = (targets <= limit) & ((targets - residue) % modulus == 0)
        if mask.any():
            np.add.at(table, ((targets[mask] - residue) // modulus).astype(np.int64), counts[mask])
    nonzero = np.nonzero(table)[0]
    return {int(i) * modulus + residue: int(table[i]) for i in nonzero}


def r_d_batch(
    limit: int,
    d: int,
    shards: int = 1,
    mem_cap: Optional[int] = None,
    allow_sharding: bool = True,
) -> RepBatch:
    """
    N ≤ X 的全部 r_d(N)

    计数表超出内存上限时按 N mod m 的剩余类分片，各片结果直接相加
    """
    _check_rd(limit, d)
    mem_cap = mem_cap or settings.MEM_CAP_BYTES
    powers = _power_table(limit - 2, d)
    if powers.dtype == object:
        raise ResourceCapError(f"X = {limit} 超出批量计数的整数范围")
    pair_bytes = powers.size ** 2 * 16
    if pair_bytes > mem_cap:
        raise ResourceCapError(f"二元和表约 {pair_bytes} 字节，超出内存上限 {mem_cap}")
    values, counts = _pair_sums(powers, limit - 1)

    table_bytes = (limit + 1) * 8
    modulus = max(1, -(-table_bytes // max(1, mem_cap - pair_bytes)))
    if modulus > 1:
        if not allow_sharding:
            raise ResourceCapError(f"计数表约 {table_bytes} 字节，超出内存上限且未启用分片")
        logger.info(f"计数表约 {table_bytes} 字节，按模 {modulus} 的剩余类分片")
    modulus = max(modulus, shards)
    tasks = [(values, counts, powers, limit, modulus, a) for a in range(modulus) if a <= limit]
    merged: Dict[int, int] = {}
    for part in run_sharded(_batch_class_task, tasks, shards):
        merged.update(part)
    batch = RepBatch(limit, d, dict(sorted(merged.items())))
    logger.info(f"r_{d} 批量计数完成: X = {limit}, 最大值 {batch.max_r} 于 N = {batch.argmax}")
    return batch


def trivial_count(s: int, bound: int) -> int:
    """
    后 s 个分量是前 s 个分量的置换的 2s 元组个数

    按整数拆分 λ 枚举取值的重数模式：选出不同取值的方式乘以两侧排列数的平方
    """
    if s < 2 or bound < 1:
        raise ParameterRangeError("trivial_count 要求 s ≥ 2 且 B ≥ 1")
    total = 0
    for shape in partitions(s):
        shape = dict(shape)
        parts = sum(shape.values())
        choices = math.perm(bound, parts)
        for multiplicity in shape.values():
            choices //= math.factorial(multiplicity)
        arrangements = math.factorial(s)
        for size, multiplicity in shape.items():
            arrangements //= math.factorial(size) ** multiplicity
        total += choices * arrangements ** 2
    return total


def _value_table(poly: IntPolynomial, bound: int) -> np.ndarray:
    return poly.evaluate_many(np.arange(1, bound + 1, dtype=np.int64)[:, None])


def _pair_class_task(task: Tuple[np.ndarray, int, int]) -> int:
    values, modulus, residue = task
    chunks = []
    for start in range(values.size):
        row = values[start] + values
        if modulus > 1:
            row = row[row % modulus == residue]
        chunks.append(row)
    sums = np.concatenate(chunks) if chunks else values[:0]
    if sums.dtype == object:
        return sum(c * c for c in Counter(int(v) for v in sums).values())
    _, multiplicity = np.unique(sums, return_counts=True)
    return int((multiplicity.astype(np.int64) ** 2).sum())


def equal_sums(
    poly: IntPolynomial,
    s: int,
    bound: int,
    shards: int = 1,
    mem_cap: Optional[int] = None,
) -> EqualSumsTally:
    """
    L_s(f;B)：x_i ∈ [1, B] 且 f(x_1)+…+f(x_s) = f(x_{s+1})+…+f(x_{2s}) 的有序 2s 元组个数

    s = 2 用二元和的重数平方和；s ≥ 3 逐次卷积 s 元和的分布，只适合小 B
    """
    if poly.arity != 1:
        raise ArityMismatchError("equal_sums 只接受一元多项式")
    if s < 2:
        raise ParameterRangeError(f"s 必须不小于 2: {s}")
    if bound < 1:
        raise ParameterRangeError(f"B 必须为正整数: {bound}")
    if poly.degree < 3:
        logger.warning(f"f 的次数为 {poly.degree}，等幂和的稀疏性只对 d ≥ 3 成立")
    mem_cap = mem_cap or settings.MEM_CAP_BYTES
    values = _value_table(poly, bound)

    if s == 2:
        pair_bytes = bound * bound * 16
        modulus = max(shards, -(-pair_bytes // mem_cap))
        if modulus > 1:
            logger.info(f"二元和表约 {pair_bytes} 字节，按值模 {modulus} 分片")
        tasks = [(values, modulus, a) for a in range(modulus)]
        total = sum(run_sharded(_pair_class_task, tasks, shards))
    else:
        distribution = Counter({0: 1})
        for _ in range(s):
            step: Counter = Counter()
            for partial, ways in distribution.items():
                for v in values:
                    step[partial + int(v)] += ways
            distribution = step
        total = sum(c * c for c in distribution.values())

    trivial = trivial_count(s, bound)
    tally = EqualSumsTally(s, bound, total, trivial, total - trivial)
    logger.info(f"L_{s}(f;{bound}) = {total}，非平凡 {tally.nontrivial}")
    return tally
