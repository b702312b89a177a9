"""
光滑性证据与好切片搜索

- 小素数域上的奇异点穷举
- 对角形式的解析光滑性判定，其余形式给出多素数证据
- 切平面截线重数（集合 U 的判定）
- 幺模补全与超平面切片的好/坏值扫描
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from sympy import GF, Matrix, Poly, Rational, groebner, solve, symbols
from sympy.polys.matrices import DomainMatrix

from config.settings import settings
from src.core.errors import (
    ArityMismatchError,
    DegenerateTangentSectionError,
    NotHomogeneousError,
    ParameterRangeError,
    SearchExhaustedError,
    SingularPointError,
    ZeroPolynomialError,
)
from src.core.polyring import IntPolynomial, is_primitive_vector, sup_norm
from src.core.sharding import run_sharded

logger = logging.getLogger(__name__)


class SmoothnessStatus(str, Enum):
    CERTIFIED_DIAGONAL = "certified-smooth-diagonal"
    NO_SINGULAR_MOD_P = "no-singular-points-mod-p-list"
    SINGULAR = "singular-with-witness"


class SliceDefect(str, Enum):
    DEGREE_DROP = "degree-drop"
    SINGULAR = "singular"
    VANISHES = "vanishes"


@dataclass(frozen=True)
class Witness:
    """奇异点见证；prime 为 None 时是精确的有理点"""

    point: Tuple[int, ...]
    prime: Optional[int] = None

    def to_dict(self) -> Dict:
        return {"prime": self.prime, "point": list(self.point)}


@dataclass
class SmoothnessVerdict:
    status: SmoothnessStatus
    witnesses: List[Witness] = field(default_factory=list)
    primes_checked: List[int] = field(default_factory=list)
    clean_primes: List[int] = field(default_factory=list)
    # 只在没有干净素数时于 Q 上精确判定；None 表示未判定
    singular_over_closure: Optional[bool] = None

    @property
    def is_singular(self) -> bool:
        return self.status == SmoothnessStatus.SINGULAR

    @property
    def is_known_singular(self) -> bool:
        """有理奇异点，或精确判定在代数闭包上奇异"""
        return self.is_singular or bool(self.singular_over_closure)

    def to_dict(self) -> Dict:
        return {
            "status": self.status.value,
            "witnesses": [w.to_dict() for w in self.witnesses],
            "primes_checked": list(self.primes_checked),
            "clean_primes": list(self.clean_primes),
            "singular_over_closure": self.singular_over_closure,
        }


@dataclass
class SliceReport:
    """沿方向 a、取值 k 的超平面切片分析结果"""

    direction: Tuple[int, ...]
    completion: Tuple[Tuple[int, ...], ...]
    good_value: int
    bad_values: List[Tuple[int, SliceDefect]] = field(default_factory=list)
    rejected_directions: List[Tuple[Tuple[int, ...], str]] = field(default_factory=list)
    sliced: Optional[IntPolynomial] = None

    def to_dict(self) -> Dict:
        return {
            "direction": list(self.direction),
            "completion": [list(row) for row in self.completion],
            "good_value": self.good_value,
            "bad_values": [{"kappa": k, "reason": r.value} for k, r in self.bad_values],
            "rejected_directions": [
                {"direction": list(d), "reason": r} for d, r in self.rejected_directions
            ],
            "slice": self.sliced.to_text("t") if self.sliced is not None else None,
        }


# ---------- 有限域上的穷举 ----------


def _affine_grid(size: int, prime: int) -> np.ndarray:
    if size == 0:
        return np.zeros((1, 0), dtype=np.int64)
    return np.indices((prime,) * size, dtype=np.int64).reshape(size, -1).T


def projective_chunks(arity: int, prime: int) -> List[Tuple[int, Optional[int]]]:
    """
    射影空间 P^{arity-1}(F_p) 的分块描述

    每个块为 (首个非零坐标位置, 下一坐标取值)，按首坐标分片
    """
    chunks: List[Tuple[int, Optional[int]]] = []
    for lead in range(arity):
        if lead == arity - 1:
            chunks.append((lead, None))
        else:
            chunks.extend((lead, v) for v in range(prime))
    return chunks


def chunk_points(arity: int, prime: int, lead: int, value: Optional[int]) -> np.ndarray:
    """生成一个块内的规范化射影点（首个非零坐标为 1）"""
    if value is None:
        point = np.zeros((1, arity), dtype=np.int64)
        point[0, lead] = 1
        return point
    rest = _affine_grid(arity - lead - 2, prime)
    points = np.zeros((rest.shape[0], arity), dtype=np.int64)
    points[:, lead] = 1
    points[:, lead + 1] = value
    points[:, lead + 2:] = rest
    return points


def _singular_chunk(task: Tuple[IntPolynomial, int, int, Optional[int]]) -> List[Tuple[int, ...]]:
    form, prime, lead, value = task
    points = chunk_points(form.arity, prime, lead, value)
    mask = form.evaluate_mod_many(points, prime) == 0
    for partial in form.gradient():
        if not mask.any():
            break
        mask &= partial.evaluate_mod_many(points, prime) == 0
    return [tuple(int(v) for v in row) for row in points[mask]]


def find_singular_points_mod_p(
    form: IntPolynomial, prime: int, shards: int = 1, cap: Optional[int] = None
) -> List[Tuple[int, ...]]:
    """
    穷举 F_p 上所有射影奇异点（F 与全部偏导同时为零）

    返回规范化坐标的有序列表，空列表表示约化在 F_p 点上光滑
    """
    if not form.is_homogeneous:
        raise NotHomogeneousError("奇异点扫描要求齐次形式")
    cap = cap if cap is not None else settings.MODP_SCAN_CAP
    if prime > cap:
        raise ParameterRangeError(f"素数 {prime} 超出穷举上限 {cap}")
    reduced = form.reduce_mod_p(prime)
    if reduced.is_zero:
        raise ZeroPolynomialError(f"多项式模 {prime} 恒为零，不做扫描")
    tasks = [(reduced, prime, lead, value) for lead, value in projective_chunks(form.arity, prime)]
    found: List[Tuple[int, ...]] = []
    for part in run_sharded(_singular_chunk, tasks, shards):
        found.extend(part)
    return sorted(found)


# ---------- 光滑性判定 ----------


def is_diagonal(form: IntPolynomial) -> bool:
    """Σ c_i X_i^d 且每个变量恰出现一次、c_i ≠ 0"""
    if form.is_zero or not form.is_homogeneous or form.degree < 1:
        return False
    seen = set()
    for exponents, _ in form.terms:
        support = [i for i, e in enumerate(exponents) if e]
        if len(support) != 1:
            return False
        seen.add(support[0])
    return len(seen) == form.arity == len(form.terms)


def find_rational_singular_points(form: IntPolynomial, radius: int) -> List[Tuple[int, ...]]:
    """高度不超过 radius 的本原整点中，F 与全部偏导同时为零的点（首个非零坐标为正）"""
    values = np.arange(-radius, radius + 1, dtype=np.int64)
    grid = np.array(list(itertools.product(values, repeat=form.arity)), dtype=np.int64)
    mask = form.evaluate_many(grid) == 0
    for partial in form.gradient():
        if not mask.any():
            break
        mask &= partial.evaluate_many(grid) == 0
    witnesses = []
    for row in grid[mask]:
        point = tuple(int(v) for v in row)
        nonzero = [v for v in point if v]
        if nonzero and nonzero[0] > 0 and is_primitive_vector(point):
            witnesses.append(point)
    return sorted(witnesses)


def _sympy_gradient(form: IntPolynomial) -> Tuple[Tuple, List]:
    gens = symbols(f"x0:{form.arity}")
    partials = [
        Poly.from_dict(dict(partial.terms), *gens).as_expr()
        for partial in form.gradient()
        if not partial.is_zero
    ]
    return gens, partials


def _primitive_witness(values: Sequence[Rational]) -> Optional[Tuple[int, ...]]:
    if not all(v.is_Rational for v in values):
        return None
    scale = math.lcm(*(int(v.q) for v in values))
    ints = [int(v * scale) for v in values]
    g = math.gcd(*ints)
    if g == 0:
        return None
    ints = [v // g for v in ints]
    if next(v for v in ints if v) < 0:
        ints = [-v for v in ints]
    return tuple(ints)


def exact_singular_locus(form: IntPolynomial) -> Tuple[bool, List[Tuple[int, ...]]]:
    """
    在 Q 上精确判定射影超曲面是否奇异

    特征 0 下由 Euler 恒等式，奇异点即全部偏导的非零公共零点；
    偏导理想的 Gröbner 基为零维（或含常数）时只有原点。
    奇异时尝试从求解结果中取出有理奇异点，每个都经过代入复核
    """
    gens, partials = _sympy_gradient(form)
    if not partials:
        return False, []
    basis = groebner(partials, *gens, order="grevlex")
    if any(poly.is_ground for poly in basis.polys) or basis.is_zero_dimensional:
        return False, []

    witnesses = set()
    try:
        solutions = solve(list(basis.exprs), gens, dict=True)
    except (NotImplementedError, TypeError, ValueError) as e:
        logger.info(f"奇异轨迹无法显式求解: {e}")
        solutions = []
    for solution in solutions:
        free = [g for g in gens if g not in solution]
        choices = [{g: int(g == chosen) for g in free} for chosen in free] or [{}]
        for choice in choices:
            values = [solution[g].subs(choice) if g in solution else choice[g] for g in gens]
            point = _primitive_witness([Rational(v) if isinstance(v, int) else v for v in values])
            if point is None:
                continue
            if form.evaluate(point) == 0 and all(p.evaluate(point) == 0 for p in form.gradient()):
                witnesses.add(point)
    return True, sorted(witnesses)


def smoothness_verdict(
    poly: IntPolynomial,
    primes: Optional[Sequence[int]] = None,
    witness_radius: Optional[int] = None,
    shards: int = 1,
) -> SmoothnessVerdict:
    """
    判断超曲面光滑性

    仿射多项式先齐次化到其射影模型。对角形式解析地确认光滑；
    否则先搜索小高度的有理奇异点，再在证据素数上穷举奇异点。
    所有证据素数都有奇异点时改在 Q 上精确判定，
    只有找到有理奇异点才给出 singular-with-witness
    """
    if poly.is_zero:
        raise ZeroPolynomialError("零多项式没有光滑性可言")
    form = poly if poly.is_homogeneous else poly.homogenize()
    if is_diagonal(form):
        return SmoothnessVerdict(SmoothnessStatus.CERTIFIED_DIAGONAL)

    radius = witness_radius if witness_radius is not None else settings.WITNESS_RADIUS
    exact = find_rational_singular_points(form, radius)
    if exact:
        return SmoothnessVerdict(
            SmoothnessStatus.SINGULAR, [Witness(point) for point in exact[:8]]
        )

    primes = list(primes) if primes is not None else list(settings.EVIDENCE_PRIMES)
    checked: List[int] = []
    clean: List[int] = []
    modular: List[Witness] = []
    for prime in primes:
        try:
            points = find_singular_points_mod_p(form, prime, shards=shards)
        except ZeroPolynomialError:
            logger.info(f"多项式模 {prime} 恒为零，跳过该素数")
            continue
        except ParameterRangeError as e:
            logger.warning(f"跳过素数 {prime}: {e}")
            continue
        checked.append(prime)
        if points:
            modular.extend(Witness(point, prime) for point in points[:4])
        else:
            clean.append(prime)
    if clean:
        return SmoothnessVerdict(SmoothnessStatus.NO_SINGULAR_MOD_P, [], checked, clean)

    logger.info(f"证据素数 {checked} 上都有奇异点，改在 Q 上精确判定")
    singular, rational = exact_singular_locus(form)
    if rational:
        return SmoothnessVerdict(
            SmoothnessStatus.SINGULAR, [Witness(point) for point in rational[:8]], checked, [], True
        )
    if singular:
        logger.warning("超曲面在代数闭包上奇异，但没有找到有理奇异点")
    return SmoothnessVerdict(SmoothnessStatus.NO_SINGULAR_MOD_P, modular, checked, [], singular)


# ---------- 切平面截线 ----------


def _rank(vectors: Sequence[Sequence[int]], prime: Optional[int]) -> int:
    """向量组在 Q（prime 为 None）或 F_p 上的秩"""
    if prime is None:
        return Matrix([list(vec) for vec in vectors]).rank()
    field_ = GF(prime)
    rows = [[field_(int(v)) for v in vec] for vec in vectors]
    return DomainMatrix(rows, (len(rows), len(rows[0])), field_).rank()


def tangent_section_multiplicity(
    form: IntPolynomial, point: Sequence[int], prime: Optional[int] = None
) -> int:
    """
    点在切平面截线 X ∩ T_x(X) 上的重数

    把点平移到切平面内的坐标原点，取最低的非零齐次部分的次数；
    prime 给定时在 F_p 上计算。U 的判定即重数 ≤ 2
    """
    if not form.is_homogeneous:
        raise NotHomogeneousError("切平面截线要求齐次形式")
    if form.arity < 3:
        raise ArityMismatchError("切平面截线至少需要三个变量")
    if len(point) != form.arity:
        raise ArityMismatchError("点的维数与形式元数不一致")
    point = [int(v) % prime if prime else int(v) for v in point]
    if not any(point):
        raise ValueError("零向量不代表射影点")

    def vanishes(value: int) -> bool:
        return value % prime == 0 if prime else value == 0

    if not vanishes(form.evaluate(point)):
        raise ValueError(f"点 {point} 不在超曲面上")
    grad = [partial.evaluate(point) for partial in form.gradient()]
    if prime:
        grad = [g % prime for g in grad]
    if all(vanishes(g) for g in grad):
        raise SingularPointError(f"点 {point} 是奇异点，截线重数无定义")

    j = next(i for i, g in enumerate(grad) if not vanishes(g))
    candidates = []
    for i in range(form.arity):
        if i == j:
            continue
        vec = [0] * form.arity
        vec[i] = grad[j]
        vec[j] = -grad[i]
        candidates.append(vec)
    basis: List[List[int]] = []
    for vec in candidates:
        if _rank([point] + basis + [vec], prime) > len(basis) + 1:
            basis.append(vec)
        if len(basis) == form.arity - 2:
            break

    matrix = [[vec[row] for vec in basis] for row in range(form.arity)]
    section = form.transform(matrix, point)
    if prime:
        section = section.reduce_mod_p(prime)
    if section.is_zero:
        raise DegenerateTangentSectionError(f"点 {point} 处切平面包含于超曲面")
    multiplicity = min(sum(e) for e, _ in section.terms)
    return multiplicity


# ---------- 幺模补全 ----------


def unimodular_completion(direction: Sequence[int]) -> Tuple[Tuple[int, ...], ...]:
    """
    以本原向量 a 为第一行的 det = 1 整数矩阵

    用扩展欧几里得式的列变换把 a 化为 e_1，同时记录逆变换；
    其余各行再按第一行做贪心约化
    """
    a = [int(v) for v in direction]
    n = len(a)
    if not is_primitive_vector(a):
        raise ValueError(f"方向 {tuple(a)} 不是本原向量")
    if n == 1:
        if a[0] != 1:
            raise ValueError("一维情形只有方向 (1) 可以补全为行列式 1 的矩阵")
        return ((1,),)

    v = list(a)
    inverse = [[1 if i == j else 0 for j in range(n)] for i in range(n)]

    def add_column(target: int, source: int, q: int):
        # 列 target += q·列 source，对应逆矩阵行 source -= q·行 target
        v[target] += q * v[source]
        inverse[source] = [x - q * y for x, y in zip(inverse[source], inverse[target])]

    while sum(1 for x in v if x) > 1:
        m = min((i for i in range(n) if v[i]), key=lambda i: (abs(v[i]), i))
        for k in range(n):
            if k != m and v[k]:
                add_column(k, m, -(v[k] // v[m]))
    m = next(i for i in range(n) if v[i])
    if m != 0:
        v[0], v[m] = v[m], v[0]
        inverse[0], inverse[m] = inverse[m], inverse[0]
    if v[0] < 0:
        v[0] = -v[0]
        inverse[0] = [-x for x in inverse[0]]

    rows = inverse
    norm = sum(x * x for x in a)
    for i in range(1, n):
        q = round(Fraction(sum(x * y for x, y in zip(rows[i], a)), norm))
        if q:
            rows[i] = [x - q * y for x, y in zip(rows[i], a)]
    if Matrix(rows).det() == -1:
        rows[1] = [-x for x in rows[1]]
    return tuple(tuple(row) for row in rows)


def inverse_matrix(matrix: Sequence[Sequence[int]]) -> Tuple[Tuple[int, ...], ...]:
    inverse = Matrix(matrix).inv()
    return tuple(tuple(int(x) for x in inverse.row(i)) for i in range(inverse.rows))


def rotated_polynomial(poly: IntPolynomial, completion: Sequence[Sequence[int]]) -> IntPolynomial:
    """g(S) = f(A^{-1} S)，使得 S_1 = a·T"""
    return poly.transform(inverse_matrix(completion))


def classify_slice(
    degree: int, sliced: IntPolynomial, primes: Optional[Sequence[int]] = None
) -> Optional[SliceDefect]:
    """切片为好切片时返回 None，否则返回缺陷原因"""
    if sliced.is_zero:
        return SliceDefect.VANISHES
    if sliced.degree < degree:
        return SliceDefect.DEGREE_DROP
    # 切片是仿射多项式，按其射影闭包判断
    if smoothness_verdict(sliced.homogenize(degree), primes).is_known_singular:
        return SliceDefect.SINGULAR
    return None


def _value_order(bound: int) -> Iterator[int]:
    yield 0
    for k in range(1, bound + 1):
        yield k
        yield -k


def bad_slice_values(
    poly: IntPolynomial,
    direction: Sequence[int],
    range_bound: int,
    primes: Optional[Sequence[int]] = None,
) -> List[Tuple[int, SliceDefect]]:
    """扫描 |κ| ≤ range_bound，报告所有坏超平面截面 a·T = κ"""
    if poly.arity < 2:
        raise ArityMismatchError("切片至少需要两个变量")
    completion = unimodular_completion(direction)
    rotated = rotated_polynomial(poly, completion)
    degree = int(poly.degree)
    bad = []
    for kappa in range(-range_bound, range_bound + 1):
        defect = classify_slice(degree, rotated.slice(0, kappa), primes)
        if defect is not None:
            bad.append((kappa, defect))
    return bad


def candidate_directions(arity: int, radius: int) -> List[Tuple[int, ...]]:
    """半径内的本原方向（首个非零分量为正），按范数与字典序排列"""
    directions = []
    for vec in itertools.product(range(-radius, radius + 1), repeat=arity):
        nonzero = [x for x in vec if x]
        if nonzero and nonzero[0] > 0 and is_primitive_vector(vec):
            directions.append(vec)
    directions.sort(key=lambda v: (sup_norm(v), sum(abs(x) for x in v), tuple(-x for x in v)))
    return directions


def good_slice_search(
    poly: IntPolynomial,
    radius: Optional[int] = None,
    max_radius: Optional[int] = None,
    primes: Optional[Sequence[int]] = None,
    assume_smooth: bool = False,
) -> SliceReport:
    """
    构造性的好切片搜索

    在 |a| ≤ radius 的本原方向与整数 k 中寻找第一个使切片保持次数
    且通过光滑性证据的组合；找不到时半径加倍直至 max_radius
    """
    if poly.is_zero:
        raise ZeroPolynomialError("零多项式没有切片")
    if poly.arity < 2:
        raise ArityMismatchError("切片至少需要两个变量")
    if not assume_smooth and smoothness_verdict(poly, primes).is_known_singular:
        raise SingularPointError("多项式奇异，需显式 assume_smooth 才能搜索切片")

    radius = radius or settings.SLICE_RADIUS
    max_radius = max(max_radius or settings.SLICE_MAX_RADIUS, radius)
    degree = int(poly.degree)
    # 每个方向已经检验过的 |k| 上限；补全过大的方向尚未检验任何 k
    tried: Dict[Tuple[int, ...], int] = {}
    rejected: Dict[Tuple[int, ...], str] = {}

    current = radius
    while current <= max_radius:
        for direction in candidate_directions(poly.arity, current):
            previous = tried.get(direction, -1)
            if previous >= current:
                continue
            completion = unimodular_completion(direction)
            if max(abs(x) for row in completion for x in row) > current:
                rejected[direction] = "completion-too-large"
                continue
            tried[direction] = current
            rotated = rotated_polynomial(poly, completion)
            for k in _value_order(current):
                if abs(k) <= previous:
                    continue
                sliced = rotated.slice(0, k)
                if classify_slice(degree, sliced, primes) is None:
                    bad = [
                        (kappa, defect)
                        for kappa in range(-current, current + 1)
                        for defect in [classify_slice(degree, rotated.slice(0, kappa), primes)]
                        if defect is not None
                    ]
                    logger.info(f"找到好切片: 方向 {direction}, k = {k}")
                    rejected.pop(direction, None)
                    return SliceReport(
                        direction, completion, k, bad, list(rejected.items()), sliced
                    )
            rejected[direction] = "no-integral-good-value"
        logger.info(f"半径 {current} 内没有好切片，半径加倍")
        current *= 2
    raise SearchExhaustedError(f"半径 {max_radius} 内没有找到好切片")
