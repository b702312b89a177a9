"""
闭式指数、对数-对数斜率拟合与界的符合性报告
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import sympy

from config.settings import settings
from src.core.census import CountSeries
from src.core.errors import ParameterRangeError, SeriesError

logger = logging.getLogger(__name__)


def _require(condition: bool, message: str):
    if not condition:
        raise ParameterRangeError(message)


def theorem1_exponent(d: int, n: int) -> float:
    """n - 2 + 2/√d + 1/(d-1) - 1/((d-2)√d)"""
    _require(d >= 4 and n >= 3, f"theorem1 要求 d ≥ 4, n ≥ 3 (d={d}, n={n})")
    return n - 2 + 2 / math.sqrt(d) + 1 / (d - 1) - 1 / ((d - 2) * math.sqrt(d))


def theorem2_exponent(delta: int) -> float:
    _require(delta >= 4, f"theorem2 要求 δ ≥ 4 (δ={delta})")
    return 2 / math.sqrt(delta) + 1 / (delta - 1) - 1 / ((delta - 2) * math.sqrt(delta))


def proposition1_exponent(d: int, k: int) -> float:
    _require(d >= 3 and 2 <= k <= d - 1, f"proposition1 要求 2 ≤ k ≤ d-1 (d={d}, k={k})")
    return 2 / math.sqrt(d) + 1 / (k + 1) - 1 / (k * math.sqrt(d))


def sand_exponent(d: int, n: int) -> float:
    """d = 3 与 d ≥ 4 两个分支"""
    _require(d >= 3 and n >= 3, f"sand 要求 d ≥ 3, n ≥ 3 (d={d}, n={n})")
    if d == 3:
        return n - 7 / 4 + 5 / (3 * math.sqrt(3))
    return n - 5 / 3 + 3 / (2 * math.sqrt(d))


def hb_theta(d: int) -> float:
    _require(d >= 2, f"hb_theta 要求 d ≥ 2 (d={d})")
    return 2 / math.sqrt(d) + 2 / (d - 1)


def cor1_theta(d: int) -> float:
    _require(d >= 3, f"cor1_theta 要求 d ≥ 3 (d={d})")
    return 2 / math.sqrt(d) + 1 / (d - 1) - 1 / ((d - 2) * math.sqrt(d))


def pila_exponent(delta: int) -> float:
    _require(delta >= 1, f"pila 要求 δ ≥ 1 (δ={delta})")
    return 1 / delta


def lemma7_exponent(d: int, e: int) -> float:
    _require(e >= 3 and d >= 2, f"lemma7 要求 e ≥ 3, d ≥ 2 (d={d}, e={e})")
    return 1 / e - 1 / ((e - 1) * math.sqrt(d))


def proposition2_exponent(delta: int, nu: int) -> float:
    """仿射超曲面：max(ν-2, ν-3+θ)"""
    _require(delta >= 4 and nu >= 3, f"proposition2 要求 δ ≥ 4, ν ≥ 3 (δ={delta}, ν={nu})")
    return max(nu - 2, nu - 3 + theorem2_exponent(delta))


def paucity_exponent(d: int, s: int) -> float:
    """非平凡等幂和个数的指数 2s - 3 + max(1/3, θ_d)"""
    _require(s >= 2, f"paucity 要求 s ≥ 2 (s={s})")
    return 2 * s - 3 + max(1 / 3, cor1_theta(d))


def trivial_exponent(n: int) -> float:
    _require(n >= 1, f"trivial 要求 n ≥ 1 (n={n})")
    return float(n)


def trivial_rd_exponent(d: int) -> float:
    _require(d >= 2, f"trivial_rd 要求 d ≥ 2 (d={d})")
    return 1 / d


def heuristic_exponent(d: int, n: int) -> float:
    _require(d >= 1 and n >= 1, f"heuristic 要求 d, n ≥ 1 (d={d}, n={n})")
    return float(n + 1 - d)


def conjecture1_exponent(n: int) -> float:
    _require(n >= 1, f"conjecture1 要求 n ≥ 1 (n={n})")
    return float(n - 1)


def zero_dim_exponent(d: int) -> float:
    """#U_p(F_p) 层面的零维分量个数指数 2/√d"""
    _require(d >= 2, f"zero_dim 要求 d ≥ 2 (d={d})")
    return 2 / math.sqrt(d)


# 公式名 -> (数值函数, 参数名)
FORMULAS: Dict[str, Tuple[Callable[..., float], Tuple[str, ...]]] = {
    "theorem1": (theorem1_exponent, ("d", "n")),
    "theorem2": (theorem2_exponent, ("delta",)),
    "proposition1": (proposition1_exponent, ("d", "k")),
    "proposition2": (proposition2_exponent, ("delta", "nu")),
    "sand": (sand_exponent, ("d", "n")),
    "hb_theta": (hb_theta, ("d",)),
    "cor1_theta": (cor1_theta, ("d",)),
    "pila": (pila_exponent, ("delta",)),
    "lemma7": (lemma7_exponent, ("d", "e")),
    "paucity": (paucity_exponent, ("d", "s")),
    "trivial": (trivial_exponent, ("n",)),
    "trivial_rd": (trivial_rd_exponent, ("d",)),
    "heuristic": (heuristic_exponent, ("d", "n")),
    "conjecture1": (conjecture1_exponent, ("n",)),
    "zero_dim": (zero_dim_exponent, ("d",)),
}

_d, _n, _k, _e, _s, _delta, _nu = sympy.symbols("d n k e s delta nu", positive=True, integer=True)


def _symbolic_templates() -> Dict[str, sympy.Expr]:
    sqrt = sympy.sqrt
    theta_delta = 2 / sqrt(_delta) + 1 / (_delta - 1) - 1 / ((_delta - 2) * sqrt(_delta))
    theta_d = 2 / sqrt(_d) + 1 / (_d - 1) - 1 / ((_d - 2) * sqrt(_d))
    return {
        "theorem1": _n - 2 + theta_d,
        "theorem2": theta_delta,
        "proposition1": 2 / sqrt(_d) + 1 / (_k + 1) - 1 / (_k * sqrt(_d)),
        "proposition2": sympy.Max(_nu - 2, _nu - 3 + theta_delta),
        "hb_theta": 2 / sqrt(_d) + 2 / (_d - 1),
        "cor1_theta": theta_d,
        "pila": 1 / _delta,
        "lemma7": 1 / _e - 1 / ((_e - 1) * sqrt(_d)),
        "paucity": 2 * _s - 3 + sympy.Max(sympy.Rational(1, 3), theta_d),
        "trivial": _n,
        "trivial_rd": 1 / _d,
        "heuristic": _n + 1 - _d,
        "conjecture1": _n - 1,
        "zero_dim": 2 / sqrt(_d),
    }


_SYMBOLS = {"d": _d, "n": _n, "k": _k, "e": _e, "s": _s, "delta": _delta, "nu": _nu}


def symbolic_exponent(formula: str, params: Dict[str, int]) -> sympy.Expr:
    """精确的符号闭式，用于审计"""
    if formula == "sand":
        d, n = int(params["d"]), int(params["n"])
        sand_exponent(d, n)
        if d == 3:
            return sympy.nsimplify(n) - sympy.Rational(7, 4) + 5 / (3 * sympy.sqrt(3))
        return sympy.nsimplify(n) - sympy.Rational(5, 3) + 3 / (2 * sympy.sqrt(d))
    template = _symbolic_templates()[formula]
    values = {_SYMBOLS[name]: sympy.Integer(int(v)) for name, v in params.items() if name in _SYMBOLS}
    return sympy.simplify(template.subs(values))


def _parameters(formula: str, params: Dict[str, int]) -> Dict[str, int]:
    if formula not in FORMULAS:
        raise ParameterRangeError(f"未知公式: {formula}")
    _, names = FORMULAS[formula]
    missing = [name for name in names if params.get(name) is None]
    if missing:
        raise ParameterRangeError(f"公式 {formula} 缺少参数: {', '.join(missing)}")
    return {name: int(params[name]) for name in names}


def exponent_value(formula: str, params: Dict[str, int]) -> float:
    chosen = _parameters(formula, params)
    func, _ = FORMULAS[formula]
    return func(**chosen)


def bound_exponent(formula: str, params: Dict[str, int]) -> float:
    """
    完整上界中占主导的指数

    theorem1 含 B^{n-1} 项，theorem2 含 B^1 项；r_d 的 θ 以 N 为变量时除以 d
    """
    chosen = _parameters(formula, params)
    value = exponent_value(formula, chosen)
    if formula == "theorem1":
        return max(chosen["n"] - 1, value)
    if formula == "theorem2":
        return max(1.0, value)
    if formula in ("hb_theta", "cor1_theta"):
        return value / chosen["d"]
    return value


@dataclass
class FitResult:
    slope: float
    intercept: float
    residual: float
    points_used: int

    def to_dict(self) -> Dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "points_used": self.points_used,
        }


@dataclass
class ExponentReport:
    formula: str
    params: Dict[str, int]
    value: float
    symbolic: str
    fitted_slope: Optional[float] = None
    fitted_intercept: Optional[float] = None
    residual: Optional[float] = None

    def to_dict(self) -> Dict:
        payload = {
            "formula": self.formula,
            "params": dict(self.params),
            "value": self.value,
            "symbolic": self.symbolic,
        }
        if self.fitted_slope is not None:
            payload.update(
                fitted_slope=self.fitted_slope,
                fitted_intercept=self.fitted_intercept,
                residual=self.residual,
            )
        return payload


def fit_exponent(series: CountSeries) -> FitResult:
    """对 (log B, log count) 做最小二乘直线拟合，残差取最大绝对偏差"""
    points = [(b, c) for b, c in series.points if c > 0]
    if len(points) < 3:
        raise SeriesError(f"拟合至少需要 3 个正计数点，当前 {len(points)} 个")
    x = np.log(np.array([b for b, _ in points], dtype=float))
    y = np.log(np.array([c for _, c in points], dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.max(np.abs(y - (slope * x + intercept))))
    return FitResult(float(slope), float(intercept), residual, len(points))


def exponent_report(
    formula: str, params: Dict[str, int], series: Optional[CountSeries] = None
) -> ExponentReport:
    chosen = _parameters(formula, params)
    report = ExponentReport(
        formula,
        chosen,
        exponent_value(formula, chosen),
        str(symbolic_exponent(formula, chosen)),
    )
    if series is not None:
        fit = fit_exponent(series)
        report.fitted_slope = fit.slope
        report.fitted_intercept = fit.intercept
        report.residual = fit.residual
    return report


@dataclass
class ComplianceReport:
    formula: str
    params: Dict[str, int]
    exponent: float
    eps: float
    constant: float
    compliant: bool
    low_confidence: bool
    violations: List[Tuple[int, int]] = field(default_factory=list)

    @property
    def message(self) -> str:
        verdict = "consistent with" if self.compliant else "not consistent with"
        text = (
            f"{verdict} O(B^{self.exponent:.6f}+{self.eps}) "
            f"(C = {self.constant:.6g} calibrated at the largest B)"
        )
        if self.low_confidence:
            text += "; low confidence: fewer than 3 points"
        return text

    def to_dict(self) -> Dict:
        return {
            "formula": self.formula,
            "params": dict(self.params),
            "exponent": self.exponent,
            "eps": self.eps,
            "constant": self.constant,
            "compliant": self.compliant,
            "low_confidence": self.low_confidence,
            "violations": [list(v) for v in self.violations],
            "message": self.message,
        }


def bound_report(
    series: CountSeries,
    formula: str,
    params: Dict[str, int],
    eps: Optional[float] = None,
) -> ComplianceReport:
    """
    以最大 B 处标定常数 C = count / B^{e+ε}

    若某个较小的 B 到最大 B 的增长超过 (B_max/B)^{e+ε}，即 count(B) < C·B^{e+ε}，
    记为违例。计数为零的点不参与比较
    """
    if len(series) == 0:
        raise SeriesError("空序列无法给出报告")
    eps = settings.DEFAULT_EPS if eps is None else eps
    chosen = _parameters(formula, params)
    exponent = bound_exponent(formula, chosen)
    power = exponent + eps
    top_bound, top_count = series.points[-1]
    constant = top_count / top_bound ** power

    violations = []
    for bound, count in series.points[:-1]:
        if count <= 0:
            continue
        if count < constant * bound ** power * (1 - 1e-9):
            violations.append((bound, count))
    report = ComplianceReport(
        formula, chosen, exponent, eps, constant, not violations, len(series) < 3, violations
    )
    logger.info(f"{series.experiment_id}: {report.message}")
    return report
