"""
实验编排：在几何 B 网格上逐点计数，每个点算完立即写库并追加到 CSV，
同一规格再次运行时从库中恢复已完成的点
"""

import json
import logging
import time
from dataclasses import dataclass
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from sympy import nextprime

from src import __version__
from src.core.census import (
    CountSeries,
    check_homogeneous,
    count_affine,
    count_curve_points,
    count_mod_p,
    count_off_lines,
    count_projective,
)
from src.core.diophantine import equal_sums, r_d_batch
from src.core.errors import ArityMismatchError, SpecValidationError
from src.core.polyring import IntPolynomial, load_polynomial
from src.data.database import ResultStore
from src.utils.logger import log_performance
from src.utils.utils import ResultExporter, spec_hash

logger = logging.getLogger(__name__)

Mode = Literal["affine", "projective", "modp", "r3", "equal-sums", "curve", "lines"]
Engine = Literal["brute", "slice", "sieve", "split", "auto"]

# 不影响结果的字段不参与规格哈希
_NON_SEMANTIC_FIELDS = {"shards", "output", "json_output", "name"}


class GridSpec(BaseModel):
    start: int = Field(ge=1)
    factor: float = Field(gt=1)
    steps: int = Field(ge=1)

    def bounds(self) -> List[int]:
        return [int(round(self.start * self.factor ** k)) for k in range(self.steps)]

    @model_validator(mode="after")
    def _strictly_increasing(self):
        values = self.bounds()
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError(f"B 网格取整后不是严格递增: {values}")
        return self


class ExperimentSpec(BaseModel):
    """一次实验的完整描述"""

    name: Optional[str] = None
    mode: Mode
    polynomial: Optional[str] = None
    polynomial_file: Optional[str] = None
    grid: GridSpec
    engine: Engine = "auto"
    shards: int = Field(default=1, ge=1)
    d: int = Field(default=3, ge=2)
    s: int = Field(default=2, ge=2)
    identify_antipodes: bool = False
    sample_size: Optional[int] = Field(default=None, ge=2)
    seed: Optional[int] = None
    output: Optional[str] = None
    json_output: Optional[str] = None

    @field_validator("polynomial")
    @classmethod
    def _strip(cls, value: Optional[str]) -> Optional[str]:
        return value.strip() if value else value

    @model_validator(mode="after")
    def _check_polynomial(self):
        if self.mode == "r3":
            return self
        if not self.polynomial and not self.polynomial_file:
            raise ValueError(f"模式 {self.mode} 需要 polynomial 或 polynomial_file")
        poly = self.load_polynomial()
        if self.mode in ("projective", "modp", "lines"):
            check_homogeneous(poly)
        if self.mode == "lines" and poly.arity < 3:
            raise ArityMismatchError("直线检测至少需要三个变量")
        if self.mode == "curve" and poly.arity != 2:
            raise ArityMismatchError(f"curve 模式需要二元多项式，实际元数 {poly.arity}")
        if self.mode == "equal-sums" and poly.arity != 1:
            raise ArityMismatchError(f"equal-sums 模式需要一元多项式，实际元数 {poly.arity}")
        return self

    @classmethod
    def load(cls, payload: Dict) -> "ExperimentSpec":
        try:
            return cls.model_validate(payload)
        except ValidationError as e:
            raise SpecValidationError(f"实验规格无效:\n{e}") from e

    @classmethod
    def from_file(cls, path: str) -> "ExperimentSpec":
        with open(path, "r", encoding="utf-8") as f:
            return cls.load(json.load(f))

    def load_polynomial(self) -> Optional[IntPolynomial]:
        if self.mode == "r3":
            return None
        if self.polynomial:
            return load_polynomial(self.polynomial)
        with open(self.polynomial_file, "r", encoding="utf-8") as f:
            return load_polynomial(f.read())

    def bounds(self) -> List[int]:
        """modp 模式下网格点换成不小于它的最小素数"""
        values = self.grid.bounds()
        if self.mode != "modp":
            return values
        primes: List[int] = []
        for value in values:
            prime = int(nextprime(value - 1))
            if primes and prime <= primes[-1]:
                logger.warning(f"网格点 {value} 对应的素数 {prime} 重复，已跳过")
                continue
            primes.append(prime)
        return primes

    def semantic_payload(self) -> Dict:
        payload = self.model_dump(exclude=_NON_SEMANTIC_FIELDS)
        payload["polynomial"] = self.load_polynomial().to_json_dict() if self.mode != "r3" else None
        payload.pop("polynomial_file", None)
        return payload

    @property
    def experiment_id(self) -> str:
        return spec_hash(self.semantic_payload())


@dataclass
class ExperimentResult:
    experiment_id: str
    series: CountSeries
    csv_path: Optional[str]
    resumed_points: int

    def to_dict(self) -> Dict:
        return {
            "experiment_id": self.experiment_id,
            "points": [list(p) for p in self.series.points],
            "csv": self.csv_path,
            "resumed_points": self.resumed_points,
        }


class ExperimentRunner:
    def __init__(self, store: ResultStore, exporter: Optional[ResultExporter] = None):
        self.store = store
        self.exporter = exporter or ResultExporter()

    def measure(self, spec: ExperimentSpec, poly: Optional[IntPolynomial], bound: int) -> int:
        """单个网格点上的计数"""
        if spec.mode == "affine":
            return count_affine(poly, bound, spec.engine, spec.shards)
        if spec.mode == "projective":
            return count_projective(poly, bound, spec.engine, spec.shards, spec.identify_antipodes)
        if spec.mode == "modp":
            return count_mod_p(poly, bound, spec.shards).projective_count
        if spec.mode == "r3":
            return r_d_batch(bound, spec.d, spec.shards).max_r
        if spec.mode == "equal-sums":
            return equal_sums(poly, spec.s, bound, spec.shards).nontrivial
        if spec.mode == "curve":
            return count_curve_points(poly, bound)
        census = count_off_lines(poly, bound, spec.sample_size, spec.seed)
        logger.info(f"B = {bound}: 直线上 {census.on_lines}，直线外 {census.off_lines}")
        return census.off_lines

    @log_performance
    def run(self, spec: ExperimentSpec) -> ExperimentResult:
        experiment_id = spec.experiment_id
        payload = json.dumps(spec.semantic_payload(), sort_keys=True)
        if not self.store.save_experiment(experiment_id, payload, __version__):
            logger.info(f"实验 {experiment_id} 已存在，继续未完成的网格点")
        done = self.store.completed_bounds(experiment_id)
        stored = dict(self.store.get_series(experiment_id).points)
        poly = spec.load_polynomial()

        series = CountSeries(experiment_id)
        writer = self.exporter.open_series(spec.output, experiment_id) if spec.output else None
        resumed = 0
        try:
            for bound in spec.bounds():
                if bound in done:
                    count = stored[bound]
                    resumed += 1
                    logger.info(f"B = {bound} 已完成，直接读取: {count}")
                else:
                    started = time.perf_counter()
                    count = self.measure(spec, poly, bound)
                    elapsed = (time.perf_counter() - started) * 1000
                    self.store.save_point(experiment_id, bound, count, elapsed)
                    logger.info(f"B = {bound}: {count} ({elapsed:.1f} ms)")
                series.append(bound, count)
                if writer:
                    writer.write_row(bound, count)
        finally:
            if writer:
                writer.close()

        csv_path = str(writer.path) if writer else None
        result = ExperimentResult(experiment_id, series, csv_path, resumed)
        if spec.json_output:
            self.exporter.export_json(result.to_dict(), spec.json_output, experiment_id)
        return result

    def get_status(self) -> List[Dict]:
        """全部实验及其已完成的网格点数"""
        status = []
        for record in self.store.list_experiments():
            status.append({
                "experiment_id": record.experiment_id,
                "mode": record.spec.get("mode"),
                "points": len(self.store.completed_bounds(record.experiment_id)),
                "tool_version": record.tool_version,
            })
        return status
