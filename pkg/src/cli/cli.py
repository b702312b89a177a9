"""
命令行子命令的实现
每个处理函数返回 CommandOutput，由 emit 按 --json / --csv / 文本三种格式输出
"""

import csv
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from src.core.census import (
    count_affine,
    count_mod_p,
    count_off_lines,
    count_projective,
    detect_lines,
    enumerate_affine,
    enumerate_projective,
    projective_solutions,
    resolve_engine,
)
from src.core.diophantine import equal_sums, r_d, r_d_batch
from src.core.errors import SpecValidationError
from src.core.exponents import FORMULAS, bound_report, exponent_report, fit_exponent
from src.core.polyring import IntPolynomial, load_polynomial
from src.core.runner import ExperimentRunner, ExperimentSpec
from src.core.smoothcheck import bad_slice_values, good_slice_search, smoothness_verdict
from src.data.database import ResultStore
from src.utils.config import settings
from src.utils.logger import get_logger, log_performance
from src.utils.utils import ResultExporter, read_series_csv, spec_hash

logger = get_logger(__name__)

EXPONENT_PARAMS = ("d", "n", "k", "e", "s", "delta", "nu")


@dataclass
class CommandOutput:
    title: str
    payload: Dict[str, Any]
    columns: Optional[List[str]] = None
    rows: List[Sequence] = field(default_factory=list)


def read_polynomial(source: str) -> IntPolynomial:
    """--poly 的取值：多项式文本、JSON，或 @文件路径"""
    if source.startswith("@"):
        source = Path(source[1:]).read_text(encoding="utf-8")
    return load_polynomial(source)


def parse_int_list(raw: Optional[str]) -> Optional[List[int]]:
    if raw is None:
        return None
    try:
        return [int(part) for part in raw.replace(" ", "").split(",") if part]
    except ValueError:
        raise SpecValidationError(f"无法解析整数列表: {raw}")


def _exponent_params(args) -> Dict[str, int]:
    return {name: getattr(args, name) for name in EXPONENT_PARAMS if getattr(args, name, None) is not None}


def _digest(payload: Dict[str, Any]) -> str:
    return spec_hash({k: v for k, v in payload.items() if k not in ("elapsed_ms", "shards")})


@log_performance
def cmd_count(args) -> CommandOutput:
    poly = read_polynomial(args.poly)
    engine = resolve_engine(poly, args.engine)
    if args.prime is not None and engine != "sieve":
        raise SpecValidationError(f"--prime 只用于 sieve 引擎，当前引擎为 {engine}")
    started = time.perf_counter()
    if args.projective:
        count = count_projective(
            poly, args.bound, engine, args.shards, args.identify_antipodes, args.prime
        )
    else:
        count = count_affine(poly, args.bound, engine, args.shards, args.prime)
    elapsed = (time.perf_counter() - started) * 1000
    payload = {
        "polynomial": poly.to_text(),
        "bound": args.bound,
        "projective": args.projective,
        "identify_antipodes": args.identify_antipodes,
        "engine": engine,
        "count": count,
        "elapsed_ms": round(elapsed, 3),
        "shards": args.shards,
    }
    if args.points:
        records = enumerate_projective(poly, args.bound) if args.projective else enumerate_affine(poly, args.bound)
        payload["points_file"] = ResultExporter().export_points(records, args.points, _digest(payload))
    return CommandOutput("整点计数", payload, ["B", "count"], [(args.bound, count)])


@log_performance
def cmd_modp(args) -> CommandOutput:
    poly = read_polynomial(args.poly)
    summary = count_mod_p(poly, args.prime, args.shards)
    return CommandOutput(f"模 {args.prime} 点数", summary.to_dict())


@log_performance
def cmd_smooth(args) -> CommandOutput:
    poly = read_polynomial(args.poly)
    verdict = smoothness_verdict(poly, parse_int_list(args.primes), args.witness_radius, args.shards)
    return CommandOutput("光滑性判定", verdict.to_dict())


@log_performance
def cmd_slice_scan(args) -> CommandOutput:
    poly = read_polynomial(args.poly)
    primes = parse_int_list(args.primes)
    direction = parse_int_list(args.direction)
    if direction is None:
        report = good_slice_search(poly, args.radius, args.max_radius, primes, args.assume_smooth)
        return CommandOutput("好切片搜索", report.to_dict())
    bad = bad_slice_values(poly, direction, args.bound, primes)
    payload = {
        "direction": direction,
        "range_bound": args.bound,
        "bad_values": [[value, defect.value] for value, defect in bad],
    }
    return CommandOutput("坏切片扫描", payload, ["k", "reason"], [(v, d.value) for v, d in bad])


@log_performance
def cmd_lines(args) -> CommandOutput:
    poly = read_polynomial(args.poly)
    census = count_off_lines(poly, args.bound, args.sample_size, args.seed)
    payload = census.to_dict()
    payload["bound"] = args.bound
    if args.points:
        lines = detect_lines(poly, projective_solutions(poly, args.bound), args.sample_size, args.seed)
        records = enumerate_projective(poly, args.bound, lines)
        payload["points_file"] = ResultExporter().export_points(records, args.points, _digest(payload))
    return CommandOutput("直线检测", payload)


@log_performance
def cmd_r3(args) -> CommandOutput:
    rep = r_d(args.N, args.d)
    return CommandOutput(f"r_{args.d}({args.N})", rep.to_dict(), ["N", "r"], [(rep.N, rep.r)])


@log_performance
def cmd_r3_batch(args) -> CommandOutput:
    batch = r_d_batch(args.max, args.d, args.shards)
    payload = batch.to_dict()
    rows = sorted(batch.counts.items())
    if args.out:
        payload["out"] = ResultExporter().export_rd_batch(batch, args.out, spec_hash({"limit": args.max, "d": args.d}))
    return CommandOutput(f"r_{args.d} 批量计数", payload, ["N", "r"], rows)


@log_performance
def cmd_equal_sums(args) -> CommandOutput:
    poly = read_polynomial(args.poly)
    tally = equal_sums(poly, args.s, args.bound, args.shards)
    payload = tally.to_dict()
    payload["nontrivial_density"] = tally.density(2)
    return CommandOutput("等幂和计数", payload)


@log_performance
def cmd_exponents(args) -> CommandOutput:
    if args.formula is None:
        rows = [(name, ",".join(names)) for name, (_, names) in FORMULAS.items()]
        return CommandOutput("可用公式", {"formulas": dict(rows)}, ["formula", "params"], rows)
    report = exponent_report(args.formula, _exponent_params(args))
    return CommandOutput("指数公式", report.to_dict())


@log_performance
def cmd_fit(args) -> CommandOutput:
    series = read_series_csv(args.input)
    if args.formula:
        report = exponent_report(args.formula, _exponent_params(args), series)
        return CommandOutput("拟合与理论指数", report.to_dict())
    return CommandOutput("对数斜率拟合", fit_exponent(series).to_dict())


@log_performance
def cmd_verify(args) -> CommandOutput:
    series = read_series_csv(args.input)
    report = bound_report(series, args.formula, _exponent_params(args), args.eps)
    rows = [tuple(v) for v in report.violations]
    return CommandOutput("上界一致性检查", report.to_dict(), ["B", "count"], rows)


@log_performance
def cmd_experiment(args) -> CommandOutput:
    runner = ExperimentRunner(ResultStore(settings.database_path))
    if args.status:
        status = runner.get_status()
        rows = [(s["experiment_id"], s["mode"], s["points"]) for s in status]
        return CommandOutput("实验状态", {"experiments": status}, ["experiment_id", "mode", "points"], rows)
    if not args.spec:
        raise SpecValidationError("experiment 需要 --spec 或 --status")
    payload = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    payload.setdefault("shards", args.shards)
    spec = ExperimentSpec.load(payload)
    result = runner.run(spec)
    return CommandOutput("实验", result.to_dict(), ["B", "count"], list(result.series.points))


COMMANDS: Dict[str, Callable[[Any], CommandOutput]] = {
    "count": cmd_count,
    "modp": cmd_modp,
    "smooth": cmd_smooth,
    "slice-scan": cmd_slice_scan,
    "lines": cmd_lines,
    "r3": cmd_r3,
    "r3-batch": cmd_r3_batch,
    "equal-sums": cmd_equal_sums,
    "exponents": cmd_exponents,
    "fit": cmd_fit,
    "verify": cmd_verify,
    "experiment": cmd_experiment,
}


def emit(output: CommandOutput, fmt: str = "text", stream=None):
    stream = stream or sys.stdout
    if fmt == "json":
        json.dump(output.payload, stream, indent=2, ensure_ascii=False, sort_keys=True, default=str)
        stream.write("\n")
        return
    if fmt == "csv":
        writer = csv.writer(stream, lineterminator="\n")
        if output.columns:
            writer.writerow(output.columns)
            writer.writerows(output.rows)
        else:
            writer.writerow(["key", "value"])
            for key, value in sorted(output.payload.items()):
                writer.writerow([key, json.dumps(value, default=str) if isinstance(value, (dict, list)) else value])
        return

    print(f"\n📊 {output.title}:", file=stream)
    print("-" * 40, file=stream)
    for key, value in output.payload.items():
        if isinstance(value, (dict, list)):
            value = json.dumps(value, ensure_ascii=False, default=str)
        print(f"  {key}: {value}", file=stream)
    if output.rows and output.columns and len(output.rows) > 1:
        print(f"\n  {' | '.join(output.columns)}", file=stream)
        for row in output.rows[:20]:
            print(f"  {' | '.join(str(v) for v in row)}", file=stream)
        if len(output.rows) > 20:
            print(f"  ... 还有 {len(output.rows) - 20} 行未显示", file=stream)
