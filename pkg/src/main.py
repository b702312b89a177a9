#!/usr/bin/env python3
"""
census 命令行入口
退出码: 0 成功，2 输入或规格校验失败，3 超出内存上限，1 其他错误
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

# 添加项目根目录到Python路径
PROJECT_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from config.settings import settings  # noqa: E402
from src.core.census import ENGINES  # noqa: E402
from src.core.errors import CensusError, ResourceCapError, SearchExhaustedError  # noqa: E402
from src.core.exponents import FORMULAS  # noqa: E402
from src.utils.logger import get_logger, setup_exception_handler, setup_logger  # noqa: E402
from src.utils.utils import ConfigManager  # noqa: E402

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VALIDATION = 2
EXIT_RESOURCE_CAP = 3


def _add_exponent_params(parser: argparse.ArgumentParser):
    for name in ("d", "n", "k", "e", "s", "delta", "nu"):
        parser.add_argument(f"--{name}", type=int, help=f"公式参数 {name}")


def _shared_options(in_subcommand: bool) -> argparse.ArgumentParser:
    """子命令前后都可以写的参数；子命令里省略时不覆盖前面的值"""
    default = argparse.SUPPRESS if in_subcommand else None
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--shards", type=int, default=default, help="并行分片数")
    shared.add_argument("--mem-cap", type=int, default=default, help="内存上限（字节）")
    shared.add_argument("--seed", type=int, default=default, help="直线检测抽样的随机种子")
    return shared


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="census", description="超曲面有界高度整点的精确计数", parents=[_shared_options(False)]
    )
    parser.add_argument("--config", default=None, help="key = value 配置文件")
    parser.add_argument("--log-level", default=None, help="日志级别")
    fmt = parser.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="fmt", action="store_const", const="json", help="输出 JSON")
    fmt.add_argument("--csv", dest="fmt", action="store_const", const="csv", help="输出 CSV")
    parser.set_defaults(fmt="text")

    sub = parser.add_subparsers(dest="command", required=True)
    shared = [_shared_options(True)]

    p = sub.add_parser("count", parents=shared, help="计数 |x| ≤ B 的整点")
    p.add_argument("--poly", required=True, help="多项式文本、JSON 或 @文件")
    p.add_argument("--bound", type=int, required=True)
    p.add_argument("--projective", action="store_true", help="计数本原向量 N(F;B)")
    p.add_argument("--identify-antipodes", action="store_true", help="x 与 -x 只计一次")
    p.add_argument("--engine", choices=ENGINES, default="auto")
    p.add_argument("--prime", type=int, default=None, help="sieve 引擎使用的素数")
    p.add_argument("--points", default=None, help="点列表 CSV 输出路径")

    p = sub.add_parser("modp", parents=shared, help="有限域上的点数")
    p.add_argument("--poly", required=True)
    p.add_argument("--prime", type=int, required=True)

    p = sub.add_parser("smooth", parents=shared, help="光滑性判定")
    p.add_argument("poly", help="多项式文本、JSON 或 @文件")
    p.add_argument("--primes", default=None, help="证据素数，如 3,5,7,11,13")
    p.add_argument("--witness-radius", type=int, default=None)

    p = sub.add_parser("slice-scan", parents=shared, help="坏切片扫描或好切片搜索")
    p.add_argument("poly")
    p.add_argument("--direction", default=None, help="方向 a1,a2,...；省略时搜索好切片")
    p.add_argument("--bound", type=int, default=10, help="扫描 |k| ≤ bound")
    p.add_argument("--primes", default=None)
    p.add_argument("--radius", type=int, default=None)
    p.add_argument("--max-radius", type=int, default=None)
    p.add_argument("--assume-smooth", action="store_true")

    p = sub.add_parser("lines", parents=shared, help="直线检测与直线外计数")
    p.add_argument("--poly", required=True)
    p.add_argument("--bound", type=int, required=True)
    p.add_argument("--sample-size", type=int, default=None)
    p.add_argument("--points", default=None)

    p = sub.add_parser("r3", parents=shared, help="r_d(N)")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--d", type=int, default=3)

    p = sub.add_parser("r3-batch", parents=shared, help="N ≤ X 的全部 r_d(N)")
    p.add_argument("--max", type=int, required=True)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--out", default=None, help="N,r CSV 输出路径")

    p = sub.add_parser("equal-sums", parents=shared, help="等幂和解计数 L_s(f;B)")
    p.add_argument("--poly", required=True, help="一元多项式")
    p.add_argument("--s", type=int, default=2)
    p.add_argument("--bound", type=int, required=True)

    p = sub.add_parser("exponents", parents=shared, help="理论指数")
    p.add_argument("--formula", choices=sorted(FORMULAS), default=None)
    _add_exponent_params(p)

    p = sub.add_parser("fit", parents=shared, help="对 B,count 序列做对数斜率拟合")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--formula", choices=sorted(FORMULAS), default=None)
    _add_exponent_params(p)

    p = sub.add_parser("verify", parents=shared, help="检查序列与理论上界是否一致")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--formula", choices=sorted(FORMULAS), required=True)
    p.add_argument("--eps", type=float, default=None)
    _add_exponent_params(p)

    p = sub.add_parser("experiment", parents=shared, help="按规格文件运行 B 网格实验")
    p.add_argument("--spec", default=None, help="实验规格 JSON")
    p.add_argument("--status", action="store_true", help="列出已有实验")
    return parser


def apply_overrides(args):
    """配置文件与全局参数覆盖 settings，只对本次调用生效"""
    if args.config:
        ConfigManager(args.config).apply_to(settings)
    if args.mem_cap is not None:
        settings.apply("MEM_CAP_BYTES", args.mem_cap)
    if args.seed is not None:
        settings.apply("SEED", args.seed)
    if args.shards is None:
        args.shards = settings.SHARDS
    if args.shards < 1:
        raise CensusError("--shards 必须 ≥ 1")
    if getattr(args, "seed", None) is None:
        args.seed = settings.SEED


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    setup_logger(args.log_level)
    setup_exception_handler()

    from src.cli.cli import COMMANDS, emit

    try:
        apply_overrides(args)
        output = COMMANDS[args.command](args)
    except ResourceCapError as e:
        print(f"❌ 超出内存上限: {e}", file=sys.stderr)
        return EXIT_RESOURCE_CAP
    except SearchExhaustedError as e:
        print(f"❌ 搜索失败: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (CensusError, ValueError, FileNotFoundError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except KeyboardInterrupt:
        print("\n⏹️ 已中断，已完成的网格点已保存", file=sys.stderr)
        return EXIT_ERROR

    emit(output, args.fmt)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
