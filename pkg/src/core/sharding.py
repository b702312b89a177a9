"""
分片执行工具
把互不相交的任务片交给进程池，结果按任务顺序返回，
因此聚合结果与分片数和完成顺序无关
"""

import logging
from multiprocessing import Pool
from typing import Callable, List, Sequence, Tuple, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def split_range(low: int, high: int, shards: int) -> List[Tuple[int, int]]:
    """把闭区间 [low, high] 切成至多 shards 个连续、互不相交的闭区间"""
    if high < low:
        return []
    shards = max(1, min(shards, high - low + 1))
    size, extra = divmod(high - low + 1, shards)
    pieces = []
    start = low
    for i in range(shards):
        end = start + size - 1 + (1 if i < extra else 0)
        pieces.append((start, end))
        start = end + 1
    return pieces


def run_sharded(func: Callable[[T], R], tasks: Sequence[T], shards: int = 1) -> List[R]:
    """
    执行分片任务

    shards <= 1 或只有一个任务时在当前进程顺序执行；
    否则使用 multiprocessing.Pool，func 必须是模块级函数
    """
    tasks = list(tasks)
    if shards <= 1 or len(tasks) <= 1:
        return [func(task) for task in tasks]
    processes = min(shards, len(tasks))
    logger.debug(f"使用 {processes} 个进程执行 {len(tasks)} 个分片")
    with Pool(processes=processes) as pool:
        return pool.map(func, tasks)
