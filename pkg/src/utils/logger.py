import functools
import logging
import sys
import time
from typing import Optional

from config.settings import settings


def setup_logger(level: Optional[str] = None, log_to_file: bool = True):
    """设置日志配置"""
    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, (level or settings.LOG_LEVEL).upper()))
    root_logger.handlers.clear()

    # 控制台输出到 stderr，stdout 留给 JSON/CSV 结果
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    if log_to_file:
        log_filename = settings.log_file_path
        error_log_filename = log_filename.parent / f"error_{log_filename.stem}.log"
        log_filename.parent.mkdir(parents=True, exist_ok=True)

        file_handler = logging.FileHandler(log_filename, encoding='utf-8')
        file_handler.setFormatter(formatter)
        root_logger.addHandler(file_handler)

        # 错误日志单独文件
        error_handler = logging.FileHandler(error_log_filename, encoding='utf-8')
        error_handler.setLevel(logging.ERROR)
        error_handler.setFormatter(formatter)
        root_logger.addHandler(error_handler)

    return root_logger


def get_logger(name: str = None):
    """获取logger实例"""
    return logging.getLogger(name or __name__)


def setup_exception_handler():
    """未捕获的异常写入日志"""
    logger = get_logger('exception_handler')

    def handle_exception(exc_type, exc_value, exc_traceback):
        if issubclass(exc_type, KeyboardInterrupt):
            logger.info("程序被用户中断")
            return

        logger.error(
            "未捕获的异常",
            exc_info=(exc_type, exc_value, exc_traceback)
        )

    sys.excepthook = handle_exception


def log_performance(func):
    """装饰器：记录函数执行时间"""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        logger = get_logger(func.__module__)
        start_time = time.perf_counter()
        try:
            result = func(*args, **kwargs)
            execution_time = time.perf_counter() - start_time
            logger.info(f"{func.__name__} 执行时间: {execution_time:.2f} 秒")
            return result
        except Exception as e:
            execution_time = time.perf_counter() - start_time
            logger.error(f"{func.__name__} 执行失败，耗时: {execution_time:.2f} 秒, 错误: {e}")
            raise
    return wrapper
