"""
统一配置管理
"""
import os
from pathlib import Path
from typing import List, Optional

from dotenv import dotenv_values, load_dotenv

# 项目根目录
PROJECT_ROOT = Path(__file__).parent.parent

# 数据目录配置
DATA_DIR = PROJECT_ROOT / "data"
DATABASE_DIR = DATA_DIR / "database"
EXPORTS_DIR = DATA_DIR / "exports"
LOGS_DIR = DATA_DIR / "logs"

# 配置文件路径
CONFIG_DIR = PROJECT_ROOT / "config"
ENV_FILE = PROJECT_ROOT / ".env"
USER_CONFIG_FILE = CONFIG_DIR / "census.cfg"

# 加载 .env 文件
load_dotenv(ENV_FILE)


def _int_list(raw: str) -> List[int]:
    return [int(part) for part in raw.replace(" ", "").split(",") if part]


class Settings:
    """应用配置类"""

    # 这些键在配置文件里按整数解析
    INT_KEYS = (
        "SHARDS",
        "MEM_CAP_BYTES",
        "MODP_SCAN_CAP",
        "SLICE_RADIUS",
        "SLICE_MAX_RADIUS",
        "WITNESS_RADIUS",
        "LINE_SAMPLE_SIZE",
        "SEED",
    )

    def __init__(self, config_file: Optional[Path] = None):
        self.load_from_env()
        self.load_user_config(config_file or USER_CONFIG_FILE)

    def load_from_env(self):
        """从环境变量加载配置"""
        # 日志配置
        self.LOG_LEVEL = os.getenv('CENSUS_LOG_LEVEL', 'INFO')
        self.LOG_FILE = os.getenv('CENSUS_LOG_FILE', 'census.log')

        # 计算资源
        self.SHARDS = int(os.getenv('CENSUS_SHARDS', '1'))
        self.MEM_CAP_BYTES = int(os.getenv('CENSUS_MEM_CAP_BYTES', str(4 * 1024 ** 3)))

        # 光滑性证据
        self.EVIDENCE_PRIMES = _int_list(os.getenv('CENSUS_EVIDENCE_PRIMES', '3,5,7,11,13'))
        self.MODP_SCAN_CAP = int(os.getenv('CENSUS_MODP_SCAN_CAP', '101'))
        self.WITNESS_RADIUS = int(os.getenv('CENSUS_WITNESS_RADIUS', '2'))

        # 好切片搜索
        self.SLICE_RADIUS = int(os.getenv('CENSUS_SLICE_RADIUS', '8'))
        self.SLICE_MAX_RADIUS = int(os.getenv('CENSUS_SLICE_MAX_RADIUS', '64'))

        # 直线检测与拟合
        self.LINE_SAMPLE_SIZE = int(os.getenv('CENSUS_LINE_SAMPLE_SIZE', '200'))
        self.DEFAULT_EPS = float(os.getenv('CENSUS_DEFAULT_EPS', '0.1'))
        self.SEED = int(os.getenv('CENSUS_SEED', '0'))

        # 结果库
        self.DATABASE_PATH = os.getenv('CENSUS_DATABASE_PATH', str(DATABASE_DIR / "census.db"))

    def load_user_config(self, path: Path):
        """加载 key = value 形式的配置文件，覆盖环境变量"""
        path = Path(path)
        if not path.exists():
            return
        try:
            values = dotenv_values(path)
        except Exception as e:
            print(f"加载用户配置失败: {e}")
            return
        for key, value in values.items():
            if value is None:
                continue
            self.apply(key.upper().removeprefix('CENSUS_'), value)

    def apply(self, key: str, value):
        """按键类型设置单个配置项"""
        if key in self.INT_KEYS:
            value = int(value)
        elif key == 'EVIDENCE_PRIMES' and isinstance(value, str):
            value = _int_list(value)
        elif key == 'DEFAULT_EPS':
            value = float(value)
        setattr(self, key, value)

    @property
    def log_file_path(self) -> Path:
        """获取日志文件完整路径"""
        return LOGS_DIR / self.LOG_FILE

    @property
    def logs_dir(self) -> Path:
        """获取日志目录路径"""
        return LOGS_DIR

    @property
    def database_path(self) -> str:
        """获取数据库路径"""
        return self.DATABASE_PATH

# 全局配置实例
settings = Settings()
