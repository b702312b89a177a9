import csv
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, TextIO

from dotenv import dotenv_values

from src import __version__
from src.core.census import CountSeries, PointRecord
from src.core.diophantine import RepBatch
from src.core.errors import SeriesError

logger = logging.getLogger(__name__)


def spec_hash(payload: Dict[str, Any]) -> str:
    """规格的 sha256（键排序后的 JSON），取前 16 位"""
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def header_lines(digest: str) -> List[str]:
    return ["# tool=census", f"# version={__version__}", f"# spec_hash={digest}"]


class ConfigManager:
    """key = value 形式的配置文件"""

    def __init__(self, config_file: Optional[str] = None):
        if config_file is None:
            from config.settings import USER_CONFIG_FILE
            config_file = USER_CONFIG_FILE
        self.config_file = str(config_file)
        self.config = self._load_config()

    def _load_config(self) -> Dict[str, str]:
        """加载配置文件"""
        if not Path(self.config_file).exists():
            return {}
        try:
            values = dotenv_values(self.config_file)
        except Exception as e:
            logger.error(f"加载配置文件失败: {e}")
            return {}
        return {
            key.upper().removeprefix("CENSUS_"): value
            for key, value in values.items()
            if value is not None
        }

    def get(self, key: str, default: Any = None) -> Any:
        return self.config.get(key.upper(), default)

    def apply_to(self, target) -> List[str]:
        """把配置写入 Settings 对象，返回生效的键"""
        applied = []
        for key, value in self.config.items():
            target.apply(key, value)
            applied.append(key)
        if applied:
            logger.info(f"配置文件 {self.config_file} 覆盖了: {', '.join(applied)}")
        return applied


class SeriesCsvWriter:
    """逐行写入并立即 flush 的序列 CSV"""

    def __init__(self, handle: TextIO, path: Path):
        self.handle = handle
        self.path = path
        self.writer = csv.writer(handle, lineterminator="\n")

    def write_row(self, bound: int, count: int):
        self.writer.writerow([bound, count])
        self.handle.flush()

    def close(self):
        self.handle.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class ResultExporter:
    """结果导出工具：CSV 与 JSON，文件头带工具版本和规格哈希，不含时间戳"""

    def __init__(self, exports_dir: Optional[Path] = None):
        if exports_dir is None:
            from config.settings import EXPORTS_DIR
            exports_dir = EXPORTS_DIR
        self.exports_dir = Path(exports_dir)

    def _resolve(self, filename: str) -> Path:
        path = Path(filename)
        if not path.is_absolute() and path.parent == Path("."):
            path = self.exports_dir / path
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def _write_csv(self, filename: str, digest: str, columns: Sequence[str], rows: Iterable[Sequence]) -> str:
        path = self._resolve(filename)
        with open(path, "w", encoding="utf-8", newline="") as f:
            for line in header_lines(digest):
                f.write(line + "\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            writer.writerows(rows)
        logger.info(f"结果已导出到: {path}")
        return str(path)

    def open_series(self, filename: str, digest: str) -> SeriesCsvWriter:
        path = self._resolve(filename)
        handle = open(path, "w", encoding="utf-8", newline="")
        for line in header_lines(digest):
            handle.write(line + "\n")
        handle.write("B,count\n")
        handle.flush()
        return SeriesCsvWriter(handle, path)

    def export_series(self, series: CountSeries, filename: str, digest: str) -> str:
        return self._write_csv(filename, digest, ["B", "count"], series.points)

    def export_points(self, records: List[PointRecord], filename: str, digest: str) -> str:
        arity = len(records[0].coords) if records else 0
        columns = [f"x{i}" for i in range(arity)] + ["primitive", "on_line"]
        return self._write_csv(filename, digest, columns, (r.to_row() for r in records))

    def export_rd_batch(self, batch: RepBatch, filename: str, digest: str) -> str:
        return self._write_csv(filename, digest, ["N", "r"], batch.counts.items())

    def export_json(self, payload: Dict[str, Any], filename: str, digest: str) -> str:
        path = self._resolve(filename)
        document = {"meta": {"tool": "census", "version": __version__, "spec_hash": digest}}
        document.update(payload)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(document, f, indent=2, ensure_ascii=False, sort_keys=True)
            f.write("\n")
        logger.info(f"结果已导出到: {path}")
        return str(path)


def read_series_csv(path: str, experiment_id: Optional[str] = None) -> CountSeries:
    """读取 B,count 序列，忽略 # 注释行与表头"""
    rows = []
    digest = None
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# spec_hash="):
                    digest = line.split("=", 1)[1]
                continue
            first, _, second = line.partition(",")
            if first.strip().lower() == "b":
                continue
            try:
                rows.append((int(first), int(second)))
            except ValueError:
                raise SeriesError(f"无法解析的序列行: {line}")
    return CountSeries(experiment_id or digest or Path(path).stem, rows)
