import json
import logging
import sqlite3
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import List, Optional, Set

from src.core.census import CountSeries

logger = logging.getLogger(__name__)


@dataclass
class ExperimentRecord:
    experiment_id: str
    spec_json: str
    tool_version: str
    created_at: Optional[datetime] = None

    @property
    def spec(self) -> dict:
        return json.loads(self.spec_json)


class ResultStore:
    """
    实验结果库

    experiment_id 取实验规格的哈希，同一规格再次运行时跳过已完成的 B
    """

    def __init__(self, db_path: str):
        self.db_path = db_path
        Path(db_path).parent.mkdir(parents=True, exist_ok=True)
        self.init_database()

    def init_database(self):
        """初始化数据库表"""
        with sqlite3.connect(self.db_path) as conn:
            conn.execute("""
                CREATE TABLE IF NOT EXISTS experiments (
                    experiment_id TEXT PRIMARY KEY,
                    spec_json TEXT NOT NULL,
                    tool_version TEXT NOT NULL,
                    created_at TEXT DEFAULT CURRENT_TIMESTAMP
                )
            """)
            conn.execute("""
                CREATE TABLE IF NOT EXISTS series (
                    experiment_id TEXT NOT NULL,
                    bound INTEGER NOT NULL,
                    count TEXT NOT NULL,
                    elapsed_ms REAL,
                    PRIMARY KEY (experiment_id, bound)
                )
            """)
            conn.commit()

    def save_experiment(self, experiment_id: str, spec_json: str, tool_version: str) -> bool:
        """登记实验；已存在时返回 False"""
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.execute(
                "INSERT OR IGNORE INTO experiments (experiment_id, spec_json, tool_version) VALUES (?, ?, ?)",
                (experiment_id, spec_json, tool_version),
            )
            conn.commit()
            return cursor.rowcount > 0

    def save_point(self, experiment_id: str, bound: int, count: int, elapsed_ms: float):
        """写入一个网格点，计数按十进制字符串保存"""
        with sqlite3.connect(self.db_path) as conn:
            conn.execute(
                "INSERT OR REPLACE INTO series (experiment_id, bound, count, elapsed_ms) VALUES (?, ?, ?, ?)",
                (experiment_id, int(bound), str(int(count)), float(elapsed_ms)),
            )
            conn.commit()
        logger.debug(f"已保存 {experiment_id} 在 B = {bound} 的结果")

    def completed_bounds(self, experiment_id: str) -> Set[int]:
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.execute("SELECT bound FROM series WHERE experiment_id = ?", (experiment_id,))
            return {row[0] for row in cursor.fetchall()}

    def get_series(self, experiment_id: str) -> CountSeries:
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.execute(
                "SELECT bound, count FROM series WHERE experiment_id = ? ORDER BY bound",
                (experiment_id,),
            )
            return CountSeries(experiment_id, [(row[0], int(row[1])) for row in cursor.fetchall()])

    def get_experiment(self, experiment_id: str) -> Optional[ExperimentRecord]:
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.execute(
                "SELECT experiment_id, spec_json, tool_version, created_at FROM experiments WHERE experiment_id = ?",
                (experiment_id,),
            )
            row = cursor.fetchone()
        if row is None:
            return None
        return ExperimentRecord(
            row[0], row[1], row[2], datetime.fromisoformat(row[3]) if row[3] else None
        )

    def list_experiments(self) -> List[ExperimentRecord]:
        """按登记时间列出全部实验"""
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.execute(
                "SELECT experiment_id, spec_json, tool_version, created_at FROM experiments ORDER BY created_at, experiment_id"
            )
            return [
                ExperimentRecord(r[0], r[1], r[2], datetime.fromisoformat(r[3]) if r[3] else None)
                for r in cursor.fetchall()
            ]

    def delete_experiment(self, experiment_id: str) -> bool:
        with sqlite3.connect(self.db_path) as conn:
            conn.execute("DELETE FROM series WHERE experiment_id = ?", (experiment_id,))
            cursor = conn.execute("DELETE FROM experiments WHERE experiment_id = ?", (experiment_id,))
            conn.commit()
            return cursor.rowcount > 0
