"""
报告存储模块

把实验报告写出为CSV文件：

- <experiment>.csv：主结果表
- <experiment>_<detail>.csv：附加明细表
- manifest.csv：配置哈希、版本与种子
- summary.txt：文本摘要

输出不含时间戳，同一配置与种子的重复运行得到逐字节相同的文件。
"""

# ==============================================================================
# (1) 导入依赖
# ==============================================================================
from __future__ import annotations

from importlib import metadata
from pathlib import Path
from typing import Any, Optional

import numpy as np
import pandas as pd
import scipy

from src.core.state import ExperimentConfig, ExperimentReport
from src.utils.helpers import HashHelper
from src.utils.logger import get_logger

# ==============================================================================
# (2) 日志配置
# ==============================================================================

logger = get_logger(__name__)

PACKAGE_NAME = "orlicz-stokes-lab"
FALLBACK_VERSION = "0.1.0"
# 浮点写出精度，足以逐位复现
FLOAT_FORMAT = "%.17g"


def package_version() -> str:
    """已安装包的版本，源码树直接运行时取默认值"""
    try:
        return metadata.version(PACKAGE_NAME)
    except metadata.PackageNotFoundError:
        return FALLBACK_VERSION


# ==============================================================================
# (3) 报告存储
# ==============================================================================


class ReportStore:
    """实验报告存储

    主要功能：
    - 写出主结果表与明细表
    - 追加 manifest 行
    - 写出文本摘要
    """

    # I. 初始化
    def __init__(self, output_dir: Path) -> None:
        """初始化报告存储

        Args:
            output_dir: 输出目录，不存在时创建
        """
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        logger.debug(f"ReportStore writing to {self.output_dir}")

    # II. 表格写出
    @staticmethod
    def to_frame(rows: list[dict[str, Any]]) -> pd.DataFrame:
        """行字典列表转为DataFrame，列顺序按首次出现"""
        columns: list[str] = []
        for row in rows:
            for key in row:
                if key not in columns:
                    columns.append(key)
        return pd.DataFrame(rows, columns=columns)

    def write_table(self, name: str, rows: list[dict[str, Any]]) -> Path:
        """写出单张CSV表

        Args:
            name: 文件名（不含扩展名）
            rows: 行字典列表，允许为空

        Returns:
            Path: 写出的文件路径
        """
        path = self.output_dir / f"{name}.csv"
        self.to_frame(rows).to_csv(path, index=False, float_format=FLOAT_FORMAT)
        return path

    def write_manifest(self, config: ExperimentConfig) -> Path:
        """写出 manifest.csv（单行）"""
        row = {
            "experiment": config.experiment.value,
            "config_hash": HashHelper.config_hash(config.hash_payload()),
            "package_version": package_version(),
            "numpy_version": np.__version__,
            "scipy_version": scipy.__version__,
            "pandas_version": pd.__version__,
            "seed": config.seed,
        }
        return self.write_table("manifest", [row])

    def write_summary(self, report: ExperimentReport, config_hash: Optional[str] = None) -> Path:
        path = self.output_dir / "summary.txt"
        lines = [
            f"experiment: {report.experiment.value}",
            f"passed: {report.passed}",
            f"rows: {len(report.rows)}",
        ]
        if config_hash is not None:
            lines.append(f"config_hash: {config_hash}")
        lines.extend(report.summary)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    # III. 完整报告
    def save(self, config: ExperimentConfig, report: ExperimentReport) -> list[Path]:
        """写出实验的全部文件

        Args:
            config: 实验配置
            report: 实验报告

        Returns:
            list[Path]: 写出的文件路径
        """
        stem = report.experiment.value.replace("-", "_")
        paths = [self.write_table(stem, report.rows)]
        for detail, rows in sorted(report.details.items()):
            paths.append(self.write_table(f"{stem}_{detail}", rows))
        paths.append(self.write_manifest(config))
        paths.append(
            self.write_summary(report, HashHelper.config_hash(config.hash_payload()))
        )
        logger.info(f"Wrote {len(paths)} files for {report.experiment.value} to {self.output_dir}")
        return paths


__all__ = [
    "FLOAT_FORMAT",
    "ReportStore",
    "package_version",
]
