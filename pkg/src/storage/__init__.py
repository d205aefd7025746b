"""
存储模块初始化

提供实验报告的写出接口。
"""

from src.storage.report_store import FLOAT_FORMAT, ReportStore, package_version

__all__ = [
    "FLOAT_FORMAT",
    "ReportStore",
    "package_version",
]
