"""
管理器模块初始化

导出扫描管理器的公共接口。
"""

from src.managers.sweep import PointOutcome, SweepManager, get_sweep_manager

__all__ = [
    "PointOutcome",
    "SweepManager",
    "get_sweep_manager",
]
