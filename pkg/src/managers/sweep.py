"""
扫描管理模块

把参数扫描的各个采样点作为独立任务并发执行。每个任务在线程中运行，
并发数由信号量限制；结果按提交顺序返回，保证报告行序确定。
"""

# =============================================================================
# (1) 导入依赖
# =============================================================================
from __future__ import annotations

import asyncio
import itertools
from collections.abc import Callable, Iterable, Sequence
from typing import Any, Generic, Optional, TypeVar

from pydantic import BaseModel, ConfigDict, Field

from src.core.exceptions import StokesLabError
from src.utils.logger import get_logger

# =============================================================================
# (2) 日志配置
# =============================================================================

logger = get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")


# =============================================================================
# (3) 采样点结果
# =============================================================================


class PointOutcome(BaseModel, Generic[R]):
    """单个采样点的执行结果

    计算错误不会中断整个扫描，而是记录在 error 中。
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    index: int = Field(description="提交顺序")
    value: Optional[R] = Field(default=None, description="返回值")
    error: Optional[str] = Field(default=None, description="错误信息")

    @property
    def ok(self) -> bool:
        return self.error is None


# =============================================================================
# (4) 扫描管理器
# =============================================================================


class SweepManager:
    """扫描管理器

    主要功能：
    - 展开参数网格
    - 有界并发执行采样点
    - 汇集结果（join 屏障之后）
    """

    # I. 初始化
    def __init__(self, threads: int = 1) -> None:
        """初始化扫描管理器

        Args:
            threads: 最大并发数
        """
        if threads < 1:
            raise ValueError("threads must be at least 1")
        self.threads = threads
        logger.debug(f"SweepManager initialized with {threads} thread(s)")

    # II. 参数网格
    @staticmethod
    def grid(**axes: Sequence[Any]) -> list[dict[str, Any]]:
        """参数笛卡尔积，按关键字顺序展开

        Examples:
            >>> SweepManager.grid(p=[2.0, 3.0], kappa=[0.0])
            [{'p': 2.0, 'kappa': 0.0}, {'p': 3.0, 'kappa': 0.0}]
        """
        names = list(axes)
        return [dict(zip(names, values)) for values in itertools.product(*axes.values())]

    # III. 执行
    async def run(
        self,
        func: Callable[[T], R],
        points: Iterable[T],
        capture_errors: bool = True,
    ) -> list[PointOutcome[R]]:
        """并发执行 func(point)

        Args:
            func: 采样点函数（同步，在线程中运行）
            points: 采样点序列
            capture_errors: 是否把 StokesLabError 记为失败点而不是向上抛出

        Returns:
            list[PointOutcome]: 与 points 顺序一致的结果
        """
        semaphore = asyncio.Semaphore(self.threads)
        items = list(points)

        async def worker(index: int, point: T) -> PointOutcome[R]:
            async with semaphore:
                try:
                    value = await asyncio.to_thread(func, point)
                except StokesLabError as e:
                    if not capture_errors:
                        raise
                    logger.warning(f"Sweep point {index} failed: {type(e).__name__}: {e}")
                    return PointOutcome(index=index, error=f"{type(e).__name__}: {e}")
                return PointOutcome(index=index, value=value)

        outcomes = await asyncio.gather(*(worker(i, p) for i, p in enumerate(items)))
        failed = sum(1 for o in outcomes if not o.ok)
        logger.info(f"Sweep finished: {len(items)} point(s), {failed} failed")
        return list(outcomes)

    async def map(self, func: Callable[[T], R], points: Iterable[T]) -> list[R]:
        """执行并直接返回值，任何错误向上抛出"""
        outcomes = await self.run(func, points, capture_errors=False)
        return [o.value for o in outcomes]  # type: ignore[misc]


# =============================================================================
# (5) 单例实例
# =============================================================================

_default_sweep_manager: Optional[SweepManager] = None


def get_sweep_manager(threads: Optional[int] = None) -> SweepManager:
    """获取扫描管理器

    给定 threads 且与现有实例不同时重新创建。
    """
    global _default_sweep_manager
    if _default_sweep_manager is None or (
        threads is not None and threads != _default_sweep_manager.threads
    ):
        _default_sweep_manager = SweepManager(threads or 1)
    return _default_sweep_manager


__all__ = [
    "PointOutcome",
    "SweepManager",
    "get_sweep_manager",
]
