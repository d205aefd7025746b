"""
实验路由模块

实现实验的入口处理和分发：按实验类型选择驱动模块，执行、写出报告，
并把结果封装为 ExperimentOutcome。
"""

# =============================================================================
# (1) 导入依赖
# =============================================================================
from __future__ import annotations

import time
from typing import Optional

from src.core.exceptions import StokesLabError
from src.core.state import ExperimentConfig, ExperimentOutcome, ExperimentType
from src.managers.sweep import SweepManager
from src.modules.base import ExperimentModule
from src.modules.convergence import ConvergenceModule
from src.modules.decay import DecayModule
from src.modules.hammer_sweep import HammerSweepModule
from src.modules.holder_transfer import HolderTransferModule
from src.modules.main_estimate import MainEstimateModule
from src.modules.navier_stokes import NavierStokesModule
from src.modules.nfunc_verify import NFunctionVerifyModule
from src.service.stokes_service import StokesService
from src.storage.report_store import ReportStore
from src.utils.logger import get_logger

# =============================================================================
# (2) 日志配置
# =============================================================================

logger = get_logger(__name__)

MODULE_TYPES: dict[ExperimentType, type[ExperimentModule]] = {
    ExperimentType.NFUNC_VERIFY: NFunctionVerifyModule,
    ExperimentType.HAMMER_SWEEP: HammerSweepModule,
    ExperimentType.CONVERGENCE: ConvergenceModule,
    ExperimentType.DECAY: DecayModule,
    ExperimentType.MAIN_ESTIMATE: MainEstimateModule,
    ExperimentType.HOLDER_TRANSFER: HolderTransferModule,
    ExperimentType.NAVIER_STOKES: NavierStokesModule,
}


# =============================================================================
# (3) 实验路由器
# =============================================================================


class ExperimentRouter:
    """实验路由器

    处理流程：
    1. 按实验类型取得驱动模块（惰性创建并缓存）
    2. 执行实验得到报告
    3. ReportStore 写出 CSV、manifest 与摘要
    4. 返回 ExperimentOutcome；StokesLabError 记录在 outcome 中
    """

    # I. 初始化
    def __init__(
        self,
        stokes_service: Optional[StokesService] = None,
        sweep_manager: Optional[SweepManager] = None,
    ) -> None:
        self.stokes_service = stokes_service
        self.sweep_manager = sweep_manager
        self._modules: dict[ExperimentType, ExperimentModule] = {}
        logger.info("ExperimentRouter initialized")

    def module_for(self, experiment: ExperimentType) -> ExperimentModule:
        """获取实验类型对应的驱动模块"""
        if experiment not in self._modules:
            self._modules[experiment] = MODULE_TYPES[experiment](self.stokes_service, self.sweep_manager)
        return self._modules[experiment]

    # II. 主要处理接口
    async def route(self, config: ExperimentConfig, save: bool = True) -> ExperimentOutcome:
        """执行一个实验

        Args:
            config: 实验配置
            save: 是否写出报告文件

        Returns:
            ExperimentOutcome: success 仅在实验完成且全部检查通过时为 True
        """
        start = time.perf_counter()
        experiment = config.experiment
        logger.info(f"Routing experiment {experiment.value} (seed={config.seed}, threads={config.threads})")
        try:
            report = await self.module_for(experiment).run(config)
            if save:
                ReportStore(config.output_dir).save(config, report)
        except StokesLabError as e:
            logger.error(f"Experiment {experiment.value} failed: {type(e).__name__}: {e}")
            return ExperimentOutcome(
                experiment=experiment,
                success=False,
                error=str(e),
                error_type=type(e).__name__,
                processing_time_ms=self._elapsed_ms(start),
            )

        elapsed = self._elapsed_ms(start)
        level = "INFO" if report.passed else "WARNING"
        logger.log(level, f"Experiment {experiment.value} finished in {elapsed:.0f} ms: passed={report.passed}")
        return ExperimentOutcome(
            experiment=experiment,
            success=report.passed,
            report=report,
            output_dir=config.output_dir if save else None,
            processing_time_ms=elapsed,
        )

    # III. 工具方法
    @staticmethod
    def _elapsed_ms(start: float) -> float:
        return (time.perf_counter() - start) * 1000.0


# =============================================================================
# (4) 单例实例
# =============================================================================

_default_router: Optional[ExperimentRouter] = None


def get_experiment_router(
    stokes_service: Optional[StokesService] = None,
    sweep_manager: Optional[SweepManager] = None,
) -> ExperimentRouter:
    """获取默认实验路由器实例"""
    global _default_router
    if _default_router is None:
        _default_router = ExperimentRouter(stokes_service, sweep_manager)
    return _default_router


__all__ = [
    "MODULE_TYPES",
    "ExperimentRouter",
    "get_experiment_router",
]
