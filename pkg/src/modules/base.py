"""
实验模块基础

提供各实验驱动共用的部件：

- ExperimentModule：实验驱动抽象基类
- 由扫描参数构造 N 函数模型与应力律
- 网格、区域球与右端项 G 的构造
"""

# =============================================================================
# (1) 导入依赖
# =============================================================================
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from typing import Any, ClassVar, Optional

import numpy as np
from numpy.typing import NDArray

from src.core.field import Ball, Grid, TensorField, VectorField, tensor_from_function
from src.core.nfunc import NFunctionKind, NFunctionModel
from src.core.state import (
    BoundaryKind,
    ExperimentConfig,
    ExperimentReport,
    ExperimentType,
    GRecipe,
    SolverSettings,
    SweepSettings,
)
from src.managers.sweep import SweepManager, get_sweep_manager
from src.service.stokes_service import StokesService, get_stokes_service
from src.utils.logger import get_logger

# =============================================================================
# (2) 日志配置
# =============================================================================

logger = get_logger(__name__)

# Hölder 配方 |x−x0|^β·M 的指数
HOLDER_RECIPE_EXPONENT = 0.5
# 奇点位置相对域中心的偏移（域边长的分数），避开所有网格点
SINGULAR_POINT_OFFSET = (1.0 / 300.0, 1.0 / 700.0)
# 常矩阵 M（迹为零的对称矩阵）
RECIPE_MATRIX = (1.0, 0.5, -1.0)


# =============================================================================
# (3) 模型构造
# =============================================================================


def build_model(kind: str, p: float, kappa: float, sweep: SweepSettings) -> NFunctionModel:
    """由扫描点构造 N 函数模型

    arcsinh 模型没有 p 与 κ，Carreau 与 arcsinh 使用 sweep.mu_inf。
    """
    family = NFunctionKind(kind)
    if family == NFunctionKind.ARCSINH:
        return NFunctionModel(kind=family, nu=sweep.nu, mu_inf=sweep.mu_inf)
    if family == NFunctionKind.CARREAU:
        return NFunctionModel(kind=family, nu=sweep.nu, kappa=kappa, p=p, mu_inf=sweep.mu_inf)
    return NFunctionModel(kind=family, nu=sweep.nu, kappa=kappa, p=p)


def model_points(sweep: SweepSettings) -> list[NFunctionModel]:
    """展开 kinds × p × κ，去掉重复模型（arcsinh 只出现一次）"""
    models: list[NFunctionModel] = []
    for kind in sweep.kinds:
        for p in sweep.p:
            for kappa in sweep.kappa:
                model = build_model(kind, p, kappa, sweep)
                if model not in models:
                    models.append(model)
    return models


def model_columns(model: NFunctionModel) -> dict[str, Any]:
    """报告行中标识模型的列"""
    return {"kind": model.kind.value, "p": model.p, "kappa": model.kappa}


def holder_sigma(model: NFunctionModel) -> float:
    """A(Du) 到 Du 的 Hölder 指数传递因子 σ

    κ=0 的纯幂律取 min{1, p′−1}，κ>0 或含牛顿项时取 1。
    """
    newtonian = model.mu_inf > 0.0 or model.kind == NFunctionKind.ARCSINH
    if model.kappa > 0.0 or newtonian:
        return 1.0
    return min(1.0, 1.0 / (model.p - 1.0))


# =============================================================================
# (4) 网格、区域与右端项
# =============================================================================


def make_grid(
    n: int, settings: SolverSettings, boundary: BoundaryKind = BoundaryKind.PERIODIC
) -> Grid:
    return Grid(n=n, length=settings.box_length, boundary=boundary)


def centered_ball(grid: Grid, fraction: float) -> Ball:
    """以域中心为球心、半径为 fraction·L 的球"""
    ox, oy = grid.origin
    half = 0.5 * grid.length
    return Ball(center=(ox + half, oy + half), radius=fraction * grid.length)


def _periodic_distance(grid: Grid, x: NDArray, y: NDArray) -> NDArray:
    """到奇点 x0 的周期化距离，x→x0 时与 |x−x0| 等价"""
    k = 2.0 * math.pi / grid.length
    ox, oy = grid.origin
    x0 = ox + grid.length * (0.5 + SINGULAR_POINT_OFFSET[0])
    y0 = oy + grid.length * (0.5 + SINGULAR_POINT_OFFSET[1])
    sx = np.sin(0.5 * k * (x - x0))
    sy = np.sin(0.5 * k * (y - y0))
    return (2.0 / k) * np.sqrt(sx * sx + sy * sy)


def step_force(grid: Grid, amplitude: float) -> VectorField:
    """均值为零的分段常数体力：左右半域取 ±A（u₁），上下半域取 ±A（u₂）"""
    i1 = np.arange(grid.u1_shape[0])[:, None] * np.ones(grid.u1_shape[1])
    j2 = np.ones(grid.u2_shape[0])[:, None] * np.arange(grid.u2_shape[1])[None, :]
    half = grid.n // 2
    return VectorField(
        grid=grid,
        u1=amplitude * np.where(i1 < half, 1.0, -1.0),
        u2=amplitude * np.where(j2 < half, 1.0, -1.0),
    )


def build_rhs(
    recipe: GRecipe,
    grid: Grid,
    amplitude: float,
    stokes_service: Optional[StokesService] = None,
) -> TensorField:
    """按配方构造对称张量 G

    Args:
        recipe: 配方
        grid: 网格
        amplitude: 幅值
        stokes_service: lifted-step 配方使用的求解服务

    Returns:
        TensorField: 交错网格上的 G
    """
    k = 2.0 * math.pi / grid.length
    m11, m12, m22 = (amplitude * c for c in RECIPE_MATRIX)

    if recipe == GRecipe.SMOOTH:
        return tensor_from_function(
            grid,
            lambda x, y: (
                amplitude * np.sin(k * x) * np.cos(k * y),
                amplitude * np.cos(k * x + k * y),
                -amplitude * np.cos(k * x) * np.sin(2.0 * k * y),
            ),
        )
    if recipe == GRecipe.HOLDER:

        def holder(x: NDArray, y: NDArray) -> tuple[NDArray, NDArray, NDArray]:
            d = _periodic_distance(grid, x, y) ** HOLDER_RECIPE_EXPONENT
            return m11 * d, m12 * d, m22 * d

        return tensor_from_function(grid, holder)
    if recipe == GRecipe.LOG:

        def logarithmic(x: NDArray, y: NDArray) -> tuple[NDArray, NDArray, NDArray]:
            d = np.log(_periodic_distance(grid, x, y))
            return m11 * d, m12 * d, m22 * d

        return tensor_from_function(grid, logarithmic)
    service = stokes_service or get_stokes_service()
    return service.lift_rhs(step_force(grid, amplitude))


# =============================================================================
# (5) 实验驱动基类
# =============================================================================


class ExperimentModule(ABC):
    """实验驱动基类

    子类实现 run，返回 ExperimentReport；采样点通过 SweepManager 并发执行。
    """

    experiment: ClassVar[ExperimentType]

    # I. 初始化
    def __init__(
        self,
        stokes_service: Optional[StokesService] = None,
        sweep_manager: Optional[SweepManager] = None,
    ) -> None:
        self.stokes_service = stokes_service or get_stokes_service()
        self.sweep_manager = sweep_manager
        logger.info(f"{type(self).__name__} initialized")

    def manager(self, config: ExperimentConfig) -> SweepManager:
        """显式注入的管理器优先，否则按配置线程数获取"""
        return self.sweep_manager or get_sweep_manager(config.threads)

    # II. 执行
    @abstractmethod
    async def run(self, config: ExperimentConfig) -> ExperimentReport:
        """执行实验"""

    def empty_report(self) -> ExperimentReport:
        """扫描列表为空时的报告"""
        return ExperimentReport(
            experiment=self.experiment, summary=["empty sweep: nothing to run"]
        )


__all__ = [
    "HOLDER_RECIPE_EXPONENT",
    "ExperimentModule",
    "build_model",
    "build_rhs",
    "centered_ball",
    "holder_sigma",
    "make_grid",
    "model_columns",
    "model_points",
    "step_force",
]
