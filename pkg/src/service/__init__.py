"""
服务模块初始化

导出求解服务的公共接口。
"""

# =============================================================================
# (1) 离散鞍点系统
# =============================================================================
from src.service.saddle_point import SaddlePointSystem

# =============================================================================
# (2) Stokes 求解服务
# =============================================================================
from src.service.stokes_service import (
    SolveResult,
    SolverConfig,
    StokesService,
    WeakResidual,
    get_stokes_service,
)

# =============================================================================
# (3) 导出列表
# =============================================================================

__all__ = [
    "SaddlePointSystem",
    "SolveResult",
    "SolverConfig",
    "StokesService",
    "WeakResidual",
    "get_stokes_service",
]
