"""
异常定义模块

定义实验室中所有模块共享的异常层次。校验类操作不抛出异常，只在报告中记录违例；
这里的异常只用于真正无法继续计算的情形。
"""

# =============================================================================
# (1) 导入依赖
# =============================================================================
from __future__ import annotations

from collections.abc import Sequence


# =============================================================================
# (2) 基础异常
# =============================================================================


class StokesLabError(Exception):
    """实验室异常基类"""


# =============================================================================
# (3) N函数相关
# =============================================================================


class NFunctionDomainError(StokesLabError, ValueError):
    """自变量不在定义域内（负数或非有限值）"""


class SingularityError(StokesLabError, ArithmeticError):
    """二阶导数在原点奇异（κ=0 且 p<2）"""

    def __init__(self, message: str = "singular at origin") -> None:
        super().__init__(message)


class IndexEstimationError(StokesLabError):
    """在采样格点上找不到有限的 K1，通常说明输入不满足 Δ2"""


# =============================================================================
# (4) 网格与振荡相关
# =============================================================================


class BallOutsideGridError(StokesLabError, ValueError):
    """球与网格的交集为空或半径低于分辨率下限"""

    def __init__(self, message: str = "ball outside grid") -> None:
        super().__init__(message)


class ScaleSeparationError(StokesLabError):
    """可分辨的尺度层数不足"""

    def __init__(self, message: str = "insufficient scale separation") -> None:
        super().__init__(message)


# =============================================================================
# (5) 求解器相关
# =============================================================================


class SolverConvergenceError(StokesLabError):
    """Newton 迭代未收敛

    Attributes:
        residual_history: 最后一个延拓阶段的残差历史
    """

    def __init__(self, message: str, residual_history: Sequence[float] = ()) -> None:
        super().__init__(message)
        self.residual_history: list[float] = list(residual_history)


class InfSupError(StokesLabError):
    """Uzawa 压力迭代停滞，离散 inf-sup 条件可能失效"""


class PicardDivergenceError(StokesLabError):
    """对流项 Picard 迭代发散"""


class ConfigurationError(StokesLabError, ValueError):
    """配置不合法"""


__all__ = [
    "BallOutsideGridError",
    "ConfigurationError",
    "IndexEstimationError",
    "InfSupError",
    "NFunctionDomainError",
    "PicardDivergenceError",
    "ScaleSeparationError",
    "SingularityError",
    "SolverConvergenceError",
    "StokesLabError",
]
