"""
核心状态定义模块

定义实验室使用的枚举类型、校验结果与实验配置/报告等数据结构。
这些模型在核心计算模块、实验驱动模块与报告存储之间流转。
"""

# =============================================================================
# (1) 导入依赖
# =============================================================================
from __future__ import annotations

import math
from enum import Enum
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator


# =============================================================================
# (2) 枚举类型定义
# =============================================================================


class ExperimentType(str, Enum):
    """实验类型枚举

    与命令行子命令一一对应。
    """

    NFUNC_VERIFY = "nfunc-verify"  # N函数结构不等式
    HAMMER_SWEEP = "hammer-sweep"  # 应力律等价性探针
    CONVERGENCE = "convergence"  # 构造解收敛性
    DECAY = "decay"  # 齐次问题衰减
    MAIN_ESTIMATE = "main-estimate"  # Campanato 主估计
    HOLDER_TRANSFER = "holder-transfer"  # Hölder 正则性传递
    NAVIER_STOKES = "navier-stokes"  # 对流项 Picard


class GRecipe(str, Enum):
    """右端项张量 G 的构造方式"""

    SMOOTH = "smooth"  # 光滑三角函数张量
    HOLDER = "holder"  # |x-x0|^β·M
    LOG = "log"  # log|x-x0|·M，属于BMO但无界
    LIFTED_STEP = "lifted-step"  # 由分段常数力 f 提升得到


class BoundaryKind(str, Enum):
    """网格边界类型"""

    PERIODIC = "periodic"
    DIRICHLET = "dirichlet"


# =============================================================================
# (3) 校验结果模型
# =============================================================================


class CheckResult(BaseModel):
    """单项不等式/等价性校验结果

    对形如 lhs ≤ rhs 的不等式记录 lhs/rhs 的采样极值；
    对等价关系记录比值区间。
    """

    name: str = Field(description="校验名称")
    passed: bool = Field(description="是否通过")
    min_ratio: float = Field(default=math.nan, description="采样比值下确界")
    max_ratio: float = Field(default=math.nan, description="采样比值上确界")
    samples: int = Field(default=0, ge=0, description="样本数")
    violations: int = Field(default=0, ge=0, description="违例样本数")
    note: str = Field(default="", description="附加说明")

    @property
    def spread(self) -> float:
        """比值区间宽度 c1/c0"""
        if self.min_ratio <= 0.0 or not math.isfinite(self.max_ratio):
            return math.inf
        return self.max_ratio / self.min_ratio

    def as_row(self) -> dict[str, Any]:
        """转换为CSV行"""
        return {
            "check": self.name,
            "passed": self.passed,
            "min_ratio": self.min_ratio,
            "max_ratio": self.max_ratio,
            "samples": self.samples,
            "violations": self.violations,
            "note": self.note,
        }


# =============================================================================
# (4) 实验配置模型
# =============================================================================


class SolverSettings(BaseModel):
    """求解器参数（来自实验配置文件）"""

    newton_tol: float = Field(default=1e-9, gt=0.0, description="Newton 相对残差容差")
    max_newton: int = Field(default=50, ge=1, description="每个延拓阶段最大 Newton 步数")
    kappa_floor: float = Field(default=1e-8, gt=0.0, description="κ=0 时的正则化下限")
    kappa_start: float = Field(default=1.0, gt=0.0, description="κ 延拓起点")
    uzawa_rho: float = Field(default=1.0, gt=0.0, description="增广拉格朗日罚参数（相对最大粘度）")
    max_uzawa: int = Field(default=2000, ge=1, description="每个 Newton 步最大 Uzawa 迭代数")
    max_picard: int = Field(default=50, ge=1, description="最大 Picard 迭代数")
    box_length: float = Field(default=2.0 * math.pi, gt=0.0, description="计算域边长")


class FamilySettings(BaseModel):
    """球族参数"""

    region_fraction: float = Field(
        default=0.2, gt=0.0, le=0.25, description="区域球半径占域边长的比例（2B 须落在域内）"
    )
    levels: Optional[int] = Field(default=None, ge=1, description="二进层数，None表示按分辨率取满")
    decay_fraction: float = Field(
        default=0.25, gt=0.0, le=0.25, description="衰减实验中心球半径占域边长的比例（2B 须落在域内）"
    )


class SweepSettings(BaseModel):
    """扫描参数列表"""

    kinds: list[str] = Field(
        default_factory=lambda: ["power_law_additive"], description="N函数类型"
    )
    p: list[float] = Field(default_factory=lambda: [2.0], description="幂指数")
    kappa: list[float] = Field(default_factory=lambda: [0.0], description="κ 取值")
    nu: float = Field(default=1.0, gt=0.0, description="ν")
    mu_inf: float = Field(default=1.0, ge=0.0, description="μ∞（Carreau/arcsinh）")
    beta: list[float] = Field(default_factory=lambda: [0.25], description="Campanato 指数")
    meshes: list[int] = Field(default_factory=lambda: [32, 64], description="网格尺寸")
    recipes: list[GRecipe] = Field(
        default_factory=lambda: [GRecipe.SMOOTH], description="G 构造方式"
    )
    amplitude: float = Field(default=1.0, ge=0.0, description="右端项幅值")
    rescale: float = Field(default=10.0, gt=0.0, description="G 重标度因子")
    samples: int = Field(default=10_000, ge=2, description="随机矩阵对数量")
    decay_slope: Optional[float] = Field(
        default=None, description="已测得的衰减斜率（用于 β 扫描的经验标记）"
    )

    @field_validator("p")
    @classmethod
    def validate_exponents(cls, v: list[float]) -> list[float]:
        """幂指数必须大于1"""
        if any(p <= 1.0 for p in v):
            raise ValueError("every exponent p must exceed 1")
        return v

    @field_validator("meshes")
    @classmethod
    def validate_meshes(cls, v: list[int]) -> list[int]:
        """网格至少8×8"""
        if any(n < 8 for n in v):
            raise ValueError("every mesh size must be at least 8")
        return v

    @field_validator("beta")
    @classmethod
    def validate_beta(cls, v: list[float]) -> list[float]:
        """Campanato 指数位于 [0,1]"""
        if any(b < 0.0 or b > 1.0 for b in v):
            raise ValueError("beta must lie in [0, 1]")
        return v


class ExperimentConfig(BaseModel):
    """实验配置

    与TOML配置文件结构一致，命令行参数可覆盖 seed/threads/output_dir。
    """

    model_config = ConfigDict(use_enum_values=False)

    experiment: ExperimentType = Field(description="实验类型")
    solver: SolverSettings = Field(default_factory=SolverSettings, description="求解器参数")
    family: FamilySettings = Field(default_factory=FamilySettings, description="球族参数")
    sweep: SweepSettings = Field(default_factory=SweepSettings, description="扫描参数")
    seed: int = Field(default=20240531, description="随机种子")
    threads: int = Field(default=1, ge=1, description="并发线程数")
    output_dir: Path = Field(default=Path("output"), description="输出目录")

    def hash_payload(self) -> dict[str, Any]:
        """参与配置哈希的内容（不含输出目录与线程数）"""
        return self.model_dump(mode="json", exclude={"output_dir", "threads"})


# =============================================================================
# (5) 实验报告模型
# =============================================================================


class ExperimentReport(BaseModel):
    """实验报告

    每个实验驱动返回一个报告，由 ReportStore 写出为CSV。
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    experiment: ExperimentType = Field(description="实验类型")
    rows: list[dict[str, Any]] = Field(default_factory=list, description="主结果表")
    details: dict[str, list[dict[str, Any]]] = Field(
        default_factory=dict, description="附加明细表，键为表名后缀"
    )
    passed: bool = Field(default=True, description="所有断言性检查是否通过")
    summary: list[str] = Field(default_factory=list, description="文本摘要")


class ExperimentOutcome(BaseModel):
    """路由器返回的实验执行结果"""

    experiment: ExperimentType = Field(description="实验类型")
    success: bool = Field(description="是否成功完成且通过检查")
    report: Optional[ExperimentReport] = Field(default=None, description="实验报告")
    error: Optional[str] = Field(default=None, description="错误信息")
    error_type: Optional[str] = Field(default=None, description="异常类名")
    output_dir: Optional[Path] = Field(default=None, description="输出目录")
    processing_time_ms: float = Field(default=0.0, description="耗时(毫秒)")


__all__ = [
    "BoundaryKind",
    "CheckResult",
    "ExperimentConfig",
    "ExperimentOutcome",
    "ExperimentReport",
    "ExperimentType",
    "FamilySettings",
    "GRecipe",
    "SolverSettings",
    "SweepSettings",
]
