"""
核心模块初始化

导出数值内核的公共接口。实验路由器依赖服务与驱动层，需从
src.core.router 直接导入。
"""

# =============================================================================
# (1) 状态与配置模型
# =============================================================================
from src.core.state import (
    BoundaryKind,
    CheckResult,
    ExperimentConfig,
    ExperimentOutcome,
    ExperimentReport,
    ExperimentType,
    FamilySettings,
    GRecipe,
    SolverSettings,
    SweepSettings,
)

# =============================================================================
# (2) 异常
# =============================================================================
from src.core.exceptions import (
    BallOutsideGridError,
    ConfigurationError,
    IndexEstimationError,
    InfSupError,
    NFunctionDomainError,
    PicardDivergenceError,
    ScaleSeparationError,
    SingularityError,
    SolverConvergenceError,
    StokesLabError,
)

# =============================================================================
# (3) N 函数
# =============================================================================
from src.core.nfunc import (
    ConjugateNFunction,
    Indices,
    NFunction,
    NFunctionKind,
    NFunctionModel,
    ShiftedNFunction,
    StructuralReport,
    estimate_indices,
    verify_structural_inequalities,
)

# =============================================================================
# (4) 网格与场
# =============================================================================
from src.core.field import (
    Ball,
    Grid,
    ScalarField,
    SymMat2,
    TensorField,
    VectorField,
    divergence_vec,
    sym_gradient,
)

# =============================================================================
# (5) 应力律
# =============================================================================
from src.core.constitutive import StressForm, StressLaw, stress, stress_inverse, v_map

# =============================================================================
# (6) 振荡半范数
# =============================================================================
from src.core.oscillation import (
    BallFamily,
    Modulus,
    SeminormReport,
    bmo_omega_seminorm,
    campanato_seminorm,
    holder_seminorm_via_campanato,
    mean_oscillation,
    vmo_modulus,
)

# =============================================================================
# (7) 导出列表
# =============================================================================

__all__ = [
    # 状态与配置
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
    # 异常
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
    # N 函数
    "ConjugateNFunction",
    "Indices",
    "NFunction",
    "NFunctionKind",
    "NFunctionModel",
    "ShiftedNFunction",
    "StructuralReport",
    "estimate_indices",
    "verify_structural_inequalities",
    # 网格与场
    "Ball",
    "Grid",
    "ScalarField",
    "SymMat2",
    "TensorField",
    "VectorField",
    "divergence_vec",
    "sym_gradient",
    # 应力律
    "StressForm",
    "StressLaw",
    "stress",
    "stress_inverse",
    "v_map",
    # 振荡半范数
    "BallFamily",
    "Modulus",
    "SeminormReport",
    "bmo_omega_seminorm",
    "campanato_seminorm",
    "holder_seminorm_via_campanato",
    "mean_oscillation",
    "vmo_modulus",
]
