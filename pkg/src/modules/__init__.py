"""
实验模块初始化

导出所有实验驱动的公共接口。
"""

# =============================================================================
# (1) 驱动基类
# =============================================================================
from src.modules.base import ExperimentModule, build_model, build_rhs, holder_sigma, model_points

# =============================================================================
# (2) N 函数与应力律
# =============================================================================
from src.modules.nfunc_verify import NFunctionVerifyModule, get_nfunc_verify_module
from src.modules.hammer_sweep import HammerSweepModule, get_hammer_sweep_module

# =============================================================================
# (3) 求解器实验
# =============================================================================
from src.modules.convergence import ConvergenceModule, ManufacturedSolution, get_convergence_module
from src.modules.decay import DecayFit, DecayModule, fit_decay, get_decay_module

# =============================================================================
# (4) 估计实验
# =============================================================================
from src.modules.main_estimate import MainEstimateModule, get_main_estimate_module
from src.modules.holder_transfer import HolderTransferModule, get_holder_transfer_module
from src.modules.navier_stokes import NavierStokesModule, get_navier_stokes_module

# =============================================================================
# (5) 导出列表
# =============================================================================

__all__ = [
    # 驱动基类
    "ExperimentModule",
    "build_model",
    "build_rhs",
    "holder_sigma",
    "model_points",
    # N 函数与应力律
    "NFunctionVerifyModule",
    "get_nfunc_verify_module",
    "HammerSweepModule",
    "get_hammer_sweep_module",
    # 求解器实验
    "ConvergenceModule",
    "ManufacturedSolution",
    "get_convergence_module",
    "DecayFit",
    "DecayModule",
    "fit_decay",
    "get_decay_module",
    # 估计实验
    "MainEstimateModule",
    "get_main_estimate_module",
    "HolderTransferModule",
    "get_holder_transfer_module",
    "NavierStokesModule",
    "get_navier_stokes_module",
]
