"""
N 函数校验实验

对扫描中的每个模型运行结构不等式校验，并补充三项数值性质：

- 共轭对合：(φ*)* 与 φ 的相对误差
- 逆映射往返：(φ′)^{-1}(φ′(t)) 与 t 的相对误差
- ν 齐次性：ν、μ∞ 加倍后 φ 恰好加倍
"""

# =============================================================================
# (1) 导入依赖
# =============================================================================
from __future__ import annotations

from typing import Any, Optional

import numpy as np

from src.core.nfunc import (
    ConjugateNFunction,
    NFunctionModel,
    verify_structural_inequalities,
)
from src.core.state import CheckResult, ExperimentConfig, ExperimentReport, ExperimentType
from src.managers.sweep import SweepManager
from src.modules.base import ExperimentModule, model_columns, model_points
from src.service.stokes_service import StokesService
from src.utils.logger import get_logger

# =============================================================================
# (2) 日志配置
# =============================================================================

logger = get_logger(__name__)

INVOLUTION_TOL = 1e-8
ROUND_TRIP_TOL = 1e-10
HOMOGENEITY_TOL = 1e-12


# =============================================================================
# (3) 数值性质
# =============================================================================


def _error_check(name: str, errors: np.ndarray, tol: float, note: str) -> CheckResult:
    """误差不超过 tol 即通过；min/max 记录误差极值"""
    errors = np.asarray(errors, dtype=float)
    bad = ~np.isfinite(errors) | (errors > tol)
    return CheckResult(
        name=name,
        passed=not bool(np.any(bad)),
        min_ratio=float(np.nanmin(errors)),
        max_ratio=float(np.nanmax(errors)),
        samples=int(errors.size),
        violations=int(np.count_nonzero(bad)),
        note=note,
    )


def involution_check(model: NFunctionModel) -> CheckResult:
    """t ∈ [1e-3, 1e3] 上 (φ*)* 与 φ 的相对误差

    外层共轭由内层共轭的数值反演导数计算，即使存在闭式共轭也不使用。
    """
    t = np.logspace(-3.0, 3.0, 121)
    double = ConjugateNFunction(base=ConjugateNFunction(base=model))
    reference = np.asarray(model.phi(t), dtype=float)
    errors = np.abs(np.asarray(double.phi(t)) - reference) / np.maximum(reference, 1e-300)
    return _error_check("conjugate_involution", errors, INVOLUTION_TOL, "relative error of (phi*)*")


def round_trip_check(model: NFunctionModel) -> CheckResult:
    """t ∈ [1e-6, 1e6] 上逆映射往返的相对误差"""
    t = np.logspace(-6.0, 6.0, 241)
    back = np.asarray(model.inverse_phi_prime(model.phi_prime(t)), dtype=float)
    return _error_check(
        "inverse_round_trip", np.abs(back - t) / t, ROUND_TRIP_TOL, "relative error of t"
    )


def homogeneity_check(model: NFunctionModel) -> CheckResult:
    """φ 关于 (ν, μ∞) 的一次齐次性"""
    t = np.logspace(-6.0, 6.0, 121)
    base = np.asarray(model.phi(t), dtype=float)
    doubled = np.asarray(model.scaled(2.0).phi(t), dtype=float)
    errors = np.abs(doubled - 2.0 * base) / (2.0 * base)
    return _error_check("nu_homogeneity", errors, HOMOGENEITY_TOL, "phi with doubled nu vs 2 phi")


def verify_model(model: NFunctionModel) -> list[dict[str, Any]]:
    """单个模型的全部校验行"""
    report = verify_structural_inequalities(model)
    checks = [*report.checks, involution_check(model), round_trip_check(model), homogeneity_check(model)]
    indices = report.indices
    columns = {
        **model_columns(model),
        "p_lower": indices.p_lower,
        "q_upper": indices.q_upper,
        "K1": indices.K1,
        "k_young": report.k_young,
    }
    return [{**columns, **check.as_row()} for check in checks]


# =============================================================================
# (4) 实验驱动
# =============================================================================


class NFunctionVerifyModule(ExperimentModule):
    """N 函数校验实验

    每个模型一个采样点，结果每项校验一行。
    """

    experiment = ExperimentType.NFUNC_VERIFY

    async def run(self, config: ExperimentConfig) -> ExperimentReport:
        models = model_points(config.sweep)
        if not models:
            return self.empty_report()
        outcomes = await self.manager(config).run(verify_model, models)

        rows: list[dict[str, Any]] = []
        errors: list[str] = []
        for model, outcome in zip(models, outcomes):
            if outcome.ok:
                rows.extend(outcome.value)
            else:
                errors.append(f"{model.describe()}: {outcome.error}")
                rows.append({**model_columns(model), "check": "error", "passed": False, "note": outcome.error})

        failed = sorted({f"{r['kind']}(p={r['p']:g}, kappa={r['kappa']:g}): {r['check']}" for r in rows if not r["passed"]})
        summary = [f"models: {len(models)}", f"checks: {len(rows)}", f"failed checks: {len(failed)}"]
        summary.extend(f"  {item}" for item in failed)
        summary.extend(f"  error {item}" for item in errors)
        return ExperimentReport(
            experiment=self.experiment, rows=rows, passed=not failed, summary=summary
        )


# =============================================================================
# (5) 单例实例
# =============================================================================

_default_nfunc_verify_module: Optional[NFunctionVerifyModule] = None


def get_nfunc_verify_module(
    stokes_service: Optional[StokesService] = None,
    sweep_manager: Optional[SweepManager] = None,
) -> NFunctionVerifyModule:
    """获取默认 N 函数校验模块实例"""
    global _default_nfunc_verify_module
    if _default_nfunc_verify_module is None:
        _default_nfunc_verify_module = NFunctionVerifyModule(stokes_service, sweep_manager)
    return _default_nfunc_verify_module


__all__ = [
    "NFunctionVerifyModule",
    "get_nfunc_verify_module",
    "homogeneity_check",
    "involution_check",
    "round_trip_check",
    "verify_model",
]
