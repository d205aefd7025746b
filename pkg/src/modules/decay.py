"""
齐次问题衰减实验

在周期方盒上求解非齐次问题，取中心球 B（半径 family.decay_fraction·L，默认 0.25L，使 2B 落在域内）
上 G=0、边界取外部解的齐次比较问题 h，测量

    osc(λ) = ⨍_{λB} |V(Dh) − ⟨V(Dh)⟩_{λB}|²,  λ ∈ {1, 1/2, ..., 1/16}

并在对数坐标下拟合 osc(λ) ≈ c·λ^s，斜率 s 即 2γ 的估计。
"""

# =============================================================================
# (1) 导入依赖
# =============================================================================
from __future__ import annotations

import math
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, Field

from src.core.constitutive import StressLaw
from src.core.exceptions import BallOutsideGridError, ScaleSeparationError
from src.core.field import Ball, Grid
from src.core.nfunc import NFunctionModel
from src.core.oscillation import mean_square_oscillation
from src.core.state import ExperimentConfig, ExperimentReport, ExperimentType, GRecipe
from src.managers.sweep import SweepManager
from src.modules.base import (
    ExperimentModule,
    build_rhs,
    centered_ball,
    make_grid,
    model_columns,
    model_points,
)
from src.service.stokes_service import SolveResult, SolverConfig, StokesService
from src.utils.helpers import NumericHelper
from src.utils.logger import get_logger

# =============================================================================
# (2) 日志配置
# =============================================================================

logger = get_logger(__name__)

DECAY_LEVELS = 5
DECAY_RADIUS_FRACTION = 0.25
MIN_FIT_LEVELS = 3
MIN_R_SQUARED = 0.9


# =============================================================================
# (3) 衰减拟合
# =============================================================================


class DecayFit(BaseModel):
    """衰减拟合结果

    verdict 取 decay（斜率为正且 r² ≥ 0.9）、no-decay 或 degenerate（振荡全为零）。
    """

    lambdas: list[float] = Field(description="可分辨的 λ（递减）")
    oscillations: list[float] = Field(description="各 λ 上的均方振荡")
    slope: float = Field(default=math.nan, description="拟合斜率 s")
    intercept: float = Field(default=math.nan, description="拟合截距 log c")
    r_squared: float = Field(default=math.nan, description="拟合优度")
    fitted_levels: int = Field(default=0, ge=0, description="参与拟合的层数")
    fitted_lambdas: list[float] = Field(default_factory=list, description="参与拟合的 λ")
    verdict: str = Field(default="degenerate", description="结论")

    @property
    def passed(self) -> bool:
        return self.verdict in ("decay", "degenerate")


def fit_decay(lambdas: list[float], oscillations: list[float]) -> DecayFit:
    """对数-对数最小二乘拟合 osc(λ) ≈ c·λ^s

    只用 λ ≤ 1/2 的层，λ=1 的顶层受边界层影响，从不参与拟合。
    可用的内层正值点少于 2 个时结论为 no-decay。

    Raises:
        ScaleSeparationError: 可分辨层数少于 3
    """
    lam = np.asarray(lambdas, dtype=float)
    osc = np.asarray(oscillations, dtype=float)
    if lam.size < MIN_FIT_LEVELS:
        raise ScaleSeparationError(
            f"insufficient scale separation: {lam.size} resolvable level(s), need {MIN_FIT_LEVELS}"
        )
    fit = DecayFit(lambdas=[float(v) for v in lam], oscillations=[float(v) for v in osc])
    if not np.any(osc > 0.0):
        return fit

    use = (lam <= 0.5 + 1e-12) & (osc > 0.0)
    if np.count_nonzero(use) < 2:
        return fit.model_copy(
            update={
                "verdict": "no-decay",
                "fitted_levels": int(np.count_nonzero(use)),
                "fitted_lambdas": [float(v) for v in lam[use]],
            }
        )
    slope, intercept, r_squared = NumericHelper.fit_loglog(lam[use], osc[use])
    verdict = "decay" if slope > 0.0 and r_squared >= MIN_R_SQUARED else "no-decay"
    return fit.model_copy(
        update={
            "slope": slope,
            "intercept": intercept,
            "r_squared": r_squared,
            "fitted_levels": int(np.count_nonzero(use)),
            "fitted_lambdas": [float(v) for v in lam[use]],
            "verdict": verdict,
        }
    )


def decay_profile(result: SolveResult, B: Ball, levels: int = DECAY_LEVELS) -> tuple[list[float], list[float]]:
    """V(Dh) 在 λB 上的均方振荡；低于截断 2h 的层被丢弃"""
    v = result.v()
    lambdas: list[float] = []
    oscillations: list[float] = []
    for lam in NumericHelper.dyadic_levels(levels):
        try:
            oscillations.append(mean_square_oscillation(v, B.scaled(lam)))
        except BallOutsideGridError:
            break
        lambdas.append(lam)
    return lambdas, oscillations


def run_decay_experiment(
    service: StokesService,
    model: NFunctionModel,
    grid: Grid,
    config: ExperimentConfig,
    fraction: float = DECAY_RADIUS_FRACTION,
) -> dict[str, Any]:
    """单个律的衰减实验：外部求解、球上齐次问题、拟合"""
    law = StressLaw(model=model)
    recipe = config.sweep.recipes[0] if config.sweep.recipes else GRecipe.SMOOTH
    G = build_rhs(recipe, grid, config.sweep.amplitude, service)
    outer = service.solve_stokes(SolverConfig.from_settings(grid, law, config.solver, G=G))
    B = centered_ball(grid, fraction)
    h = service.solve_homogeneous(outer, B)
    lambdas, oscillations = decay_profile(h, B)
    fit = fit_decay(lambdas, oscillations)
    logger.info(
        f"Decay for {model.describe()}: slope={fit.slope:.4g}, r2={fit.r_squared:.4g}, {fit.verdict}"
    )
    rows = [
        {**model_columns(model), "n": grid.n, "lambda": lam, "radius": lam * B.radius, "oscillation": osc}
        for lam, osc in zip(lambdas, oscillations)
    ]
    summary = {
        **model_columns(model),
        "n": grid.n,
        "radius": B.radius,
        "levels": len(lambdas),
        "slope": fit.slope,
        "r_squared": fit.r_squared,
        "fitted_levels": fit.fitted_levels,
        "verdict": fit.verdict,
        "passed": fit.passed,
        "newton_iterations": h.iterations,
    }
    return {"rows": rows, "fit": summary}


# =============================================================================
# (4) 实验驱动
# =============================================================================


class DecayModule(ExperimentModule):
    """齐次问题衰减实验

    网格取 sweep.meshes 中最大者。
    """

    experiment = ExperimentType.DECAY

    async def run(self, config: ExperimentConfig) -> ExperimentReport:
        models = model_points(config.sweep)
        if not models or not config.sweep.meshes:
            return self.empty_report()
        grid = make_grid(max(config.sweep.meshes), config.solver)
        fraction = config.family.decay_fraction
        outcomes = await self.manager(config).run(
            lambda model: run_decay_experiment(self.stokes_service, model, grid, config, fraction),
            models,
        )

        rows: list[dict[str, Any]] = []
        fits: list[dict[str, Any]] = []
        summary = [f"laws: {len(models)}", f"grid: n={grid.n}"]
        for model, outcome in zip(models, outcomes):
            if not outcome.ok:
                fits.append({**model_columns(model), "verdict": "error", "passed": False, "error": outcome.error})
                summary.append(f"  error {model.describe()}: {outcome.error}")
                continue
            rows.extend(outcome.value["rows"])
            fit = outcome.value["fit"]
            fits.append(fit)
            summary.append(
                f"  {fit['kind']} p={fit['p']:g} kappa={fit['kappa']:g}: "
                f"slope={fit['slope']:.4g} r2={fit['r_squared']:.4g} {fit['verdict']}"
            )
        return ExperimentReport(
            experiment=self.experiment,
            rows=rows,
            details={"fit": fits},
            passed=all(item["passed"] for item in fits),
            summary=summary,
        )


# =============================================================================
# (5) 单例实例
# =============================================================================

_default_decay_module: Optional[DecayModule] = None


def get_decay_module(
    stokes_service: Optional[StokesService] = None,
    sweep_manager: Optional[SweepManager] = None,
) -> DecayModule:
    """获取默认衰减实验模块实例"""
    global _default_decay_module
    if _default_decay_module is None:
        _default_decay_module = DecayModule(stokes_service, sweep_manager)
    return _default_decay_module


__all__ = [
    "DecayFit",
    "DecayModule",
    "decay_profile",
    "fit_decay",
    "get_decay_module",
    "run_decay_experiment",
]
