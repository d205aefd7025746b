"""
Campanato 主估计实验

对每个 (律, G 配方, β, 网格) 测量

    LHS = [A(Du)]_{β,B} + [π]_{β,B}
    RHS = [G]_{β,2B} + R^{−β}·M#_{2B} A(Du)

并报告 LHS/RHS。常数 C 未知，因此只检查估计的结构：比值有限、一次加密下
变化不超过 2 倍、G 放大 rescale 倍时变化不超过 2 倍（p=2 时精确不变）。
"""

# =============================================================================
# (1) 导入依赖
# =============================================================================
from __future__ import annotations

import math
from typing import Any, Optional

import numpy as np

from src.core.constitutive import StressLaw
from src.core.field import SYM_WEIGHTS, Ball, TensorField, ball_values
from src.core.nfunc import NFunctionModel, estimate_indices
from src.core.oscillation import BallFamily, campanato_seminorm, mean_oscillation
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

STABILITY_FACTOR = 2.0
LINEAR_RESCALE_TOL = 1e-6


# =============================================================================
# (3) 估计两侧的测量
# =============================================================================


def _ratio(lhs: float, rhs: float) -> tuple[float, str]:
    value = NumericHelper.safe_ratio(lhs, rhs)
    if lhs == 0.0 and rhs == 0.0:
        return value, "0/0 degenerate"
    return value, "finite" if math.isfinite(value) else "infinite"


def _change(a: float, b: float) -> float:
    """两个比值的倍数差 max(a/b, b/a)"""
    if not (math.isfinite(a) and math.isfinite(b)) or a <= 0.0 or b <= 0.0:
        return math.nan
    return max(a / b, b / a)


def pressure_control(result: SolveResult, G: TensorField, B: Ball) -> float:
    """M#_B π / ⨍_B |A(Du) − G|"""
    gap = ball_values(result.stress() - G, B)
    size = float(np.mean(np.sqrt(np.sum(SYM_WEIGHTS * gap * gap, axis=-1))))
    oscillation = mean_oscillation(result.pi, B)
    if size == 0.0:
        return math.nan if oscillation == 0.0 else math.inf
    return oscillation / size


def estimate_sides(
    result: SolveResult,
    G: TensorField,
    family: BallFamily,
    outer_family: BallFamily,
    beta: float,
) -> dict[str, float]:
    """主估计两侧各项"""
    S = result.stress()
    B2 = outer_family.region
    stress_term = campanato_seminorm(S, family, beta)
    pressure_term = campanato_seminorm(result.pi, family, beta)
    data_term = campanato_seminorm(G, outer_family, beta)
    oscillation_term = family.region.radius ** (-beta) * mean_oscillation(S, B2)
    lhs = stress_term + pressure_term
    rhs = data_term + oscillation_term
    ratio, verdict = _ratio(lhs, rhs)
    return {
        "stress_campanato": stress_term,
        "pressure_campanato": pressure_term,
        "data_campanato": data_term,
        "oscillation_term": oscillation_term,
        "lhs": lhs,
        "rhs": rhs,
        "ratio": ratio,
        "verdict": verdict,
    }


def run_point(
    service: StokesService,
    model: NFunctionModel,
    recipe: GRecipe,
    n: int,
    config: ExperimentConfig,
) -> list[dict[str, Any]]:
    """单个 (律, 配方, 网格)：原始与放大的 G 各解一次，对全部 β 测量"""
    sweep = config.sweep
    law = StressLaw(model=model)
    grid = make_grid(n, config.solver)
    G = build_rhs(recipe, grid, sweep.amplitude, service)
    G_scaled = G * sweep.rescale
    result = service.solve_stokes(SolverConfig.from_settings(grid, law, config.solver, G=G))
    scaled = service.solve_stokes(SolverConfig.from_settings(grid, law, config.solver, G=G_scaled))

    B = centered_ball(grid, config.family.region_fraction)
    family = BallFamily.dyadic(B, grid, config.family.levels)
    outer_family = BallFamily.dyadic(B.scaled(2.0), grid, config.family.levels)
    p_bar_conj = estimate_indices(model).p_bar_conj
    control = pressure_control(result, G, B)

    rows = []
    for beta in sweep.beta:
        sides = estimate_sides(result, G, family, outer_family, beta)
        sides_scaled = estimate_sides(scaled, G_scaled, family, outer_family, beta)
        row = {
            **model_columns(model),
            "recipe": recipe.value,
            "beta": beta,
            "n": n,
            **sides,
            "ratio_rescaled": sides_scaled["ratio"],
            "rescale_change": _change(sides["ratio"], sides_scaled["ratio"]),
            "pressure_control": control,
            "p_bar_conj": p_bar_conj,
        }
        if sweep.decay_slope is not None:
            row["beta_within_decay"] = beta < sweep.decay_slope / p_bar_conj
        rows.append(row)
    return rows


def assess(rows: list[dict[str, Any]], linear: bool) -> None:
    """按网格顺序补充 mesh_change 并给出每行的 passed"""
    rows.sort(key=lambda row: row["n"])
    previous: Optional[dict[str, Any]] = None
    for row in rows:
        row["mesh_change"] = _change(previous["ratio"], row["ratio"]) if previous else math.nan
        if row["verdict"] == "0/0 degenerate":
            row["passed"] = True
        else:
            rescale_ok = (
                math.isclose(row["ratio_rescaled"], row["ratio"], rel_tol=LINEAR_RESCALE_TOL)
                if linear
                else not row["rescale_change"] > STABILITY_FACTOR
            )
            mesh_ok = math.isnan(row["mesh_change"]) or row["mesh_change"] <= STABILITY_FACTOR
            row["passed"] = row["verdict"] == "finite" and rescale_ok and mesh_ok
        previous = row


# =============================================================================
# (4) 实验驱动
# =============================================================================


class MainEstimateModule(ExperimentModule):
    """Campanato 主估计实验"""

    experiment = ExperimentType.MAIN_ESTIMATE

    async def run(self, config: ExperimentConfig) -> ExperimentReport:
        sweep = config.sweep
        models = model_points(sweep)
        points = [
            (model, recipe, n)
            for model in models
            for recipe in sweep.recipes
            for n in sorted(sweep.meshes)
        ]
        if not points or not sweep.beta:
            return self.empty_report()
        outcomes = await self.manager(config).run(
            lambda point: run_point(self.stokes_service, *point, config), points
        )

        groups: dict[tuple[int, str, float], list[dict[str, Any]]] = {}
        rows: list[dict[str, Any]] = []
        summary = [f"points: {len(points)}", f"beta: {sweep.beta}", f"rescale: {sweep.rescale:g}"]
        for (model, recipe, n), outcome in zip(points, outcomes):
            if not outcome.ok:
                rows.append(
                    {**model_columns(model), "recipe": recipe.value, "n": n, "verdict": "error", "passed": False}
                )
                summary.append(f"  error {model.describe()} {recipe.value} n={n}: {outcome.error}")
                continue
            for row in outcome.value:
                key = (models.index(model), row["recipe"], row["beta"])
                groups.setdefault(key, []).append(row)

        for (index, _, _), group in sorted(groups.items(), key=lambda item: item[0]):
            power = models[index].pure_power()
            assess(group, linear=power is not None and power[1] == 2.0)
            rows.extend(group)

        failed = [row for row in rows if not row["passed"]]
        for row in failed:
            summary.append(
                f"  failed {row['kind']} p={row['p']:g} {row['recipe']} "
                f"beta={row.get('beta', math.nan):g} n={row['n']}"
            )
        if sweep.decay_slope is not None:
            summary.append(f"beta flags are empirical: measured decay slope {sweep.decay_slope:g}")
        return ExperimentReport(
            experiment=self.experiment, rows=rows, passed=not failed, summary=summary
        )


# =============================================================================
# (5) 单例实例
# =============================================================================

_default_main_estimate_module: Optional[MainEstimateModule] = None


def get_main_estimate_module(
    stokes_service: Optional[StokesService] = None,
    sweep_manager: Optional[SweepManager] = None,
) -> MainEstimateModule:
    """获取默认主估计实验模块实例"""
    global _default_main_estimate_module
    if _default_main_estimate_module is None:
        _default_main_estimate_module = MainEstimateModule(stokes_service, sweep_manager)
    return _default_main_estimate_module


__all__ = [
    "MainEstimateModule",
    "assess",
    "estimate_sides",
    "get_main_estimate_module",
    "pressure_control",
    "run_point",
]
