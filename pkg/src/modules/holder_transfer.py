"""
Hölder 传递实验

A(Du) 在 β 下 Campanato 有限时，Du = A⁻¹(A(Du)) 在 β·σ 下 Hölder 连续，
σ = min{1, p′−1}（κ=0 纯幂律）或 σ = 1（κ>0 或含牛顿项）。

实验在解出的应力上逐单元作用 A⁻¹ 得到 Du，分别测量两者的 Hölder 半范数
（Campanato 途径与直接差商），并检查有限性与加密稳定性。
"""

# =============================================================================
# (1) 导入依赖
# =============================================================================
from __future__ import annotations

import math
from typing import Any, Optional

import numpy as np

from src.core.constitutive import StressLaw
from src.core.field import TensorField, cell_magnitude, cells_to_nodes
from src.core.nfunc import NFunctionModel
from src.core.oscillation import BallFamily, holder_seminorm_via_campanato
from src.core.state import ExperimentConfig, ExperimentReport, ExperimentType, GRecipe
from src.managers.sweep import SweepManager
from src.modules.base import (
    ExperimentModule,
    build_rhs,
    centered_ball,
    holder_sigma,
    make_grid,
    model_columns,
    model_points,
)
from src.service.stokes_service import SolverConfig, StokesService
from src.utils.logger import get_logger

# =============================================================================
# (2) 日志配置
# =============================================================================

logger = get_logger(__name__)

STABILITY_FACTOR = 2.0


# =============================================================================
# (3) 交错网格上的 A⁻¹
# =============================================================================


def stress_inverse_field(law: StressLaw, S: TensorField) -> TensorField:
    """逐单元 Q = (φ′)^{-1}(|S|)·S/|S|

    单元系数 t/|S|_c 直接作用于对角分量，节点剪切取相邻单元系数的平均。
    """
    grid = S.grid
    size = cell_magnitude(S)
    t = np.asarray(law.model.inverse_phi_prime(size), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(size > 0.0, t / np.where(size > 0.0, size, 1.0), 0.0)
    return TensorField(
        grid=grid,
        diag=factor[..., None] * S.diag,
        shear=cells_to_nodes(factor, grid) * S.shear,
    )


def transfer_point(
    service: StokesService,
    model: NFunctionModel,
    recipe: GRecipe,
    n: int,
    config: ExperimentConfig,
) -> list[dict[str, Any]]:
    """单个 (律, 配方, 网格) 上全部 β>0 的测量行"""
    law = StressLaw(model=model)
    grid = make_grid(n, config.solver)
    G = build_rhs(recipe, grid, config.sweep.amplitude, service)
    result = service.solve_stokes(SolverConfig.from_settings(grid, law, config.solver, G=G))
    S = result.stress()
    D = stress_inverse_field(law, S)
    strain = result.strain()
    scale = strain.max_abs()
    consistency = (D - strain).max_abs() / scale if scale > 0.0 else 0.0

    family = BallFamily.dyadic(centered_ball(grid, config.family.region_fraction), grid, config.family.levels)
    sigma = holder_sigma(model)
    rows = []
    for beta in config.sweep.beta:
        if beta <= 0.0:
            continue
        stress_report = holder_seminorm_via_campanato(S, family, beta)
        strain_report = holder_seminorm_via_campanato(D, family, beta * sigma)
        rows.append(
            {
                **model_columns(model),
                "recipe": recipe.value,
                "n": n,
                "beta": beta,
                "sigma": sigma,
                "strain_exponent": beta * sigma,
                "stress_campanato": stress_report.campanato,
                "stress_direct": stress_report.direct,
                "strain_campanato": strain_report.campanato,
                "strain_direct": strain_report.direct,
                "direct_over_campanato": strain_report.ratio,
                "inverse_consistency": consistency,
                "finite": math.isfinite(stress_report.campanato) and math.isfinite(strain_report.campanato),
            }
        )
    return rows


def assess(rows: list[dict[str, Any]]) -> None:
    """按网格顺序补充 mesh_change（Du 的 Campanato 半范数）与 passed"""
    rows.sort(key=lambda row: row["n"])
    previous: Optional[float] = None
    for row in rows:
        current = row["strain_campanato"]
        if previous is None or previous <= 0.0 or current <= 0.0:
            row["mesh_change"] = math.nan
        else:
            row["mesh_change"] = max(current / previous, previous / current)
        stable = math.isnan(row["mesh_change"]) or row["mesh_change"] <= STABILITY_FACTOR
        row["passed"] = bool(row["finite"]) and stable
        previous = current


# =============================================================================
# (4) 实验驱动
# =============================================================================


class HolderTransferModule(ExperimentModule):
    """Hölder 传递实验"""

    experiment = ExperimentType.HOLDER_TRANSFER

    async def run(self, config: ExperimentConfig) -> ExperimentReport:
        sweep = config.sweep
        models = model_points(sweep)
        recipes = sweep.recipes or [GRecipe.HOLDER]
        points = [(model, recipe, n) for model in models for recipe in recipes for n in sorted(sweep.meshes)]
        if not points or not any(beta > 0.0 for beta in sweep.beta):
            return self.empty_report()
        outcomes = await self.manager(config).run(
            lambda point: transfer_point(self.stokes_service, *point, config), points
        )

        groups: dict[tuple[int, str, float], list[dict[str, Any]]] = {}
        rows: list[dict[str, Any]] = []
        summary = [f"points: {len(points)}"]
        for (model, recipe, n), outcome in zip(points, outcomes):
            if not outcome.ok:
                rows.append({**model_columns(model), "recipe": recipe.value, "n": n, "passed": False})
                summary.append(f"  error {model.describe()} {recipe.value} n={n}: {outcome.error}")
                continue
            for row in outcome.value:
                groups.setdefault((models.index(model), row["recipe"], row["beta"]), []).append(row)
        for key in sorted(groups):
            assess(groups[key])
            rows.extend(groups[key])

        for model in models:
            summary.append(f"  {model.kind.value} p={model.p:g} kappa={model.kappa:g}: sigma={holder_sigma(model):g}")
        failed = [row for row in rows if not row["passed"]]
        summary.extend(
            f"  failed {row['kind']} p={row['p']:g} {row['recipe']} beta={row.get('beta', math.nan):g} n={row['n']}"
            for row in failed
        )
        return ExperimentReport(experiment=self.experiment, rows=rows, passed=not failed, summary=summary)


# =============================================================================
# (5) 单例实例
# =============================================================================

_default_holder_transfer_module: Optional[HolderTransferModule] = None


def get_holder_transfer_module(
    stokes_service: Optional[StokesService] = None,
    sweep_manager: Optional[SweepManager] = None,
) -> HolderTransferModule:
    """获取默认 Hölder 传递实验模块实例"""
    global _default_holder_transfer_module
    if _default_holder_transfer_module is None:
        _default_holder_transfer_module = HolderTransferModule(stokes_service, sweep_manager)
    return _default_holder_transfer_module


__all__ = [
    "HolderTransferModule",
    "get_holder_transfer_module",
    "stress_inverse_field",
    "transfer_point",
]
