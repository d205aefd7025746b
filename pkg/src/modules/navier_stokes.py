"""
广义 Navier-Stokes 实验

对流问题按 Picard 迭代求解后，先确认 u⊗u 在目标 β 下 Campanato 有限，
再把 G + u⊗u 作为有效右端送入主估计测量。增长指数不超过 3/2 的律在
求解前即被拒绝，记为 rejected。
"""

# =============================================================================
# (1) 导入依赖
# =============================================================================
from __future__ import annotations

import math
from typing import Any, Optional

from src.core.constitutive import StressLaw
from src.core.exceptions import ConfigurationError
from src.core.field import outer_product
from src.core.nfunc import NFunctionModel
from src.core.oscillation import BallFamily, campanato_seminorm
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
from src.modules.main_estimate import estimate_sides
from src.service.stokes_service import SolverConfig, StokesService
from src.utils.logger import get_logger

# =============================================================================
# (2) 日志配置
# =============================================================================

logger = get_logger(__name__)

STABILITY_FACTOR = 2.0


# =============================================================================
# (3) 单个采样点
# =============================================================================


def navier_point(
    service: StokesService,
    model: NFunctionModel,
    recipe: GRecipe,
    n: int,
    config: ExperimentConfig,
) -> list[dict[str, Any]]:
    """Picard 求解、对流张量检查与主估计测量

    Returns:
        list[dict]: 每个 β 一行；律被拒绝时只有一行 verdict=rejected
    """
    law = StressLaw(model=model)
    grid = make_grid(n, config.solver)
    G = build_rhs(recipe, grid, config.sweep.amplitude, service)
    solver_config = SolverConfig.from_settings(grid, law, config.solver, G=G, convective=True)
    columns = {**model_columns(model), "recipe": recipe.value, "n": n}
    try:
        result = service.solve_navier_stokes(solver_config)
    except ConfigurationError as e:
        logger.info(f"Navier-Stokes rejected for {model.describe()}: {e}")
        return [{**columns, "verdict": "rejected", "note": str(e)}]
    stokes = service.solve_stokes(solver_config.model_copy(update={"convective": False}))
    scale = stokes.u.norm()
    stokes_difference = (result.u - stokes.u).norm() / scale if scale > 0.0 else result.u.norm()

    convective = outer_product(result.u)
    effective = G + convective
    B = centered_ball(grid, config.family.region_fraction)
    family = BallFamily.dyadic(B, grid, config.family.levels)
    outer_family = BallFamily.dyadic(B.scaled(2.0), grid, config.family.levels)

    rows = []
    for beta in config.sweep.beta:
        convective_campanato = campanato_seminorm(convective, outer_family, beta)
        sides = estimate_sides(result, effective, family, outer_family, beta)
        rows.append(
            {
                **columns,
                "beta": beta,
                "convective_campanato": convective_campanato,
                "convective_finite": math.isfinite(convective_campanato),
                **sides,
                "stokes_difference": stokes_difference,
                "newton_iterations": result.iterations,
            }
        )
    return rows


def assess(rows: list[dict[str, Any]]) -> None:
    """补充 mesh_change 与 passed；0/0 退化视为通过"""
    rows.sort(key=lambda row: row["n"])
    previous: Optional[float] = None
    for row in rows:
        ratio = row["ratio"]
        if previous is not None and previous > 0.0 and ratio > 0.0 and math.isfinite(ratio):
            row["mesh_change"] = max(ratio / previous, previous / ratio)
        else:
            row["mesh_change"] = math.nan
        stable = math.isnan(row["mesh_change"]) or row["mesh_change"] <= STABILITY_FACTOR
        finite = row["verdict"] in ("finite", "0/0 degenerate")
        row["passed"] = bool(row["convective_finite"]) and finite and stable
        previous = ratio


# =============================================================================
# (4) 实验驱动
# =============================================================================


class NavierStokesModule(ExperimentModule):
    """广义 Navier-Stokes 实验"""

    experiment = ExperimentType.NAVIER_STOKES

    async def run(self, config: ExperimentConfig) -> ExperimentReport:
        sweep = config.sweep
        models = model_points(sweep)
        recipes = sweep.recipes or [GRecipe.SMOOTH]
        points = [(model, recipe, n) for model in models for recipe in recipes for n in sorted(sweep.meshes)]
        if not points or not sweep.beta:
            return self.empty_report()
        outcomes = await self.manager(config).run(
            lambda point: navier_point(self.stokes_service, *point, config), points
        )

        groups: dict[tuple[int, str, float], list[dict[str, Any]]] = {}
        rows: list[dict[str, Any]] = []
        rejected: set[str] = set()
        summary = [f"points: {len(points)}"]
        for (model, recipe, n), outcome in zip(points, outcomes):
            if not outcome.ok:
                rows.append({**model_columns(model), "recipe": recipe.value, "n": n, "verdict": "error", "passed": False})
                summary.append(f"  error {model.describe()} {recipe.value} n={n}: {outcome.error}")
                continue
            for row in outcome.value:
                if row["verdict"] == "rejected":
                    rows.append({**row, "passed": True})
                    rejected.add(f"{row['kind']} p={row['p']:g} kappa={row['kappa']:g}")
                    continue
                groups.setdefault((models.index(model), row["recipe"], row["beta"]), []).append(row)
        for key in sorted(groups):
            assess(groups[key])
            rows.extend(groups[key])

        summary.extend(f"  rejected {item}: growth exponent not above 3/2" for item in sorted(rejected))
        failed = [row for row in rows if not row["passed"]]
        summary.extend(
            f"  failed {row['kind']} p={row['p']:g} {row['recipe']} beta={row.get('beta', math.nan):g} n={row['n']}"
            for row in failed
        )
        return ExperimentReport(experiment=self.experiment, rows=rows, passed=not failed, summary=summary)


# =============================================================================
# (5) 单例实例
# =============================================================================

_default_navier_stokes_module: Optional[NavierStokesModule] = None


def get_navier_stokes_module(
    stokes_service: Optional[StokesService] = None,
    sweep_manager: Optional[SweepManager] = None,
) -> NavierStokesModule:
    """获取默认 Navier-Stokes 实验模块实例"""
    global _default_navier_stokes_module
    if _default_navier_stokes_module is None:
        _default_navier_stokes_module = NavierStokesModule(stokes_service, sweep_manager)
    return _default_navier_stokes_module


__all__ = [
    "NavierStokesModule",
    "get_navier_stokes_module",
    "navier_point",
]
