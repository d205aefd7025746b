"""
构造解收敛性实验

周期方盒 [0, L)² 上取

    u* = A(sin ky, sin kx),  π* = A cos kx cos ky,  k = 2π/L,

右端 G = A(Du*) − π*I 在交错位置采样，于是 (u*, π*) 是连续问题的精确解。

检查项：
- p=2：速度误差的收敛阶为 2 ± 20%，非线性路径与直接线性解一致（1e-8）
- 其他律：‖V(Du_h) − V(Du*)‖ 随加密严格下降
- 离散约束：max|div u_h| / max|Du_h| ≤ 1e-7
- 能量极小性：最细网格上 50 个随机无散扰动不能降低 J
"""

# =============================================================================
# (1) 导入依赖
# =============================================================================
from __future__ import annotations

import math
from typing import Any, Optional

import numpy as np
from numpy.typing import NDArray

from src.core.constitutive import StressLaw
from src.core.field import (
    Grid,
    TensorField,
    VectorField,
    cell_magnitude,
    curl,
    inner_product,
    tensor_from_function,
    vector_from_function,
)
from src.core.nfunc import NFunctionModel
from src.core.state import ExperimentConfig, ExperimentReport, ExperimentType, SolverSettings
from src.managers.sweep import SweepManager
from src.modules.base import ExperimentModule, make_grid, model_columns, model_points
from src.service.stokes_service import SolveResult, SolverConfig, StokesService
from src.utils.helpers import NumericHelper
from src.utils.logger import get_logger

# =============================================================================
# (2) 日志配置
# =============================================================================

logger = get_logger(__name__)

TARGET_ORDER = 2.0
ORDER_TOLERANCE = 0.2 * TARGET_ORDER
REDUCTION_TOL = 1e-8
DIVERGENCE_TOL = 1e-7
PERTURBATIONS = 50
EPSILONS = (1e-3, -1e-3, 1e-2, -1e-2)
ENERGY_SLACK = 1e-10


# =============================================================================
# (3) 构造解
# =============================================================================


class ManufacturedSolution:
    """周期构造解及其导出量"""

    # I. 初始化
    def __init__(self, law: StressLaw, length: float, amplitude: float) -> None:
        self.law = law
        self.k = 2.0 * math.pi / length
        self.amplitude = amplitude

    # II. 精确场
    def velocity(self, x: NDArray, y: NDArray) -> tuple[NDArray, NDArray]:
        return self.amplitude * np.sin(self.k * y), self.amplitude * np.sin(self.k * x)

    def pressure(self, x: NDArray, y: NDArray) -> NDArray:
        return self.amplitude * np.cos(self.k * x) * np.cos(self.k * y)

    def strain(self, x: NDArray, y: NDArray) -> NDArray:
        """Du* 的 (…,3) 对称矩阵数组，只有剪切分量"""
        shear = 0.5 * self.amplitude * self.k * (np.cos(self.k * y) + np.cos(self.k * x))
        zero = np.zeros_like(shear)
        return np.stack([zero, shear, zero], axis=-1)

    def _components(self, values: NDArray) -> tuple[NDArray, NDArray, NDArray]:
        return values[..., 0], values[..., 1], values[..., 2]

    # III. 采样
    def exact_velocity(self, grid: Grid) -> VectorField:
        return vector_from_function(grid, self.velocity)

    def rhs(self, grid: Grid) -> TensorField:
        """G = A(Du*) − π*I"""

        def sample(x: NDArray, y: NDArray) -> tuple[NDArray, NDArray, NDArray]:
            a11, a12, a22 = self._components(self.law.stress(self.strain(x, y)))
            pi = self.pressure(x, y)
            return a11 - pi, a12, a22 - pi

        return tensor_from_function(grid, sample)

    def exact_v(self, grid: Grid) -> TensorField:
        return tensor_from_function(
            grid, lambda x, y: self._components(self.law.v_map(self.strain(x, y)))
        )


# =============================================================================
# (4) 单个律的网格序列
# =============================================================================


def _l2(T: TensorField) -> float:
    return math.sqrt(max(inner_product(T, T), 0.0))


def _mesh_row(
    service: StokesService, solution: ManufacturedSolution, config: SolverConfig
) -> tuple[dict[str, Any], SolveResult]:
    grid = config.grid
    result = service.solve_stokes(config)
    velocity_error = (result.u - solution.exact_velocity(grid)).norm()
    v_error = _l2(result.v() - solution.exact_v(grid))
    strain_max = float(np.max(cell_magnitude(result.strain())))
    div_max = float(np.max(np.abs(result.divergence().values)))
    row = {
        "n": grid.n,
        "h": grid.h,
        "velocity_error": velocity_error,
        "v_error": v_error,
        "divergence_relative": div_max / strain_max if strain_max > 0.0 else div_max,
        "newton_iterations": result.iterations,
        "stages": result.continuation_stages,
        "final_residual": result.residual_history[-1] if result.residual_history else 0.0,
        "energy": result.energy,
    }
    return row, result


def energy_minimality(
    service: StokesService, result: SolveResult, seed: int, count: int = PERTURBATIONS
) -> list[dict[str, Any]]:
    """随机无散扰动 u + εξ 下的能量增量，ξ = curl ψ 且 max|ξ| = 1"""
    grid = result.u.grid
    rng = np.random.default_rng(seed)
    base = service.energy(result)
    slack = ENERGY_SLACK * max(1.0, abs(base))
    rows = []
    for index in range(count):
        xi = curl(rng.normal(size=grid.node_shape), grid)
        xi = xi * (1.0 / xi.max_abs())
        for eps in EPSILONS:
            perturbed = service.energy(result, result.u + xi * eps)
            rows.append(
                {
                    "perturbation": index,
                    "epsilon": eps,
                    "energy": perturbed,
                    "increase": perturbed - base,
                    "passed": perturbed >= base - slack,
                }
            )
    return rows


def run_law(
    service: StokesService,
    model: NFunctionModel,
    meshes: list[int],
    settings: SolverSettings,
    amplitude: float,
    seed: int,
) -> dict[str, Any]:
    """单个律在全部网格上的收敛性与附加检查"""
    law = StressLaw(model=model)
    solution = ManufacturedSolution(law, settings.box_length, amplitude)
    linear_case = model.pure_power() is not None and model.pure_power()[1] == 2.0
    rows: list[dict[str, Any]] = []
    results: list[SolveResult] = []
    for n in sorted(meshes):
        grid = make_grid(n, settings)
        config = SolverConfig.from_settings(grid, law, settings, G=solution.rhs(grid))
        row, result = _mesh_row(service, solution, config)
        if linear_case:
            linear = service.solve_linear_stokes(config)
            scale = max(linear.u.norm(), 1e-300)
            row["linear_difference"] = (result.u - linear.u).norm() / scale
        rows.append({**model_columns(model), **row})
        results.append(result)

    checks: dict[str, Any] = {**model_columns(model)}
    if len(rows) >= 2:
        h = [row["h"] for row in rows]
        errors = [row["velocity_error"] for row in rows]
        order, _, r_squared = NumericHelper.fit_loglog(h, errors)
        checks.update(velocity_order=order, order_r_squared=r_squared)
        v_errors = [row["v_error"] for row in rows]
        checks["v_error_decreasing"] = all(b < a for a, b in zip(v_errors, v_errors[1:]))
        if linear_case:
            checks["order_passed"] = abs(order - TARGET_ORDER) <= ORDER_TOLERANCE
    if linear_case:
        checks["reduction_passed"] = all(row["linear_difference"] <= REDUCTION_TOL for row in rows)
    checks["divergence_passed"] = all(row["divergence_relative"] <= DIVERGENCE_TOL for row in rows)

    energy_rows = [
        {**model_columns(model), "n": results[-1].u.grid.n, **item}
        for item in energy_minimality(service, results[-1], seed)
    ]
    checks["energy_passed"] = all(item["passed"] for item in energy_rows)
    flags = [value for key, value in checks.items() if key.endswith(("_passed", "_decreasing"))]
    checks["passed"] = all(flags)
    return {"rows": rows, "checks": checks, "energy": energy_rows}


# =============================================================================
# (5) 实验驱动
# =============================================================================


class ConvergenceModule(ExperimentModule):
    """构造解收敛性实验"""

    experiment = ExperimentType.CONVERGENCE

    async def run(self, config: ExperimentConfig) -> ExperimentReport:
        sweep = config.sweep
        models = model_points(sweep)
        if not models or not sweep.meshes:
            return self.empty_report()
        outcomes = await self.manager(config).run(
            lambda model: run_law(
                self.stokes_service, model, sweep.meshes, config.solver, sweep.amplitude, config.seed
            ),
            models,
        )

        rows: list[dict[str, Any]] = []
        checks: list[dict[str, Any]] = []
        energy: list[dict[str, Any]] = []
        summary = [f"laws: {len(models)}", f"meshes: {sorted(sweep.meshes)}"]
        for model, outcome in zip(models, outcomes):
            if not outcome.ok:
                checks.append({**model_columns(model), "passed": False, "error": outcome.error})
                summary.append(f"  error {model.describe()}: {outcome.error}")
                continue
            rows.extend(outcome.value["rows"])
            checks.append(outcome.value["checks"])
            energy.extend(outcome.value["energy"])
            item = outcome.value["checks"]
            order = item.get("velocity_order", math.nan)
            summary.append(
                f"  {item['kind']} p={item['p']:g} kappa={item['kappa']:g}: "
                f"order={order:.3f} passed={item['passed']}"
            )
        passed = all(item["passed"] for item in checks)
        return ExperimentReport(
            experiment=self.experiment,
            rows=rows,
            details={"checks": checks, "energy": energy},
            passed=passed,
            summary=summary,
        )


# =============================================================================
# (6) 单例实例
# =============================================================================

_default_convergence_module: Optional[ConvergenceModule] = None


def get_convergence_module(
    stokes_service: Optional[StokesService] = None,
    sweep_manager: Optional[SweepManager] = None,
) -> ConvergenceModule:
    """获取默认收敛性实验模块实例"""
    global _default_convergence_module
    if _default_convergence_module is None:
        _default_convergence_module = ConvergenceModule(stokes_service, sweep_manager)
    return _default_convergence_module


__all__ = [
    "ConvergenceModule",
    "ManufacturedSolution",
    "energy_minimality",
    "get_convergence_module",
    "run_law",
]
