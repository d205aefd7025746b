"""
广义 Stokes 求解服务模块

在交错网格上求解

    −div A(Du) + ∇π = −div G,  div u = 0

及其对流形式（G 换为 G + u⊗u）。非线性部分用带回溯线搜索的阻尼 Newton，
每个 Newton 步的鞍点问题用增广拉格朗日 Uzawa 迭代；κ=0 且 p<2 的退化律用
κ 延拓逐级逼近。

主要功能：
- solve_stokes：非线性求解
- solve_linear_stokes：常粘度直接解
- lift_rhs：把体力 f 提升为散度形式的 G
- solve_homogeneous：球上 G=0、边界取外部解的比较问题
- solve_navier_stokes：对流项 Picard 迭代
"""

# =============================================================================
# (1) 导入依赖
# =============================================================================
from __future__ import annotations

import math
from typing import Any, Optional

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.core.constitutive import StressLaw, stress_field, v_field
from src.core.exceptions import (
    BallOutsideGridError,
    ConfigurationError,
    PicardDivergenceError,
    SolverConvergenceError,
)
from src.core.field import (
    Ball,
    Grid,
    ScalarField,
    TensorField,
    VectorField,
    divergence_vec,
    inner_product,
    outer_product,
    sym_gradient,
)
from src.core.nfunc import NFunctionModel, estimate_indices
from src.core.state import SolverSettings
from src.service.saddle_point import SaddlePointSystem, get_operators
from src.utils.logger import get_logger

# =============================================================================
# (2) 日志配置
# =============================================================================

logger = get_logger(__name__)

# 线搜索最多折半次数
MAX_HALVINGS = 20
# 延拓中间阶段的相对残差容差
STAGE_TOL = 1e-6
# 对流项增长条件的指数阈值
CONVECTIVE_GROWTH_THRESHOLD = 1.5
# Picard 增量连续增长次数上限
PICARD_GROWTH_LIMIT = 3


# =============================================================================
# (3) 配置与结果
# =============================================================================


class SolverConfig(BaseModel):
    """单次求解的配置"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: Grid = Field(description="网格")
    law: StressLaw = Field(description="应力律")
    G: Optional[TensorField] = Field(default=None, description="散度形式右端 G")
    f: Optional[VectorField] = Field(default=None, description="体力 f（先提升为 G）")
    boundary_data: Optional[VectorField] = Field(
        default=None, description="Dirichlet 边界法向面取值与壁面切向迹"
    )
    newton_tol: float = Field(default=1e-9, gt=0.0, description="Newton 相对残差容差")
    max_newton: int = Field(default=50, ge=1, description="每阶段最大 Newton 步数")
    kappa_floor: float = Field(default=1e-8, gt=0.0, description="κ 正则化下限")
    kappa_start: float = Field(default=1.0, gt=0.0, description="κ 延拓起点")
    uzawa_rho: float = Field(default=1.0, gt=0.0, description="增广罚参数（相对最大粘度）")
    max_uzawa: int = Field(default=2000, ge=1, description="每步最大 Uzawa 迭代数")
    max_picard: int = Field(default=50, ge=1, description="最大 Picard 迭代数")
    convective: bool = Field(default=False, description="是否含对流项")

    @model_validator(mode="after")
    def check_fields(self) -> SolverConfig:
        if self.G is not None and self.f is not None:
            raise ValueError("give the right-hand side either as G or as f, not both")
        for item in (self.G, self.f, self.boundary_data):
            if item is not None and item.grid != self.grid:
                raise ValueError("right-hand side and boundary data must live on the solver grid")
        return self

    @classmethod
    def from_settings(
        cls, grid: Grid, law: StressLaw, settings: SolverSettings, **kwargs: Any
    ) -> SolverConfig:
        """由实验配置中的求解器参数构造"""
        return cls(
            grid=grid,
            law=law,
            newton_tol=settings.newton_tol,
            max_newton=settings.max_newton,
            kappa_floor=settings.kappa_floor,
            kappa_start=settings.kappa_start,
            uzawa_rho=settings.uzawa_rho,
            max_uzawa=settings.max_uzawa,
            max_picard=settings.max_picard,
            **kwargs,
        )


class SolveResult(BaseModel):
    """求解结果

    residual_history 只含最后一个延拓阶段；π 在活动单元上均值为零。
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    u: VectorField = Field(description="速度")
    pi: ScalarField = Field(description="压力")
    residual_history: list[float] = Field(default_factory=list, description="残差历史")
    iterations: int = Field(default=0, ge=0, description="最后阶段的 Newton 步数")
    continuation_stages: int = Field(default=1, ge=0, description="κ 延拓阶段数")
    energy: float = Field(default=0.0, description="离散能量 J(u)")
    kappa_effective: Optional[float] = Field(default=None, description="实际使用的 κ")
    law_effective: StressLaw = Field(description="实际求解的应力律")
    config: SolverConfig = Field(description="求解配置（右端已提升为 G）")
    active: Optional[NDArray] = Field(default=None, description="子区域活动单元掩码")
    system: SaddlePointSystem = Field(exclude=True, description="离散系统")

    def strain(self) -> TensorField:
        return sym_gradient(self.u)

    def stress(self) -> TensorField:
        """A(Du)"""
        return stress_field(self.law_effective, self.strain(), self.active)

    def v(self) -> TensorField:
        """V(Du)"""
        return v_field(self.law_effective, self.strain(), self.active)

    def divergence(self) -> ScalarField:
        div = divergence_vec(self.u)
        if self.active is None:
            return div
        return ScalarField(grid=div.grid, values=np.where(self.active, div.values, 0.0))

    def summary(self) -> dict[str, Any]:
        return {
            "iterations": self.iterations,
            "stages": self.continuation_stages,
            "final_residual": self.residual_history[-1] if self.residual_history else 0.0,
            "energy": self.energy,
            "kappa_effective": self.kappa_effective,
        }


class WeakResidual(BaseModel):
    """弱形式残差 ⟨A(Du),Dξ⟩ − ⟨π,div ξ⟩ − ⟨G,Dξ⟩ 及其量级"""

    value: float = Field(description="残差")
    scale: float = Field(ge=0.0, description="三项绝对值之和")

    @property
    def relative(self) -> float:
        return abs(self.value) / self.scale if self.scale > 0.0 else abs(self.value)


# =============================================================================
# (4) 求解服务
# =============================================================================


class StokesService:
    """广义 Stokes / Navier-Stokes 求解服务

    主要功能：
    - 非线性求解与 κ 延拓
    - 常粘度直接解与右端提升
    - 球上齐次比较问题
    - 对流项 Picard 迭代
    """

    # I. 初始化
    def __init__(self) -> None:
        logger.info("StokesService initialized")

    # II. 延拓阶段
    @staticmethod
    def continuation_laws(config: SolverConfig) -> list[tuple[Optional[float], StressLaw]]:
        """按 κ 正则化得到各阶段的 (κ, 应力律)

        κ=0 且 φ″ 在原点奇异时从 kappa_start 逐次折半到 kappa_floor；
        其余情形只有一个阶段，κ 取 max(κ, kappa_floor)。
        """
        law = config.law
        model = law.model
        if not isinstance(model, NFunctionModel) or not model.has_kappa:
            return [(None, law)]
        if model.kappa == 0.0 and model.singular_at_origin:
            stages: list[float] = []
            kappa = max(config.kappa_start, config.kappa_floor)
            while kappa > config.kappa_floor:
                stages.append(kappa)
                kappa *= 0.5
            stages.append(config.kappa_floor)
        else:
            stages = [max(model.kappa, config.kappa_floor)]
        return [
            (k, law.model_copy(update={"model": model.with_kappa(k)})) for k in stages
        ]

    # III. 右端与系统
    def _resolve_rhs(self, config: SolverConfig) -> SolverConfig:
        """体力 f 提升为 G"""
        if config.f is None:
            return config
        G = self.lift_rhs(config.f)
        return config.model_copy(update={"G": G, "f": None})

    @staticmethod
    def _build_system(config: SolverConfig) -> SaddlePointSystem:
        grid = config.grid
        ops = get_operators(grid)
        data = config.boundary_data
        x_full = ops.to_vector(data) if data is not None else np.zeros(ops.n_dofs)
        trace = data.trace if data is not None else None
        return SaddlePointSystem(grid, x_full, trace=trace, G=config.G)

    @staticmethod
    def _is_trivial(system: SaddlePointSystem) -> bool:
        return (
            not np.any(system.wg)
            and not np.any(system.face_load)
            and not np.any(system.s0)
            and not np.any(system.p0)
        )

    # IV. Newton 迭代
    def _newton(
        self,
        system: SaddlePointSystem,
        law: StressLaw,
        x_F: NDArray,
        pi: NDArray,
        config: SolverConfig,
        tol: float,
    ) -> tuple[NDArray, NDArray, list[float], int]:
        """阻尼 Newton：残差在线搜索下严格下降

        Raises:
            SolverConvergenceError: 线搜索失败或步数耗尽
        """
        r_u, r_p, scales = system.residual(law, x_F, pi)
        res = system.relative_residual(r_u, r_p, scales)
        history = [res]
        for iteration in range(1, config.max_newton + 1):
            if res <= tol:
                return x_F, pi, history, iteration - 1
            H = system.hessian(law, x_F)
            z = system.cell_vectors(x_F)
            mu = law.viscosity(np.sqrt(np.sum(z * z, axis=1)))
            rho = config.uzawa_rho * float(np.max(mu * system.cell_weights))
            uzawa_tol = 0.1 * tol * max(scales["p"], 1e-14)
            du, dpi, inner = system.uzawa_step(H, r_u, r_p, rho, uzawa_tol, config.max_uzawa)

            step = 1.0
            accepted = False
            for _ in range(MAX_HALVINGS + 1):
                x_new = x_F + step * du
                pi_new = system.project_pressure(pi + step * dpi)
                r_u_new, r_p_new, scales_new = system.residual(law, x_new, pi_new)
                res_new = system.relative_residual(r_u_new, r_p_new, scales_new)
                if res_new < res:
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                if res <= 10.0 * tol:
                    logger.debug(f"Line search stalled at residual {res:.3e}; accepted")
                    return x_F, pi, history, iteration - 1
                raise SolverConvergenceError(
                    f"line search failed at residual {res:.3e}", history
                )
            x_F, pi = x_new, pi_new
            r_u, r_p, scales, res = r_u_new, r_p_new, scales_new, res_new
            history.append(res)
            logger.debug(
                f"Newton {iteration}: residual={res:.3e}, step={step:g}, uzawa={inner}"
            )
        if res <= tol:
            return x_F, pi, history, config.max_newton
        raise SolverConvergenceError(
            f"no convergence after {config.max_newton} Newton steps (residual {res:.3e})",
            history,
        )

    def _run_stages(
        self,
        system: SaddlePointSystem,
        stages: list[tuple[Optional[float], StressLaw]],
        x_F: NDArray,
        pi: NDArray,
        config: SolverConfig,
    ) -> tuple[NDArray, NDArray, list[float], int]:
        history: list[float] = []
        iterations = 0
        for index, (kappa, law) in enumerate(stages):
            final = index == len(stages) - 1
            tol = config.newton_tol if final else max(config.newton_tol, STAGE_TOL)
            x_F, pi, history, iterations = self._newton(system, law, x_F, pi, config, tol)
            if len(stages) > 1:
                logger.debug(f"Continuation stage kappa={kappa:.3e} done in {iterations} steps")
        return x_F, pi, history, iterations

    def _initial_guess(
        self, system: SaddlePointSystem, law: StressLaw, config: SolverConfig
    ) -> tuple[NDArray, NDArray]:
        """常粘度线性解；粘度取 φ′(t)=‖G‖∞ 处的 φ′(t)/t"""
        g_max = config.G.max_abs() if config.G is not None else 0.0
        if g_max > 0.0:
            t_ref = float(law.model.inverse_phi_prime(g_max))
            viscosity = g_max / t_ref if t_ref > 0.0 else 1.0
        else:
            viscosity = 1.0
        return system.direct_linear(viscosity)

    def _result(
        self,
        system: SaddlePointSystem,
        x_F: NDArray,
        pi: NDArray,
        history: list[float],
        iterations: int,
        stages: list[tuple[Optional[float], StressLaw]],
        config: SolverConfig,
        active: Optional[NDArray] = None,
    ) -> SolveResult:
        grid = system.grid
        ops = system.ops
        kappa, law = stages[-1]
        x = system.full_vector(x_F)
        if grid.periodic and active is None:
            x[: ops.n_u1] -= x[: ops.n_u1].mean()
            x[ops.n_u1 :] -= x[ops.n_u1 :].mean()
        pressure = np.zeros(ops.n_cells)
        pressure[system.rows] = pi
        u = ops.to_field(x, system.trace)
        return SolveResult(
            u=u,
            pi=ScalarField(grid=grid, values=pressure.reshape(grid.cell_shape)),
            residual_history=history,
            iterations=iterations,
            continuation_stages=len(stages),
            energy=system.energy(law, x),
            kappa_effective=kappa,
            law_effective=law,
            config=config,
            active=active,
            system=system,
        )

    # V. 公开接口
    def solve_stokes(self, config: SolverConfig) -> SolveResult:
        """非线性广义 Stokes 求解

        Args:
            config: 求解配置；右端为 f 时先提升为 G

        Returns:
            SolveResult: 速度、零均值压力与收敛信息

        Raises:
            SolverConvergenceError: Newton 不收敛
            InfSupError: 压力迭代停滞
        """
        config = self._resolve_rhs(config)
        system = self._build_system(config)
        stages = self.continuation_laws(config)
        if self._is_trivial(system):
            logger.info("Zero data: returning the trivial solution")
            return self._result(
                system, np.zeros(system.n_free), np.zeros(system.rows.size), [0.0], 0, stages, config
            )
        x_F, pi = self._initial_guess(system, stages[0][1], config)
        x_F, pi, history, iterations = self._run_stages(system, stages, x_F, pi, config)
        result = self._result(system, x_F, pi, history, iterations, stages, config)
        logger.info(
            f"Solved {config.law.describe()} on n={config.grid.n}: "
            f"{iterations} Newton steps, {len(stages)} stage(s), residual={history[-1]:.2e}"
        )
        return result

    def solve_linear_stokes(
        self, config: SolverConfig, viscosity: Optional[float] = None
    ) -> SolveResult:
        """常粘度线性 Stokes 直接解

        Args:
            config: 求解配置
            viscosity: 粘度，缺省取 φ′(1)/1（p=2 时即常数粘度）
        """
        config = self._resolve_rhs(config)
        system = self._build_system(config)
        stages = self.continuation_laws(config)
        mu = float(config.law.viscosity(1.0)) if viscosity is None else viscosity
        x_F, pi = system.direct_linear(mu)
        return self._result(system, x_F, pi, [], 0, stages, config)

    def lift_rhs(self, f: VectorField) -> TensorField:
        """把体力 f 提升为 G = Dw − σI，使 −div G = f（离散弱意义）

        w、σ 为单位粘度线性 Stokes 问题 −div Dw + ∇σ = f、div w = 0 的解，
        Dirichlet 网格上 w 在边界为零。

        Raises:
            ConfigurationError: 周期网格上 f 均值非零
        """
        grid = f.grid
        if grid.periodic:
            scale = max(f.max_abs(), 1e-300)
            if abs(f.u1.mean()) > 1e-12 * scale or abs(f.u2.mean()) > 1e-12 * scale:
                raise ConfigurationError("periodic forcing must have zero mean to be lifted")
        ops = get_operators(grid)
        system = SaddlePointSystem(grid, np.zeros(ops.n_dofs), f=f)
        x_F, sigma = system.direct_linear(1.0)
        w = ops.to_field(system.full_vector(x_F))
        pressure = np.zeros(ops.n_cells)
        pressure[system.rows] = sigma
        sigma_field = ScalarField(grid=grid, values=pressure.reshape(grid.cell_shape))
        return sym_gradient(w).minus_scalar_identity(sigma_field)

    def solve_homogeneous(self, outer: SolveResult, B: Ball) -> SolveResult:
        """球上的齐次比较问题：G=0，球外与边界层取外部解

        Raises:
            BallOutsideGridError: 球低于截断，或外部解所在的域不包含 2B
        """
        grid = outer.u.grid
        if not B.scaled(2.0).within(grid):
            raise BallOutsideGridError(
                f"outer solution must cover 2B: radius {2.0 * B.radius:.4g} around {B.center} leaves the box"
            )
        active = B.mask(grid)
        system = SaddlePointSystem.masked(grid, outer.u, active)
        law = outer.law_effective
        stages = [(outer.kappa_effective, law)]
        config = outer.config.model_copy(update={"G": None, "f": None, "convective": False})
        if self._is_trivial(system):
            return self._result(
                system, np.zeros(system.n_free), np.zeros(system.rows.size), [0.0], 0,
                stages, config, active,
            )
        x_F = system.free_part(get_operators(grid).to_vector(outer.u))
        pi = system.project_pressure(outer.pi.values.ravel()[system.rows])
        x_F, pi, history, iterations = self._newton(
            system, law, x_F, pi, config, config.newton_tol
        )
        logger.debug(f"Homogeneous problem on ball R={B.radius:.4g}: {iterations} steps")
        return self._result(system, x_F, pi, history, iterations, stages, config, active)

    def solve_navier_stokes(self, config: SolverConfig) -> SolveResult:
        """对流形式的 Picard 迭代：G_k = G + u_k⊗u_k

        Raises:
            ConfigurationError: 增长指数不超过 3/2
            PicardDivergenceError: 增量连续增长
        """
        indices = estimate_indices(config.law.model)
        if indices.growth_at_infinity <= CONVECTIVE_GROWTH_THRESHOLD:
            raise ConfigurationError(
                f"convective term needs growth exponent r > 3/2, "
                f"law has {indices.growth_at_infinity:.4g}"
            )
        config = self._resolve_rhs(config).model_copy(update={"convective": False})
        base = config.G if config.G is not None else TensorField.zeros(config.grid)
        u_k = VectorField.zeros(config.grid)
        previous_increment = math.inf
        growth = 0
        for k in range(1, config.max_picard + 1):
            G_k = base + outer_product(u_k)
            result = self.solve_stokes(config.model_copy(update={"G": G_k}))
            increment = (result.u - u_k).norm()
            size = u_k.norm()
            logger.debug(f"Picard {k}: increment={increment:.3e}, |u|={size:.3e}")
            if increment <= config.newton_tol * size or increment == 0.0:
                logger.info(f"Picard converged in {k} iterations")
                return result
            growth = growth + 1 if increment > previous_increment else 0
            if growth >= PICARD_GROWTH_LIMIT:
                raise PicardDivergenceError(
                    "Picard increments grew three times in a row; try smaller data"
                )
            previous_increment = increment
            u_k = result.u
        raise PicardDivergenceError(f"Picard iteration did not converge in {config.max_picard} steps")

    # VI. 诊断
    def energy(self, result: SolveResult, u: Optional[VectorField] = None) -> float:
        """J(u) = Σ φ(|Du|)h² − ⟨G, Du⟩，缺省取结果中的速度"""
        system = result.system
        x = get_operators(system.grid).to_vector(u if u is not None else result.u)
        return system.energy(result.law_effective, x)

    def weak_residual(self, result: SolveResult, xi: VectorField) -> WeakResidual:
        """⟨A(Du),Dξ⟩ − ⟨π,div ξ⟩ − ⟨G,Dξ⟩，ξ 须在固定自由度上为零"""
        active = result.active
        D_xi = sym_gradient(xi)
        stress_term = inner_product(result.stress(), D_xi, active)
        div_xi = divergence_vec(xi).values
        mask = np.ones(div_xi.shape) if active is None else active.astype(float)
        pressure_term = float(xi.grid.h**2 * np.sum(mask * result.pi.values * div_xi))
        G = result.config.G
        load_term = inner_product(G, D_xi, active) if G is not None else 0.0
        return WeakResidual(
            value=stress_term - pressure_term - load_term,
            scale=abs(stress_term) + abs(pressure_term) + abs(load_term),
        )


# =============================================================================
# (5) 单例实例
# =============================================================================

_default_stokes_service: Optional[StokesService] = None


def get_stokes_service() -> StokesService:
    """获取默认求解服务实例"""
    global _default_stokes_service
    if _default_stokes_service is None:
        _default_stokes_service = StokesService()
    return _default_stokes_service


# =============================================================================
# (6) 模块级接口
# =============================================================================


def solve_stokes(config: SolverConfig) -> SolveResult:
    return get_stokes_service().solve_stokes(config)


def solve_linear_stokes(config: SolverConfig, viscosity: Optional[float] = None) -> SolveResult:
    return get_stokes_service().solve_linear_stokes(config, viscosity)


def lift_rhs(f: VectorField) -> TensorField:
    return get_stokes_service().lift_rhs(f)


def solve_homogeneous(outer: SolveResult, B: Ball) -> SolveResult:
    return get_stokes_service().solve_homogeneous(outer, B)


def solve_navier_stokes(config: SolverConfig) -> SolveResult:
    return get_stokes_service().solve_navier_stokes(config)


def energy(result: SolveResult, u: Optional[VectorField] = None) -> float:
    return get_stokes_service().energy(result, u)


def weak_residual(result: SolveResult, xi: VectorField) -> WeakResidual:
    return get_stokes_service().weak_residual(result, xi)


__all__ = [
    "SolveResult",
    "SolverConfig",
    "StokesService",
    "WeakResidual",
    "energy",
    "get_stokes_service",
    "lift_rhs",
    "solve_homogeneous",
    "solve_linear_stokes",
    "solve_navier_stokes",
    "solve_stokes",
    "weak_residual",
]
