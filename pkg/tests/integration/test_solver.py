"""
求解服务集成测试

在小网格上测试非线性 Stokes 求解、右端提升、齐次比较问题、
能量极小性与对流项的适用范围。
"""

# =============================================================================
# (1) 导入依赖
# =============================================================================
import numpy as np
import pytest
import scipy.sparse as sp

from src.core.constitutive import StressLaw
from src.core.exceptions import BallOutsideGridError, ConfigurationError, InfSupError, SolverConvergenceError
from src.core.field import Grid, TensorField, VectorField, curl, divergence_tensor
from src.core.nfunc import NFunctionKind, NFunctionModel
from src.core.state import BoundaryKind, GRecipe, SolverSettings
from src.modules.base import build_rhs, centered_ball, make_grid, step_force
from src.service.saddle_point import _factorize
from src.service.stokes_service import SolverConfig, StokesService


# =============================================================================
# (2) 测试配置
# =============================================================================

@pytest.fixture(scope="module")
def service() -> StokesService:
    return StokesService()


@pytest.fixture
def grid() -> Grid:
    return make_grid(16, SolverSettings())


def _law(p: float, kappa: float = 0.0) -> StressLaw:
    return StressLaw(model=NFunctionModel(kind=NFunctionKind.POWER_LAW_ADDITIVE, p=p, kappa=kappa))


def _config(grid: Grid, law: StressLaw, G: TensorField) -> SolverConfig:
    return SolverConfig.from_settings(grid, law, SolverSettings(), G=G)


def _psi(grid: Grid, seed: int = 0) -> np.ndarray:
    psi = np.random.default_rng(seed).normal(size=grid.node_shape)
    if not grid.periodic:
        psi[0, :] = psi[-1, :] = psi[:, 0] = psi[:, -1] = 0.0
    return psi


# =============================================================================
# (3) 线性与平凡情形
# =============================================================================

class TestLinearCases:
    """线性与平凡情形测试"""

    def test_zero_data_gives_zero(self, service: StokesService, grid: Grid) -> None:
        """测试 G=0 时 u=0、π=0"""
        result = service.solve_stokes(_config(grid, _law(1.5), TensorField.zeros(grid)))
        assert result.u.max_abs() == 0.0
        assert float(np.max(np.abs(result.pi.values))) == 0.0

    def test_newtonian_matches_linear_solve(self, service: StokesService, grid: Grid) -> None:
        """测试 p=2 的非线性求解与线性直接解一致"""
        G = build_rhs(GRecipe.SMOOTH, grid, 1.0)
        config = _config(grid, _law(2.0), G)
        nonlinear = service.solve_stokes(config)
        linear = service.solve_linear_stokes(config)
        scale = linear.u.max_abs()
        assert scale > 0.0
        assert (nonlinear.u - linear.u).max_abs() <= 1e-8 * scale

    def test_periodic_velocity_has_zero_mean(self, service: StokesService, grid: Grid) -> None:
        """测试周期网格速度均值为零、压力均值为零"""
        result = service.solve_stokes(_config(grid, _law(2.0), build_rhs(GRecipe.SMOOTH, grid, 1.0)))
        assert abs(float(np.mean(result.u.u1))) <= 1e-12
        assert abs(float(np.mean(result.u.u2))) <= 1e-12
        assert abs(result.pi.mean()) <= 1e-10 * max(float(np.max(np.abs(result.pi.values))), 1.0)

    def test_lift_reproduces_forcing(self, service: StokesService, grid: Grid) -> None:
        """测试 −div(lift f) = f"""
        f = step_force(grid, 1.0)
        G = service.lift_rhs(f)
        back = divergence_tensor(G) * -1.0
        assert (back - f).max_abs() <= 1e-8 * f.max_abs()

    def test_lift_rejects_nonzero_mean(self, service: StokesService, grid: Grid) -> None:
        """测试周期网格上均值非零的体力不能提升"""
        f = VectorField(grid=grid, u1=np.ones(grid.u1_shape), u2=np.zeros(grid.u2_shape))
        with pytest.raises(ConfigurationError):
            service.lift_rhs(f)


# =============================================================================
# (4) 非线性求解
# =============================================================================

class TestNonlinearSolve:
    """非线性求解测试"""

    @pytest.mark.parametrize("boundary", [BoundaryKind.PERIODIC, BoundaryKind.DIRICHLET])
    def test_weak_form_and_divergence(self, service: StokesService, boundary: BoundaryKind) -> None:
        """测试解满足弱形式且离散无散"""
        grid = make_grid(16, SolverSettings(), boundary)
        result = service.solve_stokes(_config(grid, _law(3.0, kappa=1.0), build_rhs(GRecipe.SMOOTH, grid, 1.0)))
        assert result.residual_history[-1] <= 1e-8
        xi = curl(_psi(grid), grid)
        assert service.weak_residual(result, xi).relative <= 1e-6
        assert float(np.max(np.abs(result.divergence().values))) <= 1e-7 * result.u.max_abs() / grid.h

    def test_energy_minimality(self, service: StokesService, grid: Grid) -> None:
        """测试无散扰动不降低能量"""
        result = service.solve_stokes(_config(grid, _law(3.0, kappa=1.0), build_rhs(GRecipe.SMOOTH, grid, 1.0)))
        base = service.energy(result)
        assert base == pytest.approx(result.energy)
        for seed in range(3):
            xi = curl(_psi(grid, seed), grid)
            eps = 1e-2 * result.u.max_abs() / xi.max_abs()
            assert service.energy(result, result.u + xi * eps) >= base

    @pytest.mark.slow
    def test_kappa_continuation(self, service: StokesService, grid: Grid) -> None:
        """测试 κ=0、p<2 时经延拓求解"""
        result = service.solve_stokes(_config(grid, _law(1.5), build_rhs(GRecipe.SMOOTH, grid, 1.0)))
        assert result.continuation_stages > 1
        assert result.kappa_effective == pytest.approx(SolverSettings().kappa_floor)
        assert result.residual_history[-1] <= 1e-8


# =============================================================================
# (5) 齐次比较问题
# =============================================================================

class TestHomogeneousProblem:
    """球上齐次比较问题测试"""

    def test_zero_outer_gives_zero(self, service: StokesService, grid: Grid) -> None:
        """测试外部解为零时齐次解为零"""
        outer = service.solve_stokes(_config(grid, _law(2.0), TensorField.zeros(grid)))
        h = service.solve_homogeneous(outer, centered_ball(grid, 0.25))
        assert h.u.max_abs() == 0.0

    def test_requires_room_for_double_ball(self, service: StokesService, grid: Grid) -> None:
        """测试 2B 越出计算域时拒绝求解"""
        outer = service.solve_stokes(_config(grid, _law(2.0), TensorField.zeros(grid)))
        with pytest.raises(BallOutsideGridError):
            service.solve_homogeneous(outer, centered_ball(grid, 0.3))

    def test_outside_ball_unchanged(self, service: StokesService, grid: Grid) -> None:
        """测试球外速度保持外部解且球内无散"""
        outer = service.solve_stokes(_config(grid, _law(2.0), build_rhs(GRecipe.SMOOTH, grid, 1.0)))
        B = centered_ball(grid, 0.25)
        h = service.solve_homogeneous(outer, B)
        assert h.active is not None
        np.testing.assert_array_equal(h.active, B.mask(grid))
        assert h.u.u1[0, 0] == outer.u.u1[0, 0]
        assert h.u.u2[0, 0] == outer.u.u2[0, 0]
        div = h.divergence().values[h.active]
        assert float(np.max(np.abs(div))) <= 1e-7 * outer.u.max_abs() / grid.h


# =============================================================================
# (6) 对流项
# =============================================================================

class TestNavierStokes:
    """对流项 Picard 迭代测试"""

    def test_low_growth_rejected(self, service: StokesService, grid: Grid) -> None:
        """测试增长指数不超过 3/2 的律被拒绝"""
        config = _config(grid, _law(1.4, kappa=1.0), build_rhs(GRecipe.SMOOTH, grid, 0.1))
        with pytest.raises(ConfigurationError):
            service.solve_navier_stokes(config)

    @pytest.mark.slow
    def test_small_data_converges(self, service: StokesService, grid: Grid) -> None:
        """测试小数据下 Picard 收敛且接近 Stokes 解"""
        config = _config(grid, _law(2.0), build_rhs(GRecipe.SMOOTH, grid, 0.1))
        navier = service.solve_navier_stokes(config)
        stokes = service.solve_stokes(config)
        assert (navier.u - stokes.u).max_abs() <= 0.5 * stokes.u.max_abs()


# =============================================================================
# (7) 分解失败
# =============================================================================

class TestFactorizationFailure:
    """稀疏分解失败测试"""

    def test_singular_matrix_raises_lab_error(self) -> None:
        """测试奇异矩阵的分解失败转为求解器错误"""
        with pytest.raises(InfSupError):
            _factorize(sp.csc_matrix((3, 3)), "zero", InfSupError)

    def test_linear_solve_failure(self, service: StokesService, grid: Grid, mocker) -> None:
        """测试直接解分解失败时抛出 SolverConvergenceError"""
        mocker.patch("src.service.saddle_point.splu", side_effect=RuntimeError("Factor is exactly singular"))
        config = _config(grid, _law(2.0), build_rhs(GRecipe.SMOOTH, grid, 1.0))
        with pytest.raises(SolverConvergenceError):
            service.solve_linear_stokes(config)
