"""
平均振荡单元测试

测试球族、模函数、尖锐函数、BMO/Campanato 半范数、VMO 模与 Hölder 报告。
"""

# ==============================================================================
# (1) 导入依赖
# ==============================================================================
import numpy as np
import pytest
from pydantic import ValidationError

from src.core.exceptions import BallOutsideGridError
from src.core.field import Ball, Grid, ScalarField, scalar_from_function
from src.core.oscillation import (
    BallFamily,
    Modulus,
    bmo_omega_seminorm,
    campanato_seminorm,
    holder_seminorm_via_campanato,
    mean_oscillation,
    mean_square_oscillation,
    vmo_modulus,
)


# ==============================================================================
# (2) 测试夹具
# ==============================================================================


@pytest.fixture
def grid() -> Grid:
    return Grid(n=32, length=1.0)


@pytest.fixture
def region() -> Ball:
    return Ball(center=(0.5, 0.5), radius=0.25)


@pytest.fixture
def family(grid: Grid, region: Ball) -> BallFamily:
    return BallFamily.dyadic(region, grid)


@pytest.fixture
def step(grid: Grid) -> ScalarField:
    """x=1/2 处的跳跃"""
    return scalar_from_function(grid, lambda x, y: np.where(x > 0.5, 1.0, 0.0))


# ==============================================================================
# (3) 球族测试
# ==============================================================================

class TestBallFamily:
    """球族测试"""

    def test_dyadic_stops_at_cutoff(self, family: BallFamily) -> None:
        """测试二进层级截止于 2h"""
        assert family.radii == pytest.approx([0.25, 0.125, 0.0625])
        assert len(family.levels[0]) == 1
        assert all(level for level in family.levels)

    def test_level_limit(self, grid: Grid, region: Ball) -> None:
        """测试层数上限"""
        assert len(BallFamily.dyadic(region, grid, levels=2).radii) == 2

    def test_balls_inside_region(self, family: BallFamily, region: Ball) -> None:
        """测试全部球都在区域球内"""
        assert all(region.contains_ball(ball) for ball in family.all_balls())

    def test_region_below_cutoff(self, grid: Grid) -> None:
        """测试区域球低于截断时抛出错误"""
        with pytest.raises(BallOutsideGridError):
            BallFamily.dyadic(Ball(center=(0.5, 0.5), radius=grid.h), grid)

    def test_from_balls_groups_by_radius(self, region: Ball) -> None:
        """测试按半径分层且递减"""
        balls = [
            Ball(center=(0.5, 0.5), radius=0.1),
            Ball(center=(0.5, 0.5), radius=0.2),
            Ball(center=(0.45, 0.5), radius=0.1),
        ]
        family = BallFamily.from_balls(region, balls)
        assert family.radii == [0.2, 0.1]
        assert [len(level) for level in family.levels] == [1, 2]


# ==============================================================================
# (4) 模函数测试
# ==============================================================================

class TestModulus:
    """模函数测试"""

    def test_constant_and_power(self) -> None:
        """测试常数模与幂模"""
        assert Modulus.constant()(0.3) == 1.0
        assert Modulus.power(0.5)(4.0) == pytest.approx(2.0)
        assert Modulus.power(0.5).describe() == "power(0.5)"

    def test_tabulated_interpolation(self) -> None:
        """测试表格模的线性插值"""
        omega = Modulus.tabulated([0.1, 0.2], [1.0, 2.0])
        assert omega(0.15) == pytest.approx(1.5)

    def test_tabulated_must_be_non_decreasing(self) -> None:
        """测试递减的表格值被拒绝"""
        with pytest.raises(ValidationError):
            Modulus.tabulated([0.1, 0.2], [2.0, 1.0])

    def test_almost_decreasing_constant(self) -> None:
        """测试 ω(r)r^{-β} 的几乎递减常数"""
        radii = [0.05, 0.1, 0.2, 0.4]
        omega = Modulus.power(0.5)
        assert omega.almost_decreasing_constant(0.5, radii) == pytest.approx(1.0)
        assert omega.almost_decreasing_constant(1.0, radii) == pytest.approx(1.0)
        assert omega.almost_decreasing_constant(0.0, radii) == pytest.approx(np.sqrt(8.0))


# ==============================================================================
# (5) 振荡与半范数测试
# ==============================================================================

class TestSeminorms:
    """尖锐函数与半范数测试"""

    def test_constant_field_has_no_oscillation(self, grid: Grid, family: BallFamily, region: Ball) -> None:
        """测试常数场振荡为零"""
        f = ScalarField(grid=grid, values=np.full(grid.cell_shape, 3.0))
        assert mean_oscillation(f, region) == pytest.approx(0.0, abs=1e-14)
        assert campanato_seminorm(f, family, 0.5) == pytest.approx(0.0, abs=1e-14)

    def test_step_oscillation(self, step: ScalarField, region: Ball) -> None:
        """测试跨跳跃中心球上 M# = 1/2"""
        assert mean_oscillation(step, region) == pytest.approx(0.5)
        assert mean_square_oscillation(step, region) == pytest.approx(0.25)

    def test_report_rows(self, step: ScalarField, family: BallFamily) -> None:
        """测试逐球明细与最大值一致"""
        report = bmo_omega_seminorm(step, family)
        frame = report.to_frame()
        assert len(frame) == len(family.all_balls())
        assert report.value == pytest.approx(frame["ratio"].max())
        assert len(report.per_level_max) == len(family.radii)
        assert report.modulus == "constant"

    def test_threads_do_not_change_result(self, step: ScalarField, family: BallFamily) -> None:
        """测试并行按层计算结果不变"""
        serial = bmo_omega_seminorm(step, family, Modulus.power(0.5))
        parallel = bmo_omega_seminorm(step, family, Modulus.power(0.5), threads=3)
        assert parallel.value == serial.value
        assert parallel.rows == serial.rows

    def test_linear_field_campanato_stable(self, grid: Grid, family: BallFamily) -> None:
        """测试线性场 M#_B f / R 随层级近似不变"""
        f = scalar_from_function(grid, lambda x, y: x + 0.0 * y)
        report = bmo_omega_seminorm(f, family, Modulus.power(1.0))
        levels = np.asarray(report.per_level_max)
        assert levels.max() / levels.min() < 1.5


# ==============================================================================
# (6) VMO 与 Hölder 测试
# ==============================================================================

class TestVMOAndHolder:
    """VMO 模与 Hölder 报告测试"""

    def test_step_is_flat(self, step: ScalarField, family: BallFamily) -> None:
        """测试跳跃的振荡不随半径缩小"""
        modulus = vmo_modulus(step, family)
        assert modulus.flat
        assert modulus.finest_value == pytest.approx(0.5)
        assert modulus.radii == sorted(modulus.radii)

    def test_smooth_field_not_flat(self, grid: Grid, family: BallFamily) -> None:
        """测试线性场的振荡随半径缩小"""
        f = scalar_from_function(grid, lambda x, y: x + 0.0 * y)
        modulus = vmo_modulus(f, family)
        assert not modulus.flat
        assert modulus(0.2) <= modulus(0.3)

    def test_holder_linear_field(self, grid: Grid, family: BallFamily) -> None:
        """测试线性场 β=1 的直接差商为 1"""
        f = scalar_from_function(grid, lambda x, y: x + 0.0 * y)
        report = holder_seminorm_via_campanato(f, family, 1.0)
        assert report.direct == pytest.approx(1.0)
        assert report.campanato > 0.0
        assert np.isfinite(report.ratio)

    @pytest.mark.parametrize("beta", [0.0, 1.5])
    def test_holder_exponent_range(self, step: ScalarField, family: BallFamily, beta: float) -> None:
        """测试 β 超出 (0, 1] 时抛出 ValueError"""
        with pytest.raises(ValueError):
            holder_seminorm_via_campanato(step, family, beta)
