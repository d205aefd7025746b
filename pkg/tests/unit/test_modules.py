"""
实验模块辅助函数单元测试

测试模型展开、传递因子、右端项配方、衰减拟合与主估计判定。
"""

# =============================================================================
# (1) 导入依赖
# =============================================================================
import math

import numpy as np
import pytest
from pydantic import ValidationError

from src.core.exceptions import ScaleSeparationError
from src.core.field import Grid
from src.core.nfunc import NFunctionKind, NFunctionModel
from src.core.state import FamilySettings, GRecipe, SolverSettings, SweepSettings
from src.modules.base import (
    build_rhs,
    centered_ball,
    holder_sigma,
    make_grid,
    model_columns,
    model_points,
    step_force,
)
from src.modules.decay import fit_decay
from src.modules.main_estimate import _ratio, assess


# =============================================================================
# (2) 测试配置
# =============================================================================

@pytest.fixture
def grid() -> Grid:
    return make_grid(16, SolverSettings())


def _row(n: int, ratio: float, verdict: str = "finite", rescaled: float = math.nan) -> dict:
    rescaled = ratio if math.isnan(rescaled) else rescaled
    return {
        "n": n,
        "ratio": ratio,
        "ratio_rescaled": rescaled,
        "rescale_change": max(ratio / rescaled, rescaled / ratio) if ratio > 0.0 else math.nan,
        "verdict": verdict,
    }


# =============================================================================
# (3) 模型与配方测试
# =============================================================================

class TestModelPoints:
    """扫描点展开测试"""

    def test_arcsinh_appears_once(self) -> None:
        """测试 arcsinh 不随 p、κ 重复"""
        sweep = SweepSettings(kinds=["power_law_additive", "arcsinh"], p=[2.0, 3.0], kappa=[0.0, 1.0])
        models = model_points(sweep)
        assert len(models) == 5
        assert sum(1 for m in models if m.kind == NFunctionKind.ARCSINH) == 1

    def test_model_columns(self) -> None:
        """测试报告标识列"""
        model = NFunctionModel(kind=NFunctionKind.POWER_LAW_QUADRATIC, p=1.5, kappa=0.5)
        assert model_columns(model) == {"kind": "power_law_quadratic", "p": 1.5, "kappa": 0.5}

    @pytest.mark.parametrize(
        "model,expected",
        [
            (NFunctionModel(kind=NFunctionKind.POWER_LAW_ADDITIVE, p=3.0), 0.5),
            (NFunctionModel(kind=NFunctionKind.POWER_LAW_ADDITIVE, p=1.5), 1.0),
            (NFunctionModel(kind=NFunctionKind.POWER_LAW_ADDITIVE, p=3.0, kappa=1.0), 1.0),
            (NFunctionModel(kind=NFunctionKind.ARCSINH, mu_inf=1.0), 1.0),
        ],
    )
    def test_holder_sigma(self, model: NFunctionModel, expected: float) -> None:
        """测试 Hölder 传递因子 σ"""
        assert holder_sigma(model) == pytest.approx(expected)


class TestRecipes:
    """右端项配方测试"""

    def test_centered_ball(self, grid: Grid) -> None:
        """测试区域球位于域中心"""
        B = centered_ball(grid, 0.2)
        assert B.center == pytest.approx((math.pi, math.pi))
        assert B.radius == pytest.approx(0.4 * math.pi)

    @pytest.mark.parametrize("field", ["region_fraction", "decay_fraction"])
    def test_fraction_leaves_room_for_double_ball(self, field: str) -> None:
        """测试区域比例不超过 1/4，使 2B 落在域内"""
        assert getattr(FamilySettings(**{field: 0.25}), field) == 0.25
        with pytest.raises(ValidationError):
            FamilySettings(**{field: 0.4})

    def test_step_force_has_zero_mean(self, grid: Grid) -> None:
        """测试阶跃体力均值为零"""
        f = step_force(grid, 2.0)
        assert float(np.mean(f.u1)) == pytest.approx(0.0)
        assert float(np.mean(f.u2)) == pytest.approx(0.0)
        assert f.max_abs() == pytest.approx(2.0)

    @pytest.mark.parametrize("recipe", [GRecipe.SMOOTH, GRecipe.HOLDER, GRecipe.LOG])
    def test_closed_form_recipes_finite(self, grid: Grid, recipe: GRecipe) -> None:
        """测试解析配方在全部网格点上有限"""
        G = build_rhs(recipe, grid, 1.0)
        assert np.all(np.isfinite(G.diag))
        assert np.all(np.isfinite(G.shear))
        assert G.max_abs() > 0.0

    def test_amplitude_scales_linearly(self, grid: Grid) -> None:
        """测试幅值线性缩放"""
        G1 = build_rhs(GRecipe.HOLDER, grid, 1.0)
        G3 = build_rhs(GRecipe.HOLDER, grid, 3.0)
        np.testing.assert_allclose(G3.diag, 3.0 * G1.diag, rtol=1e-14)


# =============================================================================
# (4) 衰减拟合测试
# =============================================================================

class TestFitDecay:
    """衰减拟合测试"""

    def test_recovers_exact_power(self) -> None:
        """测试精确幂律恢复斜率"""
        lambdas = [1.0, 0.5, 0.25, 0.125, 0.0625]
        fit = fit_decay(lambdas, [2.0 * lam**1.5 for lam in lambdas])
        assert fit.slope == pytest.approx(1.5, abs=1e-10)
        assert fit.fitted_levels == 4
        assert 1.0 not in fit.fitted_lambdas
        assert fit.verdict == "decay"
        assert fit.passed

    def test_top_level_never_fitted(self) -> None:
        """测试仅 3 层可分辨时 λ=1 仍不参与拟合"""
        lambdas = [1.0, 0.5, 0.25]
        # 顶层偏离幂律，若参与拟合斜率会改变
        fit = fit_decay(lambdas, [50.0, 0.5**2, 0.25**2])
        assert fit.fitted_lambdas == [0.5, 0.25]
        assert fit.fitted_levels == 2
        assert fit.slope == pytest.approx(2.0, abs=1e-10)

    def test_single_inner_level_is_no_decay(self) -> None:
        """测试内层正值点不足 2 个时结论为 no-decay"""
        fit = fit_decay([1.0, 0.5, 0.25], [1.0, 0.5, 0.0])
        assert fit.verdict == "no-decay"
        assert fit.fitted_levels == 1
        assert not fit.passed

    def test_insufficient_levels(self) -> None:
        """测试少于 3 层时报告尺度分离不足"""
        with pytest.raises(ScaleSeparationError):
            fit_decay([1.0, 0.5], [1.0, 0.5])

    def test_all_zero_is_degenerate(self) -> None:
        """测试振荡全为零时结论为 degenerate"""
        fit = fit_decay([1.0, 0.5, 0.25], [0.0, 0.0, 0.0])
        assert fit.verdict == "degenerate"
        assert math.isnan(fit.slope)
        assert fit.passed

    def test_growth_is_no_decay(self) -> None:
        """测试振荡随 λ 减小而增大时结论为 no-decay"""
        lambdas = [1.0, 0.5, 0.25, 0.125]
        fit = fit_decay(lambdas, [1.0 / lam for lam in lambdas])
        assert fit.verdict == "no-decay"
        assert not fit.passed


# =============================================================================
# (5) 主估计判定测试
# =============================================================================

class TestAssess:
    """主估计逐行判定测试"""

    def test_sorted_and_stable(self) -> None:
        """测试按网格排序并记录倍数差"""
        rows = [_row(64, 1.0), _row(32, 0.8)]
        assess(rows, linear=True)
        assert [row["n"] for row in rows] == [32, 64]
        assert math.isnan(rows[0]["mesh_change"])
        assert rows[1]["mesh_change"] == pytest.approx(1.25)
        assert all(row["passed"] for row in rows)

    def test_mesh_jump_fails(self) -> None:
        """测试加密后比值变化超过 2 倍时不通过"""
        rows = [_row(32, 0.5), _row(64, 1.5)]
        assess(rows, linear=False)
        assert rows[0]["passed"]
        assert not rows[1]["passed"]

    def test_linear_rescale_must_match(self) -> None:
        """测试线性情形重标度后比值须不变"""
        rows = [_row(32, 1.0, rescaled=1.1)]
        assess(rows, linear=True)
        assert not rows[0]["passed"]
        rows = [_row(32, 1.0, rescaled=1.1)]
        assess(rows, linear=False)
        assert rows[0]["passed"]

    def test_zero_ratio_linear(self) -> None:
        """测试左端为零时线性重标度检查不出错"""
        rows = [_row(32, 0.0)]
        assess(rows, linear=True)
        assert rows[0]["passed"]

    def test_degenerate_and_infinite(self) -> None:
        """测试 0/0 记为通过，无穷记为不通过"""
        rows = [_row(32, math.nan, verdict="0/0 degenerate"), _row(64, math.inf, verdict="infinite")]
        assess(rows, linear=False)
        assert rows[0]["passed"]
        assert not rows[1]["passed"]

    @pytest.mark.parametrize(
        "lhs,rhs,expected,verdict",
        [
            (1.0, 4.0, 0.25, "finite"),
            (0.0, 0.0, math.nan, "0/0 degenerate"),
            (1.0, 0.0, math.inf, "infinite"),
        ],
    )
    def test_ratio_verdicts(self, lhs: float, rhs: float, expected: float, verdict: str) -> None:
        """测试两端比值与结论"""
        value, label = _ratio(lhs, rhs)
        assert label == verdict
        if math.isnan(expected):
            assert math.isnan(value)
        else:
            assert value == expected
