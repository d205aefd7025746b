"""
网格与场单元测试

测试对称矩阵、交错场、离散算子、内积与离散球。
"""

# ==============================================================================
# (1) 导入依赖
# ==============================================================================
import math
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src.core.exceptions import BallOutsideGridError
from src.core.field import (
    Ball,
    BoundaryTrace,
    Grid,
    ScalarField,
    SymMat2,
    TensorField,
    VectorField,
    ball_mean,
    cell_magnitude,
    cells_to_nodes,
    curl,
    divergence_tensor,
    divergence_vec,
    frobenius,
    inner_product,
    outer_product,
    restrict,
    skew_gradient,
    sym_gradient,
    sym_rotate,
    sym_trace,
    vector_from_function,
    vector_inner,
)
from src.core.state import BoundaryKind


# ==============================================================================
# (2) 测试夹具
# ==============================================================================


@pytest.fixture
def periodic() -> Grid:
    return Grid(n=16, length=1.0)


@pytest.fixture
def dirichlet() -> Grid:
    return Grid(n=12, length=1.0, boundary=BoundaryKind.DIRICHLET)


def _random_vector(grid: Grid, rng: np.random.Generator) -> VectorField:
    return VectorField(grid=grid, u1=rng.normal(size=grid.u1_shape), u2=rng.normal(size=grid.u2_shape))


def _random_tensor(grid: Grid, rng: np.random.Generator) -> TensorField:
    return TensorField(grid=grid, diag=rng.normal(size=(grid.n, grid.n, 2)), shear=rng.normal(size=grid.node_shape))


# ==============================================================================
# (3) 对称矩阵测试
# ==============================================================================

class TestSymMat2:
    """对称矩阵测试"""

    def test_norm_counts_off_diagonal_twice(self) -> None:
        """测试 |Q|² = a11² + 2a12² + a22²"""
        assert SymMat2(a12=1.0).norm == pytest.approx(math.sqrt(2.0))
        assert SymMat2(a11=3.0, a22=4.0).norm == pytest.approx(5.0)

    def test_array_round_trip(self) -> None:
        """测试数组与模型互转"""
        Q = SymMat2(a11=1.0, a12=-2.0, a22=0.5)
        assert SymMat2.from_array(Q.to_array()) == Q
        assert Q.trace == pytest.approx(1.5)

    def test_rotation_invariance(self) -> None:
        """测试旋转保持范数与迹"""
        Q = np.array([[1.0, 0.3, -2.0], [0.5, 0.0, 0.5]])
        R = sym_rotate(Q, 0.7)
        np.testing.assert_allclose(frobenius(R), frobenius(Q), rtol=1e-14)
        np.testing.assert_allclose(sym_trace(R), sym_trace(Q), atol=1e-14)


# ==============================================================================
# (4) 网格测试
# ==============================================================================

class TestGrid:
    """网格测试"""

    def test_spacing_and_shapes(self, periodic: Grid, dirichlet: Grid) -> None:
        """测试步长与交错形状"""
        assert periodic.h == pytest.approx(1.0 / 16)
        assert periodic.u1_shape == (16, 16)
        assert dirichlet.u1_shape == (13, 12)
        assert dirichlet.u2_shape == (12, 13)
        assert dirichlet.node_shape == (13, 13)

    def test_minimum_size(self) -> None:
        """测试网格至少 8×8"""
        with pytest.raises(ValueError):
            Grid(n=4)

    def test_refined(self, periodic: Grid) -> None:
        """测试加密网格保持区域"""
        fine = periodic.refined()
        assert fine.n == 32
        assert fine.length == periodic.length


# ==============================================================================
# (5) 离散算子测试
# ==============================================================================

class TestOperators:
    """离散微分算子测试"""

    def test_sym_gradient_exact_on_linear_field(self, dirichlet: Grid) -> None:
        """测试线性场的对称梯度精确（含壁面节点）"""
        u = vector_from_function(dirichlet, lambda x, y: (x + 2.0 * y, 3.0 * x - y))
        D = sym_gradient(u)
        np.testing.assert_allclose(D.diag[..., 0], 1.0, atol=1e-12)
        np.testing.assert_allclose(D.diag[..., 1], -1.0, atol=1e-12)
        np.testing.assert_allclose(D.shear, 2.5, atol=1e-12)
        np.testing.assert_allclose(divergence_vec(u).values, 0.0, atol=1e-12)

    def test_rigid_rotation_is_pure_skew(self, dirichlet: Grid) -> None:
        """测试刚体旋转的对称梯度为零、反对称部分为常数"""
        u = vector_from_function(dirichlet, lambda x, y: (y - 0.5, 0.5 - x))
        np.testing.assert_allclose(sym_gradient(u).max_abs(), 0.0, atol=1e-12)
        np.testing.assert_allclose(skew_gradient(u).values, 1.0, atol=1e-12)

    @pytest.mark.parametrize("boundary", [BoundaryKind.PERIODIC, BoundaryKind.DIRICHLET])
    def test_curl_is_divergence_free(self, boundary: BoundaryKind) -> None:
        """测试流函数生成的速度离散无散"""
        grid = Grid(n=16, length=1.0, boundary=boundary)
        psi = np.random.default_rng(0).normal(size=grid.node_shape)
        if not grid.periodic:
            psi[0, :] = psi[-1, :] = psi[:, 0] = psi[:, -1] = 0.0
        u = curl(psi, grid)
        scale = u.max_abs() / grid.h
        assert np.max(np.abs(divergence_vec(u).values)) <= 1e-12 * scale

    def test_summation_by_parts(self, periodic: Grid) -> None:
        """测试周期网格上 ⟨div G, v⟩ = −⟨G, Dv⟩"""
        rng = np.random.default_rng(1)
        G = _random_tensor(periodic, rng)
        v = _random_vector(periodic, rng)
        lhs = vector_inner(divergence_tensor(G), v)
        rhs = -inner_product(G, sym_gradient(v))
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    def test_outer_product_of_constant(self, periodic: Grid) -> None:
        """测试常速度的对流张量"""
        u = VectorField(grid=periodic, u1=np.ones(periodic.u1_shape), u2=np.full(periodic.u2_shape, 2.0))
        T = outer_product(u)
        np.testing.assert_allclose(T.diag[..., 0], 1.0)
        np.testing.assert_allclose(T.diag[..., 1], 4.0)
        np.testing.assert_allclose(T.shear, 2.0)


# ==============================================================================
# (6) 内积与插值测试
# ==============================================================================

class TestInnerProducts:
    """内积与插值测试"""

    def test_cell_magnitude_matches_inner_product(self, periodic: Grid) -> None:
        """测试 Σ|T|_c² h² = ⟨T, T⟩"""
        T = _random_tensor(periodic, np.random.default_rng(2))
        total = float(np.sum(cell_magnitude(T) ** 2) * periodic.h**2)
        assert total == pytest.approx(inner_product(T, T), rel=1e-12)

    def test_cells_to_nodes_constant(self, dirichlet: Grid) -> None:
        """测试常数单元值插值到节点不变"""
        nodes = cells_to_nodes(np.full(dirichlet.cell_shape, 3.0), dirichlet)
        np.testing.assert_allclose(nodes, 3.0)

    def test_vector_arithmetic(self, periodic: Grid) -> None:
        """测试向量场加减与缩放"""
        u = _random_vector(periodic, np.random.default_rng(3))
        assert (u - u).max_abs() == 0.0
        assert (u * 2.0).norm() == pytest.approx(2.0 * u.norm())

    def test_frozen_values(self, periodic: Grid) -> None:
        """测试场数组只读"""
        p = ScalarField(grid=periodic, values=np.zeros(periodic.cell_shape))
        with pytest.raises(ValueError):
            p.values[0, 0] = 1.0


# ==============================================================================
# (7) 离散球测试
# ==============================================================================

class TestBall:
    """离散球测试"""

    def test_mask_and_mean(self, periodic: Grid) -> None:
        """测试球内单元与均值"""
        B = Ball(center=(0.5, 0.5), radius=0.25)
        mask = B.mask(periodic)
        assert 0 < np.count_nonzero(mask) < periodic.n**2
        f = ScalarField(grid=periodic, values=np.full(periodic.cell_shape, 7.0))
        assert ball_mean(f, B) == pytest.approx(7.0)

    def test_restrict_masks_outside(self, periodic: Grid) -> None:
        """测试球外中心值被屏蔽"""
        B = Ball(center=(0.5, 0.5), radius=0.25)
        f = ScalarField(grid=periodic, values=np.arange(periodic.n**2, dtype=float).reshape(periodic.cell_shape))
        masked = restrict(f, B)
        assert masked.shape == (periodic.n, periodic.n, 1)
        assert masked.count() == np.count_nonzero(B.mask(periodic))
        assert float(masked.mean()) == pytest.approx(ball_mean(f, B))

    def test_below_cutoff(self, periodic: Grid) -> None:
        """测试半径低于 2h 时抛出错误"""
        with pytest.raises(BallOutsideGridError):
            Ball(center=(0.5, 0.5), radius=periodic.h).mask(periodic)

    def test_scaled_and_containment(self) -> None:
        """测试同心缩放与包含关系"""
        B = Ball(center=(0.5, 0.5), radius=0.2)
        assert B.scaled(2.0).radius == pytest.approx(0.4)
        assert B.scaled(2.0).contains_ball(B)
        assert not B.contains_ball(B.scaled(2.0))

    def test_to_frame_columns(self, periodic: Grid) -> None:
        """测试场导出表的列"""
        frame = TensorField.zeros(periodic).to_frame()
        assert list(frame.columns) == ["i", "j", "x", "y", "a11", "a12", "a22"]
        assert len(frame) == periodic.n**2

    def test_ball_leaving_box(self, periodic: Grid) -> None:
        """测试越出计算域的球被拒绝而不是截断"""
        assert Ball(center=(0.5, 0.5), radius=0.5).within(periodic)
        oversized = Ball(center=(0.5, 0.5), radius=0.8)
        assert not oversized.within(periodic)
        with pytest.raises(BallOutsideGridError):
            oversized.mask(periodic)
        with pytest.raises(BallOutsideGridError):
            Ball(center=(0.9, 0.5), radius=0.2).mask(periodic)


# ==============================================================================
# (8) CSV 往返测试
# ==============================================================================

class TestFieldCsv:
    """场的 CSV 写出与读回测试"""

    @staticmethod
    def _reload(frame: pd.DataFrame, path: Path) -> pd.DataFrame:
        frame.to_csv(path, index=False, float_format="%.17g")
        return pd.read_csv(path, float_precision="round_trip")

    def test_scalar_from_csv(self, periodic: Grid, tmp_path: Path) -> None:
        """测试标量场经 CSV 还原"""
        values = np.random.default_rng(0).normal(size=periodic.cell_shape)
        field = ScalarField(grid=periodic, values=values)
        back = ScalarField.from_frame(periodic, self._reload(field.to_staggered_frame(), tmp_path / "s.csv"))
        np.testing.assert_array_equal(back.values, values)

    @pytest.mark.parametrize("boundary", [BoundaryKind.PERIODIC, BoundaryKind.DIRICHLET])
    def test_vector_from_csv(self, boundary: BoundaryKind, tmp_path: Path) -> None:
        """测试交错向量场经 CSV 还原，含 Dirichlet 壁面迹"""
        grid = Grid(n=8, length=1.0, boundary=boundary)
        rng = np.random.default_rng(1)
        trace = None
        if boundary == BoundaryKind.DIRICHLET:
            trace = BoundaryTrace(**{side: rng.normal(size=grid.n + 1) for side in ("south", "north", "west", "east")})
        field = VectorField(grid=grid, u1=rng.normal(size=grid.u1_shape), u2=rng.normal(size=grid.u2_shape), trace=trace)
        back = VectorField.from_frame(grid, self._reload(field.to_staggered_frame(), tmp_path / "v.csv"))
        np.testing.assert_array_equal(back.u1, field.u1)
        np.testing.assert_array_equal(back.u2, field.u2)
        if trace is not None:
            assert back.trace is not None
            np.testing.assert_array_equal(back.trace.north, trace.north)
            np.testing.assert_array_equal(back.trace.west, trace.west)

    def test_tensor_from_csv(self, dirichlet: Grid, tmp_path: Path) -> None:
        """测试张量场中心与节点分量经 CSV 还原"""
        field = _random_tensor(dirichlet, np.random.default_rng(2))
        frame = field.to_staggered_frame()
        assert list(frame.columns) == ["component", "i", "j", "value"]
        assert len(frame) == 2 * dirichlet.n**2 + (dirichlet.n + 1) ** 2
        back = TensorField.from_frame(dirichlet, self._reload(frame, tmp_path / "t.csv"))
        np.testing.assert_array_equal(back.diag, field.diag)
        np.testing.assert_array_equal(back.shear, field.shear)

    def test_incomplete_frame_rejected(self, periodic: Grid) -> None:
        """测试缺行的表不能还原"""
        frame = TensorField.zeros(periodic).to_staggered_frame()
        with pytest.raises(ValueError):
            TensorField.from_frame(periodic, frame.iloc[1:])
