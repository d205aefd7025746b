"""
本构律单元测试

测试应力映射、V 映射、逆映射、等价性探针与随机矩阵对。
"""

# ==============================================================================
# (1) 导入依赖
# ==============================================================================
import numpy as np
import pytest

from src.core.constitutive import (
    HAMMER_RATIOS,
    StressLaw,
    check_assumption_A,
    hammer_frame,
    hammer_probe,
    ratio_intervals,
    sample_matrix_pairs,
    stress,
    stress_field,
    stress_inverse,
    v_map,
)
from src.core.field import Grid, SymMat2, TensorField, frobenius, sym_rotate
from src.core.nfunc import NFunctionKind, NFunctionModel


# ==============================================================================
# (2) 测试夹具
# ==============================================================================


@pytest.fixture
def cubic_law() -> StressLaw:
    return StressLaw(model=NFunctionModel(kind=NFunctionKind.POWER_LAW_ADDITIVE, p=3.0))


@pytest.fixture
def newtonian_law() -> StressLaw:
    return StressLaw(model=NFunctionModel(kind=NFunctionKind.POWER_LAW_ADDITIVE, p=2.0))


# ==============================================================================
# (3) 映射测试
# ==============================================================================

class TestStressMaps:
    """应力与 V 映射测试"""

    def test_power_law_stress(self, cubic_law: StressLaw) -> None:
        """测试 p=3 时 A(Q) = |Q|Q"""
        S = stress(cubic_law, SymMat2(a11=2.0))
        assert isinstance(S, SymMat2)
        assert S.a11 == pytest.approx(4.0)
        assert S.a12 == 0.0

    def test_zero_maps_to_zero(self, cubic_law: StressLaw) -> None:
        """测试 A(0) = V(0) = 0"""
        assert stress(cubic_law, SymMat2()) == SymMat2()
        assert v_map(cubic_law, SymMat2()) == SymMat2()

    def test_v_map_squares_to_energy(self, cubic_law: StressLaw) -> None:
        """测试 |V(Q)|² = A(Q)·Q"""
        Q = np.array([[1.0, -0.5, 2.0], [0.1, 0.2, 0.3]])
        V = v_map(cubic_law, Q)
        S = stress(cubic_law, Q)
        energy = S[:, 0] * Q[:, 0] + 2.0 * S[:, 1] * Q[:, 1] + S[:, 2] * Q[:, 2]
        np.testing.assert_allclose(frobenius(V) ** 2, energy, rtol=1e-12)

    @pytest.mark.parametrize(
        "model",
        [
            NFunctionModel(kind=NFunctionKind.POWER_LAW_ADDITIVE, p=1.5, kappa=1.0),
            NFunctionModel(kind=NFunctionKind.POWER_LAW_QUADRATIC, p=3.0, kappa=0.5),
            NFunctionModel(kind=NFunctionKind.CARREAU, p=1.5, kappa=1.0, mu_inf=0.5),
        ],
    )
    def test_inverse_round_trip(self, model: NFunctionModel) -> None:
        """测试 A^{-1}(A(Q)) = Q"""
        law = StressLaw(model=model)
        P, _ = sample_matrix_pairs(64, seed=3)
        back = stress_inverse(law, stress(law, P))
        np.testing.assert_allclose(back, P, rtol=1e-9, atol=1e-12)

    def test_symmetric_part_form(self) -> None:
        """测试一般矩阵上两种形式的区别"""
        model = NFunctionModel(kind=NFunctionKind.POWER_LAW_ADDITIVE, p=2.0)
        skew = np.array([[0.0, 1.0], [-1.0, 0.0]])
        full = StressLaw(model=model).stress_matrix(skew)
        sym = StressLaw(model=model, form="sym_norm").stress_matrix(skew)
        np.testing.assert_allclose(full, skew)
        np.testing.assert_allclose(sym, 0.0)

    @pytest.mark.parametrize(
        "model",
        [
            NFunctionModel(kind=NFunctionKind.POWER_LAW_ADDITIVE, p=1.5),
            NFunctionModel(kind=NFunctionKind.POWER_LAW_QUADRATIC, p=3.0, kappa=0.5),
            NFunctionModel(kind=NFunctionKind.CARREAU, p=1.5, kappa=1.0, mu_inf=0.5),
            NFunctionModel(kind=NFunctionKind.ARCSINH, mu_inf=1.0),
        ],
    )
    @pytest.mark.parametrize("seed", [0, 1])
    def test_rotation_equivariance(self, model: NFunctionModel, seed: int) -> None:
        """测试 A(RQRᵀ) = R A(Q) Rᵀ，V 同理"""
        law = StressLaw(model=model)
        P, _ = sample_matrix_pairs(64, seed=seed)
        for theta in np.random.default_rng(seed).uniform(0.0, 2.0 * np.pi, size=4):
            for mapping in (stress, v_map):
                expected = sym_rotate(mapping(law, P), theta)
                actual = mapping(law, sym_rotate(P, theta))
                scale = float(np.max(np.abs(expected)))
                np.testing.assert_allclose(actual, expected, rtol=1e-12, atol=1e-13 * scale)


# ==============================================================================
# (4) 等价性探针测试
# ==============================================================================

class TestHammer:
    """等价性探针测试"""

    def test_newtonian_collapse(self, newtonian_law: StressLaw) -> None:
        """测试 φ=t²/2 时各量均为 |P−Q|² 的常数倍"""
        record = hammer_probe(newtonian_law, SymMat2(a11=1.0, a12=0.5), SymMat2(a22=-2.0))
        assert record.ratios["monotone/v_distance"] == pytest.approx(1.0)
        assert record.ratios["monotone/shifted"] == pytest.approx(2.0)
        assert record.ratios["shifted/dual_shifted"] == pytest.approx(1.0, rel=1e-8)

    def test_frame_columns(self, cubic_law: StressLaw) -> None:
        """测试探针表包含矩阵分量与全部主比值"""
        P, Q = sample_matrix_pairs(20, seed=1)
        frame = hammer_frame(cubic_law, P, Q)
        assert len(frame) == 20
        for name in ("p11", "q22", *HAMMER_RATIOS):
            assert name in frame.columns

    def test_ratio_intervals_bounded(self, cubic_law: StressLaw) -> None:
        """测试幂律的比值区间有限且为正"""
        P, Q = sample_matrix_pairs(200, seed=2)
        intervals = ratio_intervals(hammer_frame(cubic_law, P, Q))
        for low, high in intervals.values():
            assert 0.0 < low <= high < np.inf

    def test_assumption_constants(self, cubic_law: StressLaw) -> None:
        """测试单调性/增长常数估计"""
        P, Q = sample_matrix_pairs(200, seed=4)
        report = check_assumption_A(cubic_law, P, Q)
        assert report.passed
        assert report.samples == 200
        assert report.c_est <= report.C_est


# ==============================================================================
# (5) 随机矩阵与场测试
# ==============================================================================

class TestSamplingAndFields:
    """随机矩阵对与场映射测试"""

    def test_pairs_deterministic(self) -> None:
        """测试相同种子得到相同矩阵对且 P ≠ Q"""
        P1, Q1 = sample_matrix_pairs(50, seed=7)
        P2, Q2 = sample_matrix_pairs(50, seed=7)
        np.testing.assert_array_equal(P1, P2)
        np.testing.assert_array_equal(Q1, Q2)
        assert np.all(frobenius(P1 - Q1) > 0.0)

    def test_stress_field_newtonian_is_identity(self, newtonian_law: StressLaw) -> None:
        """测试 p=2 时 A(D) = D"""
        grid = Grid(n=8, length=1.0)
        rng = np.random.default_rng(5)
        D = TensorField(grid=grid, diag=rng.normal(size=(8, 8, 2)), shear=rng.normal(size=grid.node_shape))
        S = stress_field(newtonian_law, D)
        np.testing.assert_allclose(S.diag, D.diag, rtol=1e-12)
        np.testing.assert_allclose(S.shear, D.shear, rtol=1e-12)
