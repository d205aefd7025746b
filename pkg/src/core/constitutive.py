"""
本构律模块

实现应力映射 A、V 映射及其逆，并提供等价性探针：

- hammer_probe：单调量 (A(P)−A(Q))·(P−Q)、|V(P)−V(Q)|²、φ_{|Q|}(|P−Q|)、
  (φ*)_{|A(Q)|}(|A(P)−A(Q)|) 四者之间的比值
- check_assumption_A：单调性/增长条件中常数 c、C 的采样估计

所有函数对 (...,3) 对称矩阵数组向量化，输入 SymMat2 时返回 SymMat2。
"""

# =============================================================================
# (1) 导入依赖
# =============================================================================
from __future__ import annotations

import math
from enum import Enum
from itertools import combinations
from typing import Any, Optional, Union

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field

from src.core.field import (
    SymMat2,
    TensorField,
    as_sym_array,
    cell_magnitude,
    cells_to_nodes,
    frobenius,
    sym_dot,
)
from src.core.nfunc import (
    NFunction,
    conjugate_of_shifted,
    shifted_conjugate,
    shifted_phi,
    shifted_phi_prime,
)
from src.utils.config import get_config
from src.utils.logger import get_logger

# =============================================================================
# (2) 日志配置
# =============================================================================

logger = get_logger(__name__)

Matrix = Union[SymMat2, NDArray]

# 四个主量，比值按字典序两两组合
PRIMARY_QUANTITIES = ("monotone", "v_distance", "shifted", "dual_shifted")
HAMMER_RATIOS = tuple(f"{a}/{b}" for a, b in combinations(PRIMARY_QUANTITIES, 2))
AUXILIARY_RATIOS = ("energy/phi", "shifted_prime/stress_gap", "shiftdual")


# =============================================================================
# (3) 应力律
# =============================================================================


class StressForm(str, Enum):
    """应力律形式"""

    FULL_NORM = "full_norm"  # A(Q) = φ′(|Q|)Q/|Q|
    SYM_NORM = "sym_norm"  # A(Q) = φ′(|Q^sym|)Q^sym/|Q^sym|


class StressLaw(BaseModel):
    """径向应力律 A(Q) = μ(|Q|)·Q，μ(t) = φ′(t)/t

    对称矩阵输入上两种形式一致；`stress_matrix` 对一般 2×2 矩阵区分二者。
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    model: NFunction = Field(description="N函数")
    form: StressForm = Field(default=StressForm.FULL_NORM, description="应力律形式")

    # I. 粘度
    def viscosity(self, magnitude: ArrayLike) -> NDArray:
        """μ(|Q|)，原点附近走极限分支"""
        return np.asarray(self.model.phi_prime_over_t(magnitude), dtype=float)

    # II. 映射
    def stress(self, Q: ArrayLike) -> NDArray:
        arr = np.asarray(Q, dtype=float)
        return self.viscosity(frobenius(arr))[..., None] * arr

    def v_map(self, Q: ArrayLike) -> NDArray:
        # √(φ′(|Q|)|Q|)·Q/|Q| = √μ(|Q|)·Q
        arr = np.asarray(Q, dtype=float)
        return np.sqrt(self.viscosity(frobenius(arr)))[..., None] * arr

    def inverse(self, S: ArrayLike) -> NDArray:
        arr = np.asarray(S, dtype=float)
        size = frobenius(arr)
        t = np.asarray(self.model.inverse_phi_prime(size), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            factor = np.where(size > 0.0, t / np.where(size > 0.0, size, 1.0), 0.0)
        return factor[..., None] * arr

    def stress_matrix(self, M: ArrayLike) -> NDArray:
        """一般 2×2 矩阵 (...,2,2) 上的应力"""
        arr = np.asarray(M, dtype=float)
        if self.form == StressForm.SYM_NORM:
            arr = 0.5 * (arr + np.swapaxes(arr, -1, -2))
        size = np.sqrt(np.sum(arr * arr, axis=(-2, -1)))
        return self.viscosity(size)[..., None, None] * arr

    def describe(self) -> dict[str, Any]:
        return {"form": self.form.value, **self.model.describe()}


def _apply(law: StressLaw, Q: Matrix, mapping: str) -> Matrix:
    values = getattr(law, mapping)(as_sym_array(Q))
    return SymMat2.from_array(values) if isinstance(Q, SymMat2) else values


def stress(law: StressLaw, Q: Matrix) -> Matrix:
    """应力 A(Q)，A(0)=0

    Examples:
        >>> law = StressLaw(model=NFunctionModel(kind="power_law_additive", p=3.0))
        >>> stress(law, SymMat2(a11=2.0)).a11
        4.0
    """
    return _apply(law, Q, "stress")


def v_map(law: StressLaw, Q: Matrix) -> Matrix:
    """V(Q) = √(φ′(|Q|)|Q|)·Q/|Q|，V(0)=0"""
    return _apply(law, Q, "v_map")


def stress_inverse(law: StressLaw, S: Matrix) -> Matrix:
    """求 Q 使 A(Q)=S：Q = (φ′)^{-1}(|S|)·S/|S|"""
    return _apply(law, S, "inverse")


# =============================================================================
# (4) 等价性探针
# =============================================================================


class HammerRecord(BaseModel):
    """单对 (P, Q) 的探针记录"""

    quantities: dict[str, float] = Field(description="各量的值")
    ratios: dict[str, float] = Field(description="各比值")


def _safe_divide(num: NDArray, den: NDArray) -> NDArray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), np.nan)


def hammer_quantities(law: StressLaw, P: ArrayLike, Q: ArrayLike) -> dict[str, NDArray]:
    """成批计算探针的全部量，P、Q 为 (m,3)"""
    P_arr = np.atleast_2d(np.asarray(P, dtype=float))
    Q_arr = np.atleast_2d(np.asarray(Q, dtype=float))
    model = law.model
    AP, AQ = law.stress(P_arr), law.stress(Q_arr)
    VP, VQ = law.v_map(P_arr), law.v_map(Q_arr)
    gap = frobenius(P_arr - Q_arr)
    stress_gap = frobenius(AP - AQ)
    size_q = frobenius(Q_arr)
    size_aq = frobenius(AQ)
    return {
        "monotone": sym_dot(AP - AQ, P_arr - Q_arr),
        "v_distance": frobenius(VP - VQ) ** 2,
        "shifted": shifted_phi(model, size_q, gap),
        "dual_shifted": shifted_conjugate(model, size_aq, stress_gap),
        "dual_of_shifted": conjugate_of_shifted(model, size_q, stress_gap),
        "energy": sym_dot(AQ, Q_arr),
        "phi": np.asarray(model.phi(size_q), dtype=float),
        "shifted_prime": shifted_phi_prime(model, size_q, gap),
        "stress_gap": stress_gap,
    }


def hammer_ratios(quantities: dict[str, NDArray]) -> dict[str, NDArray]:
    """六个主比值与三个辅助比值"""
    ratios = {
        f"{a}/{b}": _safe_divide(quantities[a], quantities[b])
        for a, b in combinations(PRIMARY_QUANTITIES, 2)
    }
    ratios["energy/phi"] = _safe_divide(quantities["energy"], quantities["phi"])
    ratios["shifted_prime/stress_gap"] = _safe_divide(
        quantities["shifted_prime"], quantities["stress_gap"]
    )
    ratios["shiftdual"] = _safe_divide(quantities["dual_of_shifted"], quantities["dual_shifted"])
    return ratios


def hammer_probe(law: StressLaw, P: Matrix, Q: Matrix) -> HammerRecord:
    """单对矩阵的等价性探针

    Args:
        law: 应力律
        P: 矩阵 P（P ≠ Q）
        Q: 矩阵 Q

    Returns:
        HammerRecord: 全部量与两两比值；分母为零的比值记为 nan
    """
    quantities = hammer_quantities(law, as_sym_array(P), as_sym_array(Q))
    ratios = hammer_ratios(quantities)
    return HammerRecord(
        quantities={k: float(v[0]) for k, v in quantities.items()},
        ratios={k: float(v[0]) for k, v in ratios.items()},
    )


def hammer_frame(law: StressLaw, P: ArrayLike, Q: ArrayLike) -> pd.DataFrame:
    """成批探针，每对矩阵一行，列为矩阵分量、各量与各比值"""
    P_arr = np.atleast_2d(np.asarray(P, dtype=float))
    Q_arr = np.atleast_2d(np.asarray(Q, dtype=float))
    quantities = hammer_quantities(law, P_arr, Q_arr)
    ratios = hammer_ratios(quantities)
    data: dict[str, NDArray] = {}
    for k, name in enumerate(("p11", "p12", "p22")):
        data[name] = P_arr[:, k]
    for k, name in enumerate(("q11", "q12", "q22")):
        data[name] = Q_arr[:, k]
    data.update(quantities)
    data.update(ratios)
    logger.debug(f"Hammer probe on {len(P_arr)} pairs for {law.describe()}")
    return pd.DataFrame(data)


def ratio_intervals(frame: pd.DataFrame, names: tuple[str, ...] = HAMMER_RATIOS) -> dict[str, tuple[float, float]]:
    """各比值的采样区间 [min, max]，忽略 nan"""
    intervals: dict[str, tuple[float, float]] = {}
    for name in names:
        column = frame[name].to_numpy(dtype=float)
        column = column[np.isfinite(column)]
        intervals[name] = (
            (float(column.min()), float(column.max())) if column.size else (math.nan, math.nan)
        )
    return intervals


# =============================================================================
# (5) 单调性/增长假设
# =============================================================================


class AssumptionReport(BaseModel):
    """(A(P)−A(Q))·(P−Q) ≥ c·φ″(|P|+|Q|)|P−Q|² 与
    |A(P)−A(Q)| ≤ C·φ″(|P|+|Q|)|P−Q| 的采样常数"""

    c_est: float = Field(description="下界比值的采样最小值")
    C_est: float = Field(description="上界比值的采样最大值")
    passed: bool = Field(description="c_est>0 且 C_est 有限")
    samples: int = Field(ge=0, description="有效样本数")


def check_assumption_A(law: StressLaw, P: ArrayLike, Q: ArrayLike) -> AssumptionReport:
    """采样估计单调性常数 c 与增长常数 C（只报告，不抛异常）"""
    P_arr = np.atleast_2d(np.asarray(P, dtype=float))
    Q_arr = np.atleast_2d(np.asarray(Q, dtype=float))
    AP, AQ = law.stress(P_arr), law.stress(Q_arr)
    gap = frobenius(P_arr - Q_arr)
    total = frobenius(P_arr) + frobenius(Q_arr)
    keep = (gap > 0.0) & (total > 0.0)
    second = np.asarray(law.model.phi_second(total[keep]), dtype=float)
    lower = sym_dot(AP - AQ, P_arr - Q_arr)[keep] / (second * gap[keep] ** 2)
    upper = frobenius(AP - AQ)[keep] / (second * gap[keep])
    c_est = float(lower.min()) if lower.size else math.nan
    C_est = float(upper.max()) if upper.size else math.nan
    passed = bool(lower.size) and c_est > 0.0 and math.isfinite(C_est)
    if not passed:
        logger.warning(f"Assumption check failed for {law.describe()}: c={c_est}, C={C_est}")
    return AssumptionReport(c_est=c_est, C_est=C_est, passed=passed, samples=int(lower.size))


# =============================================================================
# (6) 场上的应力与 V 映射
# =============================================================================


def _radial_field(
    law: StressLaw, D: TensorField, active: Optional[NDArray], power: float
) -> TensorField:
    """逐单元系数 μ(|D|_c)^power 作用于交错张量场

    对角分量直接乘单元系数，节点剪切乘相邻活动单元系数的平均，
    使 ⟨S, Dξ⟩ 与离散能量的一阶变分一致。
    """
    grid = D.grid
    factor = law.viscosity(cell_magnitude(D)) ** power
    if active is not None:
        factor = np.where(active, factor, 0.0)
    return TensorField(
        grid=grid,
        diag=factor[..., None] * D.diag,
        shear=cells_to_nodes(factor, grid, active) * D.shear,
    )


def stress_field(law: StressLaw, D: TensorField, active: Optional[NDArray] = None) -> TensorField:
    """A(D) 作为交错张量场"""
    return _radial_field(law, D, active, 1.0)


def v_field(law: StressLaw, D: TensorField, active: Optional[NDArray] = None) -> TensorField:
    """V(D) 作为交错张量场"""
    return _radial_field(law, D, active, 0.5)


# =============================================================================
# (7) 随机矩阵对
# =============================================================================


def _random_sym(rng: np.random.Generator, count: int, bound: float) -> NDArray:
    uniform = rng.uniform(-bound, bound, size=(count, 3))
    direction = rng.normal(size=(count, 3))
    direction /= frobenius(direction)[:, None]
    magnitude = 10.0 ** rng.uniform(-3.0, 3.0, size=count)
    scaled = direction * magnitude[:, None]
    half = count // 2
    return np.concatenate([uniform[:half], scaled[half:]], axis=0)


def sample_matrix_pairs(
    count: int, seed: Optional[int] = None, bound: float = 10.0
) -> tuple[NDArray, NDArray]:
    """固定种子的随机对称矩阵对

    一半分量在 [−bound, bound] 上均匀分布，另一半为随机方向乘以
    [1e-3, 1e3] 上对数均匀的模长；P ≠ Q。

    Returns:
        (P, Q)，各为 (count, 3)
    """
    rng = np.random.default_rng(get_config().default_seed if seed is None else seed)
    P = _random_sym(rng, count, bound)
    Q = _random_sym(rng, count, bound)
    same = frobenius(P - Q) == 0.0
    P[same, 0] += 1.0
    return P, Q


__all__ = [
    "AUXILIARY_RATIOS",
    "HAMMER_RATIOS",
    "PRIMARY_QUANTITIES",
    "AssumptionReport",
    "HammerRecord",
    "StressForm",
    "StressLaw",
    "check_assumption_A",
    "hammer_frame",
    "hammer_probe",
    "hammer_quantities",
    "hammer_ratios",
    "ratio_intervals",
    "sample_matrix_pairs",
    "stress",
    "stress_field",
    "stress_inverse",
    "v_field",
    "v_map",
]
