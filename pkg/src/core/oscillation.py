"""
平均振荡模块

提供球上的尖锐函数 M#_B、BMO / BMO_ω / Campanato 半范数、VMO 模以及经由
Campanato 刻画的 Hölder 半范数。

球族上确界用二进族代替：半径 R·2^{-k}（不低于 2h），球心取在半个半径间距的
格点上，因此所得半范数是真实上确界的下界。向量/张量场的偏差取 Frobenius 范数。
"""

# =============================================================================
# (1) 导入依赖
# =============================================================================
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import Any, Optional

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.core.exceptions import BallOutsideGridError
from src.core.field import Ball, Field_, Grid
from src.utils.logger import get_logger

# =============================================================================
# (2) 日志配置
# =============================================================================

logger = get_logger(__name__)

# VMO 判定：最细/最粗尺度的模之比超过该值视为“平坦”
VMO_FLAT_THRESHOLD = 0.5


# =============================================================================
# (3) 球族
# =============================================================================


class BallFamily(BaseModel):
    """离散球族

    levels[k] 为第 k 层（半径 radii[k]）的全部球，每层至少一个球。
    """

    model_config = ConfigDict(frozen=True)

    region: Ball = Field(description="区域球")
    radii: list[float] = Field(description="各层半径，递减")
    levels: list[list[Ball]] = Field(description="各层的球")

    @model_validator(mode="after")
    def check_levels(self) -> BallFamily:
        if len(self.radii) != len(self.levels):
            raise ValueError("radii and levels must have equal length")
        if any(not level for level in self.levels):
            raise ValueError("every level needs at least one ball")
        return self

    @classmethod
    def dyadic(cls, region: Ball, grid: Grid, levels: Optional[int] = None) -> BallFamily:
        """二进球族

        Args:
            region: 区域球 (中心, R)
            grid: 网格，决定截断半径 2h
            levels: 最多层数，None 时取到截断为止

        Raises:
            BallOutsideGridError: 区域球本身低于截断
        """
        cutoff = 2.0 * grid.h * (1.0 - 1e-12)
        if region.radius < cutoff:
            raise BallOutsideGridError("region radius below resolution cutoff 2h")
        radii: list[float] = []
        balls: list[list[Ball]] = []
        k = 0
        while levels is None or k < levels:
            r = region.radius * 2.0 ** (-k)
            if r < cutoff:
                break
            radii.append(r)
            balls.append(_lattice_balls(region, r))
            k += 1
        logger.debug(
            f"Dyadic family: R={region.radius:.4g}, levels={len(radii)}, "
            f"balls={sum(len(level) for level in balls)}"
        )
        return cls(region=region, radii=radii, levels=balls)

    @classmethod
    def from_balls(cls, region: Ball, balls: list[Ball]) -> BallFamily:
        """由任意球列表构造，按半径分层"""
        by_radius: dict[float, list[Ball]] = {}
        for ball in balls:
            by_radius.setdefault(ball.radius, []).append(ball)
        radii = sorted(by_radius, reverse=True)
        return cls(region=region, radii=radii, levels=[by_radius[r] for r in radii])

    def all_balls(self) -> list[Ball]:
        return [ball for level in self.levels for ball in level]

    def describe(self) -> dict[str, Any]:
        return {
            "region_x": self.region.center[0],
            "region_y": self.region.center[1],
            "region_radius": self.region.radius,
            "levels": len(self.radii),
            "balls": sum(len(level) for level in self.levels),
        }


def _lattice_balls(region: Ball, radius: float) -> list[Ball]:
    """半径 radius、球心间距 radius/2 且落在区域内的全部球"""
    spacing = 0.5 * radius
    reach = region.radius - radius
    count = int(math.floor(reach / spacing + 1e-9))
    cx, cy = region.center
    balls = []
    for a in range(-count, count + 1):
        for b in range(-count, count + 1):
            if math.hypot(a * spacing, b * spacing) + radius <= region.radius * (1.0 + 1e-12):
                balls.append(Ball(center=(cx + a * spacing, cy + b * spacing), radius=radius))
    return balls


# =============================================================================
# (4) 模函数
# =============================================================================


class ModulusKind(str, Enum):
    """模函数类型"""

    CONSTANT = "constant"  # ω ≡ 1，BMO
    POWER = "power"  # ω(r) = r^β，Campanato
    TABULATED = "tabulated"  # 分段线性插值


class Modulus(BaseModel):
    """非减模函数 ω"""

    model_config = ConfigDict(frozen=True)

    kind: ModulusKind = Field(default=ModulusKind.CONSTANT, description="类型")
    beta: float = Field(default=0.0, ge=0.0, description="幂指数 β")
    table_radii: list[float] = Field(default_factory=list, description="表格半径（递增）")
    table_values: list[float] = Field(default_factory=list, description="表格值")

    @field_validator("table_values")
    @classmethod
    def check_values(cls, v: list[float]) -> list[float]:
        if any(x <= 0.0 for x in v):
            raise ValueError("tabulated modulus values must be positive")
        if any(b < a for a, b in zip(v, v[1:])):
            raise ValueError("tabulated modulus must be non-decreasing")
        return v

    @model_validator(mode="after")
    def check_table(self) -> Modulus:
        if self.kind == ModulusKind.TABULATED:
            if len(self.table_radii) < 1 or len(self.table_radii) != len(self.table_values):
                raise ValueError("tabulated modulus needs matching radii and values")
            if any(b <= a for a, b in zip(self.table_radii, self.table_radii[1:])):
                raise ValueError("tabulated radii must be increasing")
        return self

    @classmethod
    def constant(cls) -> Modulus:
        return cls(kind=ModulusKind.CONSTANT)

    @classmethod
    def power(cls, beta: float) -> Modulus:
        """β=0 时退化为常数模"""
        return cls(kind=ModulusKind.POWER, beta=beta)

    @classmethod
    def tabulated(cls, radii: ArrayLike, values: ArrayLike) -> Modulus:
        return cls(
            kind=ModulusKind.TABULATED,
            table_radii=[float(r) for r in np.asarray(radii, dtype=float)],
            table_values=[float(v) for v in np.asarray(values, dtype=float)],
        )

    def __call__(self, r: float) -> float:
        if self.kind == ModulusKind.CONSTANT:
            return 1.0
        if self.kind == ModulusKind.POWER:
            return float(r**self.beta)
        return float(np.interp(r, self.table_radii, self.table_values))

    def almost_decreasing_constant(self, beta: float, radii: ArrayLike) -> float:
        """ω(r)r^{-β} 的几乎递减常数 sup_{s≤t} g(t)/g(s)

        返回 1 表示在给定半径上单调不增。
        """
        r = np.sort(np.asarray(radii, dtype=float))
        g = np.array([self(x) for x in r]) * r ** (-beta)
        running_min = np.minimum.accumulate(g)
        return float(np.max(g / running_min))

    def describe(self) -> str:
        if self.kind == ModulusKind.POWER:
            return f"power({self.beta:g})"
        return self.kind.value


# =============================================================================
# (5) 平均振荡
# =============================================================================


def _deviation_norms(values: NDArray, weights: NDArray) -> NDArray:
    """球内各单元 |f − ⟨f⟩_B|（加权 Frobenius）"""
    mean = values.mean(axis=0)
    deviation = values - mean
    return np.sqrt(np.sum(weights * deviation * deviation, axis=-1))


def _ball_values(centered: NDArray, grid: Grid, ball: Ball) -> NDArray:
    si, sj, local = ball.window(grid)
    return centered[si, sj][local]


def mean_oscillation(f: Field_, B: Ball) -> float:
    """M#_B f = ⨍_B |f − ⟨f⟩_B|

    Raises:
        BallOutsideGridError: 球低于截断或与网格无交
    """
    values = _ball_values(f.centered(), f.grid, B)
    return float(np.mean(_deviation_norms(values, f.component_weights)))


def mean_square_oscillation(f: Field_, B: Ball) -> float:
    """⨍_B |f − ⟨f⟩_B|²"""
    values = _ball_values(f.centered(), f.grid, B)
    return float(np.mean(_deviation_norms(values, f.component_weights) ** 2))


class SeminormReport(BaseModel):
    """半范数报告

    value = max(per_level_max)；rows 每个球一行。
    """

    model_config = ConfigDict(frozen=True)

    value: float = Field(ge=0.0, description="半范数值")
    argmax_ball: Ball = Field(description="取到最大值的球")
    per_level_max: list[float] = Field(description="每层最大比值")
    family: dict[str, Any] = Field(description="球族描述")
    modulus: str = Field(description="模函数描述")
    rows: list[dict[str, Any]] = Field(default_factory=list, description="逐球明细")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            self.rows, columns=["level", "radius", "center_x", "center_y", "oscillation", "ratio"]
        )


def _level_rows(
    centered: NDArray, weights: NDArray, grid: Grid, level: int, balls: list[Ball], omega: Modulus
) -> list[dict[str, Any]]:
    rows = []
    for ball in balls:
        values = _ball_values(centered, grid, ball)
        oscillation = float(np.mean(_deviation_norms(values, weights)))
        rows.append(
            {
                "level": level,
                "radius": ball.radius,
                "center_x": ball.center[0],
                "center_y": ball.center[1],
                "oscillation": oscillation,
                "ratio": oscillation / omega(ball.radius),
            }
        )
    return rows


def bmo_omega_seminorm(
    f: Field_, family: BallFamily, omega: Optional[Modulus] = None, threads: int = 1
) -> SeminormReport:
    """‖f‖_{BMO_ω} = max_B M#_B f / ω(R_B)

    常数模给出 BMO 半范数，Power(β) 给出 Campanato 半范数。

    Args:
        f: 场
        family: 球族
        omega: 模函数，默认常数模
        threads: >1 时按层并行，归约顺序固定

    Returns:
        SeminormReport: 半范数、取最大值的球与逐球明细
    """
    omega = omega or Modulus.constant()
    centered = f.centered()
    weights = f.component_weights

    def run(level: int) -> list[dict[str, Any]]:
        return _level_rows(centered, weights, f.grid, level, family.levels[level], omega)

    indices = range(len(family.levels))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_level = list(pool.map(run, indices))
    else:
        per_level = [run(level) for level in indices]

    per_level_max = [max(row["ratio"] for row in rows) for rows in per_level]
    best_level = int(np.argmax(per_level_max))
    best_row = max(per_level[best_level], key=lambda row: row["ratio"])
    argmax_ball = Ball(center=(best_row["center_x"], best_row["center_y"]), radius=best_row["radius"])
    return SeminormReport(
        value=float(max(per_level_max)),
        argmax_ball=argmax_ball,
        per_level_max=per_level_max,
        family=family.describe(),
        modulus=omega.describe(),
        rows=[row for rows in per_level for row in rows],
    )


def campanato_seminorm(f: Field_, family: BallFamily, beta: float, threads: int = 1) -> float:
    """Campanato 半范数 max_B M#_B f / R_B^β"""
    return bmo_omega_seminorm(f, family, Modulus.power(beta), threads).value


# =============================================================================
# (6) VMO 模
# =============================================================================


class VMOModulus(BaseModel):
    """VMO 模 r ↦ sup_{R_B ≤ r} M#_B f（递增半径表）

    结论只对截断尺度 2h 以上成立。
    """

    model_config = ConfigDict(frozen=True)

    radii: list[float] = Field(description="递增半径")
    values: list[float] = Field(description="对应的模值（非减）")
    finest_radius: float = Field(description="最细可分辨半径")
    finest_value: float = Field(description="最细半径处的模值")
    flat: bool = Field(description="模不随尺度减小（不可分辨为 VMO）")
    small_scale_slope: float = Field(description="finest_value / finest_radius")
    caveat: str = Field(default="resolved down to radius 2h only")

    def __call__(self, r: float) -> float:
        eligible = [v for rad, v in zip(self.radii, self.values) if rad <= r * (1.0 + 1e-12)]
        return eligible[-1] if eligible else 0.0


def vmo_modulus(f: Field_, family: BallFamily) -> VMOModulus:
    """逐层最大振荡的累积上确界"""
    report = bmo_omega_seminorm(f, family, Modulus.constant())
    order = np.argsort(family.radii)
    radii = np.asarray(family.radii)[order]
    level_max = np.asarray(report.per_level_max)[order]
    values = np.maximum.accumulate(level_max)
    coarsest = float(values[-1])
    finest = float(values[0])
    flat = coarsest > 0.0 and finest / coarsest > VMO_FLAT_THRESHOLD
    if flat:
        logger.info(f"Oscillation does not shrink with radius ({finest:.3g} vs {coarsest:.3g})")
    return VMOModulus(
        radii=[float(r) for r in radii],
        values=[float(v) for v in values],
        finest_radius=float(radii[0]),
        finest_value=finest,
        flat=flat,
        small_scale_slope=finest / float(radii[0]),
    )


# =============================================================================
# (7) Hölder 半范数
# =============================================================================


class HolderReport(BaseModel):
    """Hölder 半范数的两种计算途径"""

    beta: float = Field(description="Hölder 指数")
    campanato: float = Field(ge=0.0, description="Campanato 半范数")
    direct: float = Field(ge=0.0, description="网格差商 max|f(x)−f(y)|/|x−y|^β")
    ratio: float = Field(description="direct / campanato（0/0 记为 nan）")


_DIRECTIONS = ((1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, -1), (1, -2))


def direct_holder_quotient(f: Field_, region: Ball, beta: float) -> float:
    """区域内单元对上的差商最大值

    偏移量为各方向的二进倍数，两端单元中心都须在区域内。
    """
    grid = f.grid
    centered = f.centered()
    weights = f.component_weights
    mask = region.mask(grid)
    n = grid.n
    best = 0.0
    for di0, dj0 in _DIRECTIONS:
        scale = 1
        while True:
            di, dj = di0 * scale, dj0 * scale
            if max(abs(di), abs(dj)) >= n:
                break
            i_lo, i_hi = max(0, -di), min(n, n - di)
            j_lo, j_hi = max(0, -dj), min(n, n - dj)
            if i_lo >= i_hi or j_lo >= j_hi:
                break
            a = centered[i_lo:i_hi, j_lo:j_hi]
            b = centered[i_lo + di : i_hi + di, j_lo + dj : j_hi + dj]
            both = mask[i_lo:i_hi, j_lo:j_hi] & mask[i_lo + di : i_hi + di, j_lo + dj : j_hi + dj]
            if not np.any(both):
                break
            diff = a - b
            gap = np.sqrt(np.sum(weights * diff * diff, axis=-1))[both]
            distance = grid.h * math.hypot(di, dj)
            best = max(best, float(gap.max()) / distance**beta)
            scale *= 2
    return best


def holder_seminorm_via_campanato(f: Field_, family: BallFamily, beta: float) -> HolderReport:
    """Campanato 半范数与直接差商

    Raises:
        ValueError: β 不在 (0, 1]
    """
    if not 0.0 < beta <= 1.0:
        raise ValueError("holder exponent must lie in (0, 1]")
    campanato = campanato_seminorm(f, family, beta)
    direct = direct_holder_quotient(f, family.region, beta)
    ratio = direct / campanato if campanato > 0.0 else (math.nan if direct == 0.0 else math.inf)
    return HolderReport(beta=beta, campanato=campanato, direct=direct, ratio=ratio)


__all__ = [
    "VMO_FLAT_THRESHOLD",
    "BallFamily",
    "HolderReport",
    "Modulus",
    "ModulusKind",
    "SeminormReport",
    "VMOModulus",
    "bmo_omega_seminorm",
    "campanato_seminorm",
    "direct_holder_quotient",
    "holder_seminorm_via_campanato",
    "mean_oscillation",
    "mean_square_oscillation",
    "vmo_modulus",
]
