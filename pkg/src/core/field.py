"""
网格场模块

定义平面均匀网格、交错（MAC）布置的标量/向量/张量场，以及离散微分算子
（对称/反对称梯度、散度）和球上的归约运算。

布置约定（i 对应 x₁，j 对应 x₂，h = L/n）：

- 标量、张量对角分量：单元中心 ((i+½)h, (j+½)h)
- u₁：竖直面 (ih, (j+½)h)；u₂：水平面 ((i+½)h, jh)
- 张量剪切分量 a12 与节点 (ih, jh) 对齐，`centered()` 给出四角平均后的中心值

周期网格的 u₁、u₂、节点数组均为 (n,n)；Dirichlet 网格分别为 (n+1,n)、(n,n+1)、
(n+1,n+1)，边界法向面上的值是固定数据，壁面切向速度由 `BoundaryTrace` 给出。
"""

# =============================================================================
# (1) 导入依赖
# =============================================================================
from __future__ import annotations

import math
from collections.abc import Callable
from typing import Any, ClassVar, Optional, Union

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.core.exceptions import BallOutsideGridError
from src.core.state import BoundaryKind
from src.utils.logger import get_logger

# =============================================================================
# (2) 日志配置
# =============================================================================

logger = get_logger(__name__)


# =============================================================================
# (3) 对称矩阵
# =============================================================================


class SymMat2(BaseModel):
    """2×2 对称矩阵 (a11, a12, a22)

    数组形式统一为 (..., 3)，分量顺序 a11, a12, a22。
    """

    model_config = ConfigDict(frozen=True)

    a11: float = Field(default=0.0, description="a11")
    a12: float = Field(default=0.0, description="a12 = a21")
    a22: float = Field(default=0.0, description="a22")

    def to_array(self) -> NDArray:
        return np.array([self.a11, self.a12, self.a22], dtype=float)

    @classmethod
    def from_array(cls, values: ArrayLike) -> SymMat2:
        a11, a12, a22 = (float(v) for v in np.asarray(values, dtype=float).reshape(3))
        return cls(a11=a11, a12=a12, a22=a22)

    @property
    def norm(self) -> float:
        return float(frobenius(self.to_array()))

    @property
    def trace(self) -> float:
        return self.a11 + self.a22


# 分量权重：|Q|² = a11² + 2·a12² + a22²
SYM_WEIGHTS = np.array([1.0, 2.0, 1.0])


def as_sym_array(Q: Union[SymMat2, ArrayLike]) -> NDArray:
    """SymMat2 或 (...,3) 数组统一为数组"""
    if isinstance(Q, SymMat2):
        return Q.to_array()
    arr = np.asarray(Q, dtype=float)
    if arr.shape[-1] != 3:
        raise ValueError("symmetric matrices are stored as (..., 3) arrays")
    return arr


def frobenius(Q: ArrayLike) -> NDArray:
    """Frobenius 范数 √(a11² + 2a12² + a22²)"""
    arr = np.asarray(Q, dtype=float)
    return np.sqrt(np.sum(SYM_WEIGHTS * arr * arr, axis=-1))


def sym_dot(P: ArrayLike, Q: ArrayLike) -> NDArray:
    """矩阵内积 P:Q"""
    return np.sum(SYM_WEIGHTS * np.asarray(P, dtype=float) * np.asarray(Q, dtype=float), axis=-1)


def sym_trace(Q: ArrayLike) -> NDArray:
    arr = np.asarray(Q, dtype=float)
    return arr[..., 0] + arr[..., 2]


def sym_rotate(Q: ArrayLike, theta: float) -> NDArray:
    """R Q Rᵀ，R 为转角 theta 的平面旋转"""
    arr = np.asarray(Q, dtype=float)
    c, s = math.cos(theta), math.sin(theta)
    a11, a12, a22 = arr[..., 0], arr[..., 1], arr[..., 2]
    return np.stack(
        [
            c * c * a11 - 2.0 * c * s * a12 + s * s * a22,
            c * s * (a11 - a22) + (c * c - s * s) * a12,
            s * s * a11 + 2.0 * c * s * a12 + c * c * a22,
        ],
        axis=-1,
    )


# =============================================================================
# (4) 网格
# =============================================================================


class Grid(BaseModel):
    """平面均匀网格

    Examples:
        >>> grid = Grid(n=16, length=1.0)
        >>> grid.h
        0.0625
    """

    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=8, description="每边单元数")
    length: float = Field(default=2.0 * math.pi, gt=0.0, description="域边长 L")
    origin: tuple[float, float] = Field(default=(0.0, 0.0), description="左下角坐标")
    boundary: BoundaryKind = Field(default=BoundaryKind.PERIODIC, description="边界类型")

    # I. 基本量
    @property
    def h(self) -> float:
        return self.length / self.n

    @property
    def periodic(self) -> bool:
        return self.boundary == BoundaryKind.PERIODIC

    @property
    def u1_shape(self) -> tuple[int, int]:
        return (self.n, self.n) if self.periodic else (self.n + 1, self.n)

    @property
    def u2_shape(self) -> tuple[int, int]:
        return (self.n, self.n) if self.periodic else (self.n, self.n + 1)

    @property
    def node_shape(self) -> tuple[int, int]:
        return (self.n, self.n) if self.periodic else (self.n + 1, self.n + 1)

    @property
    def cell_shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    # II. 坐标
    def _coords(self, shape: tuple[int, int], dx: float, dy: float) -> tuple[NDArray, NDArray]:
        ox, oy = self.origin
        i = np.arange(shape[0])
        j = np.arange(shape[1])
        x = ox + (i + dx) * self.h
        y = oy + (j + dy) * self.h
        return np.meshgrid(x, y, indexing="ij")

    def cell_centers(self) -> tuple[NDArray, NDArray]:
        return self._coords(self.cell_shape, 0.5, 0.5)

    def u1_points(self) -> tuple[NDArray, NDArray]:
        return self._coords(self.u1_shape, 0.0, 0.5)

    def u2_points(self) -> tuple[NDArray, NDArray]:
        return self._coords(self.u2_shape, 0.5, 0.0)

    def nodes(self) -> tuple[NDArray, NDArray]:
        return self._coords(self.node_shape, 0.0, 0.0)

    def wall_coordinates(self) -> NDArray:
        """壁面节点沿壁的坐标偏移 0, h, ..., L"""
        return np.arange(self.n + 1) * self.h

    def refined(self, factor: int = 2) -> Grid:
        """同一区域上的加密网格"""
        return self.model_copy(update={"n": self.n * factor})

    def describe(self) -> dict[str, Any]:
        return {"n": self.n, "h": self.h, "boundary": self.boundary.value}


def node_weights(grid: Grid, active: Optional[NDArray] = None) -> NDArray:
    """节点求积权重 = 相邻活动单元数 / 4

    周期网格内部节点为1；Dirichlet 边界节点 1/2、角点 1/4；
    掩码子区域同理按活动单元计数。
    """
    cells = np.ones(grid.cell_shape) if active is None else np.asarray(active, dtype=float)
    if grid.periodic:
        total = (
            cells
            + np.roll(cells, 1, axis=0)
            + np.roll(cells, 1, axis=1)
            + np.roll(np.roll(cells, 1, axis=0), 1, axis=1)
        )
        return 0.25 * total
    padded = np.zeros((grid.n + 2, grid.n + 2))
    padded[1:-1, 1:-1] = cells
    # 节点 (i,j) 的相邻单元为 (i-1..i, j-1..j)
    total = padded[:-1, :-1] + padded[1:, :-1] + padded[:-1, 1:] + padded[1:, 1:]
    return 0.25 * total


# =============================================================================
# (5) 场
# =============================================================================


def _frozen(values: ArrayLike, shape: tuple[int, ...], name: str) -> NDArray:
    arr = np.array(values, dtype=float, copy=True)
    if arr.shape != shape:
        raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


class _FieldBase(BaseModel):
    """场基类：不可变，持有网格"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    # 振荡度量中各中心分量的范数权重
    component_weights: ClassVar[NDArray] = np.array([1.0])
    component_names: ClassVar[tuple[str, ...]] = ("value",)

    grid: Grid = Field(description="网格")

    def centered(self) -> NDArray:
        """单元中心值 (n, n, k)"""
        raise NotImplementedError

    def to_frame(self) -> pd.DataFrame:
        """导出为每个单元一行的表：i, j, x, y, 分量"""
        x, y = self.grid.cell_centers()
        i, j = np.meshgrid(np.arange(self.grid.n), np.arange(self.grid.n), indexing="ij")
        data: dict[str, NDArray] = {
            "i": i.ravel(),
            "j": j.ravel(),
            "x": x.ravel(),
            "y": y.ravel(),
        }
        values = self.centered()
        for k, name in enumerate(self.component_names):
            data[name] = values[..., k].ravel()
        return pd.DataFrame(data)

    def storage(self) -> dict[str, NDArray]:
        """原位存储的各分量数组"""
        raise NotImplementedError

    def to_staggered_frame(self) -> pd.DataFrame:
        """导出原位存储的长表：component, i, j, value

        与 to_frame 不同，不做中心插值，可由 from_frame 无损还原。
        """
        parts = []
        for name, arr in self.storage().items():
            table = arr if arr.ndim == 2 else arr[:, None]
            i, j = np.meshgrid(np.arange(table.shape[0]), np.arange(table.shape[1]), indexing="ij")
            parts.append(
                pd.DataFrame({"component": name, "i": i.ravel(), "j": j.ravel(), "value": table.ravel()})
            )
        return pd.concat(parts, ignore_index=True)

    @staticmethod
    def _component(frame: pd.DataFrame, name: str, shape: tuple[int, ...]) -> NDArray:
        """从长表取出一个分量并放回原位

        Raises:
            ValueError: 行数不符、下标重复或越界
        """
        rows = frame[frame["component"] == name]
        table_shape = shape if len(shape) == 2 else (shape[0], 1)
        expected = table_shape[0] * table_shape[1]
        if len(rows) != expected:
            raise ValueError(f"component {name} has {len(rows)} rows, expected {expected}")
        out = np.full(table_shape, np.nan)
        try:
            out[rows["i"].to_numpy(dtype=int), rows["j"].to_numpy(dtype=int)] = rows["value"].to_numpy(dtype=float)
        except IndexError as exc:
            raise ValueError(f"component {name} has indices outside {table_shape}") from exc
        if np.any(np.isnan(out)):
            raise ValueError(f"component {name} has duplicate or missing indices")
        return out.reshape(shape)


class ScalarField(_FieldBase):
    """单元中心标量场（压力 π、散度等）"""

    values: NDArray = Field(description="(n, n) 中心值")

    @model_validator(mode="after")
    def check_shape(self) -> ScalarField:
        object.__setattr__(self, "values", _frozen(self.values, self.grid.cell_shape, "values"))
        return self

    def centered(self) -> NDArray:
        return self.values[..., None]

    def storage(self) -> dict[str, NDArray]:
        return {"value": self.values}

    @classmethod
    def from_frame(cls, grid: Grid, frame: pd.DataFrame) -> ScalarField:
        """由 to_staggered_frame 的长表还原"""
        return cls(grid=grid, values=cls._component(frame, "value", grid.cell_shape))

    def mean(self) -> float:
        return float(np.mean(self.values))

    def __add__(self, other: Union[ScalarField, float]) -> ScalarField:
        extra = other.values if isinstance(other, ScalarField) else other
        return ScalarField(grid=self.grid, values=self.values + extra)

    def __mul__(self, factor: float) -> ScalarField:
        return ScalarField(grid=self.grid, values=self.values * factor)

    __rmul__ = __mul__


class BoundaryTrace(BaseModel):
    """Dirichlet 壁面切向速度

    south/north 为 y=0/L 处的 u₁，west/east 为 x=0/L 处的 u₂，
    均在壁面节点上取值（长度 n+1）。
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    south: NDArray
    north: NDArray
    west: NDArray
    east: NDArray

    @classmethod
    def zeros(cls, n: int) -> BoundaryTrace:
        z = np.zeros(n + 1)
        return cls(south=z, north=z, west=z, east=z)

    @field_validator("south", "north", "west", "east", mode="before")
    @classmethod
    def freeze(cls, v: ArrayLike) -> NDArray:
        arr = np.array(v, dtype=float, copy=True)
        arr.setflags(write=False)
        return arr

    def scaled(self, factor: float) -> BoundaryTrace:
        return BoundaryTrace(
            south=self.south * factor,
            north=self.north * factor,
            west=self.west * factor,
            east=self.east * factor,
        )


class VectorField(_FieldBase):
    """交错向量场：u₁ 在竖直面，u₂ 在水平面"""

    component_weights: ClassVar[NDArray] = np.array([1.0, 1.0])
    component_names: ClassVar[tuple[str, ...]] = ("u1", "u2")

    u1: NDArray = Field(description="竖直面上的 u₁")
    u2: NDArray = Field(description="水平面上的 u₂")
    trace: Optional[BoundaryTrace] = Field(default=None, description="Dirichlet 壁面切向值")

    @model_validator(mode="after")
    def check_shape(self) -> VectorField:
        object.__setattr__(self, "u1", _frozen(self.u1, self.grid.u1_shape, "u1"))
        object.__setattr__(self, "u2", _frozen(self.u2, self.grid.u2_shape, "u2"))
        if not self.grid.periodic and self.trace is None:
            object.__setattr__(self, "trace", BoundaryTrace.zeros(self.grid.n))
        return self

    @classmethod
    def zeros(cls, grid: Grid) -> VectorField:
        return cls(grid=grid, u1=np.zeros(grid.u1_shape), u2=np.zeros(grid.u2_shape))

    def storage(self) -> dict[str, NDArray]:
        data = {"u1": self.u1, "u2": self.u2}
        if not self.grid.periodic and self.trace is not None:
            data.update(
                south=self.trace.south, north=self.trace.north, west=self.trace.west, east=self.trace.east
            )
        return data

    @classmethod
    def from_frame(cls, grid: Grid, frame: pd.DataFrame) -> VectorField:
        """由 to_staggered_frame 的长表还原；Dirichlet 表中缺少壁面行时迹取零"""
        trace = None
        if not grid.periodic and bool((frame["component"] == "south").any()):
            trace = BoundaryTrace(
                **{side: cls._component(frame, side, (grid.n + 1,)) for side in ("south", "north", "west", "east")}
            )
        return cls(
            grid=grid,
            u1=cls._component(frame, "u1", grid.u1_shape),
            u2=cls._component(frame, "u2", grid.u2_shape),
            trace=trace,
        )

    # I. 插值
    def centered(self) -> NDArray:
        if self.grid.periodic:
            c1 = 0.5 * (self.u1 + np.roll(self.u1, -1, axis=0))
            c2 = 0.5 * (self.u2 + np.roll(self.u2, -1, axis=1))
        else:
            c1 = 0.5 * (self.u1[:-1, :] + self.u1[1:, :])
            c2 = 0.5 * (self.u2[:, :-1] + self.u2[:, 1:])
        return np.stack([c1, c2], axis=-1)

    def at_nodes(self) -> tuple[NDArray, NDArray]:
        """u₁、u₂ 插值到节点；Dirichlet 壁面节点使用切向迹"""
        if self.grid.periodic:
            n1 = 0.5 * (self.u1 + np.roll(self.u1, 1, axis=1))
            n2 = 0.5 * (self.u2 + np.roll(self.u2, 1, axis=0))
            return n1, n2
        trace = self.trace or BoundaryTrace.zeros(self.grid.n)
        n1 = np.empty(self.grid.node_shape)
        n1[:, 1:-1] = 0.5 * (self.u1[:, :-1] + self.u1[:, 1:])
        n1[:, 0] = trace.south
        n1[:, -1] = trace.north
        n2 = np.empty(self.grid.node_shape)
        n2[1:-1, :] = 0.5 * (self.u2[:-1, :] + self.u2[1:, :])
        n2[0, :] = trace.west
        n2[-1, :] = trace.east
        return n1, n2

    # II. 代数运算
    def __add__(self, other: VectorField) -> VectorField:
        trace = None
        if self.trace is not None and other.trace is not None:
            trace = BoundaryTrace(
                south=self.trace.south + other.trace.south,
                north=self.trace.north + other.trace.north,
                west=self.trace.west + other.trace.west,
                east=self.trace.east + other.trace.east,
            )
        return VectorField(grid=self.grid, u1=self.u1 + other.u1, u2=self.u2 + other.u2, trace=trace)

    def __sub__(self, other: VectorField) -> VectorField:
        return self + other * (-1.0)

    def __mul__(self, factor: float) -> VectorField:
        trace = self.trace.scaled(factor) if self.trace is not None else None
        return VectorField(grid=self.grid, u1=self.u1 * factor, u2=self.u2 * factor, trace=trace)

    __rmul__ = __mul__

    def norm(self) -> float:
        """离散 L² 范数（面求和 × h²）"""
        return math.sqrt(vector_inner(self, self))

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.u1)), np.max(np.abs(self.u2))))


class TensorField(_FieldBase):
    """交错对称张量场

    对角分量 (a11, a22) 在单元中心，剪切分量 a12 在节点。
    """

    component_weights: ClassVar[NDArray] = SYM_WEIGHTS
    component_names: ClassVar[tuple[str, ...]] = ("a11", "a12", "a22")

    diag: NDArray = Field(description="(n, n, 2) 中心处的 a11, a22")
    shear: NDArray = Field(description="节点上的 a12")

    @model_validator(mode="after")
    def check_shape(self) -> TensorField:
        n = self.grid.n
        object.__setattr__(self, "diag", _frozen(self.diag, (n, n, 2), "diag"))
        object.__setattr__(self, "shear", _frozen(self.shear, self.grid.node_shape, "shear"))
        return self

    @classmethod
    def zeros(cls, grid: Grid) -> TensorField:
        return cls(grid=grid, diag=np.zeros((grid.n, grid.n, 2)), shear=np.zeros(grid.node_shape))

    def storage(self) -> dict[str, NDArray]:
        return {"a11": self.diag[..., 0], "a22": self.diag[..., 1], "a12": self.shear}

    @classmethod
    def from_frame(cls, grid: Grid, frame: pd.DataFrame) -> TensorField:
        """由 to_staggered_frame 的长表还原"""
        diag = np.stack(
            [cls._component(frame, "a11", grid.cell_shape), cls._component(frame, "a22", grid.cell_shape)],
            axis=-1,
        )
        return cls(grid=grid, diag=diag, shear=cls._component(frame, "a12", grid.node_shape))

    def shear_at_centers(self) -> NDArray:
        return 0.25 * corner_sum(self.shear, self.grid)

    def centered(self) -> NDArray:
        return np.stack([self.diag[..., 0], self.shear_at_centers(), self.diag[..., 1]], axis=-1)

    def staggered_vector(self) -> NDArray:
        """[a11 (单元), a22 (单元), a12 (节点)] 拼接的一维向量"""
        return np.concatenate(
            [self.diag[..., 0].ravel(), self.diag[..., 1].ravel(), self.shear.ravel()]
        )

    def __add__(self, other: TensorField) -> TensorField:
        return TensorField(grid=self.grid, diag=self.diag + other.diag, shear=self.shear + other.shear)

    def __sub__(self, other: TensorField) -> TensorField:
        return self + other * (-1.0)

    def __mul__(self, factor: float) -> TensorField:
        return TensorField(grid=self.grid, diag=self.diag * factor, shear=self.shear * factor)

    __rmul__ = __mul__

    def minus_scalar_identity(self, sigma: ScalarField) -> TensorField:
        """G − σI"""
        shift = np.stack([sigma.values, sigma.values], axis=-1)
        return TensorField(grid=self.grid, diag=self.diag - shift, shear=self.shear)

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.diag)), np.max(np.abs(self.shear))))


Field_ = Union[ScalarField, VectorField, TensorField]


# =============================================================================
# (6) 采样
# =============================================================================


def scalar_from_function(grid: Grid, func: Callable[[NDArray, NDArray], ArrayLike]) -> ScalarField:
    """在单元中心采样标量函数"""
    x, y = grid.cell_centers()
    return ScalarField(grid=grid, values=np.broadcast_to(func(x, y), grid.cell_shape))


def vector_from_function(
    grid: Grid, func: Callable[[NDArray, NDArray], tuple[ArrayLike, ArrayLike]]
) -> VectorField:
    """在交错面上采样向量函数，Dirichlet 网格同时采样壁面切向迹"""
    x1, y1 = grid.u1_points()
    x2, y2 = grid.u2_points()
    u1 = np.broadcast_to(func(x1, y1)[0], grid.u1_shape)
    u2 = np.broadcast_to(func(x2, y2)[1], grid.u2_shape)
    trace = None
    if not grid.periodic:
        ox, oy = grid.origin
        w = grid.wall_coordinates()
        low, high = np.zeros_like(w), np.full_like(w, grid.length)
        trace = BoundaryTrace(
            south=np.broadcast_to(func(ox + w, oy + low)[0], w.shape),
            north=np.broadcast_to(func(ox + w, oy + high)[0], w.shape),
            west=np.broadcast_to(func(ox + low, oy + w)[1], w.shape),
            east=np.broadcast_to(func(ox + high, oy + w)[1], w.shape),
        )
    return VectorField(grid=grid, u1=u1, u2=u2, trace=trace)


def tensor_from_function(
    grid: Grid, func: Callable[[NDArray, NDArray], tuple[ArrayLike, ArrayLike, ArrayLike]]
) -> TensorField:
    """对角分量在中心、剪切分量在节点处采样对称张量函数"""
    xc, yc = grid.cell_centers()
    a11, _, a22 = func(xc, yc)
    xn, yn = grid.nodes()
    shear = func(xn, yn)[1]
    diag = np.stack(
        [np.broadcast_to(a11, grid.cell_shape), np.broadcast_to(a22, grid.cell_shape)], axis=-1
    )
    return TensorField(grid=grid, diag=diag, shear=np.broadcast_to(shear, grid.node_shape))


# =============================================================================
# (7) 离散微分算子
# =============================================================================


def _nodal_derivatives(u: VectorField) -> tuple[NDArray, NDArray]:
    """节点处的 ∂₂u₁ 与 ∂₁u₂；Dirichlet 壁面节点用到壁面切向迹的半步差分"""
    grid, h = u.grid, u.grid.h
    if grid.periodic:
        d2u1 = (u.u1 - np.roll(u.u1, 1, axis=1)) / h
        d1u2 = (u.u2 - np.roll(u.u2, 1, axis=0)) / h
        return d2u1, d1u2
    trace = u.trace or BoundaryTrace.zeros(grid.n)
    d2u1 = np.empty(grid.node_shape)
    d2u1[:, 1:-1] = (u.u1[:, 1:] - u.u1[:, :-1]) / h
    d2u1[:, 0] = (u.u1[:, 0] - trace.south) / (0.5 * h)
    d2u1[:, -1] = (trace.north - u.u1[:, -1]) / (0.5 * h)
    d1u2 = np.empty(grid.node_shape)
    d1u2[1:-1, :] = (u.u2[1:, :] - u.u2[:-1, :]) / h
    d1u2[0, :] = (u.u2[0, :] - trace.west) / (0.5 * h)
    d1u2[-1, :] = (trace.east - u.u2[-1, :]) / (0.5 * h)
    return d2u1, d1u2


def _cell_derivatives(u: VectorField) -> tuple[NDArray, NDArray]:
    """单元中心处的 ∂₁u₁ 与 ∂₂u₂（紧致差分）"""
    h = u.grid.h
    if u.grid.periodic:
        d1u1 = (np.roll(u.u1, -1, axis=0) - u.u1) / h
        d2u2 = (np.roll(u.u2, -1, axis=1) - u.u2) / h
    else:
        d1u1 = (u.u1[1:, :] - u.u1[:-1, :]) / h
        d2u2 = (u.u2[:, 1:] - u.u2[:, :-1]) / h
    return d1u1, d2u2


def sym_gradient(u: VectorField) -> TensorField:
    """对称梯度 Du = (∇u + ∇uᵀ)/2

    对角分量在单元中心，剪切分量在节点，二阶精度。
    """
    d1u1, d2u2 = _cell_derivatives(u)
    d2u1, d1u2 = _nodal_derivatives(u)
    return TensorField(
        grid=u.grid, diag=np.stack([d1u1, d2u2], axis=-1), shear=0.5 * (d2u1 + d1u2)
    )


def skew_gradient(u: VectorField) -> ScalarField:
    """反对称梯度 Wu 的 12 分量 (∂₂u₁ − ∂₁u₂)/2，平均到单元中心"""
    d2u1, d1u2 = _nodal_derivatives(u)
    nodal = 0.5 * (d2u1 - d1u2)
    return ScalarField(grid=u.grid, values=0.25 * corner_sum(nodal, u.grid))


def divergence_vec(u: VectorField) -> ScalarField:
    """div u = ∂₁u₁ + ∂₂u₂（单元中心）"""
    d1u1, d2u2 = _cell_derivatives(u)
    return ScalarField(grid=u.grid, values=d1u1 + d2u2)


def divergence_tensor(G: TensorField) -> VectorField:
    """div G = (∂₁G11 + ∂₂G12, ∂₁G12 + ∂₂G22)

    周期网格上与 sym_gradient 满足 ⟨div G, v⟩ = −⟨G, Dv⟩；
    Dirichlet 网格上内部面取同一模板，边界法向面置零。
    """
    grid, h = G.grid, G.grid.h
    g11, g22, g12 = G.diag[..., 0], G.diag[..., 1], G.shear
    if grid.periodic:
        f1 = (g11 - np.roll(g11, 1, axis=0)) / h + (np.roll(g12, -1, axis=1) - g12) / h
        f2 = (np.roll(g12, -1, axis=0) - g12) / h + (g22 - np.roll(g22, 1, axis=1)) / h
        return VectorField(grid=grid, u1=f1, u2=f2)
    f1 = np.zeros(grid.u1_shape)
    f1[1:-1, :] = (g11[1:, :] - g11[:-1, :]) / h + (g12[1:-1, 1:] - g12[1:-1, :-1]) / h
    f2 = np.zeros(grid.u2_shape)
    f2[:, 1:-1] = (g12[1:, 1:-1] - g12[:-1, 1:-1]) / h + (g22[:, 1:] - g22[:, :-1]) / h
    return VectorField(grid=grid, u1=f1, u2=f2)


def curl(psi: ArrayLike, grid: Grid) -> VectorField:
    """由节点流函数 ψ 生成离散无散速度 u = (∂₂ψ, −∂₁ψ)

    返回场的壁面切向迹为零。
    """
    psi = np.asarray(psi, dtype=float)
    h = grid.h
    if grid.periodic:
        u1 = (np.roll(psi, -1, axis=1) - psi) / h
        u2 = -(np.roll(psi, -1, axis=0) - psi) / h
    else:
        u1 = (psi[:, 1:] - psi[:, :-1]) / h
        u2 = -(psi[1:, :] - psi[:-1, :]) / h
    return VectorField(grid=grid, u1=u1, u2=u2)


def outer_product(u: VectorField) -> TensorField:
    """对流张量 u⊗u：对角分量在中心，u₁u₂ 在节点"""
    c = u.centered()
    n1, n2 = u.at_nodes()
    return TensorField(grid=u.grid, diag=np.stack([c[..., 0] ** 2, c[..., 1] ** 2], axis=-1), shear=n1 * n2)


def corner_sum(nodal: NDArray, grid: Grid) -> NDArray:
    """每个单元四个角点上节点值之和 (n, n)"""
    if grid.periodic:
        return (
            nodal
            + np.roll(nodal, -1, axis=0)
            + np.roll(nodal, -1, axis=1)
            + np.roll(np.roll(nodal, -1, axis=0), -1, axis=1)
        )
    return nodal[:-1, :-1] + nodal[1:, :-1] + nodal[:-1, 1:] + nodal[1:, 1:]


def cell_magnitude(T: TensorField) -> NDArray:
    """单元上的 |T|_c = √(T11² + T22² + ½Σ_角点 T12²)

    与节点求积权重一致：Σ_c |T|_c² h² = ⟨T, T⟩。
    """
    shear2 = corner_sum(T.shear * T.shear, T.grid)
    return np.sqrt(T.diag[..., 0] ** 2 + T.diag[..., 1] ** 2 + 0.5 * shear2)


def cells_to_nodes(cell_values: NDArray, grid: Grid, active: Optional[NDArray] = None) -> NDArray:
    """节点处取相邻活动单元的平均，无活动邻居的节点取0"""
    cells = np.ones(grid.cell_shape) if active is None else np.asarray(active, dtype=float)
    weighted = np.asarray(cell_values, dtype=float) * cells
    if grid.periodic:
        total = (
            weighted
            + np.roll(weighted, 1, axis=0)
            + np.roll(weighted, 1, axis=1)
            + np.roll(np.roll(weighted, 1, axis=0), 1, axis=1)
        )
    else:
        padded = np.zeros((grid.n + 2, grid.n + 2))
        padded[1:-1, 1:-1] = weighted
        total = padded[:-1, :-1] + padded[1:, :-1] + padded[:-1, 1:] + padded[1:, 1:]
    count = 4.0 * node_weights(grid, active)
    return np.where(count > 0.0, total / np.where(count > 0.0, count, 1.0), 0.0)


# =============================================================================
# (8) 离散内积
# =============================================================================


def inner_product(G: TensorField, H: TensorField, active: Optional[NDArray] = None) -> float:
    """⟨G, H⟩ = h²[Σ_c (G11H11 + G22H22) + 2Σ_n w_n G12H12]"""
    grid = G.grid
    cells = np.ones(grid.cell_shape) if active is None else np.asarray(active, dtype=float)
    diag = np.sum(cells[..., None] * G.diag * H.diag)
    shear = 2.0 * np.sum(node_weights(grid, active) * G.shear * H.shear)
    return float(grid.h**2 * (diag + shear))


def vector_inner(f: VectorField, v: VectorField) -> float:
    """⟨f, v⟩ = h² Σ_faces (f₁v₁ + f₂v₂)"""
    return float(f.grid.h**2 * (np.sum(f.u1 * v.u1) + np.sum(f.u2 * v.u2)))


# =============================================================================
# (9) 球
# =============================================================================


class Ball(BaseModel):
    """离散球：中心在球内（含边界）的单元集合"""

    model_config = ConfigDict(frozen=True)

    center: tuple[float, float] = Field(description="球心")
    radius: float = Field(gt=0.0, description="半径 R")

    def scaled(self, factor: float) -> Ball:
        """同心缩放 λB"""
        return Ball(center=self.center, radius=self.radius * factor)

    def contains_ball(self, other: Ball, slack: float = 1e-12) -> bool:
        dist = math.hypot(other.center[0] - self.center[0], other.center[1] - self.center[1])
        return dist + other.radius <= self.radius * (1.0 + slack) + slack

    def within(self, grid: Grid) -> bool:
        """球整体落在计算域内（允许相切）"""
        tol = 1e-12 * grid.length
        ox, oy = grid.origin
        cx, cy = self.center
        return (
            cx - self.radius >= ox - tol
            and cx + self.radius <= ox + grid.length + tol
            and cy - self.radius >= oy - tol
            and cy + self.radius <= oy + grid.length + tol
        )

    def window(self, grid: Grid) -> tuple[slice, slice, NDArray]:
        """包围盒切片与盒内的成员掩码

        Raises:
            BallOutsideGridError: 半径低于 2h，或球越出计算域（不做周期回绕）
        """
        h = grid.h
        if self.radius < 2.0 * h * (1.0 - 1e-12):
            raise BallOutsideGridError(
                f"ball radius {self.radius:.4g} below resolution cutoff 2h={2 * h:.4g}"
            )
        if not self.within(grid):
            raise BallOutsideGridError(
                f"ball at {self.center} with radius {self.radius:.4g} leaves the box of side {grid.length:.4g}"
            )
        ox, oy = grid.origin
        cx, cy = self.center
        i0 = max(0, int(math.floor((cx - self.radius - ox) / h - 0.5)))
        i1 = min(grid.n, int(math.ceil((cx + self.radius - ox) / h + 0.5)) + 1)
        j0 = max(0, int(math.floor((cy - self.radius - oy) / h - 0.5)))
        j1 = min(grid.n, int(math.ceil((cy + self.radius - oy) / h + 0.5)) + 1)
        if i0 >= i1 or j0 >= j1:
            raise BallOutsideGridError()
        x = ox + (np.arange(i0, i1) + 0.5) * h
        y = oy + (np.arange(j0, j1) + 0.5) * h
        dist2 = (x[:, None] - cx) ** 2 + (y[None, :] - cy) ** 2
        mask = dist2 <= self.radius**2 * (1.0 + 1e-12)
        if not np.any(mask):
            raise BallOutsideGridError()
        return slice(i0, i1), slice(j0, j1), mask

    def mask(self, grid: Grid) -> NDArray:
        """整个网格上的成员掩码 (n, n)"""
        si, sj, local = self.window(grid)
        full = np.zeros(grid.cell_shape, dtype=bool)
        full[si, sj] = local
        return full

    def describe(self) -> dict[str, float]:
        return {"center_x": self.center[0], "center_y": self.center[1], "radius": self.radius}


def ball_values(f: Field_, B: Ball) -> NDArray:
    """球内单元的中心值 (m, k)"""
    si, sj, local = B.window(f.grid)
    return f.centered()[si, sj][local]


def ball_mean(f: Field_, B: Ball) -> Union[float, NDArray]:
    """⟨f⟩_B：球内中心值的算术平均（逐分量）"""
    mean = np.mean(ball_values(f, B), axis=0)
    return float(mean[0]) if isinstance(f, ScalarField) else mean


def restrict(f: Field_, B: Ball) -> np.ma.MaskedArray:
    """球外被屏蔽的中心值 (n, n, k)"""
    values = f.centered()
    mask = ~B.mask(f.grid)
    return np.ma.masked_array(values, mask=np.broadcast_to(mask[..., None], values.shape))


__all__ = [
    "SYM_WEIGHTS",
    "Ball",
    "BoundaryTrace",
    "Grid",
    "ScalarField",
    "SymMat2",
    "TensorField",
    "VectorField",
    "as_sym_array",
    "ball_mean",
    "ball_values",
    "cell_magnitude",
    "cells_to_nodes",
    "corner_sum",
    "curl",
    "divergence_tensor",
    "divergence_vec",
    "frobenius",
    "inner_product",
    "node_weights",
    "outer_product",
    "restrict",
    "scalar_from_function",
    "skew_gradient",
    "sym_dot",
    "sym_gradient",
    "sym_rotate",
    "sym_trace",
    "tensor_from_function",
    "vector_from_function",
    "vector_inner",
]
