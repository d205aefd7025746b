"""
离散鞍点系统模块

把交错网格上的广义 Stokes 问题组装为稀疏代数系统：

- 应变算子 L：速度自由度 → [D11(单元), D22(单元), D12(节点)]，仿射部分来自壁面迹
- 单元打包 P：应变 → 每单元 6 维向量 z_c = (D11, D22, D12_角点/√2)，|z_c| 即单元上的 |Du|
- 散度 B：D11 + D22 的行

离散能量 J(u) = h²Σ_c φ(|z_c|) − ⟨G, Du⟩ − ⟨f, u⟩，其一阶变分即求解的弱形式。
"""

# =============================================================================
# (1) 导入依赖
# =============================================================================
from __future__ import annotations

import math
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray
from scipy.sparse.linalg import SuperLU, splu

from src.core.constitutive import StressLaw
from src.core.exceptions import InfSupError, SolverConvergenceError, StokesLabError
from src.core.field import BoundaryTrace, Grid, TensorField, VectorField, node_weights
from src.utils.logger import get_logger

# =============================================================================
# (2) 日志配置
# =============================================================================

logger = get_logger(__name__)

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
# Uzawa 停滞判据：每 100 次迭代约束残差至少下降一半
_STAGNATION_WINDOW = 100
_STAGNATION_FACTOR = 0.5


def _factorize(matrix: sp.spmatrix, name: str, error: type[StokesLabError]) -> SuperLU:
    """稀疏 LU 分解；SuperLU 的奇异或非有限失败转为求解器错误"""
    try:
        return splu(matrix)
    except (RuntimeError, ValueError) as exc:
        logger.warning(f"{name} factorization failed: {exc}")
        raise error(f"{name} matrix could not be factorized: {exc}") from exc


# =============================================================================
# (3) 网格算子
# =============================================================================


class StaggeredOperators:
    """网格上与掩码无关的稀疏算子

    自由度排列：先 u₁ 按 (i, j) 行优先，再 u₂。
    """

    # I. 初始化
    def __init__(self, grid: Grid) -> None:
        self.grid = grid
        n = grid.n
        self.n_u1 = grid.u1_shape[0] * grid.u1_shape[1]
        self.n_u2 = grid.u2_shape[0] * grid.u2_shape[1]
        self.n_dofs = self.n_u1 + self.n_u2
        self.n_cells = n * n
        self.n_nodes = grid.node_shape[0] * grid.node_shape[1]
        self.n_strain = 2 * self.n_cells + self.n_nodes

        self.strain = self._assemble_strain()
        self.pack = self._assemble_pack()
        self.pack_strain = (self.pack @ self.strain).tocsr()
        self.divergence = (
            self.strain[: self.n_cells] + self.strain[self.n_cells : 2 * self.n_cells]
        ).tocsr()

    # II. 索引
    def u1_index(self, i: NDArray, j: NDArray) -> NDArray:
        return i * self.grid.u1_shape[1] + j

    def u2_index(self, i: NDArray, j: NDArray) -> NDArray:
        return self.n_u1 + i * self.grid.u2_shape[1] + j

    def node_row(self, i: NDArray, j: NDArray) -> NDArray:
        return 2 * self.n_cells + i * self.grid.node_shape[1] + j

    # III. 组装
    def _assemble_strain(self) -> sp.csr_matrix:
        grid, n, h = self.grid, self.grid.n, self.grid.h
        rows: list[NDArray] = []
        cols: list[NDArray] = []
        vals: list[NDArray] = []

        def add(r: NDArray, c: NDArray, v: float) -> None:
            rows.append(r.ravel())
            cols.append(c.ravel())
            vals.append(np.full(r.size, v))

        I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        cell = I * n + J
        if grid.periodic:
            add(cell, self.u1_index((I + 1) % n, J), 1.0 / h)
            add(cell, self.u1_index(I, J), -1.0 / h)
            add(self.n_cells + cell, self.u2_index(I, (J + 1) % n), 1.0 / h)
            add(self.n_cells + cell, self.u2_index(I, J), -1.0 / h)
            node = self.node_row(I, J)
            add(node, self.u1_index(I, J), 0.5 / h)
            add(node, self.u1_index(I, (J - 1) % n), -0.5 / h)
            add(node, self.u2_index(I, J), 0.5 / h)
            add(node, self.u2_index((I - 1) % n, J), -0.5 / h)
        else:
            add(cell, self.u1_index(I + 1, J), 1.0 / h)
            add(cell, self.u1_index(I, J), -1.0 / h)
            add(self.n_cells + cell, self.u2_index(I, J + 1), 1.0 / h)
            add(self.n_cells + cell, self.u2_index(I, J), -1.0 / h)
            # ∂₂u₁：内部节点中心差分，壁面节点对迹做半步差分
            Ni, Nj = np.meshgrid(np.arange(n + 1), np.arange(1, n), indexing="ij")
            add(self.node_row(Ni, Nj), self.u1_index(Ni, Nj), 0.5 / h)
            add(self.node_row(Ni, Nj), self.u1_index(Ni, Nj - 1), -0.5 / h)
            edge = np.arange(n + 1)
            add(self.node_row(edge, np.zeros_like(edge)), self.u1_index(edge, np.zeros_like(edge)), 1.0 / h)
            add(self.node_row(edge, np.full_like(edge, n)), self.u1_index(edge, np.full_like(edge, n - 1)), -1.0 / h)
            # ∂₁u₂
            Ni, Nj = np.meshgrid(np.arange(1, n), np.arange(n + 1), indexing="ij")
            add(self.node_row(Ni, Nj), self.u2_index(Ni, Nj), 0.5 / h)
            add(self.node_row(Ni, Nj), self.u2_index(Ni - 1, Nj), -0.5 / h)
            add(self.node_row(np.zeros_like(edge), edge), self.u2_index(np.zeros_like(edge), edge), 1.0 / h)
            add(self.node_row(np.full_like(edge, n), edge), self.u2_index(np.full_like(edge, n - 1), edge), -1.0 / h)

        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_strain, self.n_dofs),
        )

    def _assemble_pack(self) -> sp.csr_matrix:
        grid, n = self.grid, self.grid.n
        I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        cell = (I * n + J).ravel()
        rows = [6 * cell, 6 * cell + 1]
        cols = [cell, self.n_cells + cell]
        vals = [np.ones(cell.size), np.ones(cell.size)]
        wrap = n if grid.periodic else n + 1
        for k, (di, dj) in enumerate(((0, 0), (1, 0), (0, 1), (1, 1))):
            rows.append(6 * cell + 2 + k)
            cols.append(self.node_row(((I + di) % wrap).ravel(), ((J + dj) % wrap).ravel()))
            vals.append(np.full(cell.size, _INV_SQRT2))
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(6 * self.n_cells, self.n_strain),
        )

    # IV. 向量与场的转换
    def trace_strain(self, trace: Optional[BoundaryTrace]) -> NDArray:
        """壁面切向迹对节点剪切应变的仿射贡献"""
        s_b = np.zeros(self.n_strain)
        if self.grid.periodic or trace is None:
            return s_b
        n, h = self.grid.n, self.grid.h
        edge = np.arange(n + 1)
        np.add.at(s_b, self.node_row(edge, np.zeros_like(edge)), -trace.south / h)
        np.add.at(s_b, self.node_row(edge, np.full_like(edge, n)), trace.north / h)
        np.add.at(s_b, self.node_row(np.zeros_like(edge), edge), -trace.west / h)
        np.add.at(s_b, self.node_row(np.full_like(edge, n), edge), trace.east / h)
        return s_b

    def to_vector(self, u: VectorField) -> NDArray:
        return np.concatenate([u.u1.ravel(), u.u2.ravel()])

    def to_field(self, x: NDArray, trace: Optional[BoundaryTrace] = None) -> VectorField:
        grid = self.grid
        return VectorField(
            grid=grid,
            u1=x[: self.n_u1].reshape(grid.u1_shape),
            u2=x[self.n_u1 :].reshape(grid.u2_shape),
            trace=trace,
        )

    def strain_weights(self, active: NDArray) -> NDArray:
        """⟨G, H⟩ = h² Σ W̃·g·s 中的权重 W̃ = [act, act, 2w_n]"""
        act = active.ravel().astype(float)
        return np.concatenate([act, act, 2.0 * node_weights(self.grid, active).ravel()])

    def face_neighbours(self) -> tuple[NDArray, NDArray]:
        """每个速度自由度两侧的单元编号（不存在时为 -1）"""
        grid, n = self.grid, self.grid.n
        I1, J1 = np.meshgrid(np.arange(grid.u1_shape[0]), np.arange(grid.u1_shape[1]), indexing="ij")
        I2, J2 = np.meshgrid(np.arange(grid.u2_shape[0]), np.arange(grid.u2_shape[1]), indexing="ij")
        if grid.periodic:
            left1, right1 = ((I1 - 1) % n) * n + J1, I1 * n + J1
            left2, right2 = I2 * n + (J2 - 1) % n, I2 * n + J2
        else:
            left1 = np.where(I1 > 0, (I1 - 1) * n + J1, -1)
            right1 = np.where(I1 < n, np.minimum(I1, n - 1) * n + J1, -1)
            left2 = np.where(J2 > 0, I2 * n + J2 - 1, -1)
            right2 = np.where(J2 < n, I2 * n + np.minimum(J2, n - 1), -1)
        return (
            np.concatenate([left1.ravel(), left2.ravel()]),
            np.concatenate([right1.ravel(), right2.ravel()]),
        )


@lru_cache(maxsize=16)
def get_operators(grid: Grid) -> StaggeredOperators:
    """按网格缓存的算子"""
    logger.debug(f"Assembling staggered operators for {grid.describe()}")
    return StaggeredOperators(grid)


# =============================================================================
# (4) 鞍点系统
# =============================================================================


class SaddlePointSystem:
    """给定活动单元与自由面后的离散问题

    状态为自由速度 x_F 与活动单元上的压力 π；固定自由度取 x_full 中的值。
    残差 r_u 除以 h²，r_p = B x。
    """

    # I. 初始化
    def __init__(
        self,
        grid: Grid,
        x_full: NDArray,
        trace: Optional[BoundaryTrace] = None,
        active: Optional[NDArray] = None,
        free: Optional[NDArray] = None,
        G: Optional[TensorField] = None,
        f: Optional[VectorField] = None,
    ) -> None:
        ops = get_operators(grid)
        self.grid = grid
        self.ops = ops
        self.trace = trace
        self.active = np.ones(grid.cell_shape, dtype=bool) if active is None else active.astype(bool)
        self.free = self._default_free() if free is None else free.astype(bool)
        self.x_full = np.array(x_full, dtype=float, copy=True)

        act = self.active.ravel()
        self.cell_weights = act.astype(float)
        self.rows = np.flatnonzero(act)
        columns = np.flatnonzero(self.free)
        self.E_F = ops.pack_strain[:, columns].tocsc()
        self.L_F = ops.strain[:, columns].tocsc()
        self.B_F = ops.divergence[self.rows][:, columns].tocsr()
        self.s_b = ops.trace_strain(trace)
        x_fixed = np.where(self.free, 0.0, self.x_full)
        self.s0 = ops.strain @ x_fixed + self.s_b
        self.z0 = ops.pack @ self.s0
        self.p0 = ops.divergence[self.rows] @ x_fixed

        self.weights = ops.strain_weights(self.active)
        self.wg = np.zeros(ops.n_strain) if G is None else self.weights * G.staggered_vector()
        self.face_load = np.zeros(ops.n_dofs) if f is None else ops.to_vector(f)
        self.load = self.L_F.T @ self.wg + self.face_load[self.free]

    def _default_free(self) -> NDArray:
        """周期网格固定 u₁、u₂ 各一个自由度；Dirichlet 网格边界法向面固定"""
        ops, grid = self.ops, self.grid
        free = np.ones(ops.n_dofs, dtype=bool)
        if grid.periodic:
            free[0] = False
            free[ops.n_u1] = False
            return free
        left, right = ops.face_neighbours()
        return (left >= 0) & (right >= 0)

    @classmethod
    def masked(
        cls, grid: Grid, outer: VectorField, active: NDArray
    ) -> SaddlePointSystem:
        """子区域问题：两侧单元都活动的面为自由面，其余面取外部解的值"""
        ops = get_operators(grid)
        left, right = ops.face_neighbours()
        act = active.ravel()
        free = (left >= 0) & (right >= 0)
        free &= act[np.maximum(left, 0)] & act[np.maximum(right, 0)]
        return cls(grid, ops.to_vector(outer), trace=outer.trace, active=active, free=free)

    # II. 状态
    @property
    def n_free(self) -> int:
        return int(np.count_nonzero(self.free))

    def full_vector(self, x_F: NDArray) -> NDArray:
        x = self.x_full.copy()
        x[self.free] = x_F
        return x

    def free_part(self, x_full: NDArray) -> NDArray:
        return np.asarray(x_full)[self.free]

    def strain(self, x_F: NDArray) -> NDArray:
        """完整应变向量 s = Lx + s_b"""
        return self.L_F @ x_F + self.s0

    def cell_vectors(self, x_F: NDArray) -> NDArray:
        """每单元 6 维向量 z_c，形状 (n², 6)"""
        return (self.E_F @ x_F + self.z0).reshape(-1, 6)

    def divergence(self, x_F: NDArray) -> NDArray:
        return self.B_F @ x_F + self.p0

    def project_pressure(self, pi: NDArray) -> NDArray:
        return pi - pi.mean() if pi.size else pi

    # III. 残差
    def residual(
        self, law: StressLaw, x_F: NDArray, pi: NDArray
    ) -> tuple[NDArray, NDArray, dict[str, float]]:
        """弱形式残差 r_u、约束残差 r_p 与残差尺度

        Returns:
            (r_u, r_p, scales)，scales 含 u、p 两个尺度
        """
        z = self.cell_vectors(x_F)
        t = np.sqrt(np.sum(z * z, axis=1))
        mu = law.viscosity(t) * self.cell_weights
        stress_term = self.E_F.T @ (mu[:, None] * z).ravel()
        pressure_term = self.B_F.T @ pi
        r_u = stress_term - pressure_term - self.load
        div = self.divergence(x_F)
        r_p = div - div.mean() if div.size else div
        scales = {
            "u": float(
                np.linalg.norm(stress_term) + np.linalg.norm(self.load) + np.linalg.norm(pressure_term)
            ),
            "p": float(np.max(t * self.cell_weights)) if t.size else 0.0,
        }
        return r_u, r_p, scales

    @staticmethod
    def relative_residual(r_u: NDArray, r_p: NDArray, scales: dict[str, float]) -> float:
        """max(‖r_u‖/scale_u, ‖r_p‖∞/scale_p)，尺度全为0时返回0"""
        parts = []
        norm_u = float(np.linalg.norm(r_u))
        norm_p = float(np.max(np.abs(r_p))) if r_p.size else 0.0
        if scales["u"] > 0.0:
            parts.append(norm_u / scales["u"])
        elif norm_u > 0.0:
            parts.append(math.inf)
        if scales["p"] > 0.0:
            parts.append(norm_p / scales["p"])
        elif norm_p > 0.0:
            parts.append(math.inf)
        return max(parts) if parts else 0.0

    def energy(self, law: StressLaw, x: NDArray) -> float:
        """J(u) = h²Σ_c φ(|z_c|) − ⟨G, Du⟩ − ⟨f, u⟩

        x 为完整速度向量（周期网格上可含被固定自由度的平移）。
        """
        ops = self.ops
        strain = ops.strain @ x + self.s_b
        z = (ops.pack @ strain).reshape(-1, 6)
        t = np.sqrt(np.sum(z * z, axis=1))
        phi = np.asarray(law.model.phi(t), dtype=float)
        return float(
            self.grid.h**2
            * (np.sum(self.cell_weights * phi) - self.wg @ strain - self.face_load @ x)
        )

    # IV. 线性化
    def hessian(self, law: StressLaw, x_F: NDArray) -> sp.csc_matrix:
        """H = E_Fᵀ M E_F，M 的单元块为 μI + (φ″−μ)ẑẑᵀ"""
        z = self.cell_vectors(x_F)
        t = np.sqrt(np.sum(z * z, axis=1))
        mu = law.viscosity(t)
        second = np.asarray(law.model.phi_second(t), dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            zhat = np.where(t[:, None] > 0.0, z / np.where(t > 0.0, t, 1.0)[:, None], 0.0)
        blocks = (second - mu)[:, None, None] * zhat[:, :, None] * zhat[:, None, :]
        blocks += mu[:, None, None] * np.eye(6)[None, :, :]
        blocks *= self.cell_weights[:, None, None]
        cells = np.arange(z.shape[0])
        base = 6 * cells[:, None, None]
        rows = np.broadcast_to(base + np.arange(6)[None, :, None], blocks.shape)
        cols = np.broadcast_to(base + np.arange(6)[None, None, :], blocks.shape)
        M = sp.csr_matrix(
            (blocks.ravel(), (rows.ravel(), cols.ravel())), shape=(6 * z.shape[0], 6 * z.shape[0])
        )
        return (self.E_F.T @ M @ self.E_F).tocsc()

    def uzawa_step(
        self,
        H: sp.csc_matrix,
        r_u: NDArray,
        r_p: NDArray,
        rho: float,
        tol: float,
        max_iterations: int,
    ) -> tuple[NDArray, NDArray, int]:
        """增广拉格朗日 Uzawa 求解 Newton 修正

        H δu − Bᵀδπ = −r_u，B δu = −r_p

        Raises:
            InfSupError: 约束残差停滞或迭代次数耗尽
            InfSupError: 增广速度块奇异
        """
        B = self.B_F
        K = (H + rho * (B.T @ B)).tocsc()
        solver = _factorize(K, "augmented velocity", InfSupError)
        base = -r_u - rho * (B.T @ r_p)
        dpi = np.zeros(B.shape[0])
        history: list[float] = []
        for iteration in range(1, max_iterations + 1):
            du = solver.solve(base + B.T @ dpi)
            violation = B @ du + r_p
            violation -= violation.mean()
            dpi = self.project_pressure(dpi - rho * violation)
            size = float(np.max(np.abs(violation))) if violation.size else 0.0
            history.append(size)
            if size <= tol:
                return du, dpi, iteration
            if iteration >= _STAGNATION_WINDOW:
                previous = history[iteration - _STAGNATION_WINDOW]
                if iteration % _STAGNATION_WINDOW == 0 and size > _STAGNATION_FACTOR * previous:
                    raise InfSupError(
                        f"pressure iteration stagnated at {size:.3e} after {iteration} steps"
                    )
        raise InfSupError(f"pressure iteration did not converge in {max_iterations} steps")

    def direct_linear(self, viscosity: float) -> tuple[NDArray, NDArray]:
        """常粘度线性 Stokes 的加边直接解

        [μEᵀE  −Bᵀ  0] [x]   [load − μEᵀz0]
        [−B    0    e] [π] = [p0]
        [0     eᵀ   0] [λ]   [0]

        Raises:
            SolverConvergenceError: 加边系统奇异
        """
        act6 = np.repeat(self.cell_weights, 6)
        K = viscosity * (self.E_F.T @ sp.diags(act6) @ self.E_F)
        B = self.B_F
        m = B.shape[0]
        e = sp.csr_matrix(np.ones((m, 1)))
        A = sp.bmat(
            [[K, -B.T, None], [-B, None, e], [None, e.T, None]], format="csc"
        )
        rhs = np.concatenate(
            [self.load - viscosity * (self.E_F.T @ (act6 * self.z0)), self.p0, [0.0]]
        )
        solution = _factorize(A, "bordered Stokes", SolverConvergenceError).solve(rhs)
        x_F = solution[: self.n_free]
        pi = solution[self.n_free : self.n_free + m]
        return x_F, self.project_pressure(pi)


__all__ = [
    "SaddlePointSystem",
    "StaggeredOperators",
    "get_operators",
]
