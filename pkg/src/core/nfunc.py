"""
N函数演算模块

提供 N 函数的求值、求导、凸共轭、平移、指标估计以及结构不等式校验。

所有函数都对 numpy 数组逐元素向量化：标量输入返回 float，数组输入返回数组。
内置模型族：

- 幂律（加性）      φ′(t) = ν(κ+t)^{p-2}t
- 幂律（二次）      φ′(t) = ν(κ²+t²)^{(p-2)/2}t
- Carreau           φ′(t) = μ∞t + ν(κ+t)^{p-2}t
- arcsinh           φ′(t) = μ∞t + ν·arcsinh(t)

平移族 φ_a 由 φ_a′(t)/t = φ′(a+t)/(a+t) 定义，共轭 φ* 由 Legendre 变换定义，
二者可任意组合（(φ_a)*、(φ*)_b）。
"""

# =============================================================================
# (1) 导入依赖
# =============================================================================
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from collections.abc import Callable, Sequence
from enum import Enum
from typing import Any, Optional, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.integrate import quad_vec

from src.core.exceptions import (
    IndexEstimationError,
    NFunctionDomainError,
    SingularityError,
)
from src.core.state import CheckResult
from src.utils.config import get_config
from src.utils.helpers import NumericHelper
from src.utils.logger import get_logger

# =============================================================================
# (2) 日志配置
# =============================================================================

logger = get_logger(__name__)

Number = Union[float, NDArray[np.float64]]

# φ′(t)/t 的极限分支阈值
MU_LIMIT_THRESHOLD = 1e-12
# 加性幂律小 r=t/κ 的级数分支
_SERIES_RADIUS = 0.5
_SERIES_TERMS = 60
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


# =============================================================================
# (3) 内部工具
# =============================================================================


def _domain_array(t: ArrayLike, name: str = "t") -> tuple[NDArray, bool]:
    """校验自变量并转换为数组"""
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NFunctionDomainError(f"{name} must be finite")
    if np.any(arr < 0.0):
        raise NFunctionDomainError(f"{name} must be nonnegative")
    return arr, arr.ndim == 0


def _wrap(values: NDArray, scalar: bool) -> Number:
    return float(values) if scalar else values


def _normalized_quad(integrand: Callable[[float], NDArray]) -> NDArray:
    """在 [0,1] 上对向量值被积函数做自适应积分

    先用16点 Gauss-Legendre 估计每个分量的量级并归一化，
    使 quad_vec 的 max 范数容差对每个分量都是相对容差。
    """
    estimate = sum(w * integrand(x) for x, w in zip(_GL_NODES, _GL_WEIGHTS))
    estimate = np.abs(np.asarray(estimate, dtype=float))
    scale = np.where((estimate > 0.0) & np.isfinite(estimate), estimate, 1.0)
    value, _ = quad_vec(
        lambda x: integrand(x) / scale,
        0.0,
        1.0,
        epsabs=1e-14,
        epsrel=1e-12,
        norm="max",
        limit=4000,
    )
    return np.asarray(value) * scale


def _invert_increasing(
    fprime: Callable[[NDArray], NDArray],
    fsecond: Callable[[NDArray], NDArray],
    s: NDArray,
    rtol: float = 1e-14,
) -> NDArray:
    """求严格递增函数 fprime 的逆，逐元素

    先倍增/减半定界，再在对数尺度二分，最后用 Newton 步精修。
    fprime 与 fsecond 必须接受与 s 同形的数组（便于携带逐元素参数）。
    """
    s = np.asarray(s, dtype=float)
    positive = s > 0.0
    if not np.any(positive):
        return np.zeros_like(s)
    target = np.where(positive, s, 1.0)

    hi = np.ones_like(target)
    lo = np.ones_like(target)
    for _ in range(1100):
        below = fprime(hi) < target
        if not np.any(below):
            break
        lo = np.where(below, hi, lo)
        hi = np.where(below, 2.0 * hi, hi)
    for _ in range(1100):
        above = (fprime(lo) > target) & (lo > 1e-300)
        if not np.any(above):
            break
        hi = np.where(above, lo, hi)
        lo = np.where(above, 0.5 * lo, lo)

    for _ in range(200):
        mid = np.sqrt(lo * hi)
        up = fprime(mid) < target
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
        if np.all(hi <= lo * (1.0 + rtol)):
            break

    t = np.sqrt(lo * hi)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(2):
            step = (fprime(t) - target) / fsecond(t)
            candidate = t - step
            ok = (
                np.isfinite(candidate)
                & (candidate >= lo * (1.0 - 1e-12))
                & (candidate <= hi * (1.0 + 1e-12))
            )
            t = np.where(ok, candidate, t)
    return np.where(positive, t, 0.0)


# --- 加性幂律核函数（κ 可为数组） ---


def _additive_mu(nu: float, kappa: Any, p: float, t: NDArray) -> NDArray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return nu * np.power(kappa + t, p - 2.0)


def _additive_second(nu: float, kappa: Any, p: float, t: NDArray) -> NDArray:
    kappa = np.asarray(kappa, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        general = np.power(kappa + t, p - 3.0) * (kappa + (p - 1.0) * t)
        degenerate = (p - 1.0) * np.power(t, p - 2.0)
        return nu * np.where(kappa > 0.0, general, degenerate)


def _additive_phi(nu: float, kappa: Any, p: float, t: NDArray) -> NDArray:
    """∫₀ᵗ ν(κ+s)^{p-2}s ds

    r=t/κ ≤ 1/2 时用二项级数 r²Σ C(p-2,m) r^m/(m+2)，避免闭式的相消误差。
    """
    kappa, t = np.broadcast_arrays(np.asarray(kappa, dtype=float), t)
    safe_kappa = np.where(kappa > 0.0, kappa, 1.0)
    r = np.where(kappa > 0.0, t / safe_kappa, 0.0)

    rs = np.minimum(r, _SERIES_RADIUS)
    series = np.zeros_like(rs)
    coefficient = 1.0
    power = np.ones_like(rs)
    for m in range(_SERIES_TERMS):
        series = series + coefficient * power / (m + 2.0)
        coefficient *= (p - 2.0 - m) / (m + 1.0)
        power = power * rs
    series = rs * rs * series

    rc = np.maximum(r, _SERIES_RADIUS)
    closed = (
        np.power(1.0 + rc, p) / p
        - np.power(1.0 + rc, p - 1.0) / (p - 1.0)
        + 1.0 / (p * (p - 1.0))
    )
    shaped = np.where(r <= _SERIES_RADIUS, series, closed)
    with np.errstate(over="ignore"):
        regular = np.power(safe_kappa, p) * shaped
        pure = np.power(t, p) / p
    return nu * np.where(kappa > 0.0, regular, pure)


# --- 二次幂律核函数 ---


def _quadratic_mu(nu: float, kappa: float, p: float, t: NDArray) -> NDArray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return nu * np.power(kappa * kappa + t * t, 0.5 * (p - 2.0))


def _quadratic_second(nu: float, kappa: float, p: float, t: NDArray) -> NDArray:
    with np.errstate(divide="ignore", invalid="ignore"):
        if kappa > 0.0:
            k2 = kappa * kappa
            return nu * (
                np.power(k2 + t * t, 0.5 * (p - 4.0)) * (k2 + (p - 1.0) * t * t)
            )
        return nu * ((p - 1.0) * np.power(t, p - 2.0))


def _quadratic_phi(nu: float, kappa: float, p: float, t: NDArray) -> NDArray:
    if kappa > 0.0:
        r = t / kappa
        with np.errstate(over="ignore"):
            return nu * (kappa**p / p * np.expm1(0.5 * p * np.log1p(r * r)))
    return nu * (np.power(t, p) / p)


# --- arcsinh 核函数 ---


def _asinh_over_t(t: NDArray) -> NDArray:
    safe = np.where(t > 1e-8, t, 1.0)
    return np.where(t > 1e-8, np.arcsinh(safe) / safe, 1.0 - t * t / 6.0)


def _asinh_phi(t: NDArray) -> NDArray:
    # ∫₀ᵗ arcsinh = t·arcsinh(t) − (√(1+t²) − 1)
    return t * np.arcsinh(t) - t * t / (np.sqrt(1.0 + t * t) + 1.0)


# =============================================================================
# (4) N函数抽象接口
# =============================================================================


class NFunction(ABC):
    """N函数抽象基类

    子类实现 `_phi`、`_phi_prime`、`_phi_second`、`_mu` 四个数组内核，
    基类负责定义域校验、奇异性报告以及通用的数值求逆与平移积分。
    """

    # I. 数组内核
    @abstractmethod
    def _phi(self, t: NDArray) -> NDArray: ...

    @abstractmethod
    def _phi_prime(self, t: NDArray) -> NDArray: ...

    @abstractmethod
    def _phi_second(self, t: NDArray) -> NDArray: ...

    @abstractmethod
    def _mu(self, t: NDArray) -> NDArray:
        """φ′(t)/t，t=0 处返回极限（可能为 inf 或 0）"""

    def _inverse_phi_prime(self, s: NDArray) -> NDArray:
        return _invert_increasing(self._phi_prime, self._phi_second, s)

    def _shifted_phi(self, a: NDArray, t: NDArray) -> NDArray:
        """φ_a(t) = ∫₀ᵗ φ′(a+σ)σ/(a+σ) dσ，a 与 t 逐元素"""
        a, t = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(t, dtype=float))
        out = np.array(self._phi(t), dtype=float, copy=True)
        mask = (a > 0.0) & (t > 0.0)
        if np.any(mask):
            av, tv = a[mask], t[mask]
            out[mask] = tv * tv * _normalized_quad(lambda x: self._mu(av + tv * x) * x)
        return out

    # II. 公开求值接口
    def phi(self, t: ArrayLike) -> Number:
        """计算 φ(t)

        Args:
            t: 非负有限实数或数组

        Returns:
            φ(t)

        Raises:
            NFunctionDomainError: t 为负或非有限
        """
        arr, scalar = _domain_array(t)
        return _wrap(self._phi(arr), scalar)

    def phi_prime(self, t: ArrayLike) -> Number:
        """计算 φ′(t)，φ′(0)=0"""
        arr, scalar = _domain_array(t)
        return _wrap(np.where(arr > 0.0, self._phi_prime(arr), 0.0), scalar)

    def phi_second(self, t: ArrayLike) -> Number:
        """计算 φ″(t)

        Raises:
            SingularityError: 在原点奇异（κ=0 且 p<2 一类）
        """
        arr, scalar = _domain_array(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            values = self._phi_second(arr)
        if not np.all(np.isfinite(values)):
            raise SingularityError("singular at origin")
        return _wrap(values, scalar)

    def phi_prime_over_t(self, t: ArrayLike) -> Number:
        """粘度 μ(t) = φ′(t)/t

        t < 1e-12 时取 φ″(0⁺)；极限无穷时返回 0，与 A(0)=0 一致。
        """
        arr, scalar = _domain_array(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            limit = float(self._mu(np.zeros(())))
            limit = limit if math.isfinite(limit) else 0.0
            values = np.where(
                arr < MU_LIMIT_THRESHOLD,
                limit,
                self._mu(np.maximum(arr, MU_LIMIT_THRESHOLD)),
            )
        return _wrap(values, scalar)

    def inverse_phi_prime(self, s: ArrayLike) -> Number:
        """求 t 使 φ′(t)=s，即 (φ*)′(s)"""
        arr, scalar = _domain_array(s, "s")
        return _wrap(self._inverse_phi_prime(arr), scalar)

    # III. 变换
    def conjugate(self) -> NFunction:
        """共轭函数 φ*"""
        return ConjugateNFunction(base=self)

    def shifted(self, a: float) -> NFunction:
        """平移函数 φ_a"""
        return ShiftedNFunction(base=self, shift=a)

    def analytic_indices(self) -> Optional[tuple[float, float]]:
        """解析已知的 (下指标, 上指标)，未知时返回 None"""
        return None

    @property
    def singular_at_origin(self) -> bool:
        """φ″(0⁺) 是否为无穷"""
        with np.errstate(divide="ignore", invalid="ignore"):
            return not math.isfinite(float(self._phi_second(np.zeros(()))))

    def describe(self) -> dict[str, Any]:
        """CSV 用的描述字段"""
        return {"function": type(self).__name__}


# =============================================================================
# (5) 内置模型
# =============================================================================


class NFunctionKind(str, Enum):
    """内置模型族"""

    POWER_LAW_ADDITIVE = "power_law_additive"  # ν(κ+t)^{p-2}t
    POWER_LAW_QUADRATIC = "power_law_quadratic"  # ν(κ²+t²)^{(p-2)/2}t
    CARREAU = "carreau"  # μ∞t + ν(κ+t)^{p-2}t
    ARCSINH = "arcsinh"  # μ∞t + ν·arcsinh(t)


class NFunctionModel(BaseModel, NFunction):
    """具体的 N 函数模型

    Examples:
        >>> model = NFunctionModel(kind=NFunctionKind.POWER_LAW_ADDITIVE, p=3.0)
        >>> model.phi(2.0)
        2.6666666666666665
    """

    model_config = ConfigDict(frozen=True)

    kind: NFunctionKind = Field(description="模型族")
    nu: float = Field(default=1.0, ge=0.0, description="ν")
    kappa: float = Field(default=0.0, ge=0.0, description="κ")
    p: float = Field(default=2.0, gt=1.0, description="幂指数 p")
    mu_inf: float = Field(default=0.0, ge=0.0, description="μ∞")

    @model_validator(mode="after")
    def check_family_parameters(self) -> NFunctionModel:
        """按模型族校验参数"""
        if not all(math.isfinite(v) for v in (self.nu, self.kappa, self.p, self.mu_inf)):
            raise ValueError("model parameters must be finite")
        if self.kind == NFunctionKind.ARCSINH:
            if self.mu_inf <= 0.0:
                raise ValueError("arcsinh model requires mu_inf > 0")
            return self
        if self.nu <= 0.0:
            raise ValueError(f"{self.kind.value} model requires nu > 0")
        if self.kind != NFunctionKind.CARREAU and self.mu_inf != 0.0:
            raise ValueError(f"{self.kind.value} model has no mu_inf term")
        return self

    # I. 辅助构造
    def pure_power(self) -> Optional[tuple[float, float]]:
        """若 φ′(t) = c·t^{p-1}，返回 (c, p)，否则 None"""
        if self.kind == NFunctionKind.ARCSINH:
            return (self.mu_inf, 2.0) if self.nu == 0.0 else None
        newtonian = self.mu_inf if self.kind == NFunctionKind.CARREAU else 0.0
        if self.p == 2.0 and self.kind != NFunctionKind.POWER_LAW_QUADRATIC:
            return (newtonian + self.nu, 2.0)
        if self.p == 2.0:
            return (self.nu, 2.0)
        if self.kappa == 0.0 and newtonian == 0.0:
            return (self.nu, self.p)
        return None

    def with_kappa(self, kappa: float) -> NFunctionModel:
        """替换 κ（arcsinh 模型无 κ，原样返回）"""
        if self.kind == NFunctionKind.ARCSINH:
            return self
        return self.model_copy(update={"kappa": float(kappa)})

    def scaled(self, factor: float) -> NFunctionModel:
        """ν 与 μ∞ 同乘 factor，φ 随之线性缩放"""
        return self.model_copy(
            update={"nu": self.nu * factor, "mu_inf": self.mu_inf * factor}
        )

    @property
    def has_kappa(self) -> bool:
        return self.kind != NFunctionKind.ARCSINH

    # II. 数组内核
    def _newtonian(self) -> float:
        return self.mu_inf if self.kind in (NFunctionKind.CARREAU, NFunctionKind.ARCSINH) else 0.0

    def _mu(self, t: NDArray) -> NDArray:
        if self.kind == NFunctionKind.ARCSINH:
            return self.mu_inf + self.nu * _asinh_over_t(t)
        if self.kind == NFunctionKind.POWER_LAW_QUADRATIC:
            return _quadratic_mu(self.nu, self.kappa, self.p, t)
        return self._newtonian() + _additive_mu(self.nu, self.kappa, self.p, t)

    def _phi_prime(self, t: NDArray) -> NDArray:
        if self.kind == NFunctionKind.ARCSINH:
            return self.mu_inf * t + self.nu * np.arcsinh(t)
        with np.errstate(invalid="ignore"):
            return np.where(t > 0.0, self._mu(t) * t, 0.0)

    def _phi_second(self, t: NDArray) -> NDArray:
        if self.kind == NFunctionKind.ARCSINH:
            return self.mu_inf + self.nu / np.sqrt(1.0 + t * t)
        if self.kind == NFunctionKind.POWER_LAW_QUADRATIC:
            return _quadratic_second(self.nu, self.kappa, self.p, t)
        return self._newtonian() + _additive_second(self.nu, self.kappa, self.p, t)

    def _phi(self, t: NDArray) -> NDArray:
        if self.kind == NFunctionKind.ARCSINH:
            return self.mu_inf * (0.5 * t * t) + self.nu * _asinh_phi(t)
        if self.kind == NFunctionKind.POWER_LAW_QUADRATIC:
            return _quadratic_phi(self.nu, self.kappa, self.p, t)
        return self._newtonian() * (0.5 * t * t) + _additive_phi(
            self.nu, self.kappa, self.p, t
        )

    def _inverse_phi_prime(self, s: NDArray) -> NDArray:
        power = self.pure_power()
        if power is not None:
            coefficient, p = power
            return np.power(s / coefficient, 1.0 / (p - 1.0))
        return super()._inverse_phi_prime(s)

    def _shifted_phi(self, a: NDArray, t: NDArray) -> NDArray:
        # 加性幂律与 Carreau 的平移仍属同一族：κ ↦ κ+a
        if self.kind in (NFunctionKind.POWER_LAW_ADDITIVE, NFunctionKind.CARREAU):
            a, t = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(t, dtype=float))
            return self._newtonian() * (0.5 * t * t) + _additive_phi(
                self.nu, self.kappa + a, self.p, t
            )
        return super()._shifted_phi(a, t)

    # III. 变换
    def conjugate(self) -> NFunction:
        """共轭函数；纯幂律时返回闭式模型 ν′ = c^{-1/(p-1)}, p′"""
        power = self.pure_power()
        if power is None:
            return ConjugateNFunction(base=self)
        coefficient, p = power
        return NFunctionModel(
            kind=NFunctionKind.POWER_LAW_ADDITIVE,
            nu=coefficient ** (-1.0 / (p - 1.0)),
            kappa=0.0,
            p=p / (p - 1.0),
        )

    def analytic_indices(self) -> Optional[tuple[float, float]]:
        power = self.pure_power()
        if power is not None:
            return (power[1], power[1])
        if self.kind == NFunctionKind.ARCSINH:
            return None
        return (min(self.p, 2.0), max(self.p, 2.0))

    def describe(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "nu": self.nu,
            "kappa": self.kappa,
            "p": self.p,
            "mu_inf": self.mu_inf,
        }


# =============================================================================
# (6) 共轭与平移
# =============================================================================


class ConjugateNFunction(BaseModel, NFunction):
    """共轭 N 函数 φ*

    (φ*)′ = (φ′)^{-1}，φ*(s) = s·t − φ(t)，其中 φ′(t)=s。
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    base: NFunction = Field(description="被共轭的 N 函数")

    def _mu(self, s: NDArray) -> NDArray:
        with np.errstate(divide="ignore", invalid="ignore"):
            limit = 1.0 / self.base._mu(np.zeros(()))
            safe = np.where(s > 0.0, s, 1.0)
            return np.where(s > 0.0, self.base._inverse_phi_prime(s) / safe, limit)

    def _phi_prime(self, s: NDArray) -> NDArray:
        return self.base._inverse_phi_prime(s)

    def _phi_second(self, s: NDArray) -> NDArray:
        t = self.base._inverse_phi_prime(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            at_origin = 1.0 / self.base._phi_second(np.zeros(()))
            safe = np.where(t > 0.0, t, 1.0)
            return np.where(t > 0.0, 1.0 / self.base._phi_second(safe), at_origin)

    def _phi(self, s: NDArray) -> NDArray:
        t = self.base._inverse_phi_prime(s)
        return np.maximum(s * t - self.base._phi(t), 0.0)

    def _inverse_phi_prime(self, t: NDArray) -> NDArray:
        return np.where(t > 0.0, self.base._phi_prime(t), 0.0)

    def _shifted_phi(self, b: NDArray, s: NDArray) -> NDArray:
        """(φ*)_b(s)，换元 x=(φ′)^{-1}(b+σ) 后被积函数为闭式

        (φ*)_b(s) = ∫_{x0}^{x1} x(φ′(x)−b)/φ′(x)·φ″(x) dx，
        x0=(φ′)^{-1}(b)，x1=(φ′)^{-1}(b+s)。
        """
        b, s = np.broadcast_arrays(np.asarray(b, dtype=float), np.asarray(s, dtype=float))
        out = np.array(self._phi(s), dtype=float, copy=True)
        mask = (b > 0.0) & (s > 0.0)
        if not np.any(mask):
            return out
        bv, sv = b[mask], s[mask]
        x0 = self.base._inverse_phi_prime(bv)
        x1 = self.base._inverse_phi_prime(bv + sv)
        dx = x1 - x0

        def integrand(tau: float) -> NDArray:
            x = x0 + dx * tau
            fp = self.base._phi_prime(x)
            return dx * x * (fp - bv) / fp * self.base._phi_second(x)

        out[mask] = _normalized_quad(integrand)
        return out

    def describe(self) -> dict[str, Any]:
        return {"function": "conjugate", **{f"base_{k}": v for k, v in self.base.describe().items()}}


class ShiftedNFunction(BaseModel, NFunction):
    """平移 N 函数 φ_a

    φ_a′(t)·(a+t) = φ′(a+t)·t；a=0 时所有求值直接委托给基函数。
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    base: NFunction = Field(description="基函数")
    shift: float = Field(ge=0.0, description="平移量 a")

    def _mu(self, t: NDArray) -> NDArray:
        if self.shift == 0.0:
            return self.base._mu(t)
        return self.base._mu(self.shift + t)

    def _phi_prime(self, t: NDArray) -> NDArray:
        if self.shift == 0.0:
            return self.base._phi_prime(t)
        return self.base._mu(self.shift + t) * t

    def _phi_second(self, t: NDArray) -> NDArray:
        if self.shift == 0.0:
            return self.base._phi_second(t)
        return _shifted_second(self.base, np.full_like(t, self.shift), t)

    def _phi(self, t: NDArray) -> NDArray:
        if self.shift == 0.0:
            return self.base._phi(t)
        return self.base._shifted_phi(np.full_like(t, self.shift), t)

    def _shifted_phi(self, b: NDArray, t: NDArray) -> NDArray:
        # (φ_a)_b = φ_{a+b}
        return self.base._shifted_phi(np.asarray(b, dtype=float) + self.shift, t)

    def analytic_indices(self) -> Optional[tuple[float, float]]:
        return self.base.analytic_indices() if self.shift == 0.0 else None

    def describe(self) -> dict[str, Any]:
        return {"function": "shifted", "shift": self.shift, **self.base.describe()}


def _shifted_second(func: NFunction, a: NDArray, t: NDArray) -> NDArray:
    """φ_a″(t) = φ″(a+t)·t/(a+t) + φ′(a+t)·a/(a+t)²"""
    at = a + t
    with np.errstate(divide="ignore", invalid="ignore"):
        safe = np.where(at > 0.0, at, 1.0)
        values = (
            func._phi_second(safe) * t / safe + func._phi_prime(safe) * a / (safe * safe)
        )
        return np.where(at > 0.0, values, func._phi_second(np.zeros_like(t)))


# =============================================================================
# (7) 逐元素平移运算（平移量可随样本变化）
# =============================================================================


def shifted_phi(func: NFunction, a: ArrayLike, t: ArrayLike) -> NDArray:
    """φ_a(t)，a 与 t 逐元素广播"""
    a_arr, _ = _domain_array(a, "a")
    t_arr, _ = _domain_array(t)
    return func._shifted_phi(a_arr, t_arr)


def shifted_phi_prime(func: NFunction, a: ArrayLike, t: ArrayLike) -> NDArray:
    """φ_a′(t) = φ′(a+t)·t/(a+t)"""
    a_arr, _ = _domain_array(a, "a")
    t_arr, _ = _domain_array(t)
    a_arr, t_arr = np.broadcast_arrays(a_arr, t_arr)
    with np.errstate(invalid="ignore"):
        return np.where(t_arr > 0.0, func._mu(a_arr + t_arr) * t_arr, 0.0)


def conjugate_of_shifted(func: NFunction, a: ArrayLike, s: ArrayLike) -> NDArray:
    """(φ_a)*(s)，Legendre 变换在 φ_a′(x)=s 处取到"""
    a_arr, _ = _domain_array(a, "a")
    s_arr, _ = _domain_array(s, "s")
    a_arr, s_arr = np.broadcast_arrays(a_arr, s_arr)
    a_arr = np.array(a_arr, dtype=float)

    def fprime(x: NDArray) -> NDArray:
        return func._mu(a_arr + x) * x

    def fsecond(x: NDArray) -> NDArray:
        return _shifted_second(func, a_arr, x)

    x = _invert_increasing(fprime, fsecond, s_arr)
    return np.maximum(s_arr * x - func._shifted_phi(a_arr, x), 0.0)


def shifted_conjugate(func: NFunction, b: ArrayLike, s: ArrayLike) -> NDArray:
    """(φ*)_b(s)：先共轭再平移"""
    b_arr, _ = _domain_array(b, "b")
    s_arr, _ = _domain_array(s, "s")
    return func.conjugate()._shifted_phi(b_arr, s_arr)


# =============================================================================
# (8) 模块级运算
# =============================================================================


def phi(model: NFunction, t: ArrayLike) -> Number:
    """φ(t)"""
    return model.phi(t)


def phi_prime(model: NFunction, t: ArrayLike) -> Number:
    """φ′(t)"""
    return model.phi_prime(t)


def phi_second(model: NFunction, t: ArrayLike) -> Number:
    """φ″(t)，原点奇异时抛出 SingularityError"""
    return model.phi_second(t)


def inverse_phi_prime(model: NFunction, s: ArrayLike) -> Number:
    """(φ′)^{-1}(s)"""
    return model.inverse_phi_prime(s)


def conjugate(model: NFunction, s: ArrayLike) -> Number:
    """φ*(s)"""
    return model.conjugate().phi(s)


def shift(model: NFunction, a: float) -> NFunction:
    """平移函数 φ_a"""
    if not math.isfinite(a) or a < 0.0:
        raise NFunctionDomainError("shift must be finite and nonnegative")
    return model.shifted(float(a))


# =============================================================================
# (9) 指标估计
# =============================================================================


class Indices(BaseModel):
    """T(p,q,K₁) 型指标

    φ(st) ≤ K1·max{s^p, s^q}·φ(t)；p̄=min{p,2}，q̄=max{q,2}。
    """

    model_config = ConfigDict(frozen=True)

    p_lower: float = Field(gt=1.0, description="下指标 p")
    q_upper: float = Field(description="上指标 q")
    K1: float = Field(ge=1.0, description="类型常数")
    p_bar: float = Field(description="p̄ = min{p,2}")
    q_bar: float = Field(description="q̄ = max{q,2}")
    p_bar_conj: float = Field(description="p̄′")
    q_bar_conj: float = Field(description="q̄′")
    growth_at_infinity: float = Field(description="t∈[1e4,1e6] 上 tφ′/φ 的最小值")
    method: str = Field(default="lattice", description="analytic 或 lattice")

    @classmethod
    def from_exponents(
        cls, p: float, q: float, k1: float, growth: float, method: str
    ) -> Indices:
        """由 p, q 填充 p̄, q̄ 及其共轭指标"""
        p_bar = min(p, 2.0)
        q_bar = max(q, 2.0)
        return cls(
            p_lower=p,
            q_upper=q,
            K1=k1,
            p_bar=p_bar,
            q_bar=q_bar,
            p_bar_conj=p_bar / (p_bar - 1.0),
            q_bar_conj=q_bar / (q_bar - 1.0),
            growth_at_infinity=growth,
            method=method,
        )


class _IndexLattice:
    """s, t ∈ [lo, hi] 的对数格点，φ 在 s·t 的合并格点上只求值一次"""

    def __init__(self, func: NFunction) -> None:
        cfg = get_config()
        m = cfg.lattice_points_per_decade
        lo = round(math.log10(cfg.index_lattice_min) * m)
        hi = round(math.log10(cfg.index_lattice_max) * m)
        self.m = m
        self.offset = -lo
        self.exps = np.arange(lo, hi + 1) / m
        full = np.arange(2 * lo, 2 * hi + 1) / m
        values = np.asarray(func.phi(np.power(10.0, full)), dtype=float)
        with np.errstate(divide="ignore"):
            self.log_phi = np.where(values > 0.0, np.log(values), -np.inf)
        size = self.exps.size
        i = np.arange(size)[:, None]
        j = np.arange(size)[None, :]
        cap = math.log10(cfg.index_lattice_cap)
        self.log_s = (self.exps * math.log(10.0))[:, None] * np.ones((1, size))
        self.ratio = self.log_phi[i + j] - self.log_phi[j + self.offset]
        st_exp = self.exps[:, None] + self.exps[None, :]
        self.valid = (
            (np.abs(st_exp) <= cap + 1e-12)
            & np.isfinite(self.ratio)
            & (self.log_s != 0.0)
        )

    def exponent_bounds(self) -> tuple[float, float]:
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = self.ratio / self.log_s
        below = self.valid & (self.log_s < 0.0)
        above = self.valid & (self.log_s > 0.0)
        return float(np.min(slope[below])), float(np.max(slope[above]))

    def type_constant(self, p: float, q: float) -> float:
        bound = np.where(self.log_s < 0.0, p * self.log_s, q * self.log_s)
        excess = np.where(self.valid, self.ratio - bound, -np.inf)
        return max(1.0, float(np.exp(np.max(excess))))


def type_constant(func: NFunction, p: float, q: float) -> float:
    """格点上使 φ(st) ≤ K·max{s^p,s^q}·φ(t) 成立的最小 K（不小于1）"""
    return _IndexLattice(func).type_constant(p, q)


def growth_at_infinity(func: NFunction) -> float:
    """min_{t∈[1e4,1e6]} tφ′(t)/φ(t)，即 liminf φ(s)/s^r > 0 中可取的 r"""
    t = np.logspace(4.0, 6.0, 41)
    return float(np.min(t * func.phi_prime(t) / func.phi(t)))


def estimate_indices(model: NFunction) -> Indices:
    """估计 N 函数的 T(p,q,K₁) 指标

    解析已知时直接取 (p,q)，否则取格点上 log φ(st)−log φ(t) 对 log s 的
    下/上确界；K1 为格点上的最小可行常数。

    Raises:
        IndexEstimationError: 格点上不存在 ≤ max_k1 的 K1 或下指标不大于1
    """
    cfg = get_config()
    lattice = _IndexLattice(model)
    analytic = model.analytic_indices()
    if analytic is not None:
        p, q = analytic
        method = "analytic"
    else:
        p, q = lattice.exponent_bounds()
        method = "lattice"
    k1 = lattice.type_constant(p, q)
    if not (math.isfinite(p) and math.isfinite(q) and math.isfinite(k1)):
        raise IndexEstimationError(f"non-finite indices p={p}, q={q}, K1={k1}")
    if k1 > cfg.max_k1:
        raise IndexEstimationError(f"no finite K1 <= {cfg.max_k1:g} on the lattice (K1={k1:g})")
    if p <= 1.0:
        raise IndexEstimationError(f"lower index {p:.6g} does not exceed 1")
    indices = Indices.from_exponents(p, max(p, q), k1, growth_at_infinity(model), method)
    logger.debug(
        f"Indices of {model.describe()}: p={indices.p_lower:.6g}, "
        f"q={indices.q_upper:.6g}, K1={indices.K1:.6g} ({method})"
    )
    return indices


# =============================================================================
# (10) 结构不等式校验
# =============================================================================


class SampleSpec(BaseModel):
    """结构校验的采样规格"""

    t_min: float = Field(default=1e-6, gt=0.0, description="采样下界")
    t_max: float = Field(default=1e6, gt=0.0, description="采样上界")
    points_per_decade: int = Field(default=25, ge=2, description="单变量格点密度")
    pair_points_per_decade: int = Field(default=4, ge=1, description="(t,s) 对格点密度")
    deltas: list[float] = Field(
        default_factory=lambda: [1.0, 0.5, 0.1, 0.01], description="Young 不等式的 δ"
    )
    shifts: list[float] = Field(
        default_factory=lambda: [0.0, 1e-2, 1.0, 1e2], description="平移族 Δ2 的平移量"
    )
    shiftdual_magnitudes: list[float] = Field(
        default_factory=lambda: [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3],
        description="平移对偶比值使用的 |P|",
    )
    rtol: float = Field(default=1e-10, gt=0.0, description="不等式相对容差")


class StructuralReport(BaseModel):
    """结构不等式校验报告"""

    model: dict[str, Any] = Field(description="模型描述")
    indices: Indices = Field(description="指标")
    k_young: float = Field(description="Young 不等式使用的常数 K")
    checks: list[CheckResult] = Field(default_factory=list, description="各项校验")
    passed: bool = Field(description="全部通过")

    def check(self, name: str) -> CheckResult:
        """按名称取校验结果"""
        for item in self.checks:
            if item.name == name:
                return item
        raise KeyError(name)


def _inequality(name: str, lhs: NDArray, rhs: NDArray, rtol: float) -> CheckResult:
    """lhs ≤ rhs 的逐点校验，比值 lhs/rhs 的极值入报告"""
    lhs = np.asarray(lhs, dtype=float).ravel()
    rhs = np.asarray(rhs, dtype=float).ravel()
    usable = np.isfinite(lhs) & np.isfinite(rhs) & (rhs > 0.0)
    bad = int(np.count_nonzero(~usable & (lhs > 0.0)))
    violations = int(np.count_nonzero(lhs[usable] > rhs[usable] * (1.0 + rtol))) + bad
    ratio = lhs[usable] / rhs[usable]
    return CheckResult(
        name=name,
        passed=violations == 0,
        min_ratio=float(ratio.min()) if ratio.size else math.nan,
        max_ratio=float(ratio.max()) if ratio.size else math.nan,
        samples=int(lhs.size),
        violations=violations,
    )


def _bounded(name: str, ratio: NDArray, note: str = "") -> CheckResult:
    """比值有界且为正即通过"""
    ratio = np.asarray(ratio, dtype=float).ravel()
    finite = np.isfinite(ratio) & (ratio > 0.0)
    return CheckResult(
        name=name,
        passed=bool(np.all(finite)) and ratio.size > 0,
        min_ratio=float(ratio[finite].min()) if np.any(finite) else math.nan,
        max_ratio=float(ratio[finite].max()) if np.any(finite) else math.nan,
        samples=int(ratio.size),
        violations=int(np.count_nonzero(~finite)),
        note=note,
    )


def _almost_monotone_constants(values: NDArray) -> tuple[float, float]:
    """sup_{s≤t} f(s)/f(t) 与 sup_{s≤t} f(t)/f(s)"""
    increasing = float(np.max(np.maximum.accumulate(values) / values))
    decreasing = float(np.max(values / np.minimum.accumulate(values)))
    return increasing, decreasing


def verify_structural_inequalities(
    model: NFunction,
    sample_spec: Optional[SampleSpec] = None,
    stress_magnitudes: Optional[Sequence[tuple[float, float]]] = None,
) -> StructuralReport:
    """逐点校验 N 函数的结构不等式

    违例只记入报告，不抛出异常。

    Args:
        model: 待校验的 N 函数
        sample_spec: 采样规格，默认 SampleSpec()
        stress_magnitudes: 可选的 (|P|, |A(P)|) 对，缺省时取 (a, φ′(a))

    Returns:
        StructuralReport: 各项校验结果
    """
    spec = sample_spec or SampleSpec()
    rtol = spec.rtol
    indices = estimate_indices(model)
    conj = model.conjugate()
    k_conj = type_constant(conj, indices.q_bar_conj, indices.p_bar_conj)
    k_young = max(indices.K1, k_conj)

    t = NumericHelper.log_lattice(spec.t_min, spec.t_max, spec.points_per_decade)
    f = np.asarray(model.phi(t))
    fp = np.asarray(model.phi_prime(t))
    fs = np.asarray(conj.phi(t))
    checks: list[CheckResult] = []

    # I. 导数链与共轭链
    half = 0.5 * t
    checks.append(
        _inequality("chain_lower", half * np.asarray(model.phi_prime(half)), f, rtol)
    )
    checks.append(_inequality("chain_upper", f, t * fp, rtol))
    ratio_point = fs / t
    checks.append(
        _inequality("conjugate_chain_lower", np.asarray(model.phi(ratio_point)), fs, rtol)
    )
    checks.append(
        _inequality(
            "conjugate_chain_upper", fs, np.asarray(model.phi(2.0 * ratio_point)), rtol
        )
    )
    checks.append(
        _bounded(
            "conjugate_derivative_equivalence", np.asarray(conj.phi(fp)) / f,
            note="phi*(phi'(t)) / phi(t)",
        )
    )

    # II. 凸性、Δ2 与 φ″ 的结构
    mid = np.asarray(model.phi(0.5 * (t[:-2] + t[2:])))
    checks.append(
        _inequality(
            "convexity",
            mid,
            0.5 * (f[:-2] + f[2:]) + 1e-12 * f[2:],
            0.0,
        )
    )
    checks.append(_bounded("delta2", np.asarray(model.phi(2.0 * t)) / f, note="phi(2t)/phi(t)"))
    second = np.asarray(model.phi_second(t))
    checks.append(
        _bounded("phi_second_ratio", fp / (t * second), note="phi'(t) / (t phi''(t))")
    )
    increasing, decreasing = _almost_monotone_constants(second)
    checks.append(
        CheckResult(
            name="phi_second_almost_monotone",
            passed=True,
            min_ratio=increasing,
            max_ratio=decreasing,
            samples=int(t.size),
            note="min_ratio: sup_{s<=t} phi''(s)/phi''(t); max_ratio: sup_{s<=t} phi''(t)/phi''(s)",
        )
    )

    # III. Young 不等式
    pair = NumericHelper.log_lattice(spec.t_min, spec.t_max, spec.pair_points_per_decade)
    tt, ss = np.meshgrid(pair, pair, indexing="ij")
    f_pair = np.asarray(model.phi(tt))
    fs_pair = np.asarray(conj.phi(ss))
    checks.append(_inequality("young_classical", tt * ss, f_pair + fs_pair, rtol))
    for delta in spec.deltas:
        first = k_young**indices.q_bar * delta ** (1.0 - indices.q_bar) * f_pair
        checks.append(
            _inequality(f"young_first_delta_{delta:g}", tt * ss, first + delta * fs_pair, rtol)
        )
        second_bound = (
            k_young ** (indices.p_bar_conj - 1.0)
            * delta ** (1.0 - indices.p_bar_conj)
            * fs_pair
        )
        checks.append(
            _inequality(
                f"young_second_delta_{delta:g}", tt * ss, delta * f_pair + second_bound, rtol
            )
        )

    # IV. 平移对偶：(φ_{|P|})* ∼ (φ*)_{|A(P)|}
    if stress_magnitudes is None:
        magnitudes = np.asarray(spec.shiftdual_magnitudes, dtype=float)
        pairs = np.stack([magnitudes, np.asarray(model.phi_prime(magnitudes))], axis=1)
    else:
        pairs = np.asarray(stress_magnitudes, dtype=float).reshape(-1, 2)
    aa = np.repeat(pairs[:, 0:1], pair.size, axis=1)
    bb = np.repeat(pairs[:, 1:2], pair.size, axis=1)
    sv = np.broadcast_to(pair, aa.shape)
    route_one = conjugate_of_shifted(model, aa, sv)
    route_two = shifted_conjugate(model, bb, sv)
    checks.append(
        _bounded(
            "shiftdual",
            route_one / route_two,
            note="(phi_|P|)*(t) / (phi*)_|A(P)|(t)",
        )
    )

    # V. 平移族的 Δ2 常数
    coarse = pair
    delta2_values = []
    for a in spec.shifts:
        av = np.full_like(coarse, a)
        delta2_values.append(shifted_phi(model, av, 2.0 * coarse) / shifted_phi(model, av, coarse))
        delta2_values.append(
            conjugate_of_shifted(model, av, 2.0 * coarse) / conjugate_of_shifted(model, av, coarse)
        )
    checks.append(
        _bounded(
            "shifted_family_delta2",
            np.concatenate(delta2_values),
            note="sup over a of Delta2({phi_a, (phi_a)*})",
        )
    )

    passed = all(item.passed for item in checks)
    if not passed:
        failed = [item.name for item in checks if not item.passed]
        logger.warning(f"Structural checks failed for {model.describe()}: {failed}")
    return StructuralReport(
        model=model.describe(),
        indices=indices,
        k_young=k_young,
        checks=checks,
        passed=passed,
    )


__all__ = [
    "ConjugateNFunction",
    "Indices",
    "NFunction",
    "NFunctionKind",
    "NFunctionModel",
    "SampleSpec",
    "ShiftedNFunction",
    "StructuralReport",
    "conjugate",
    "conjugate_of_shifted",
    "estimate_indices",
    "growth_at_infinity",
    "inverse_phi_prime",
    "phi",
    "phi_prime",
    "phi_second",
    "shift",
    "shifted_conjugate",
    "shifted_phi",
    "shifted_phi_prime",
    "type_constant",
    "verify_structural_inequalities",
]
