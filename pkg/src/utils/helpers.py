"""
辅助工具模块

提供通用的辅助函数，包括对数格点生成、对数-对数回归、配置哈希等。
"""

# ==============================================================================
# (1) 导入依赖
# ==============================================================================
from __future__ import annotations

import hashlib
import json
import math
from typing import Any

import numpy as np
from numpy.typing import NDArray


# ==============================================================================
# (2) 数值工具
# ==============================================================================


class NumericHelper:
    """数值辅助类

    提供格点生成与简单回归等常用操作。
    """

    # I. 格点生成
    @staticmethod
    def log_lattice(lower: float, upper: float, points_per_decade: int) -> NDArray:
        """生成对数均匀格点

        Args:
            lower: 下界（>0）
            upper: 上界（>lower）
            points_per_decade: 每个数量级的点数

        Returns:
            NDArray: 包含两端点的递增格点

        Examples:
            >>> NumericHelper.log_lattice(1.0, 100.0, 2)
            array([  1.        ,   3.16227766,  10.        ,  31.6227766 , 100.        ])
        """
        decades = math.log10(upper) - math.log10(lower)
        count = max(2, int(round(decades * points_per_decade)) + 1)
        return np.logspace(math.log10(lower), math.log10(upper), count)

    @staticmethod
    def dyadic_levels(count: int) -> list[float]:
        """返回 1, 1/2, ..., 2^{-(count-1)}"""
        return [2.0 ** (-k) for k in range(count)]

    # II. 回归
    @staticmethod
    def fit_loglog(x: Any, y: Any) -> tuple[float, float, float]:
        """在对数-对数坐标下做最小二乘直线拟合

        Args:
            x: 自变量（>0）
            y: 因变量（>0）

        Returns:
            tuple[float, float, float]: (斜率, 截距, r²)

        Examples:
            >>> NumericHelper.fit_loglog([1, 2, 4], [1, 4, 16])[0]
            2.0
        """
        lx = np.log(np.asarray(x, dtype=float))
        ly = np.log(np.asarray(y, dtype=float))
        slope, intercept = np.polyfit(lx, ly, 1)
        residual = ly - (slope * lx + intercept)
        total = float(np.sum((ly - ly.mean()) ** 2))
        r_squared = 1.0 if total == 0.0 else 1.0 - float(np.sum(residual**2)) / total
        return float(slope), float(intercept), r_squared

    @staticmethod
    def safe_ratio(numerator: float, denominator: float) -> float:
        """计算比值，0/0 返回 nan，x/0 返回 inf"""
        if denominator == 0.0:
            return math.nan if numerator == 0.0 else math.inf
        return numerator / denominator


# ==============================================================================
# (3) 哈希工具
# ==============================================================================


class HashHelper:
    """哈希辅助类"""

    @staticmethod
    def canonical_json(payload: dict[str, Any]) -> str:
        """按键排序的紧凑JSON表示"""
        return json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)

    @classmethod
    def config_hash(cls, payload: dict[str, Any]) -> str:
        """计算配置的sha256摘要

        Args:
            payload: 可JSON序列化的配置字典

        Returns:
            str: 十六进制摘要
        """
        return hashlib.sha256(cls.canonical_json(payload).encode("utf-8")).hexdigest()
