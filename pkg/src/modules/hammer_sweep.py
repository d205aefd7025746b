"""
应力律等价性探针实验

对每个 (模型, p, κ) 用固定种子的随机矩阵对计算六个主比值的区间，
并检查：

- 每个比值的区间宽度 c1/c0 ≤ 100
- 样本加倍后区间宽度的增长不超过 10%
- 两种平移对偶途径之比的区间 c1/c0 ≤ 10
- p=2 时各比值区间退化为一点（宽度 ≤ 1e-10）
"""

# =============================================================================
# (1) 导入依赖
# =============================================================================
from __future__ import annotations

import math
from typing import Any, Optional

import numpy as np
import pandas as pd

from src.core.constitutive import (
    HAMMER_RATIOS,
    StressLaw,
    check_assumption_A,
    hammer_frame,
    ratio_intervals,
    sample_matrix_pairs,
)
from src.core.nfunc import NFunctionModel
from src.core.state import ExperimentConfig, ExperimentReport, ExperimentType
from src.managers.sweep import SweepManager
from src.modules.base import ExperimentModule, model_columns, model_points
from src.service.stokes_service import StokesService
from src.utils.logger import get_logger

# =============================================================================
# (2) 日志配置
# =============================================================================

logger = get_logger(__name__)

MAX_SPREAD = 100.0
MAX_SHIFTDUAL_SPREAD = 10.0
MAX_WIDENING = 0.10
COLLAPSE_WIDTH = 1e-10


# =============================================================================
# (3) 单个律的探针
# =============================================================================


def _spread(interval: tuple[float, float]) -> float:
    low, high = interval
    if not (math.isfinite(low) and math.isfinite(high)) or low <= 0.0:
        return math.inf
    return high / low


def probe_law(model: NFunctionModel, samples: int, seed: int) -> dict[str, Any]:
    """单个律的探针结果

    加倍样本由原样本与种子 seed+1 的新样本拼接而成，保证区间只会变宽。

    Returns:
        dict: rows（每个比值一行）、pairs（逐对明细）、assumption（假设常数）
    """
    law = StressLaw(model=model)
    P, Q = sample_matrix_pairs(samples, seed)
    P_extra, Q_extra = sample_matrix_pairs(samples, seed + 1)
    frame = hammer_frame(law, P, Q)
    extra = hammer_frame(law, P_extra, Q_extra)
    doubled = pd.concat([frame, extra], ignore_index=True)

    names = (*HAMMER_RATIOS, "shiftdual")
    intervals = ratio_intervals(frame, names)
    doubled_intervals = ratio_intervals(doubled, names)
    pure_quadratic = model.pure_power() is not None and model.pure_power()[1] == 2.0

    rows = []
    for name in names:
        spread = _spread(intervals[name])
        widened = _spread(doubled_intervals[name])
        widening = widened / spread - 1.0 if math.isfinite(spread) else math.inf
        limit = MAX_SHIFTDUAL_SPREAD if name == "shiftdual" else MAX_SPREAD
        width = intervals[name][1] - intervals[name][0]
        passed = spread <= limit and widening <= MAX_WIDENING
        if pure_quadratic and name != "shiftdual":
            passed = passed and width <= COLLAPSE_WIDTH
        rows.append(
            {
                **model_columns(model),
                "ratio": name,
                "min": intervals[name][0],
                "max": intervals[name][1],
                "spread": spread,
                "width": width,
                "min_doubled": doubled_intervals[name][0],
                "max_doubled": doubled_intervals[name][1],
                "widening": widening,
                "limit": limit,
                "passed": passed,
            }
        )

    assumption = check_assumption_A(law, P, Q)
    pairs = frame.assign(**model_columns(model))
    return {
        "rows": rows,
        "pairs": pairs.to_dict("records"),
        "assumption": {**model_columns(model), **assumption.model_dump()},
    }


# =============================================================================
# (4) 实验驱动
# =============================================================================


class HammerSweepModule(ExperimentModule):
    """应力律等价性探针实验"""

    experiment = ExperimentType.HAMMER_SWEEP

    async def run(self, config: ExperimentConfig) -> ExperimentReport:
        models = model_points(config.sweep)
        if not models:
            return self.empty_report()
        samples = config.sweep.samples
        outcomes = await self.manager(config).run(
            lambda model: probe_law(model, samples, config.seed), models
        )

        rows: list[dict[str, Any]] = []
        pairs: list[dict[str, Any]] = []
        assumptions: list[dict[str, Any]] = []
        errors = []
        for model, outcome in zip(models, outcomes):
            if not outcome.ok:
                errors.append(f"{model.describe()}: {outcome.error}")
                rows.append({**model_columns(model), "ratio": "error", "passed": False})
                continue
            rows.extend(outcome.value["rows"])
            pairs.extend(outcome.value["pairs"])
            assumptions.append(outcome.value["assumption"])

        passed = all(row["passed"] for row in rows) and all(a["passed"] for a in assumptions)
        summary = [f"laws: {len(models)}", f"pairs per law: {samples}"]
        for row in rows:
            if row["ratio"] in ("error",) or not row["passed"]:
                summary.append(f"  failed {row['kind']} p={row['p']:g} kappa={row['kappa']:g}: {row['ratio']}")
        summary.extend(f"  error {item}" for item in errors)
        logger.info(f"Hammer sweep over {len(models)} law(s): passed={passed}")
        return ExperimentReport(
            experiment=self.experiment,
            rows=rows,
            details={"pairs": pairs, "assumption": assumptions},
            passed=passed,
            summary=summary,
        )


# =============================================================================
# (5) 单例实例
# =============================================================================

_default_hammer_sweep_module: Optional[HammerSweepModule] = None


def get_hammer_sweep_module(
    stokes_service: Optional[StokesService] = None,
    sweep_manager: Optional[SweepManager] = None,
) -> HammerSweepModule:
    """获取默认探针实验模块实例"""
    global _default_hammer_sweep_module
    if _default_hammer_sweep_module is None:
        _default_hammer_sweep_module = HammerSweepModule(stokes_service, sweep_manager)
    return _default_hammer_sweep_module


__all__ = [
    "HammerSweepModule",
    "get_hammer_sweep_module",
    "probe_law",
]
