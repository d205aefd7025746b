"""
报告存储与扫描管理单元测试

测试CSV写出、manifest、摘要、逐字节复现，以及并发扫描的顺序与错误捕获。
"""

# =============================================================================
# (1) 导入依赖
# =============================================================================
import threading
from pathlib import Path

import pandas as pd
import pytest

from src.core.exceptions import SolverConvergenceError
from src.core.state import ExperimentConfig, ExperimentReport, ExperimentType
from src.managers.sweep import SweepManager, get_sweep_manager
from src.storage.report_store import ReportStore, package_version
from src.utils.helpers import HashHelper


# =============================================================================
# (2) 测试配置
# =============================================================================

@pytest.fixture
def config(tmp_path: Path) -> ExperimentConfig:
    """主估计实验配置"""
    return ExperimentConfig(experiment=ExperimentType.MAIN_ESTIMATE, seed=7, output_dir=tmp_path)


@pytest.fixture
def report() -> ExperimentReport:
    return ExperimentReport(
        experiment=ExperimentType.MAIN_ESTIMATE,
        rows=[{"n": 32, "ratio": 0.1}, {"n": 64, "ratio": 1.0 / 3.0, "verdict": "finite"}],
        details={"levels": [{"level": 0, "radius": 0.5}]},
        passed=False,
        summary=["main-estimate: 1 of 2 rows failed"],
    )


# =============================================================================
# (3) ReportStore 测试
# =============================================================================

class TestReportStore:
    """报告存储测试"""

    def test_save_writes_all_files(self, tmp_path: Path, config: ExperimentConfig, report: ExperimentReport) -> None:
        """测试写出主表、明细表、manifest 与摘要"""
        paths = ReportStore(tmp_path).save(config, report)
        names = sorted(path.name for path in paths)
        assert names == ["main_estimate.csv", "main_estimate_levels.csv", "manifest.csv", "summary.txt"]
        assert all(path.exists() for path in paths)

    def test_columns_in_first_seen_order(self, tmp_path: Path, config: ExperimentConfig, report: ExperimentReport) -> None:
        """测试列按首次出现排列，缺失值为空"""
        ReportStore(tmp_path).save(config, report)
        frame = pd.read_csv(tmp_path / "main_estimate.csv")
        assert list(frame.columns) == ["n", "ratio", "verdict"]
        assert frame["ratio"].iloc[1] == pytest.approx(1.0 / 3.0, rel=1e-15)
        assert frame["verdict"].isna().iloc[0]

    def test_manifest_contents(self, tmp_path: Path, config: ExperimentConfig, report: ExperimentReport) -> None:
        """测试 manifest 记录哈希、版本与种子"""
        ReportStore(tmp_path).save(config, report)
        manifest = pd.read_csv(tmp_path / "manifest.csv", dtype=str)
        assert manifest["experiment"].iloc[0] == "main-estimate"
        assert manifest["config_hash"].iloc[0] == HashHelper.config_hash(config.hash_payload())
        assert manifest["package_version"].iloc[0] == package_version()
        assert manifest["seed"].iloc[0] == "7"

    def test_summary_text(self, tmp_path: Path, config: ExperimentConfig, report: ExperimentReport) -> None:
        """测试摘要包含通过状态与行数"""
        ReportStore(tmp_path).save(config, report)
        text = (tmp_path / "summary.txt").read_text(encoding="utf-8")
        assert "passed: False" in text
        assert "rows: 2" in text
        assert "main-estimate: 1 of 2 rows failed" in text

    def test_repeat_is_byte_identical(self, tmp_path: Path, config: ExperimentConfig, report: ExperimentReport) -> None:
        """测试重复写出逐字节相同"""
        first = ReportStore(tmp_path / "a").save(config, report)
        second = ReportStore(tmp_path / "b").save(config, report)
        for a, b in zip(first, second):
            assert a.read_bytes() == b.read_bytes()

    def test_empty_rows(self, tmp_path: Path) -> None:
        """测试空表也能写出"""
        path = ReportStore(tmp_path).write_table("empty", [])
        assert path.exists()

    def test_hash_ignores_output_and_threads(self, tmp_path: Path) -> None:
        """测试输出目录与线程数不影响配置哈希"""
        a = ExperimentConfig(experiment=ExperimentType.DECAY, output_dir=tmp_path / "x", threads=1)
        b = ExperimentConfig(experiment=ExperimentType.DECAY, output_dir=tmp_path / "y", threads=4)
        assert HashHelper.config_hash(a.hash_payload()) == HashHelper.config_hash(b.hash_payload())


# =============================================================================
# (4) SweepManager 测试
# =============================================================================

def _square(x: int) -> int:
    return x * x


def _fail_on_three(x: int) -> int:
    if x == 3:
        raise SolverConvergenceError("no convergence at point 3")
    return x


class TestSweepManager:
    """扫描管理器测试"""

    def test_grid_expansion(self) -> None:
        """测试参数网格按关键字顺序展开"""
        points = SweepManager.grid(p=[2.0, 3.0], kappa=[0.0, 1.0])
        assert points[0] == {"p": 2.0, "kappa": 0.0}
        assert points[1] == {"p": 2.0, "kappa": 1.0}
        assert len(points) == 4

    async def test_order_preserved(self) -> None:
        """测试结果按提交顺序返回"""
        outcomes = await SweepManager(threads=4).run(_square, range(10))
        assert [o.index for o in outcomes] == list(range(10))
        assert [o.value for o in outcomes] == [x * x for x in range(10)]

    async def test_errors_captured(self) -> None:
        """测试求解错误记为失败点"""
        outcomes = await SweepManager(threads=2).run(_fail_on_three, range(5))
        failed = [o for o in outcomes if not o.ok]
        assert len(failed) == 1
        assert failed[0].index == 3
        assert "SolverConvergenceError" in (failed[0].error or "")

    async def test_map_raises(self) -> None:
        """测试 map 不捕获错误"""
        with pytest.raises(SolverConvergenceError):
            await SweepManager().map(_fail_on_three, range(5))

    async def test_concurrency_bounded(self) -> None:
        """测试同时运行的采样点不超过线程数"""
        lock = threading.Lock()
        state = {"active": 0, "peak": 0}

        def track(x: int) -> int:
            with lock:
                state["active"] += 1
                state["peak"] = max(state["peak"], state["active"])
            with lock:
                state["active"] -= 1
            return x

        await SweepManager(threads=2).run(track, range(8))
        assert state["peak"] <= 2

    def test_invalid_threads(self) -> None:
        """测试线程数必须为正"""
        with pytest.raises(ValueError):
            SweepManager(threads=0)

    def test_singleton_recreated_on_new_threads(self) -> None:
        """测试线程数变化时重新创建单例"""
        assert get_sweep_manager(3).threads == 3
        assert get_sweep_manager().threads == 3
        assert get_sweep_manager(1).threads == 1
