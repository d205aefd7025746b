"""
实验流程集成测试

测试路由器到报告文件的完整流程，以及命令行的配置合并与退出码。
"""

# =============================================================================
# (1) 导入依赖
# =============================================================================
import argparse
from pathlib import Path

import pandas as pd
import pytest

from src.cli import EXIT_CONFIG, EXIT_PASSED, build_parser, load_experiment_config, main
from src.core.exceptions import ConfigurationError, SolverConvergenceError
from src.core.router import MODULE_TYPES, ExperimentRouter
from src.core.state import ExperimentConfig, ExperimentType, SweepSettings
from src.managers.sweep import SweepManager
from src.service.stokes_service import StokesService


# =============================================================================
# (2) 测试配置
# =============================================================================

@pytest.fixture
def router() -> ExperimentRouter:
    return ExperimentRouter(StokesService(), SweepManager(threads=2))


def _config(experiment: ExperimentType, tmp_path: Path, **sweep: object) -> ExperimentConfig:
    return ExperimentConfig(
        experiment=experiment,
        sweep=SweepSettings(**sweep),
        output_dir=tmp_path / experiment.value,
        seed=11,
    )


def _write_toml(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


# =============================================================================
# (3) 路由器测试
# =============================================================================

class TestRouter:
    """实验路由器测试"""

    def test_every_experiment_has_a_module(self) -> None:
        """测试每个实验类型都有驱动模块"""
        assert set(MODULE_TYPES) == set(ExperimentType)

    def test_module_cached(self, router: ExperimentRouter) -> None:
        """测试驱动模块按类型缓存"""
        first = router.module_for(ExperimentType.DECAY)
        assert router.module_for(ExperimentType.DECAY) is first

    async def test_nfunc_verify_newtonian(self, router: ExperimentRouter, tmp_path: Path) -> None:
        """测试牛顿流体的 N 函数校验通过并写出文件"""
        config = _config(ExperimentType.NFUNC_VERIFY, tmp_path, p=[2.0])
        outcome = await router.route(config)
        assert outcome.success
        assert outcome.report is not None
        assert outcome.report.rows
        assert (config.output_dir / "nfunc_verify.csv").exists()
        assert (config.output_dir / "manifest.csv").exists()

    async def test_hammer_sweep_rows(self, router: ExperimentRouter, tmp_path: Path) -> None:
        """测试探针实验每个比值一行并写出明细"""
        config = _config(ExperimentType.HAMMER_SWEEP, tmp_path, p=[3.0], samples=100)
        outcome = await router.route(config)
        assert outcome.report is not None
        frame = pd.read_csv(config.output_dir / "hammer_sweep.csv")
        assert len(frame) == len(outcome.report.rows)
        assert (config.output_dir / "hammer_sweep_pairs.csv").exists()

    async def test_empty_sweep(self, router: ExperimentRouter, tmp_path: Path) -> None:
        """测试空扫描得到空报告"""
        config = _config(ExperimentType.MAIN_ESTIMATE, tmp_path, kinds=[])
        outcome = await router.route(config, save=False)
        assert outcome.success
        assert outcome.report is not None
        assert outcome.report.rows == []
        assert outcome.output_dir is None

    async def test_error_recorded(self, router: ExperimentRouter, tmp_path: Path, mocker) -> None:
        """测试实验异常被封装进结果"""
        module = router.module_for(ExperimentType.DECAY)
        mocker.patch.object(module, "run", side_effect=SolverConvergenceError("stalled"))
        outcome = await router.route(_config(ExperimentType.DECAY, tmp_path))
        assert not outcome.success
        assert outcome.error_type == "SolverConvergenceError"
        assert outcome.report is None

    @pytest.mark.slow
    async def test_main_estimate_newtonian(self, router: ExperimentRouter, tmp_path: Path) -> None:
        """测试 p=2 的主估计在小网格上通过"""
        config = _config(ExperimentType.MAIN_ESTIMATE, tmp_path, p=[2.0], meshes=[16], beta=[0.25])
        outcome = await router.route(config)
        assert outcome.report is not None
        assert outcome.success, outcome.report.summary
        for row in outcome.report.rows:
            assert row["rescale_change"] == pytest.approx(1.0, rel=1e-6)

    @pytest.mark.slow
    async def test_decay_profile_written(self, router: ExperimentRouter, tmp_path: Path) -> None:
        """测试衰减实验每层一行并记录拟合结论"""
        config = _config(ExperimentType.DECAY, tmp_path, p=[2.0], meshes=[32])
        outcome = await router.route(config)
        assert outcome.report is not None
        fits = outcome.report.details["fit"]
        assert len(fits) == 1
        assert fits[0]["levels"] >= 3
        assert fits[0]["verdict"] in {"decay", "no-decay", "degenerate"}
        assert len(outcome.report.rows) == fits[0]["levels"]
        assert (config.output_dir / "decay_fit.csv").exists()

    @pytest.mark.slow
    async def test_convergence_rows(self, router: ExperimentRouter, tmp_path: Path) -> None:
        """测试构造解实验每个网格一行"""
        config = _config(ExperimentType.CONVERGENCE, tmp_path, p=[2.0], meshes=[16, 32])
        outcome = await router.route(config, save=False)
        assert outcome.report is not None
        assert sorted(row["n"] for row in outcome.report.rows) == [16, 32]
        assert len(outcome.report.details["checks"]) == 1

    @pytest.mark.slow
    async def test_holder_transfer_rows(self, router: ExperimentRouter, tmp_path: Path) -> None:
        """测试 Hölder 传递实验按 β 输出"""
        config = _config(
            ExperimentType.HOLDER_TRANSFER, tmp_path, p=[2.0], meshes=[16], beta=[0.25], recipes=["holder"]
        )
        outcome = await router.route(config, save=False)
        assert outcome.report is not None
        assert outcome.report.rows
        assert all(row["beta"] == 0.25 for row in outcome.report.rows)

    async def test_holder_transfer_skips_nonpositive_beta(self, router: ExperimentRouter, tmp_path: Path) -> None:
        """测试 β 全部非正时得到空报告"""
        config = _config(ExperimentType.HOLDER_TRANSFER, tmp_path, p=[2.0], meshes=[16], beta=[0.0])
        outcome = await router.route(config, save=False)
        assert outcome.report is not None
        assert outcome.report.rows == []

    async def test_navier_stokes_rejects_low_growth(self, router: ExperimentRouter, tmp_path: Path) -> None:
        """测试低增长律在对流实验中标记为 rejected"""
        config = _config(
            ExperimentType.NAVIER_STOKES, tmp_path, p=[1.4], kappa=[1.0], meshes=[16], amplitude=0.1
        )
        outcome = await router.route(config, save=False)
        assert outcome.report is not None
        assert [row["verdict"] for row in outcome.report.rows] == ["rejected"]
        assert outcome.success


# =============================================================================
# (4) 命令行测试
# =============================================================================

class TestCommandLine:
    """命令行测试"""

    def test_parser_has_all_experiments(self) -> None:
        """测试每个实验类型都是子命令"""
        parser = build_parser()
        for experiment in ExperimentType:
            args = parser.parse_args([experiment.value])
            assert args.experiment == experiment.value

    def test_cli_overrides_file(self, tmp_path: Path) -> None:
        """测试命令行参数覆盖配置文件"""
        path = _write_toml(
            tmp_path / "decay.toml",
            'experiment = "decay"\nseed = 5\nthreads = 1\n[sweep]\np = [3.0]\n',
        )
        args = build_parser().parse_args(["decay", "--config", str(path), "--seed", "9", "--out", str(tmp_path)])
        config = load_experiment_config(args)
        assert config.seed == 9
        assert config.threads == 1
        assert config.sweep.p == [3.0]
        assert config.output_dir == tmp_path

    def test_experiment_mismatch(self, tmp_path: Path) -> None:
        """测试配置文件实验类型与子命令不一致"""
        path = _write_toml(tmp_path / "decay.toml", 'experiment = "decay"\n')
        args = argparse.Namespace(experiment="hammer-sweep", config=path, out=None, seed=None, threads=None)
        with pytest.raises(ConfigurationError):
            load_experiment_config(args)

    def test_missing_config_exit_code(self, tmp_path: Path) -> None:
        """测试配置文件不存在时退出码为 2"""
        assert main(["decay", "--config", str(tmp_path / "none.toml")]) == EXIT_CONFIG

    def test_invalid_value_exit_code(self, tmp_path: Path) -> None:
        """测试非法参数值时退出码为 2"""
        path = _write_toml(tmp_path / "bad.toml", 'experiment = "decay"\n[sweep]\np = [0.5]\n')
        assert main(["decay", "--config", str(path)]) == EXIT_CONFIG

    def test_run_nfunc_verify(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """测试命令行运行 N 函数校验"""
        path = _write_toml(
            tmp_path / "nfunc.toml",
            'experiment = "nfunc-verify"\n[sweep]\nkinds = ["power_law_additive"]\np = [2.0]\n',
        )
        code = main(["nfunc-verify", "--config", str(path), "--out", str(tmp_path / "out")])
        assert code == EXIT_PASSED
        assert "nfunc-verify: passed" in capsys.readouterr().out
        assert (tmp_path / "out" / "summary.txt").exists()
