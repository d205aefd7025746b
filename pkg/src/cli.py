"""
命令行入口

    stokes-lab <experiment> [--config FILE] [--out DIR] [--seed N] [--threads N]

子命令即实验类型（nfunc-verify、hammer-sweep、convergence、decay、
main-estimate、holder-transfer、navier-stokes）。退出码：全部检查通过为 0，
存在未通过的检查为 1，配置错误为 2。
"""

# =============================================================================
# (1) 导入依赖
# =============================================================================
from __future__ import annotations

import argparse
import asyncio
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from pydantic import ValidationError

from src.core.exceptions import ConfigurationError
from src.core.router import get_experiment_router
from src.core.state import ExperimentConfig, ExperimentOutcome, ExperimentType
from src.utils.config import get_config
from src.utils.logger import get_logger
from src.utils.path_config import load_toml

# =============================================================================
# (2) 日志配置
# =============================================================================

logger = get_logger(__name__)

EXIT_PASSED = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


# =============================================================================
# (3) 参数解析
# =============================================================================


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stokes-lab",
        description="Generalized Stokes solver and Campanato/BMO estimate laboratory",
    )
    commands = parser.add_subparsers(dest="experiment", required=True, metavar="experiment")
    for experiment in ExperimentType:
        command = commands.add_parser(experiment.value, help=f"run the {experiment.value} experiment")
        command.add_argument("--config", type=Path, default=None, help="TOML experiment config")
        command.add_argument("--out", type=Path, default=None, help="output directory")
        command.add_argument("--seed", type=int, default=None, help="random seed")
        command.add_argument("--threads", type=int, default=None, help="concurrent sweep points")
    return parser


def load_experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    """合并配置文件、进程级默认值与命令行覆盖项

    优先级：命令行 > 配置文件 > 环境变量默认值。子命令决定实验类型。

    Raises:
        ConfigurationError: 配置文件不存在或实验类型与子命令不一致
        ValidationError: 参数不满足模型约束
    """
    app = get_config()
    data: dict[str, Any] = {}
    if args.config is not None:
        if not args.config.exists():
            raise ConfigurationError(f"config file not found: {args.config}")
        data = load_toml(args.config)
    declared = data.get("experiment")
    if declared is not None and declared != args.experiment:
        raise ConfigurationError(
            f"config declares experiment '{declared}' but '{args.experiment}' was requested"
        )
    data["experiment"] = args.experiment
    data.setdefault("seed", app.default_seed)
    data.setdefault("threads", app.default_threads)
    data.setdefault("output_dir", str(Path(app.output_dir) / args.experiment))
    for key, value in (("seed", args.seed), ("threads", args.threads), ("output_dir", args.out)):
        if value is not None:
            data[key] = value
    return ExperimentConfig.model_validate(data)


# =============================================================================
# (4) 执行
# =============================================================================


def exit_code(outcome: ExperimentOutcome) -> int:
    if outcome.error_type == ConfigurationError.__name__:
        return EXIT_CONFIG
    return EXIT_PASSED if outcome.success else EXIT_FAILED


def _echo(outcome: ExperimentOutcome) -> None:
    lines = [f"{outcome.experiment.value}: {'passed' if outcome.success else 'FAILED'}"]
    if outcome.report is not None:
        lines.extend(outcome.report.summary)
    if outcome.error is not None:
        lines.append(f"error ({outcome.error_type}): {outcome.error}")
    if outcome.output_dir is not None:
        lines.append(f"output: {outcome.output_dir}")
    sys.stdout.write("\n".join(lines) + "\n")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """命令行主函数，返回退出码"""
    args = build_parser().parse_args(argv)
    try:
        config = load_experiment_config(args)
    except (ConfigurationError, ValidationError) as e:
        logger.error(f"Invalid configuration: {e}")
        sys.stderr.write(f"configuration error: {e}\n")
        return EXIT_CONFIG

    outcome = asyncio.run(get_experiment_router().route(config))
    _echo(outcome)
    return exit_code(outcome)


if __name__ == "__main__":
    sys.exit(main())
