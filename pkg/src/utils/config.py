"""
配置管理模块

该模块提供统一的配置管理功能，从环境变量、.env文件和pyproject.toml中加载运行配置。
"""

# ==============================================================================
# (1) 导入依赖
# ==============================================================================
from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.utils.path_config import ROOT_DIR, load_lab_settings


# ==============================================================================
# (2) 配置常量
# ==============================================================================


class Config:
    """配置常量类

    存储运行时不改变的配置常量。
    """

    # 项目根目录
    PROJECT_ROOT: Path = ROOT_DIR

    # 资源目录
    RESOURCE_DIR: Path = PROJECT_ROOT / "resource"
    EXPERIMENTS_DIR: Path = RESOURCE_DIR / "experiments"

    # 输出目录
    OUTPUT_DIR: Path = PROJECT_ROOT / "output"

    # 日志目录
    LOG_DIR: Path = PROJECT_ROOT / "logs"

    @classmethod
    def ensure_directories(cls) -> None:
        """确保所有必要的目录存在"""
        for directory in [cls.OUTPUT_DIR, cls.LOG_DIR]:
            directory.mkdir(parents=True, exist_ok=True)


# ==============================================================================
# (3) 基础配置类
# ==============================================================================


class BaseConfig(BaseSettings):
    """基础配置类

    提供配置加载的基础功能，支持从环境变量和.env文件加载配置。
    """

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
        env_prefix="STOKES_LAB_",
    )


# ==============================================================================
# (4) 应用配置类
# ==============================================================================

_LAB_SETTINGS = load_lab_settings()


class AppConfig(BaseConfig):
    """应用配置

    包含实验室运行所需的进程级配置项，各配置项通过环境变量提供默认值。
    实验本身的参数由TOML实验配置文件给出（见 src.core.state.ExperimentConfig）。
    """

    # --------------------------------------------------------------------------
    # I. 基础配置
    # --------------------------------------------------------------------------
    environment: Literal["dev", "prod"] = Field(default="dev", description="运行环境")
    debug: bool = Field(default=False, description="调试模式")

    # --------------------------------------------------------------------------
    # II. 实验默认值
    # --------------------------------------------------------------------------
    output_dir: str = Field(
        default=str(Config.OUTPUT_DIR), description="实验输出根目录"
    )
    default_threads: int = Field(default=1, description="默认并发线程数", ge=1)
    default_seed: int = Field(
        default=int(_LAB_SETTINGS.get("probe_seed", 20240531)),
        description="默认随机种子",
    )

    # --------------------------------------------------------------------------
    # III. 数值格点配置
    # --------------------------------------------------------------------------
    lattice_min: float = Field(
        default=float(_LAB_SETTINGS.get("lattice_min", 1e-6)),
        description="结构不等式采样下界",
        gt=0.0,
    )
    lattice_max: float = Field(
        default=float(_LAB_SETTINGS.get("lattice_max", 1e6)),
        description="结构不等式采样上界",
        gt=0.0,
    )
    lattice_points_per_decade: int = Field(
        default=int(_LAB_SETTINGS.get("lattice_points_per_decade", 25)),
        description="每个数量级的采样点数",
        ge=2,
    )
    index_lattice_min: float = Field(
        default=float(_LAB_SETTINGS.get("index_lattice_min", 1e-4)),
        description="指标估计格点下界",
        gt=0.0,
    )
    index_lattice_max: float = Field(
        default=float(_LAB_SETTINGS.get("index_lattice_max", 1e4)),
        description="指标估计格点上界",
        gt=0.0,
    )
    index_lattice_cap: float = Field(
        default=float(_LAB_SETTINGS.get("index_lattice_cap", 1e6)),
        description="指标估计中 s·t 的截断上界",
        gt=1.0,
    )
    max_k1: float = Field(
        default=float(_LAB_SETTINGS.get("max_k1", 1e6)),
        description="允许的最大 K1 常数",
        gt=1.0,
    )

    # --------------------------------------------------------------------------
    # IV. 日志配置
    # --------------------------------------------------------------------------
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = Field(
        default="INFO", description="日志级别"
    )
    log_file: str = Field(default="./logs/stokes_lab.log", description="日志文件路径")
    log_rotation_size: str = Field(default="10 MB", description="日志轮转大小")
    log_backup_count: int = Field(default=5, description="日志备份数量", ge=0)

    # --------------------------------------------------------------------------
    # V. 验证器
    # --------------------------------------------------------------------------
    @field_validator("log_file", "output_dir")
    @classmethod
    def ensure_directory_exists(cls, v: str) -> str:
        """确保配置的路径所在目录存在"""
        path = Path(v)
        parent = path.parent if path.suffix else path
        parent.mkdir(parents=True, exist_ok=True)
        return v


# ==============================================================================
# (5) 配置单例
# ==============================================================================

_config: Optional[AppConfig] = None


def get_config() -> AppConfig:
    """获取配置单例

    Returns:
        AppConfig: 应用配置实例

    Examples:
        >>> config = get_config()
        >>> config.lattice_max
        1000000.0
    """
    global _config
    if _config is None:
        _config = AppConfig()
    return _config


def reload_config() -> AppConfig:
    """重新加载配置

    主要用于测试或环境变量变更后的场景。

    Returns:
        AppConfig: 新的配置实例
    """
    global _config
    _config = AppConfig()
    return _config


# 初始化目录
Config.ensure_directories()
