"""
工具模块初始化

提供配置管理、日志记录和辅助函数。
"""

from .config import AppConfig, Config, get_config, reload_config
from .helpers import HashHelper, NumericHelper
from .logger import get_logger, logger
from .path_config import get_resource_path, load_lab_settings, load_toml

__all__ = [
    # Config
    "AppConfig",
    "Config",
    "get_config",
    "reload_config",
    # Logger
    "get_logger",
    "logger",
    # Helpers
    "HashHelper",
    "NumericHelper",
    # Paths
    "get_resource_path",
    "load_lab_settings",
    "load_toml",
]
