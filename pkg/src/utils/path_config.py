"""
路径配置模块

提供项目路径、TOML配置读取等相关功能。
"""

from __future__ import annotations

import pathlib
import tomllib
from typing import Any

ROOT_DIR = pathlib.Path(__file__).resolve().parent.parent.parent
CONFIG_FILE = ROOT_DIR / "pyproject.toml"
SETTINGS_SECTION = "orlicz-stokes-lab"


def load_toml(path: str | pathlib.Path) -> dict[str, Any]:
    """读取TOML文件

    Args:
        path: TOML文件路径

    Returns:
        dict[str, Any]: 解析后的字典
    """
    with pathlib.Path(path).open("rb") as f:
        return tomllib.load(f)


def load_lab_settings(config_path: str | pathlib.Path | None = None) -> dict[str, Any]:
    """加载pyproject.toml中的实验室设置节

    Args:
        config_path: 配置文件路径，默认为pyproject.toml

    Returns:
        dict[str, Any]: `[orlicz-stokes-lab.settings]`节的内容，缺失时为空字典
    """
    path = pathlib.Path(config_path) if config_path is not None else CONFIG_FILE
    if not path.exists():
        return {}
    return load_toml(path).get(SETTINGS_SECTION, {}).get("settings", {})


def get_resource_path(relative_path: str = "") -> pathlib.Path:
    """获取资源文件路径

    Args:
        relative_path: 相对于resource目录的路径

    Returns:
        pathlib.Path: 资源文件的完整路径
    """
    resource_dir = ROOT_DIR / "resource"
    if relative_path:
        return resource_dir / relative_path
    return resource_dir
