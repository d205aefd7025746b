"""
辅助工具与配置单元测试

测试对数格点、对数-对数回归、配置哈希与进程级配置。
"""

# ==============================================================================
# (1) 导入依赖
# ==============================================================================
import math

import numpy as np
import pytest

from src.utils.config import AppConfig, get_config, reload_config
from src.utils.helpers import HashHelper, NumericHelper
from src.utils.path_config import load_lab_settings


# ==============================================================================
# (2) NumericHelper 测试
# ==============================================================================

class TestNumericHelper:
    """数值辅助类测试"""

    def test_log_lattice_endpoints(self) -> None:
        """测试对数格点包含两端点且递增"""
        lattice = NumericHelper.log_lattice(1e-6, 1e6, 25)
        assert lattice[0] == pytest.approx(1e-6)
        assert lattice[-1] == pytest.approx(1e6)
        assert len(lattice) == 301
        assert np.all(np.diff(lattice) > 0.0)

    def test_dyadic_levels(self) -> None:
        """测试二进层级"""
        assert NumericHelper.dyadic_levels(4) == [1.0, 0.5, 0.25, 0.125]

    @pytest.mark.parametrize("slope", [0.5, 1.0, 2.0, 3.7])
    def test_fit_loglog_recovers_power(self, slope: float) -> None:
        """测试对数-对数回归恢复幂次"""
        x = np.array([1.0, 0.5, 0.25, 0.125])
        fitted, intercept, r_squared = NumericHelper.fit_loglog(x, 3.0 * x**slope)
        assert fitted == pytest.approx(slope, abs=1e-10)
        assert intercept == pytest.approx(math.log(3.0), abs=1e-10)
        assert r_squared == pytest.approx(1.0)

    def test_safe_ratio(self) -> None:
        """测试安全除法"""
        assert NumericHelper.safe_ratio(1.0, 2.0) == 0.5
        assert math.isnan(NumericHelper.safe_ratio(0.0, 0.0))
        assert NumericHelper.safe_ratio(1.0, 0.0) == math.inf


# ==============================================================================
# (3) HashHelper 测试
# ==============================================================================

class TestHashHelper:
    """哈希辅助类测试"""

    def test_canonical_json_sorts_keys(self) -> None:
        """测试键顺序不影响规范JSON"""
        assert HashHelper.canonical_json({"b": 1, "a": 2}) == '{"a":2,"b":1}'

    def test_config_hash_stable(self) -> None:
        """测试相同内容哈希一致，不同内容哈希不同"""
        first = HashHelper.config_hash({"seed": 1, "p": [2.0]})
        again = HashHelper.config_hash({"p": [2.0], "seed": 1})
        other = HashHelper.config_hash({"seed": 2, "p": [2.0]})
        assert first == again
        assert first != other
        assert len(first) == 64


# ==============================================================================
# (4) 配置测试
# ==============================================================================

class TestAppConfig:
    """进程级配置测试"""

    def test_defaults_from_pyproject(self) -> None:
        """测试格点默认值来自 pyproject 设置节"""
        settings = load_lab_settings()
        config = get_config()
        assert config.lattice_max == pytest.approx(float(settings.get("lattice_max", 1e6)))
        assert config.default_threads >= 1

    def test_environment_override(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """测试环境变量覆盖配置"""
        monkeypatch.setenv("STOKES_LAB_DEFAULT_THREADS", "3")
        try:
            config = reload_config()
            assert config.default_threads == 3
        finally:
            monkeypatch.delenv("STOKES_LAB_DEFAULT_THREADS")
            reload_config()

    def test_invalid_threads_rejected(self) -> None:
        """测试非法线程数被拒绝"""
        with pytest.raises(ValueError):
            AppConfig(default_threads=0)
