"""
配置测试
"""

import pytest
from pathlib import Path
import tempfile
import json

from na1lab.config import (
    CheckOptions,
    DeflateOptions,
    ExperimentConfig,
    ForgeOptions,
    GridConfig,
    LocalizeOptions,
    ModelConfig,
    TreeOptions,
)
from na1lab.exceptions import ConfigError


class TestSections:
    """配置段测试"""

    def test_grid_defaults(self):
        """测试网格缺省值"""
        grid = GridConfig()
        assert grid.to_dict() == {"horizon": 1.0, "steps": 1000}
        assert grid.build().steps == 1000

    def test_grid_validation(self):
        """测试网格验证"""
        with pytest.raises(ConfigError) as exc:
            GridConfig(horizon=0.0)
        assert exc.value.config_key == "grid.horizon"
        with pytest.raises(ConfigError):
            GridConfig(steps=0)
        with pytest.raises(ConfigError):
            GridConfig(steps=2.5)

    def test_model_shorthand(self):
        """测试模型简写"""
        model = ModelConfig.from_dict("bessel3")
        assert model.name == "bessel3"
        assert model.params == {}
        assert model.build(1.0).dim == 1

    def test_model_validation(self):
        """测试模型验证"""
        with pytest.raises(ConfigError):
            ModelConfig(name="heston")
        with pytest.raises(ConfigError):
            ModelConfig.from_dict({"params": {}})
        with pytest.raises(ConfigError) as exc:
            ModelConfig.from_dict({"name": "black-scholes", "kind": "gbm"})
        assert exc.value.config_key == "model.kind"

    def test_option_validation(self):
        """测试命令选项验证"""
        with pytest.raises(ConfigError):
            CheckOptions(levels=1)
        with pytest.raises(ConfigError):
            CheckOptions(factor=1)
        with pytest.raises(ConfigError):
            DeflateOptions(alpha=1.0)
        with pytest.raises(ConfigError):
            LocalizeOptions(levels=())
        with pytest.raises(ConfigError):
            ForgeOptions(thresholds=["high"])
        with pytest.raises(ConfigError):
            TreeOptions(bound=-1.0)
        assert DeflateOptions(strategies=0).strategies == 0

    def test_sequences_normalised(self):
        """测试列表项转为浮点元组"""
        assert ForgeOptions(scales=[1, 2, 3]).scales == (1.0, 2.0, 3.0)
        assert LocalizeOptions.from_dict({"levels": [2, 4]}).levels == (2.0, 4.0)


class TestExperimentConfig:
    """实验配置测试"""

    def test_defaults(self):
        """测试缺省配置"""
        config = ExperimentConfig()
        assert config.paths == 10_000
        assert config.seed == 0
        assert config.model is None
        assert config.forge.thresholds == (1.5, 3.5)
        assert config.check.levels == 3 and config.check.factor == 10

    def test_config_from_dict(self):
        """测试从字典创建配置"""
        config = ExperimentConfig.from_dict(
            {
                "model": {"name": "black-scholes", "params": {"mu": 0.1}},
                "grid": {"steps": 50},
                "paths": 200,
                "seed": 42,
                "check": {"levels": 2},
            }
        )
        assert config.model.params == {"mu": 0.1}
        assert config.grid.steps == 50
        assert config.check.levels == 2
        assert config.check.factor == 10

    def test_unknown_key_rejected(self):
        """测试未知配置项被拒绝"""
        with pytest.raises(ConfigError) as exc:
            ExperimentConfig.from_dict({"pahts": 10})
        assert exc.value.config_key == "pahts"
        with pytest.raises(ConfigError) as exc:
            ExperimentConfig.from_dict({"grid": {"steps": 10, "dt": 0.1}})
        assert exc.value.config_key == "grid.dt"

    def test_invalid_values(self):
        """测试非法取值"""
        with pytest.raises(ConfigError):
            ExperimentConfig(paths=0)
        with pytest.raises(ConfigError):
            ExperimentConfig(workers=0)
        with pytest.raises(ConfigError):
            ExperimentConfig(seed=-1)
        with pytest.raises(ConfigError):
            ExperimentConfig(log_level="LOUD")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"grid": [1, 2]})

    def test_require_model(self):
        """测试缺少模型"""
        with pytest.raises(ConfigError) as exc:
            ExperimentConfig().require_model()
        assert exc.value.config_key == "model"

    def test_overrides(self):
        """测试命令行覆盖"""
        config = ExperimentConfig.from_dict({"model": "black-scholes", "grid": {"steps": 10}})
        updated = config.with_overrides(steps=20, seed=7, paths=None, workers=4, log_level="debug")
        assert updated.grid.steps == 20
        assert updated.seed == 7
        assert updated.paths == config.paths
        assert updated.workers == 4
        assert config.grid.steps == 10
        assert config.with_overrides(seed=None) is config
        with pytest.raises(ConfigError):
            config.with_overrides(horizon=2.0)
        with pytest.raises(ConfigError):
            config.with_overrides(paths=0)

    def test_fingerprint_excludes_execution(self):
        """测试配置指纹不含线程数与日志设置"""
        base = ExperimentConfig.from_dict({"model": "bessel3"})
        busy = base.with_overrides(workers=8, log_level="WARNING")
        assert base.fingerprint_dict() == busy.fingerprint_dict()
        assert "workers" not in base.fingerprint_dict()
        assert base.fingerprint_dict() != base.with_overrides(seed=1).fingerprint_dict()

    def test_config_to_dict(self):
        """测试配置转换为字典"""
        config = ExperimentConfig.from_dict({"model": "pure-drift", "tree_file": "tree.json"})
        data = config.to_dict()
        assert data["model"] == {"name": "pure-drift", "params": {}}
        assert data["tree_file"] == "tree.json"
        assert ExperimentConfig.from_dict(data).to_dict() == data

    def test_config_from_file(self):
        """测试从文件加载配置"""
        config_data = {"model": "black-scholes", "paths": 100, "tree_file": "tree.json"}

        # 创建临时文件
        with tempfile.NamedTemporaryFile(mode="w", suffix=".json", delete=False) as f:
            json.dump(config_data, f)
            temp_file = f.name

        try:
            config = ExperimentConfig.from_file(temp_file)
            assert config.paths == 100
            assert config.require_tree_file() == Path(temp_file).parent / "tree.json"
        finally:
            Path(temp_file).unlink()

    def test_from_file_errors(self, tmp_path):
        """测试配置文件错误"""
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(tmp_path / "missing.json")
        yaml_file = tmp_path / "config.yaml"
        yaml_file.write_text("paths: 10", encoding="utf-8")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(yaml_file)
        broken = tmp_path / "broken.json"
        broken.write_text("{paths", encoding="utf-8")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(broken)

    def test_tree_file_required(self):
        """测试 tree 命令需要树描述文件"""
        with pytest.raises(ConfigError):
            ExperimentConfig().require_tree_file()
        absolute = ExperimentConfig(tree_file="/data/tree.json")
        assert absolute.require_tree_file() == Path("/data/tree.json")
