# 配置管理模块

import copy
import os
from typing import Dict, Any, Optional, Iterable, Tuple

import yaml
from dotenv import load_dotenv

DEFAULT_CONFIG_PATH = os.path.join(os.path.dirname(__file__), "config.yaml")


def expand_dotted_keys(data: Any) -> Any:
    """把扁平的点号键（如 sensing.alpha）展开为嵌套字典"""
    if not isinstance(data, dict):
        return data

    expanded: Dict[str, Any] = {}
    for key, value in data.items():
        value = expand_dotted_keys(value)
        parts = str(key).split('.')
        target = expanded
        for part in parts[:-1]:
            existing = target.get(part)
            if not isinstance(existing, dict):
                existing = {}
                target[part] = existing
            target = existing
        leaf = parts[-1]
        if isinstance(value, dict) and isinstance(target.get(leaf), dict):
            target[leaf] = merge_config(target[leaf], value)
        else:
            target[leaf] = value
    return expanded


def merge_config(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """深度合并，override 中的值覆盖 base"""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def parse_assignment(assignment: str) -> Tuple[str, Any]:
    """解析 key=value 形式的覆盖项，值按YAML标量解析"""
    if '=' not in assignment:
        raise ValueError(f"覆盖项格式应为 key=value: {assignment}")
    key, raw = assignment.split('=', 1)
    key = key.strip()
    if not key:
        raise ValueError(f"覆盖项缺少键名: {assignment}")
    return key, yaml.safe_load(raw.strip()) if raw.strip() else None


class ConfigLoader:
    """配置加载器

    支持嵌套YAML和扁平点号键两种写法，读取时统一按点号路径访问。
    """

    def __init__(self, config_path: Optional[str] = None, strict: bool = False):
        """
        Args:
            config_path: 配置文件路径，默认读取环境变量 FIELD_ESTIMATION_CONFIG 或包内 config.yaml
            strict: 为 True 时加载失败直接抛出异常，否则回退到空配置
        """
        load_dotenv()
        self.config_path = config_path or os.getenv("FIELD_ESTIMATION_CONFIG") or DEFAULT_CONFIG_PATH
        self.strict = strict
        self.config: Dict[str, Any] = {}
        self._load_config()
        self._apply_environment()

    def _load_config(self):
        """加载配置文件"""
        try:
            with open(self.config_path, 'r', encoding='utf-8') as f:
                raw = yaml.safe_load(f) or {}
            if not isinstance(raw, dict):
                raise ValueError(f"配置文件顶层必须是映射: {self.config_path}")
            self.config = expand_dotted_keys(raw)
        except Exception as e:
            if self.strict:
                raise
            print(f"加载配置文件失败: {e}")
            # 如果加载失败，使用空配置
            self.config = {}

    def _apply_environment(self):
        """环境变量覆盖"""
        log_level = os.getenv("FIELD_ESTIMATION_LOG_LEVEL")
        if log_level:
            self.set("logging.level", log_level.upper())

    def get(self, key: str, default: Any = None) -> Any:
        """获取配置值"""
        keys = key.split('.')
        value = self.config

        for k in keys:
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default

        return value

    def set(self, key: str, value: Any):
        """按点号路径设置配置值"""
        keys = key.split('.')
        target = self.config
        for k in keys[:-1]:
            if not isinstance(target.get(k), dict):
                target[k] = {}
            target = target[k]
        target[keys[-1]] = value

    def merge(self, override: Dict[str, Any]):
        """合并另一份配置（允许点号键）"""
        self.config = merge_config(self.config, expand_dotted_keys(override))

    def apply_assignments(self, assignments: Iterable[str]):
        """应用命令行 --set key=value 覆盖"""
        for assignment in assignments:
            key, value = parse_assignment(assignment)
            self.set(key, value)

    def section(self, name: str) -> Dict[str, Any]:
        """获取整个配置段的副本"""
        value = self.get(name, {})
        return copy.deepcopy(value) if isinstance(value, dict) else {}


# 全局配置实例
_config_loader = ConfigLoader()


def load_config() -> Dict[str, Any]:
    """加载配置"""
    return _config_loader.config


def get_config(key: str, default: Any = None) -> Any:
    """获取配置值"""
    return _config_loader.get(key, default)


def load_config_file(path: str) -> Dict[str, Any]:
    """严格加载用户配置文件，返回展开后的嵌套字典"""
    return ConfigLoader(path, strict=True).config
