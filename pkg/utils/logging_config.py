# 日志配置模块

import logging
import os
from typing import Optional

from user_config.config import get_config


class LoggingConfig:
    """日志配置类"""

    def __init__(self):
        self.dev_mode = bool(get_config("logging.dev_mode.enabled", False))
        self.log_dir = get_config("logging.log_dir", "logs")
        self.log_level = str(get_config("logging.level", "INFO")).upper()
        self.log_format = get_config("logging.format", "%(asctime)s - %(name)s - %(levelname)s - %(message)s")

        # 获取项目根目录
        self.project_root = os.path.dirname(os.path.dirname(__file__))
        self.log_dir_path = os.path.join(self.project_root, self.log_dir)

    def get_log_file_path(self, log_name: str = "field_estimation") -> Optional[str]:
        """获取日志文件路径"""
        if not self.dev_mode:
            return None
        os.makedirs(self.log_dir_path, exist_ok=True)
        return os.path.join(self.log_dir_path, f"{log_name}.log")

    def set_level(self, level: str):
        """运行时修改日志级别（命令行 --log-level）"""
        level = level.upper()
        if not isinstance(getattr(logging, level, None), int):
            raise ValueError(f"未知的日志级别: {level}")
        self.log_level = level

    def configure_logger(self, logger_name: Optional[str] = None, log_file: str = "field_estimation") -> logging.Logger:
        """配置日志记录器"""
        logger = logging.getLogger(logger_name)
        level = getattr(logging, self.log_level, logging.INFO)
        logger.setLevel(level)

        # 清除现有的处理器
        for handler in logger.handlers[:]:
            logger.removeHandler(handler)

        # 创建控制台处理器
        console_handler = logging.StreamHandler()
        console_handler.setLevel(level)
        console_handler.setFormatter(logging.Formatter(self.log_format))
        logger.addHandler(console_handler)

        # 如果是开发模式，添加文件处理器
        log_file_path = self.get_log_file_path(log_file)
        if log_file_path:
            file_handler = logging.FileHandler(log_file_path, encoding="utf-8")
            file_handler.setLevel(level)
            file_handler.setFormatter(logging.Formatter(self.log_format))
            logger.addHandler(file_handler)

        return logger


# 全局日志配置实例
logging_config = LoggingConfig()


def configure_root_logger(level: Optional[str] = None) -> logging.Logger:
    """配置根日志记录器"""
    if level:
        logging_config.set_level(level)
    return logging_config.configure_logger()
