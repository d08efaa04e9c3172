# 错误处理工具

import logging
import traceback
from typing import Dict, Any, Optional

import yaml
from pydantic import ValidationError

from field_estimation.errors import FieldEstimationError


class ErrorHandler:
    """错误处理器"""

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    def handle_error(self, error: BaseException, context: Optional[Dict[str, Any]] = None,
                     level: int = logging.ERROR) -> Dict[str, Any]:
        """处理错误，返回可记录的错误信息"""
        error_info = {
            "error_type": type(error).__name__,
            "error_message": str(error),
            "traceback": "".join(traceback.format_exception(type(error), error, error.__traceback__)),
            "context": context or {},
            "exit_code": self.exit_code_for(error),
        }

        self.logger.log(level, f"错误处理: {error_info['error_type']}: {error_info['error_message']} 上下文: {error_info['context']}")

        return error_info

    @staticmethod
    def failure_reason(error: BaseException) -> str:
        """生成写入运行记录的失败原因"""
        return f"{type(error).__name__}: {error}"

    @staticmethod
    def exit_code_for(error: BaseException) -> int:
        """映射异常到命令行退出码

        0 成功，1 用法/配置错误，2 I/O 错误，3 数值失败。
        """
        if isinstance(error, FieldEstimationError):
            return error.exit_code
        if isinstance(error, (ValidationError, yaml.YAMLError)):
            return 1
        if isinstance(error, OSError):
            return 2
        return 3


# 全局错误处理器实例
error_handler = ErrorHandler()


def get_error_handler() -> ErrorHandler:
    """获取错误处理器"""
    return error_handler
