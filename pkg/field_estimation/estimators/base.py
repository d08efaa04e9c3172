# 在线估计器基类
# 所有估计器都应继承自此类，并通过 register_estimator 注册，供实验框架按名称创建

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, List, Optional, Type

import numpy as np
from pydantic import BaseModel

from ..field import FieldModel, Measurement
from ..models import CostParams, ScenarioConfig


@dataclass(frozen=True)
class StepDiagnostics:
    """单步诊断量，写入估计轨迹CSV"""
    grad_norm: float = float('nan')
    hess_min_eig: float = float('nan')
    damped: bool = False


class OnlineEstimator(ABC):
    """在线估计器接口

    内部持有不可变状态，每次 step 用新状态替换旧状态。
    """

    ESTIMATOR_NAME: str = ""

    def __init__(self, model: FieldModel, beta_0: np.ndarray, params: CostParams, config: BaseModel):
        self.model = model
        self.params = params
        self.config = config
        self.logger = logging.getLogger(self.__class__.__name__)

    @classmethod
    @abstractmethod
    def config_from(cls, scenario: ScenarioConfig) -> BaseModel:
        """从场景配置中取出本估计器的配置段"""

    @abstractmethod
    def step(self, measurement: Measurement) -> None:
        """摄入一个测量并更新估计"""

    @property
    @abstractmethod
    def beta_hat(self) -> np.ndarray:
        """当前估计"""

    @property
    @abstractmethod
    def k(self) -> int:
        """已摄入的最后一个测量序号，未摄入时为 -1"""

    @abstractmethod
    def sensing_hessian(self) -> np.ndarray:
        """主动感知使用的累计Hessian"""

    @abstractmethod
    def last_diagnostics(self) -> StepDiagnostics:
        """最近一步的诊断量"""

    @property
    def estimate(self) -> FieldModel:
        return self.model.with_coefficients(self.beta_hat)


class EstimatorRegistry:
    """估计器注册表"""

    _estimators: Dict[str, Type[OnlineEstimator]] = {}

    @classmethod
    def register(cls, estimator_class: Type[OnlineEstimator]):
        """注册估计器"""
        cls._estimators[estimator_class.ESTIMATOR_NAME] = estimator_class

    @classmethod
    def get(cls, name: str) -> Optional[Type[OnlineEstimator]]:
        """获取估计器类"""
        return cls._estimators.get(name)

    @classmethod
    def names(cls) -> List[str]:
        """获取所有注册的估计器名称"""
        return sorted(cls._estimators.keys())

    @classmethod
    def create(cls, name: str, model: FieldModel, beta_0: np.ndarray,
               scenario: ScenarioConfig) -> OnlineEstimator:
        """按名称创建估计器实例"""
        estimator_class = cls.get(name)
        if estimator_class is None:
            supported = ', '.join(cls.names())
            raise ValueError(f"不支持的估计器: {name}，支持的估计器: {supported}")
        return estimator_class(model, beta_0, scenario.cost, estimator_class.config_from(scenario))


def register_estimator(name: str):
    """估计器注册装饰器

    Args:
        name: 估计器名称

    Returns:
        装饰器函数
    """
    def decorator(cls: Type[OnlineEstimator]) -> Type[OnlineEstimator]:
        cls.ESTIMATOR_NAME = name
        EstimatorRegistry.register(cls)
        return cls
    return decorator
