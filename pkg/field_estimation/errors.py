# 场估计异常定义
# 每类异常携带命令行退出码：1 配置/用法错误，2 I/O 错误，3 数值失败

from typing import Optional

import numpy as np


class FieldEstimationError(Exception):
    """场估计异常基类"""

    exit_code: int = 3


class ConfigError(FieldEstimationError):
    """配置或用法错误"""

    exit_code = 1


class MeasurementOrderError(ConfigError):
    """测量序号与估计器步数不一致"""


class OutputError(FieldEstimationError):
    """输出文件写入失败"""

    exit_code = 2


class NumericalError(FieldEstimationError):
    """数值失败基类"""

    exit_code = 3


class DegenerateHessianError(NumericalError):
    """正则化后Hessian仍然奇异"""

    def __init__(self, step: int, min_eig: float):
        self.step = step
        self.min_eig = min_eig
        super().__init__(f"第 {step} 步Hessian退化: 正则化后最小特征值 {min_eig:.3e}")


class BatchNonConvergenceError(NumericalError):
    """批量最优解在迭代上限内未收敛

    保留最终点和梯度范数，调用方可以决定接受或拒绝。
    """

    def __init__(self, beta: np.ndarray, grad_norm: float, iterations: int):
        self.beta = beta
        self.grad_norm = grad_norm
        self.iterations = iterations
        super().__init__(
            f"批量牛顿法 {iterations} 次迭代未收敛，最终梯度无穷范数 {grad_norm:.3e}"
        )


class DegenerateTargetError(NumericalError):
    """目标点与当前位置重合且没有历史方向"""


class InternalCorruptionError(NumericalError):
    """内部状态损坏（例如逆Hessian失去正定性）"""


class AsymmetricMatrixError(NumericalError):
    """矩阵不对称，超出容差"""

    def __init__(self, asymmetry: float, tolerance: float, detail: Optional[str] = None):
        self.asymmetry = asymmetry
        self.tolerance = tolerance
        message = f"矩阵不对称: {asymmetry:.3e} > {tolerance:.3e}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class EigenSolverError(NumericalError):
    """特征值分解失败"""

    def __init__(self, shape, detail: str):
        self.shape = tuple(shape)
        super().__init__(f"{self.shape} 矩阵的特征值分解失败: {detail}")
