# 逻辑代价函数及其解析梯度/Hessian
# g_t(beta) = log(1 + exp(-eta * z_t * (beta^T K(x_t) - tau)))

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.special import expit

from .field import FieldModel, Measurement, kernel_vector
from .models import CostParams


@dataclass(frozen=True)
class StageTerm:
    """单步代价项：测量 + 缓存的核向量 K(x_t)"""
    measurement: Measurement
    kernel: np.ndarray

    def __post_init__(self):
        kernel = np.array(self.kernel, dtype=float)
        if kernel.ndim != 1:
            raise ValueError(f"kernel 必须是一维向量，实际维度 {kernel.ndim}")
        kernel.setflags(write=False)
        object.__setattr__(self, "kernel", kernel)

    @property
    def z_signed(self) -> int:
        return self.measurement.z_signed


def make_stage_term(model: FieldModel, measurement: Measurement) -> StageTerm:
    """为测量计算并缓存核向量"""
    return StageTerm(measurement, kernel_vector(model, measurement.position))


def _check_dims(beta: np.ndarray, term: StageTerm):
    if beta.shape[0] != term.kernel.shape[0]:
        raise ValueError(f"维度不一致: beta {beta.shape[0]}, kernel {term.kernel.shape[0]}")


def softplus(a: float) -> float:
    """log(1 + exp(a))，对任意大小的 a 不溢出"""
    return max(a, 0.0) + math.log1p(math.exp(-abs(a)))


def logistic(a: float) -> float:
    """1 / (1 + exp(-a))"""
    if a >= 0:
        return 1.0 / (1.0 + math.exp(-a))
    e = math.exp(a)
    return e / (1.0 + e)


def logistic_curvature(a: float) -> float:
    """exp(a) / (1 + exp(a))^2，关于 a 偶对称"""
    s = logistic(-abs(a))
    return s * (1.0 - s)


def stage_margin(params: CostParams, beta: np.ndarray, term: StageTerm) -> float:
    """beta^T K(x_t) - tau"""
    return float(np.dot(beta, term.kernel)) - params.tau


def stage_cost(params: CostParams, beta: np.ndarray, term: StageTerm) -> float:
    beta = np.asarray(beta, dtype=float)
    _check_dims(beta, term)
    return softplus(-params.eta * term.z_signed * stage_margin(params, beta, term))


def stage_gradient(params: CostParams, beta: np.ndarray, term: StageTerm) -> np.ndarray:
    """-eta * z / (1 + exp(eta * z * margin)) * K(x_t)"""
    beta = np.asarray(beta, dtype=float)
    _check_dims(beta, term)
    z = term.z_signed
    a = params.eta * z * stage_margin(params, beta, term)
    return (-params.eta * z * logistic(-a)) * term.kernel


def stage_hessian_scale(params: CostParams, beta: np.ndarray, term: StageTerm) -> float:
    """Hessian 标量因子 h = eta^2 * z^2 * exp(a) / (1 + exp(a))^2"""
    beta = np.asarray(beta, dtype=float)
    _check_dims(beta, term)
    z = term.z_signed
    z_sq = z * z
    assert z_sq == 1, f"z_signed 取值异常: {z}"
    a = params.eta * z * stage_margin(params, beta, term)
    return params.eta ** 2 * z_sq * logistic_curvature(a)


def stage_hessian(params: CostParams, beta: np.ndarray, term: StageTerm) -> np.ndarray:
    """h * K K^T，秩不超过 1 的半正定矩阵"""
    h = stage_hessian_scale(params, beta, term)
    return h * np.outer(term.kernel, term.kernel)


def _dimension(beta: np.ndarray) -> int:
    return int(np.asarray(beta).shape[0])


def total_cost(params: CostParams, beta: np.ndarray, history: Sequence[StageTerm]) -> float:
    """J_k = sum_t g_t，空历史定义为 0"""
    total = 0.0
    for term in history:
        total += stage_cost(params, beta, term)
    return total


def total_gradient(params: CostParams, beta: np.ndarray, history: Sequence[StageTerm]) -> np.ndarray:
    total = np.zeros(_dimension(beta))
    for term in history:
        total += stage_gradient(params, beta, term)
    return total


def total_hessian(params: CostParams, beta: np.ndarray, history: Sequence[StageTerm]) -> np.ndarray:
    p = _dimension(beta)
    total = np.zeros((p, p))
    for term in history:
        total += stage_hessian(params, beta, term)
    return total


def stack_history(history: Sequence[StageTerm]) -> Tuple[np.ndarray, np.ndarray]:
    """把历史堆叠为 (N x p 核矩阵, N 维符号向量)，供批量求解的向量化计算"""
    if not history:
        raise ValueError("历史为空，无法堆叠")
    kernels = np.vstack([term.kernel for term in history])
    signs = np.array([term.z_signed for term in history], dtype=float)
    return kernels, signs


def _stacked_exponent(params: CostParams, beta: np.ndarray, kernels: np.ndarray, signs: np.ndarray) -> np.ndarray:
    return params.eta * signs * (kernels @ beta - params.tau)


def stacked_cost(params: CostParams, beta: np.ndarray, kernels: np.ndarray, signs: np.ndarray) -> float:
    a = _stacked_exponent(params, beta, kernels, signs)
    return float(np.sum(np.logaddexp(0.0, -a)))


def stacked_gradient(params: CostParams, beta: np.ndarray, kernels: np.ndarray, signs: np.ndarray) -> np.ndarray:
    a = _stacked_exponent(params, beta, kernels, signs)
    weights = -params.eta * signs * expit(-a)
    return kernels.T @ weights


def stacked_hessian(params: CostParams, beta: np.ndarray, kernels: np.ndarray, signs: np.ndarray) -> np.ndarray:
    a = _stacked_exponent(params, beta, kernels, signs)
    s = expit(-np.abs(a))
    scales = params.eta ** 2 * s * (1.0 - s)
    return (kernels * scales[:, None]).T @ kernels
