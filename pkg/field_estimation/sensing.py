# 主动感知：最大化期望Hessian最小特征值（E最优）选择下一个测量位置

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, eigh

from .cost import logistic_curvature
from .errors import AsymmetricMatrixError, DegenerateTargetError, EigenSolverError
from .field import FieldModel, evaluation_points, kernel_vector
from .models import CostParams, SensingConfig

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-9
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class VehicleState:
    """载体状态：当前位置和上一步平滑后的单位方向"""
    position: Tuple[float, float]
    prev_direction: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if self.prev_direction is not None:
            norm = math.hypot(*self.prev_direction)
            if abs(norm - 1.0) > 1e-9:
                raise ValueError(f"prev_direction 必须是单位向量，实际范数 {norm}")


def symmetric_eigenvalues(M) -> np.ndarray:
    """对称矩阵的全部特征值，升序

    不对称程度超过 1e-9 * max(1, max|M|) 时报错。使用分治驱动求全谱，
    特征值成簇（例如 P_0 = epsilon * I 附近）时也能收敛。
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"需要方阵，实际形状 {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    asymmetry = float(np.max(np.abs(M - M.T))) if M.size else 0.0
    tolerance = SYMMETRY_TOLERANCE * scale
    if asymmetry > tolerance:
        raise AsymmetricMatrixError(asymmetry, tolerance)
    if not np.all(np.isfinite(M)):
        raise EigenSolverError(M.shape, "矩阵含有非有限值")
    try:
        return eigh(M, eigvals_only=True, driver="evd")
    except (LinAlgError, ValueError) as e:
        raise EigenSolverError(M.shape, str(e))


def min_eigenvalue(M) -> float:
    """对称矩阵的最小特征值"""
    return float(symmetric_eigenvalues(M)[0])


def candidate_scale(beta_hat: np.ndarray, params: CostParams, kernel: np.ndarray) -> float:
    """候选点的曲率因子 eta^2 * exp(a) / (1 + exp(a))^2，a = eta * (beta^T K - tau)"""
    a = params.eta * (float(np.dot(beta_hat, kernel)) - params.tau)
    return params.eta ** 2 * logistic_curvature(a)


def expected_hessian(H: np.ndarray, beta_hat: np.ndarray, params: CostParams,
                     model: FieldModel, x_cand) -> np.ndarray:
    """期望Hessian：H + s * K(x') K(x')^T

    测量结果的两种概率在曲率对称性下相互抵消，因此不需要概率模型。
    """
    kernel = kernel_vector(model, x_cand)
    s = candidate_scale(beta_hat, params, kernel)
    return np.asarray(H, dtype=float) + s * np.outer(kernel, kernel)


def _branch_curvature(a: float) -> float:
    # exp(a) / (1 + exp(a))^2 在对数域直接计算，不借助对称性
    return math.exp(a - 2.0 * np.logaddexp(0.0, a))


def expected_hessian_two_branch(H: np.ndarray, beta_hat: np.ndarray, params: CostParams,
                                model: FieldModel, x_cand, prob_positive: float) -> np.ndarray:
    """按测量结果概率加权的两分支形式，用于验证化简"""
    if not 0.0 <= prob_positive <= 1.0:
        raise ValueError(f"概率必须在 [0, 1] 内: {prob_positive}")
    kernel = kernel_vector(model, x_cand)
    a = params.eta * (float(np.dot(beta_hat, kernel)) - params.tau)
    outer = np.outer(kernel, kernel)
    plus = prob_positive * params.eta ** 2 * _branch_curvature(a)
    minus = (1.0 - prob_positive) * params.eta ** 2 * _branch_curvature(-a)
    return np.asarray(H, dtype=float) + plus * outer + minus * outer


def resolve_candidates(config: SensingConfig, model: FieldModel) -> np.ndarray:
    """候选点集合：显式列表 > 均匀网格 > 核中心"""
    if config.candidates is not None:
        return np.asarray(config.candidates, dtype=float)
    if config.candidate_grid is not None:
        return evaluation_points(config.area, config.candidate_grid)
    return np.array(model.centers, dtype=float)


def score_candidates(H: np.ndarray, beta_hat: np.ndarray, params: CostParams,
                     model: FieldModel, candidates) -> np.ndarray:
    """每个候选点的期望Hessian最小特征值"""
    return candidate_spectra(H, beta_hat, params, model, candidates)[:, 0]


def candidate_spectra(H: np.ndarray, beta_hat: np.ndarray, params: CostParams,
                      model: FieldModel, candidates) -> np.ndarray:
    """每个候选点期望Hessian的升序全谱，形状 (候选数, p)"""
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    if candidates.shape[0] == 0:
        raise ValueError("候选点集合为空")
    return np.array([
        symmetric_eigenvalues(expected_hessian(H, beta_hat, params, model, x)) for x in candidates
    ])


def best_candidate(H: np.ndarray, beta_hat: np.ndarray, params: CostParams,
                   model: FieldModel, candidates) -> Tuple[int, float]:
    """返回 (下标, 最小特征值)

    先取最小特征值最大的候选点（差距小于 1e-12 视为并列）。并列时依次比较
    第二小、第三小……特征值，仍然并列才取最小下标。H 的最小特征值有重根时
    (例如 H = c * I)，秩一增量无法抬高 lambda_min，按整条谱比较会选中
    在最小特征子空间上增量最大的候选点。
    """
    spectra = candidate_spectra(H, beta_hat, params, model, candidates)
    remaining = np.arange(spectra.shape[0])
    for level in range(spectra.shape[1]):
        values = spectra[remaining, level]
        remaining = remaining[values >= float(np.max(values)) - TIE_TOLERANCE]
        if remaining.size == 1:
            break
    index = int(remaining[0])
    return index, float(spectra[index, 0])


def select_target(H: np.ndarray, beta_hat: np.ndarray, params: CostParams,
                  config: SensingConfig, model: FieldModel) -> np.ndarray:
    """argmax_{x' in X} lambda_min(Hess^+(x'))"""
    candidates = resolve_candidates(config, model)
    index, _ = best_candidate(H, beta_hat, params, model, candidates)
    return candidates[index].copy()


def clamp_to_area(point, config: SensingConfig) -> np.ndarray:
    area = config.area
    return np.array([
        min(max(float(point[0]), area.x_min), area.x_max),
        min(max(float(point[1]), area.y_min), area.y_max),
    ])


def next_position(vehicle: VehicleState, target, config: SensingConfig) -> Tuple[np.ndarray, np.ndarray]:
    """向目标行进 rho，方向与上一步方向按 alpha 凸组合后归一化

    Returns:
        (x_{k+1}, 平滑后的单位方向)
    """
    position = np.asarray(vehicle.position, dtype=float)
    prev = None if vehicle.prev_direction is None else np.asarray(vehicle.prev_direction, dtype=float)

    delta = np.asarray(target, dtype=float) - position
    distance = float(np.linalg.norm(delta))
    if distance < 1e-12:
        if prev is None:
            raise DegenerateTargetError(f"目标点 {tuple(position)} 与当前位置重合且没有历史方向")
        direction = prev
    else:
        direction = delta / distance

    if prev is None:
        smoothed = direction
    else:
        blend = config.alpha * direction + (1.0 - config.alpha) * prev
        norm = float(np.linalg.norm(blend))
        # 方向正好相反时凸组合为零向量
        smoothed = blend / norm if norm > 1e-12 else direction

    new_position = clamp_to_area(position + config.step * smoothed, config)
    return new_position, smoothed
