# 径向基场模型、真值场生成与二值测量仿真

import logging
import math
from dataclasses import dataclass
from itertools import product
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import erfc

from .models import AreaOfInterest, TruthSamplingConfig

logger = logging.getLogger(__name__)

_SQRT2 = math.sqrt(2.0)


def _frozen_array(values, ndim: int, name: str) -> np.ndarray:
    array = np.array(values, dtype=float)
    if array.ndim != ndim:
        raise ValueError(f"{name} 维度应为 {ndim}，实际为 {array.ndim}")
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class FieldModel:
    """径向基场模型 phi(x) = sum_i beta_i * exp(-||c_i - x||^2 / sigma_i^2)

    centers 为 p x 2 数组，length_scales 与 coefficients 长度均为 p。
    构造后数组只读。
    """
    centers: np.ndarray
    length_scales: np.ndarray
    coefficients: np.ndarray

    def __post_init__(self):
        centers = _frozen_array(self.centers, 2, "centers")
        length_scales = _frozen_array(self.length_scales, 1, "length_scales")
        coefficients = _frozen_array(self.coefficients, 1, "coefficients")

        p = centers.shape[0]
        if p < 1:
            raise ValueError("基函数数量 p 至少为 1")
        if centers.shape[1] != 2:
            raise ValueError(f"centers 必须是 p x 2 数组，实际形状 {centers.shape}")
        if length_scales.shape[0] != p or coefficients.shape[0] != p:
            raise ValueError(
                f"centers/length_scales/coefficients 长度不一致: {p}, {length_scales.shape[0]}, {coefficients.shape[0]}"
            )
        if np.any(length_scales <= 0):
            raise ValueError("所有 length_scales 必须为正")

        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "length_scales", length_scales)
        object.__setattr__(self, "coefficients", coefficients)

    @property
    def p(self) -> int:
        return int(self.centers.shape[0])

    def with_coefficients(self, coefficients) -> "FieldModel":
        """保持核中心和尺度，替换系数（用于由估计值构造场）"""
        return FieldModel(self.centers, self.length_scales, coefficients)


@dataclass(frozen=True)
class GroundTruth:
    """仿真用真值：场模型 + 噪声方差 + 传感器阈值"""
    model: FieldModel
    noise_variance: float
    threshold: float

    def __post_init__(self):
        if not self.noise_variance > 0:
            raise ValueError(f"noise_variance 必须为正: {self.noise_variance}")
        if not self.threshold > 0:
            raise ValueError(f"threshold 必须为正: {self.threshold}")

    @property
    def noise_std(self) -> float:
        return math.sqrt(self.noise_variance)


@dataclass(frozen=True)
class Measurement:
    """单次二值测量"""
    position: Tuple[float, float]
    z: int
    z_signed: int
    index: int

    def __post_init__(self):
        if self.z not in (0, 1):
            raise ValueError(f"z 必须为 0 或 1: {self.z}")
        if self.z_signed != 2 * self.z - 1:
            raise ValueError(f"z_signed 必须等于 2z-1: z={self.z}, z_signed={self.z_signed}")
        if self.index < 0:
            raise ValueError(f"测量序号不能为负: {self.index}")

    @classmethod
    def from_binary(cls, position, z: int, index: int) -> "Measurement":
        z = int(z)
        return cls((float(position[0]), float(position[1])), z, 2 * z - 1, int(index))


def kernel_vector(model: FieldModel, x) -> np.ndarray:
    """K(x)，第 i 项为 exp(-||c_i - x||^2 / sigma_i^2)"""
    diff = model.centers - np.asarray(x, dtype=float)
    sq_dist = np.einsum('ij,ij->i', diff, diff)
    return np.exp(-sq_dist / model.length_scales ** 2)


def kernel_matrix(model: FieldModel, points) -> np.ndarray:
    """批量计算核向量，返回 N x p 矩阵"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    diff = points[:, None, :] - model.centers[None, :, :]
    sq_dist = np.einsum('npk,npk->np', diff, diff)
    return np.exp(-sq_dist / model.length_scales[None, :] ** 2)


def field_value(model: FieldModel, x) -> float:
    """phi(x) = <beta, K(x)>"""
    return float(np.dot(model.coefficients, kernel_vector(model, x)))


def field_values(model: FieldModel, points) -> np.ndarray:
    return kernel_matrix(model, points) @ model.coefficients


def _upper_tail(u):
    # 1 - Phi(u) = erfc(u / sqrt(2)) / 2，尾部精度优于 1 - ndtr(u)
    return 0.5 * erfc(np.asarray(u, dtype=float) / _SQRT2)


def detection_probability(model: FieldModel, sigma_v: float, tau: float, x) -> float:
    """P(z = 1 | beta; x) = 1 - Phi((tau - phi(x)) / sigma_v)"""
    if not sigma_v > 0:
        raise ValueError(f"sigma_v 必须为正: {sigma_v}")
    return float(_upper_tail((tau - field_value(model, x)) / sigma_v))


def detection_probabilities(model: FieldModel, sigma_v: float, tau: float, points) -> np.ndarray:
    """批量计算检测概率"""
    if not sigma_v > 0:
        raise ValueError(f"sigma_v 必须为正: {sigma_v}")
    return _upper_tail((tau - field_values(model, points)) / sigma_v)


def grid_basis(area: AreaOfInterest, per_axis: int = 4, length_scale: float = 25.0) -> FieldModel:
    """在区域内按单元格中心布置 per_axis x per_axis 个核，系数为零

    顺序为 x 优先：(x_0, y_0), (x_0, y_1), ...
    默认区域下得到 {12.5, 37.5, 62.5, 87.5}^2。
    """
    xs = area.x_min + (np.arange(per_axis) + 0.5) * area.width / per_axis
    ys = area.y_min + (np.arange(per_axis) + 0.5) * area.height / per_axis
    centers = np.array(list(product(xs, ys)), dtype=float)
    p = centers.shape[0]
    return FieldModel(centers, np.full(p, float(length_scale)), np.zeros(p))


def sample_ground_truth(area: AreaOfInterest, rng: np.random.Generator,
                        sampling: Optional[TruthSamplingConfig] = None,
                        threshold: float = 1.0) -> GroundTruth:
    """随机生成真值场

    抽样顺序固定：先全部 beta，再逐个核的中心 x、y 分量，最后全部 sigma，
    保证同一种子可复现。
    """
    sampling = sampling or TruthSamplingConfig()
    p = sampling.p_true

    lo, hi = sampling.center_range
    if not (area.contains((lo, lo)) and area.contains((hi, hi))):
        logger.warning(f"真值中心采样区间 {sampling.center_range} 超出感兴趣区域")

    betas = rng.uniform(*sampling.beta_range, size=p)
    centers = rng.uniform(lo, hi, size=(p, 2))
    sigmas = rng.uniform(*sampling.sigma_range, size=p)

    model = FieldModel(centers, sigmas, betas)
    return GroundTruth(model=model, noise_variance=sampling.noise_variance, threshold=threshold)


def simulate_measurement(gt: GroundTruth, x, t: int, rng: np.random.Generator) -> Measurement:
    """y = phi(x) + v, v ~ N(0, sigma_v^2)；z = 1(y > tau)"""
    noise = rng.normal(0.0, gt.noise_std)
    y = field_value(gt.model, x) + noise
    return Measurement.from_binary(x, 1 if y > gt.threshold else 0, t)


def simulate_readings(gt: GroundTruth, x, count: int, rng: np.random.Generator) -> np.ndarray:
    """同一位置重复测量 count 次，返回 0/1 数组（蒙特卡洛检验用）"""
    noise = rng.normal(0.0, gt.noise_std, size=count)
    return (field_value(gt.model, x) + noise > gt.threshold).astype(int)


def scenario_streams(seed: int, count: int = 4) -> List[np.random.Generator]:
    """由一个种子派生互相独立的随机流

    顺序: [真值场, 初始估计, 测量噪声, 随机感知]
    """
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.default_rng(child) for child in children]


def evaluation_points(area: AreaOfInterest, resolution: int) -> np.ndarray:
    """单元格中心格点，x 优先顺序，共 resolution^2 个"""
    xs = area.x_min + (np.arange(resolution) + 0.5) * area.width / resolution
    ys = area.y_min + (np.arange(resolution) + 0.5) * area.height / resolution
    return np.array(list(product(xs, ys)), dtype=float)


def field_grid_rows(model: FieldModel, sigma_v: float, tau: float,
                    points: Sequence) -> List[Tuple[float, float, float, float]]:
    """生成 x,y,phi,prob 行"""
    points = np.asarray(points, dtype=float)
    phi = field_values(model, points)
    prob = _upper_tail((tau - phi) / sigma_v)
    return [(float(px), float(py), float(f), float(q)) for (px, py), f, q in zip(points, phi, prob)]
