# 近似在线牛顿法
# 梯度只用最新一项，累计Hessian的逆用秩一更新维护，每步计算量与 k 无关

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..cost import make_stage_term, stage_gradient, stage_hessian_scale
from ..errors import InternalCorruptionError, MeasurementOrderError
from ..field import FieldModel, Measurement
from ..models import ApproxOnmConfig, CostParams, ScenarioConfig
from ..sensing import symmetric_eigenvalues
from .base import OnlineEstimator, StepDiagnostics, register_estimator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ApproxOnmState:
    """近似ONM状态：当前估计 + 逆Hessian P_k"""
    model: FieldModel
    beta_hat: np.ndarray
    inv_hessian: np.ndarray
    k: int
    grad_norm: float = float('nan')
    hess_min_eig: float = float('nan')

    def __post_init__(self):
        beta = np.array(self.beta_hat, dtype=float)
        P = np.array(self.inv_hessian, dtype=float)
        if P.shape != (beta.shape[0], beta.shape[0]):
            raise ValueError(f"逆Hessian形状 {P.shape} 与估计维度 {beta.shape[0]} 不一致")
        beta.setflags(write=False)
        P.setflags(write=False)
        object.__setattr__(self, "beta_hat", beta)
        object.__setattr__(self, "inv_hessian", P)

    @property
    def estimate(self) -> FieldModel:
        return self.model.with_coefficients(self.beta_hat)


def init_approx(model: FieldModel, beta_0, config: ApproxOnmConfig) -> ApproxOnmState:
    """P_0 = epsilon * I，注意 epsilon 初始化的是逆矩阵"""
    beta_0 = np.asarray(beta_0, dtype=float)
    if beta_0.shape != (model.p,):
        raise ValueError(f"beta_0 维度应为 {model.p}，实际 {beta_0.shape}")
    return ApproxOnmState(
        model=model,
        beta_hat=beta_0,
        inv_hessian=config.epsilon * np.eye(model.p),
        k=-1,
    )


def approx_step(state: ApproxOnmState, config: ApproxOnmConfig, params: CostParams,
                m: Measurement) -> ApproxOnmState:
    """先用 beta_k 处的单项Hessian更新 P，再做牛顿步"""
    if m.index != state.k + 1:
        raise MeasurementOrderError(f"测量序号应为 {state.k + 1}，实际为 {m.index}")

    term = make_stage_term(state.model, m)
    beta = state.beta_hat
    P = state.inv_hessian
    K = term.kernel

    h = stage_hessian_scale(params, beta, term)
    PK = P @ K
    denominator = 1.0 + h * float(np.dot(K, PK))
    if not denominator > 0.0:
        raise InternalCorruptionError(f"第 {m.index} 步秩一更新分母非正: {denominator}")

    # P (I - h K K^T P / d) = P - h (PK)(PK)^T / d，P 对称
    P_new = P - (h / denominator) * np.outer(PK, PK)
    P_new = 0.5 * (P_new + P_new.T)

    G = stage_gradient(params, beta, term)
    beta_new = beta - P_new @ G

    max_eig = float(symmetric_eigenvalues(P_new)[-1])
    if not max_eig > 0.0:
        raise InternalCorruptionError(f"第 {m.index} 步逆Hessian最大特征值非正: {max_eig}")
    return ApproxOnmState(
        model=state.model,
        beta_hat=beta_new,
        inv_hessian=P_new,
        k=m.index,
        grad_norm=float(np.linalg.norm(G)),
        hess_min_eig=1.0 / max_eig,
    )


def inv_hessian_of(state: ApproxOnmState) -> np.ndarray:
    """P_k 的副本"""
    return np.array(state.inv_hessian)


def hessian_of(state: ApproxOnmState) -> np.ndarray:
    """按需构造 H_k = P_k^{-1}（Cholesky求逆）"""
    P = state.inv_hessian
    try:
        factor = cho_factor(P)
    except np.linalg.LinAlgError as e:
        raise InternalCorruptionError(f"逆Hessian失去正定性: {e}")
    H = cho_solve(factor, np.eye(P.shape[0]))
    return 0.5 * (H + H.T)


@register_estimator("approx")
class ApproxOnmEstimator(OnlineEstimator):
    """近似在线牛顿法估计器"""

    def __init__(self, model: FieldModel, beta_0, params: CostParams, config: ApproxOnmConfig):
        super().__init__(model, beta_0, params, config)
        self.state = init_approx(model, beta_0, config)

    @classmethod
    def config_from(cls, scenario: ScenarioConfig) -> ApproxOnmConfig:
        return scenario.approx

    def step(self, measurement: Measurement) -> None:
        self.state = approx_step(self.state, self.config, self.params, measurement)

    @property
    def beta_hat(self) -> np.ndarray:
        return self.state.beta_hat

    @property
    def k(self) -> int:
        return self.state.k

    def sensing_hessian(self) -> np.ndarray:
        return hessian_of(self.state)

    def last_diagnostics(self) -> StepDiagnostics:
        return StepDiagnostics(self.state.grad_norm, self.state.hess_min_eig, False)
