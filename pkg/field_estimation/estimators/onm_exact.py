# 精确在线牛顿法
# beta_{k+1} = beta_k - s * (grad^2 J_k(beta_k))^{-1} grad J_k(beta_k)
# 最小特征值低于切换阈值时使用阻尼步长并加正则化，Hessian 良态后切换为原始牛顿步

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ..cost import (
    StageTerm,
    make_stage_term,
    stack_history,
    stacked_cost,
    stacked_gradient,
    stacked_hessian,
    stage_hessian_scale,
    total_gradient,
    total_hessian,
)
from ..errors import BatchNonConvergenceError, DegenerateHessianError, MeasurementOrderError
from ..field import FieldModel, Measurement
from ..models import BatchOptimumConfig, CostParams, ExactOnmConfig, ScenarioConfig
from ..sensing import min_eigenvalue
from .base import OnlineEstimator, StepDiagnostics, register_estimator

logger = logging.getLogger(__name__)

DEGENERATE_EIGENVALUE = 1e-12


@dataclass(frozen=True)
class ExactOnmState:
    """精确ONM状态：当前估计 + 全部历史"""
    model: FieldModel
    beta_hat: np.ndarray
    history: Tuple[StageTerm, ...]
    k: int
    grad_norm: float = float('nan')
    hess_min_eig: float = float('nan')
    damped: bool = False

    def __post_init__(self):
        if len(self.history) != self.k + 1:
            raise ValueError(f"历史长度 {len(self.history)} 与步数 k={self.k} 不一致")
        beta = np.array(self.beta_hat, dtype=float)
        beta.setflags(write=False)
        object.__setattr__(self, "beta_hat", beta)

    @property
    def estimate(self) -> FieldModel:
        return self.model.with_coefficients(self.beta_hat)


def init_exact(model: FieldModel, beta_0) -> ExactOnmState:
    """空历史的初始状态"""
    beta_0 = np.asarray(beta_0, dtype=float)
    if beta_0.shape != (model.p,):
        raise ValueError(f"beta_0 维度应为 {model.p}，实际 {beta_0.shape}")
    return ExactOnmState(model=model, beta_hat=beta_0, history=(), k=-1)


def regularization_threshold(config: ExactOnmConfig) -> float:
    """低于该最小特征值时加入 c * I：默认阻尼区间内一律正则化，关闭后只在接近奇异时正则化"""
    return config.switch_threshold if config.regularize_damped else config.singular_threshold


def _regularized(H: np.ndarray, min_eig: float, config: ExactOnmConfig) -> Tuple[np.ndarray, float]:
    if min_eig < regularization_threshold(config):
        return H + config.regularization * np.eye(H.shape[0]), min_eig + config.regularization
    return H, min_eig


def _newton_direction(H: np.ndarray, min_eig: float, g: np.ndarray,
                      config: ExactOnmConfig, step: int) -> np.ndarray:
    """对称正定分解求解 H d = g，分解失败时再加一次正则化"""
    if min_eig <= DEGENERATE_EIGENVALUE:
        raise DegenerateHessianError(step, min_eig)
    try:
        return cho_solve(cho_factor(H), g)
    except LinAlgError:
        logger.debug(f"第 {step} 步Cholesky分解失败，追加正则化")
    H = H + config.regularization * np.eye(H.shape[0])
    min_eig = min_eig + config.regularization
    if min_eig <= DEGENERATE_EIGENVALUE:
        raise DegenerateHessianError(step, min_eig)
    try:
        return cho_solve(cho_factor(H), g)
    except LinAlgError:
        raise DegenerateHessianError(step, min_eig)


def exact_step(state: ExactOnmState, config: ExactOnmConfig, params: CostParams,
               m: Measurement) -> ExactOnmState:
    """摄入测量 m，在完整历史上做一次（混合）牛顿步"""
    if m.index != state.k + 1:
        raise MeasurementOrderError(f"测量序号应为 {state.k + 1}，实际为 {m.index}")

    history = state.history + (make_stage_term(state.model, m),)
    beta = state.beta_hat
    g = total_gradient(params, beta, history)
    H = total_hessian(params, beta, history)
    min_eig = min_eigenvalue(H)

    damped = min_eig < config.switch_threshold
    step_size = config.damping_multiplier if damped else 1.0
    H_solve, min_eig_solve = _regularized(H, min_eig, config)
    if H_solve is not H:
        logger.debug(f"第 {m.index} 步Hessian病态 (lambda_min={min_eig:.3e})，加入 {config.regularization} I")

    direction = _newton_direction(H_solve, min_eig_solve, g, config, m.index)
    return ExactOnmState(
        model=state.model,
        beta_hat=beta - step_size * direction,
        history=history,
        k=m.index,
        grad_norm=float(np.linalg.norm(g)),
        hess_min_eig=min_eig,
        damped=bool(damped),
    )


def sensing_hessian(state: ExactOnmState, config: ExactOnmConfig, params: CostParams) -> np.ndarray:
    """在最新估计处重新计算的累计Hessian，按步进时的规则正则化"""
    H = total_hessian(params, state.beta_hat, state.history)
    return _regularized(H, min_eigenvalue(H), config)[0]


def _minimize(params: CostParams, kernels: np.ndarray, signs: np.ndarray,
              beta_init: np.ndarray, config: BatchOptimumConfig) -> np.ndarray:
    beta = np.array(beta_init, dtype=float)
    floor = config.hessian_floor * np.eye(beta.shape[0])
    grad_norm = float('inf')

    for iteration in range(config.max_iterations + 1):
        g = stacked_gradient(params, beta, kernels, signs)
        grad_norm = float(np.max(np.abs(g)))
        if grad_norm <= config.tolerance:
            return beta
        if iteration == config.max_iterations:
            break

        H = stacked_hessian(params, beta, kernels, signs) + floor
        try:
            direction = cho_solve(cho_factor(H), g)
        except LinAlgError:
            direction = g
        slope = float(np.dot(g, direction))
        f0 = stacked_cost(params, beta, kernels, signs)

        t = 1.0
        accepted = False
        for _ in range(config.max_halvings + 1):
            candidate = beta - t * direction
            if stacked_cost(params, candidate, kernels, signs) <= f0 - config.armijo * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            logger.debug(f"批量牛顿第 {iteration} 次迭代线搜索失败，梯度范数 {grad_norm:.3e}")
            raise BatchNonConvergenceError(beta, grad_norm, iteration)
        beta = candidate

    raise BatchNonConvergenceError(beta, grad_norm, config.max_iterations)


def batch_optimum(params: CostParams, history: Sequence[StageTerm], beta_init,
                  config: BatchOptimumConfig = None) -> np.ndarray:
    """beta*_k = argmin J_k：带回溯线搜索的阻尼牛顿法

    只接受满足Armijo条件的下降步，因此返回点的代价不高于起点。
    """
    config = config or BatchOptimumConfig()
    if not history:
        raise ValueError("批量最优解需要非空历史")
    kernels, signs = stack_history(history)
    return _minimize(params, kernels, signs, np.asarray(beta_init, dtype=float), config)


@dataclass(frozen=True)
class EstimateTrace:
    """诊断轨迹：第 k 项为摄入测量 k 时使用的估计 beta_k 与历史前 k+1 项"""
    betas: Tuple[np.ndarray, ...]
    history: Tuple[StageTerm, ...]

    def __post_init__(self):
        if len(self.betas) != len(self.history):
            raise ValueError(f"估计数 {len(self.betas)} 与历史长度 {len(self.history)} 不一致")

    def __len__(self) -> int:
        return len(self.history)

    def entry(self, k: int) -> Tuple[np.ndarray, Tuple[StageTerm, ...]]:
        return self.betas[k], self.history[:k + 1]


@dataclass(frozen=True)
class RegretResult:
    """遗憾部分和，以及批量最优解未收敛（取下降终点代替）的步"""
    partial: np.ndarray
    unconverged: Tuple[int, ...] = ()


def regret_diagnostics(params: CostParams, trace: EstimateTrace,
                       config: BatchOptimumConfig = None) -> RegretResult:
    """Reg(T) = sum_{k<=T} (J_k(beta_k) - J_k(beta*_k)) 的部分和序列

    每个 beta*_k 从 beta_k 出发求解。某一步不收敛时取阻尼牛顿的下降终点，
    其代价不高于 J_k(beta_k)，该项仍非负；这些步记入 unconverged。
    """
    config = config or BatchOptimumConfig()
    if len(trace) == 0:
        return RegretResult(np.zeros(0))
    kernels, signs = stack_history(trace.history)
    partial = np.zeros(len(trace))
    unconverged = []
    running = 0.0
    for k in range(len(trace)):
        beta_k = np.asarray(trace.betas[k], dtype=float)
        K_k, s_k = kernels[:k + 1], signs[:k + 1]
        try:
            beta_star = _minimize(params, K_k, s_k, beta_k, config)
        except BatchNonConvergenceError as e:
            beta_star = e.beta
            unconverged.append(k)
        running += stacked_cost(params, beta_k, K_k, s_k) - stacked_cost(params, beta_star, K_k, s_k)
        partial[k] = running
    if unconverged:
        logger.warning(f"{len(unconverged)}/{len(trace)} 步批量最优解未收敛，按下降终点计入遗憾")
    return RegretResult(partial, tuple(unconverged))


def empirical_regret(params: CostParams, trace: EstimateTrace,
                     config: BatchOptimumConfig = None) -> np.ndarray:
    """遗憾部分和序列，见 regret_diagnostics"""
    return regret_diagnostics(params, trace, config).partial


def _stage_scales(params: CostParams, trace: EstimateTrace) -> np.ndarray:
    return np.array([
        stage_hessian_scale(params, beta, term) for beta, term in zip(trace.betas, trace.history)
    ])


def window_min_eigenvalue(params: CostParams, trace: EstimateTrace, window: int) -> np.ndarray:
    """滑动窗口内（各项取当时估计）Hessian之和的最小特征值，检验持续激励"""
    if window < 1:
        raise ValueError(f"窗口长度至少为 1: {window}")
    n = len(trace)
    if n < window:
        return np.zeros(0)
    kernels, _ = stack_history(trace.history)
    scales = _stage_scales(params, trace)
    values = np.empty(n - window + 1)
    for start in range(n - window + 1):
        K = kernels[start:start + window]
        values[start] = min_eigenvalue((K * scales[start:start + window, None]).T @ K)
    return values


def accumulated_min_eigenvalues(params: CostParams, trace: EstimateTrace) -> np.ndarray:
    """lambda_min(sum_{t<=k} grad^2 g_t(beta_t))，随 k 单调不减"""
    n = len(trace)
    if n == 0:
        return np.zeros(0)
    kernels, _ = stack_history(trace.history)
    scales = _stage_scales(params, trace)
    p = kernels.shape[1]
    accumulated = np.zeros((p, p))
    values = np.empty(n)
    for k in range(n):
        accumulated += scales[k] * np.outer(kernels[k], kernels[k])
        values[k] = min_eigenvalue(accumulated)
    return values


@register_estimator("exact")
class ExactOnmEstimator(OnlineEstimator):
    """精确在线牛顿法估计器"""

    def __init__(self, model: FieldModel, beta_0, params: CostParams, config: ExactOnmConfig):
        super().__init__(model, beta_0, params, config)
        self.state = init_exact(model, beta_0)

    @classmethod
    def config_from(cls, scenario: ScenarioConfig) -> ExactOnmConfig:
        return scenario.exact

    def step(self, measurement: Measurement) -> None:
        self.state = exact_step(self.state, self.config, self.params, measurement)

    @property
    def beta_hat(self) -> np.ndarray:
        return self.state.beta_hat

    @property
    def k(self) -> int:
        return self.state.k

    def sensing_hessian(self) -> np.ndarray:
        return sensing_hessian(self.state, self.config, self.params)

    def last_diagnostics(self) -> StepDiagnostics:
        return StepDiagnostics(self.state.grad_norm, self.state.hess_min_eig, self.state.damped)
