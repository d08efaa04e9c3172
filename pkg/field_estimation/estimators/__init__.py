# 在线估计器模块
# 导入具体实现以完成注册

from .base import OnlineEstimator, EstimatorRegistry, StepDiagnostics, register_estimator
from .onm_exact import (
    ExactOnmEstimator,
    ExactOnmState,
    EstimateTrace,
    RegretResult,
    accumulated_min_eigenvalues,
    batch_optimum,
    empirical_regret,
    exact_step,
    init_exact,
    regret_diagnostics,
    window_min_eigenvalue,
)
from .onm_approx import (
    ApproxOnmEstimator,
    ApproxOnmState,
    approx_step,
    hessian_of,
    init_approx,
    inv_hessian_of,
)

__all__ = [
    'OnlineEstimator',
    'EstimatorRegistry',
    'StepDiagnostics',
    'register_estimator',
    'ExactOnmEstimator',
    'ExactOnmState',
    'EstimateTrace',
    'RegretResult',
    'accumulated_min_eigenvalues',
    'batch_optimum',
    'empirical_regret',
    'exact_step',
    'init_exact',
    'regret_diagnostics',
    'window_min_eigenvalue',
    'ApproxOnmEstimator',
    'ApproxOnmState',
    'approx_step',
    'hessian_of',
    'init_approx',
    'inv_hessian_of',
]
