# 实验框架：概率场MSE、场景运行、批量基准与统计汇总

import logging
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import psutil
from scipy.special import erfc

from utils.error_handler import get_error_handler

from .cost import make_stage_term
from .errors import NumericalError
from .estimators import (
    EstimateTrace,
    EstimatorRegistry,
    StepDiagnostics,
    accumulated_min_eigenvalues,
    regret_diagnostics,
    window_min_eigenvalue,
)
from .field import (
    FieldModel,
    GroundTruth,
    Measurement,
    detection_probabilities,
    evaluation_points,
    grid_basis,
    kernel_matrix,
    sample_ground_truth,
    scenario_streams,
    simulate_measurement,
)
from .models import AreaOfInterest, ScenarioConfig
from .sensing import VehicleState, best_candidate, next_position, resolve_candidates
from .timing import StepTimingMonitor

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalGrid:
    """评估格点：每轴 resolution 个单元格中心"""
    area: AreaOfInterest
    resolution: int = 32
    points: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.resolution < 1:
            raise ValueError(f"resolution 至少为 1: {self.resolution}")
        points = evaluation_points(self.area, self.resolution)
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return self.resolution ** 2


def mse_probability_field(truth: GroundTruth, estimate: FieldModel, grid: EvalGrid) -> float:
    """两个检测概率场在格点上的均方差，均使用真值的 sigma_v 与 tau"""
    if len(grid) == 0:
        raise ValueError("评估格点为空")
    p_true = detection_probabilities(truth.model, truth.noise_std, truth.threshold, grid.points)
    p_est = detection_probabilities(estimate, truth.noise_std, truth.threshold, grid.points)
    return float(np.mean((p_true - p_est) ** 2))


class ProbabilityFieldEvaluator:
    """缓存真值概率与估计基的核矩阵，逐步计算MSE"""

    def __init__(self, truth: GroundTruth, basis: FieldModel, grid: EvalGrid):
        self.truth = truth
        self.grid = grid
        self.p_true = detection_probabilities(truth.model, truth.noise_std, truth.threshold, grid.points)
        self.basis_kernels = kernel_matrix(basis, grid.points)

    def probabilities(self, beta: np.ndarray) -> np.ndarray:
        phi = self.basis_kernels @ np.asarray(beta, dtype=float)
        return 0.5 * erfc((self.truth.threshold - phi) / (self.truth.noise_std * np.sqrt(2.0)))

    def mse(self, beta: np.ndarray) -> float:
        return float(np.mean((self.p_true - self.probabilities(beta)) ** 2))


@dataclass(frozen=True)
class WaypointRow:
    """航点记录：测量位置、选中的目标和其最小特征值"""
    k: int
    x: float
    y: float
    target_x: float
    target_y: float
    lambda_min: float


@dataclass
class RunRecord:
    """单次场景运行结果"""
    scenario_id: int
    seed: int
    estimator: str
    truth: GroundTruth
    basis: FieldModel
    final_mse: float
    mse_trace: np.ndarray
    beta_trace: np.ndarray
    diagnostics: List[StepDiagnostics]
    waypoints: List[WaypointRow]
    measurements: List[Measurement]
    time_s: float
    step_seconds: List[float]
    aborted: bool = False
    failure_reason: Optional[str] = None
    regret: Optional[np.ndarray] = None
    regret_unconverged: Tuple[int, ...] = ()
    window_min_eigs: Optional[np.ndarray] = None
    accumulated_min_eigs: Optional[np.ndarray] = None
    diagnostics_error: Optional[str] = None

    @property
    def steps_completed(self) -> int:
        return len(self.measurements)

    @property
    def final_estimate(self) -> FieldModel:
        return self.basis.with_coefficients(self.beta_trace[-1])


def _choose_target(mode: str, estimator, candidates: np.ndarray, vehicle: VehicleState,
                   rng: np.random.Generator) -> Tuple[np.ndarray, float]:
    if mode == 'active':
        index, lambda_min = best_candidate(
            estimator.sensing_hessian(), estimator.beta_hat, estimator.params, estimator.model, candidates
        )
        return candidates[index], lambda_min
    if mode == 'random':
        return candidates[int(rng.integers(len(candidates)))], float('nan')
    return np.asarray(vehicle.position, dtype=float), float('nan')


def run_scenario(config: ScenarioConfig, scenario_id: int = 0) -> RunRecord:
    """按实验流程运行一个场景

    计时只覆盖估计器更新与主动感知，不含真值生成和MSE评估。
    """
    truth_rng, init_rng, noise_rng, sensing_rng = scenario_streams(config.seed)
    truth = sample_ground_truth(config.area, truth_rng, config.truth, threshold=config.cost.tau)
    basis = grid_basis(config.area, config.basis.per_axis, config.basis.length_scale)
    beta_0 = init_rng.uniform(*config.initial_beta_range, size=basis.p)

    estimator = EstimatorRegistry.create(config.estimator, basis, beta_0, config)
    sensing = config.sensing.model_copy(update={'area': config.area})
    candidates = resolve_candidates(sensing, basis)
    evaluator = ProbabilityFieldEvaluator(truth, basis, EvalGrid(config.area, config.eval_grid.resolution))
    monitor = StepTimingMonitor()

    vehicle = VehicleState(config.start_position)
    betas = [np.array(beta_0)]
    diagnostics: List[StepDiagnostics] = [StepDiagnostics()]
    mse_trace = [evaluator.mse(beta_0)]
    waypoints: List[WaypointRow] = []
    measurements: List[Measurement] = []
    aborted, failure_reason = False, None

    logger.info(f"场景 {scenario_id} 开始: seed={config.seed}, 估计器={config.estimator}, 步数={config.steps}")
    k = 0
    try:
        for k in range(config.steps):
            m = simulate_measurement(truth, vehicle.position, k, noise_rng)
            measurements.append(m)

            with monitor.phase('estimator'):
                estimator.step(m)
            with monitor.phase('sensing'):
                target, lambda_min = _choose_target(sensing.mode, estimator, candidates, vehicle, sensing_rng)
                if sensing.mode != 'fixed':
                    position, direction = next_position(vehicle, target, sensing)
                    vehicle = VehicleState((float(position[0]), float(position[1])),
                                           (float(direction[0]), float(direction[1])))
            monitor.end_step()

            waypoints.append(WaypointRow(k, m.position[0], m.position[1],
                                         float(target[0]), float(target[1]), lambda_min))
            betas.append(np.array(estimator.beta_hat))
            diagnostics.append(estimator.last_diagnostics())
            mse_trace.append(evaluator.mse(estimator.beta_hat))
    except NumericalError as e:
        info = get_error_handler().handle_error(
            e, {'scenario_id': scenario_id, 'seed': config.seed, 'k': k}, level=logging.WARNING
        )
        aborted, failure_reason = True, f"{info['error_type']}: {info['error_message']}"
        # 中止步的测量没有被摄入
        measurements = measurements[:len(betas) - 1]

    record = RunRecord(
        scenario_id=scenario_id,
        seed=config.seed,
        estimator=config.estimator,
        truth=truth,
        basis=basis,
        final_mse=mse_trace[-1],
        mse_trace=np.array(mse_trace),
        beta_trace=np.vstack(betas),
        diagnostics=diagnostics,
        waypoints=waypoints,
        measurements=measurements,
        time_s=monitor.metrics.total_seconds,
        step_seconds=list(monitor.metrics.step_seconds),
        aborted=aborted,
        failure_reason=failure_reason,
    )

    if config.diagnostics.track_regret and not aborted:
        _attach_regret_diagnostics(record, config)

    logger.info(
        f"场景 {scenario_id} 结束: 最终MSE={record.final_mse:.5f}, 耗时={record.time_s:.3f}s"
        + (f", 中止: {failure_reason}" if aborted else "")
    )
    return record


def estimate_trace(record: RunRecord) -> EstimateTrace:
    """由运行记录构造诊断轨迹：第 k 项为摄入测量 k 时的估计"""
    terms = tuple(make_stage_term(record.basis, m) for m in record.measurements)
    betas = tuple(record.beta_trace[k] for k in range(len(terms)))
    return EstimateTrace(betas, terms)


def _attach_regret_diagnostics(record: RunRecord, config: ScenarioConfig):
    trace = estimate_trace(record)
    try:
        record.window_min_eigs = window_min_eigenvalue(config.cost, trace, config.diagnostics.window)
        record.accumulated_min_eigs = accumulated_min_eigenvalues(config.cost, trace)
        result = regret_diagnostics(config.cost, trace, config.batch_oracle)
        record.regret, record.regret_unconverged = result.partial, result.unconverged
    except NumericalError as e:
        record.diagnostics_error = get_error_handler().failure_reason(e)
        logger.warning(f"场景 {record.scenario_id} 遗憾诊断失败: {e}")


def _run_indexed(args: Tuple[ScenarioConfig, int]) -> RunRecord:
    config, scenario_id = args
    return run_scenario(config, scenario_id)


def run_batch(config: ScenarioConfig, n: int, estimator: Optional[str] = None,
              workers: int = 1) -> List[RunRecord]:
    """运行 n 个场景，种子为 base_seed + i，结果按场景顺序返回"""
    if n < 1:
        raise ValueError(f"场景数量至少为 1: {n}")
    estimator = estimator or config.estimator
    jobs = [(config.with_seed(config.seed + i).with_estimator(estimator), i) for i in range(n)]

    logger.info(f"批量运行开始: {n} 个场景, 估计器={estimator}, 并行数={workers}")
    if workers <= 1:
        records = [_run_indexed(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_indexed, jobs))
    return records


@dataclass(frozen=True)
class BoxPlotStats:
    """箱线图统计量：四分位数、1.5 IQR 须线及离群点"""
    q1: float
    median: float
    q3: float
    whisker_lo: float
    whisker_hi: float
    outliers: Tuple[float, ...]


def box_plot_stats(values: Sequence[float]) -> BoxPlotStats:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        nan = float('nan')
        return BoxPlotStats(nan, nan, nan, nan, nan, ())
    q1, median, q3 = (float(q) for q in np.percentile(values, [25, 50, 75]))
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = values[(values >= lo_fence) & (values <= hi_fence)]
    outliers = tuple(float(v) for v in np.sort(values[(values < lo_fence) | (values > hi_fence)]))
    return BoxPlotStats(q1, median, q3, float(inside.min()), float(inside.max()), outliers)


@dataclass(frozen=True)
class BenchmarkSummary:
    """一个估计器的批量统计"""
    estimator: str
    total: int
    completed: int
    aborted: int
    median_mse: float
    min_mse: float
    max_mse: float
    mean_time_s: float
    box: BoxPlotStats

    @property
    def completion_rate(self) -> float:
        return self.completed / self.total if self.total else 0.0


def summarize(records: Sequence[RunRecord]) -> BenchmarkSummary:
    """最终MSE的顺序统计，中止的运行不参与统计但计数"""
    if not records:
        raise ValueError("没有运行记录可汇总")
    estimators = sorted({r.estimator for r in records})
    completed = [r for r in records if not r.aborted]
    values = np.array([r.final_mse for r in completed], dtype=float)
    nan = float('nan')
    return BenchmarkSummary(
        estimator=','.join(estimators),
        total=len(records),
        completed=len(completed),
        aborted=len(records) - len(completed),
        median_mse=float(np.median(values)) if values.size else nan,
        min_mse=float(values.min()) if values.size else nan,
        max_mse=float(values.max()) if values.size else nan,
        mean_time_s=float(np.mean([r.time_s for r in completed])) if completed else nan,
        box=box_plot_stats(values),
    )


def machine_info() -> Dict[str, Any]:
    """运行环境信息，基准耗时依赖硬件"""
    memory = psutil.virtual_memory()
    try:
        frequency = psutil.cpu_freq()
    except (NotImplementedError, OSError):
        frequency = None
    return {
        "system": platform.system(),
        "machine": platform.machine(),
        "processor": platform.processor(),
        "python_version": platform.python_version(),
        "cpu_count_logical": psutil.cpu_count(logical=True),
        "cpu_count_physical": psutil.cpu_count(logical=False),
        "cpu_max_mhz": float(frequency.max) if frequency else None,
        "memory_total_gb": round(memory.total / (1024 ** 3), 2),
    }
