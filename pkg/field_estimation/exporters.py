# CSV/YAML 产物导出
# 浮点数按 17 位有效数字写出，重复运行得到逐字节相同的文件

import csv
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence

import numpy as np
import yaml

from .errors import OutputError
from .eval_harness import BenchmarkSummary, RunRecord
from .field import FieldModel, GroundTruth, evaluation_points, field_grid_rows
from .models import AreaOfInterest

logger = logging.getLogger(__name__)


def format_value(value: Any) -> str:
    """CSV单元格格式"""
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), '.17g')
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """写出CSV，I/O失败转换为 OutputError"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_value(v) for v in row])
    except OSError as e:
        raise OutputError(f"无法写入 {path}: {e}") from e
    logger.debug(f"已写出 {path}")
    return path


def write_yaml(path: Path, document: Mapping[str, Any]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            yaml.safe_dump(dict(document), f, allow_unicode=True, sort_keys=False)
    except OSError as e:
        raise OutputError(f"无法写入 {path}: {e}") from e
    logger.debug(f"已写出 {path}")
    return path


def write_field_dump(path: Path, model: FieldModel, sigma_v: float, tau: float,
                     area: AreaOfInterest, resolution: int) -> Path:
    """x,y,phi,prob 网格导出"""
    rows = field_grid_rows(model, sigma_v, tau, evaluation_points(area, resolution))
    return write_csv(path, ['x', 'y', 'phi', 'prob'], rows)


def write_truth_dump(path: Path, truth: GroundTruth, area: AreaOfInterest, resolution: int) -> Path:
    return write_field_dump(path, truth.model, truth.noise_std, truth.threshold, area, resolution)


def write_estimate_trace(path: Path, record: RunRecord) -> Path:
    """k,beta_1..beta_p,grad_norm,hess_min_eig,damped"""
    p = record.beta_trace.shape[1]
    header = ['k'] + [f'beta_{i + 1}' for i in range(p)] + ['grad_norm', 'hess_min_eig', 'damped']
    rows = (
        [k, *beta, diag.grad_norm, diag.hess_min_eig, diag.damped]
        for k, (beta, diag) in enumerate(zip(record.beta_trace, record.diagnostics))
    )
    return write_csv(path, header, rows)


def write_waypoints(path: Path, record: RunRecord) -> Path:
    rows = ([w.k, w.x, w.y, w.target_x, w.target_y, w.lambda_min] for w in record.waypoints)
    return write_csv(path, ['k', 'x', 'y', 'target_x', 'target_y', 'lambda_min'], rows)


def write_results(path: Path, records: Sequence[RunRecord]) -> Path:
    """scenario_id,seed,estimator,final_mse,time_s,aborted"""
    rows = ([r.scenario_id, r.seed, r.estimator, r.final_mse, r.time_s, r.aborted] for r in records)
    return write_csv(path, ['scenario_id', 'seed', 'estimator', 'final_mse', 'time_s', 'aborted'], rows)


def write_per_step_mse(path: Path, records: Sequence[RunRecord]) -> Path:
    rows = (
        [r.scenario_id, k, mse] for r in records for k, mse in enumerate(r.mse_trace)
    )
    return write_csv(path, ['scenario_id', 'k', 'mse'], rows)


def write_box_plot(path: Path, summaries: Sequence[BenchmarkSummary]) -> Path:
    """每个估计器一行，离群点作为可变数量的尾列"""
    rows = (
        [s.estimator, s.box.q1, s.box.median, s.box.q3, s.box.whisker_lo, s.box.whisker_hi, *s.box.outliers]
        for s in summaries
    )
    return write_csv(path, ['estimator', 'q1', 'median', 'q3', 'whisker_lo', 'whisker_hi', 'outliers...'], rows)


def write_regret(path: Path, regret: np.ndarray) -> Path:
    return write_csv(path, ['k', 'regret'], enumerate(regret))


def write_window_min_eig(path: Path, values: np.ndarray) -> Path:
    return write_csv(path, ['start', 'lambda_min'], enumerate(values))


def run_artifacts(out_dir: Path, record: RunRecord, resolution: int,
                  area: AreaOfInterest, per_step_mse: bool = True, traces: bool = True) -> List[Path]:
    """单次运行的全部产物"""
    out_dir = Path(out_dir)
    truth = record.truth
    written = [
        write_results(out_dir / 'results.csv', [record]),
        write_truth_dump(out_dir / 'true_field.csv', truth, area, resolution),
        write_field_dump(out_dir / 'estimated_field.csv', record.final_estimate,
                         truth.noise_std, truth.threshold, area, resolution),
    ]
    if traces:
        written.append(write_estimate_trace(out_dir / 'trace.csv', record))
        written.append(write_waypoints(out_dir / 'waypoints.csv', record))
    if per_step_mse:
        written.append(write_per_step_mse(out_dir / 'per_step_mse.csv', [record]))
    if record.regret is not None:
        written.append(write_regret(out_dir / 'regret.csv', record.regret))
    if record.window_min_eigs is not None:
        written.append(write_window_min_eig(out_dir / 'window_min_eig.csv', record.window_min_eigs))
    return written


def summary_rows(summaries: Sequence[BenchmarkSummary]) -> List[Dict[str, Any]]:
    """汇总表的行，用于打印和 YAML 存档"""
    return [
        {
            'estimator': s.estimator,
            'median_mse': s.median_mse,
            'min_mse': s.min_mse,
            'max_mse': s.max_mse,
            'mean_time_s': s.mean_time_s,
            'completed': s.completed,
            'aborted': s.aborted,
            'total': s.total,
        }
        for s in summaries
    ]


def format_summary_table(summaries: Sequence[BenchmarkSummary]) -> str:
    """按方法逐行列出 MSE 中位数/最小/最大与单次耗时"""
    header = f"{'Method':<10} {'median MSE':>12} {'min MSE':>12} {'max MSE':>12} {'Time/Run (s)':>13} {'done':>9}"
    lines = [header, '-' * len(header)]
    for s in summaries:
        lines.append(
            f"{s.estimator:<10} {s.median_mse:>12.5f} {s.min_mse:>12.5f} {s.max_mse:>12.5f} "
            f"{s.mean_time_s:>13.3f} {f'{s.completed}/{s.total}':>9}"
        )
    return '\n'.join(lines)
