# 计算耗时监控
# 记录估计器与主动感知每步的耗时，用于比较单步开销是否随 k 增长

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Dict, List


@dataclass
class TimingMetrics:
    """耗时指标"""
    total_seconds: float = 0.0
    total_steps: int = 0
    step_seconds: List[float] = field(default_factory=list)
    by_phase: Dict[str, float] = field(default_factory=dict)


class StepTimingMonitor:
    """单步耗时监控器"""

    def __init__(self):
        self.logger = logging.getLogger(__name__)
        self.metrics = TimingMetrics()
        self._current_step = 0.0

    @contextmanager
    def phase(self, name: str):
        """计时一个阶段（estimator / sensing），累加到当前步"""
        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed = time.perf_counter() - start
            self._current_step += elapsed
            self.metrics.by_phase[name] = self.metrics.by_phase.get(name, 0.0) + elapsed

    def end_step(self):
        """结束当前步"""
        self.metrics.step_seconds.append(self._current_step)
        self.metrics.total_seconds += self._current_step
        self.metrics.total_steps += 1
        self._current_step = 0.0

    def get_statistics(self) -> Dict[str, Any]:
        """获取统计信息"""
        if self.metrics.total_steps == 0:
            return {'message': '暂无数据'}

        return {
            'total_steps': self.metrics.total_steps,
            'total_seconds': self.metrics.total_seconds,
            'avg_step_seconds': self.metrics.total_seconds / self.metrics.total_steps,
            'by_phase': dict(self.metrics.by_phase),
        }


def step_time_ratio(step_seconds: List[float], early: range, late: range) -> float:
    """后段与前段平均单步耗时之比"""
    early_values = [step_seconds[i] for i in early if i < len(step_seconds)]
    late_values = [step_seconds[i] for i in late if i < len(step_seconds)]
    if not early_values or not late_values:
        raise ValueError("耗时记录不足以计算比值")
    early_mean = sum(early_values) / len(early_values)
    late_mean = sum(late_values) / len(late_values)
    return late_mean / early_mean
