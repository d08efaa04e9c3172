# 实验框架测试

import numpy as np
import pytest
from scipy.linalg import LinAlgError

from field_estimation import sensing
from field_estimation.eval_harness import (
    EvalGrid,
    ProbabilityFieldEvaluator,
    RunRecord,
    box_plot_stats,
    estimate_trace,
    machine_info,
    mse_probability_field,
    run_batch,
    run_scenario,
    summarize,
)
from field_estimation.field import FieldModel, GroundTruth, detection_probability, grid_basis
from field_estimation.models import AreaOfInterest, ScenarioConfig
from field_estimation.timing import StepTimingMonitor, step_time_ratio


def single_kernel_truth(beta: float) -> GroundTruth:
    return GroundTruth(FieldModel([[50.0, 50.0]], [20.0], [beta]), 0.1, 1.0)


def synthetic_record(scenario_id: int, final_mse: float, aborted: bool = False,
                     estimator: str = 'approx', time_s: float = 1.0) -> RunRecord:
    truth = single_kernel_truth(1.0)
    return RunRecord(
        scenario_id=scenario_id, seed=scenario_id, estimator=estimator, truth=truth, basis=truth.model,
        final_mse=final_mse, mse_trace=np.array([final_mse]), beta_trace=np.zeros((1, 1)),
        diagnostics=[], waypoints=[], measurements=[], time_s=time_s, step_seconds=[], aborted=aborted,
    )


def comparable(record: RunRecord):
    """除耗时外的全部字段，用 repr 比较以便 nan 相等"""
    return repr((
        record.final_mse,
        record.mse_trace.tolist(),
        record.beta_trace.tolist(),
        [(d.grad_norm, d.hess_min_eig, d.damped) for d in record.diagnostics],
        record.waypoints,
        record.measurements,
    ))


class TestMse:

    def test_identical_fields(self, area):
        truth = single_kernel_truth(1.2)
        assert mse_probability_field(truth, truth.model, EvalGrid(area, 8)) == 0.0

    def test_extreme_fields(self, area):
        truth = GroundTruth(FieldModel([[50.0, 50.0]], [1e6], [1e3]), 0.1, 1.0)
        estimate = FieldModel([[50.0, 50.0]], [1e6], [-1e3])
        assert mse_probability_field(truth, estimate, EvalGrid(area, 4)) == pytest.approx(1.0, abs=1e-12)

    def test_three_point_hand_sum(self, area):
        truth = single_kernel_truth(1.3)
        estimate = FieldModel([[50.0, 50.0]], [20.0], [0.8])
        grid = EvalGrid(area, 1)
        object.__setattr__(grid, 'points', np.array([[50.0, 50.0], [10.0, 90.0], [65.0, 40.0]]))
        expected = np.mean([
            (detection_probability(truth.model, truth.noise_std, 1.0, x)
             - detection_probability(estimate, truth.noise_std, 1.0, x)) ** 2
            for x in grid.points
        ])
        assert mse_probability_field(truth, estimate, grid) == pytest.approx(expected, abs=1e-12)

    def test_symmetric(self, area):
        a = single_kernel_truth(1.3)
        b = single_kernel_truth(0.6)
        grid = EvalGrid(area, 8)
        assert mse_probability_field(a, b.model, grid) == pytest.approx(mse_probability_field(b, a.model, grid), abs=1e-15)

    def test_grid_size(self, area):
        grid = EvalGrid(area)
        assert len(grid) == 1024
        assert grid.points.shape == (1024, 2)

    def test_rejects_empty_grid(self, area):
        with pytest.raises(ValueError):
            EvalGrid(area, 0)

    def test_evaluator_matches_direct(self, area, rng):
        truth = single_kernel_truth(1.1)
        basis = grid_basis(area, 4, 25.0)
        grid = EvalGrid(area, 16)
        evaluator = ProbabilityFieldEvaluator(truth, basis, grid)
        beta = rng.uniform(0, 1, size=basis.p)
        assert evaluator.mse(beta) == pytest.approx(
            mse_probability_field(truth, basis.with_coefficients(beta), grid), abs=1e-12
        )


class TestRunScenario:

    def test_zero_steps(self, small_scenario):
        record = run_scenario(small_scenario.model_copy(update={'steps': 0}))
        assert record.steps_completed == 0
        assert record.mse_trace.shape == (1,)
        assert record.final_mse == record.mse_trace[0]
        assert record.beta_trace.shape == (1, 4)
        assert record.waypoints == []
        assert not record.aborted

    def test_traces_have_consistent_lengths(self, small_scenario):
        record = run_scenario(small_scenario)
        n = small_scenario.steps
        assert record.steps_completed == n
        assert record.mse_trace.shape == (n + 1,)
        assert record.beta_trace.shape == (n + 1, 4)
        assert len(record.diagnostics) == n + 1
        assert len(record.waypoints) == n
        assert len(record.step_seconds) == n
        assert np.isnan(record.diagnostics[0].grad_norm)
        assert np.all((record.mse_trace >= 0) & (record.mse_trace <= 1))
        assert record.time_s >= 0

    def test_waypoints_follow_motion_model(self, small_scenario):
        record = run_scenario(small_scenario)
        area = small_scenario.area
        assert (record.waypoints[0].x, record.waypoints[0].y) == area.center
        for previous, current in zip(record.waypoints, record.waypoints[1:]):
            step = np.hypot(current.x - previous.x, current.y - previous.y)
            assert step <= small_scenario.sensing.step + 1e-9
            assert area.contains((current.x, current.y))
        assert all(np.isfinite(w.lambda_min) for w in record.waypoints)

    @pytest.mark.parametrize("estimator", ['approx', 'exact'])
    def test_deterministic(self, small_scenario, estimator):
        config = small_scenario.with_estimator(estimator)
        assert comparable(run_scenario(config)) == comparable(run_scenario(config))

    def test_estimators_share_ground_truth(self, small_scenario):
        exact = run_scenario(small_scenario.with_estimator('exact'))
        approx = run_scenario(small_scenario.with_estimator('approx'))
        np.testing.assert_array_equal(exact.truth.model.centers, approx.truth.model.centers)
        np.testing.assert_array_equal(exact.beta_trace[0], approx.beta_trace[0])
        assert exact.steps_completed == approx.steps_completed
        assert not np.array_equal(exact.beta_trace, approx.beta_trace)

    def test_fixed_mode_never_moves(self, small_scenario):
        config = small_scenario.model_copy(update={
            'sensing': small_scenario.sensing.model_copy(update={'mode': 'fixed'}),
            'initial_position': (30.0, 70.0),
        })
        record = run_scenario(config)
        assert {(w.x, w.y) for w in record.waypoints} == {(30.0, 70.0)}
        assert all(np.isnan(w.lambda_min) for w in record.waypoints)

    def test_random_mode_targets_candidates(self, small_scenario):
        config = small_scenario.model_copy(update={
            'sensing': small_scenario.sensing.model_copy(update={'mode': 'random'}),
        })
        record = run_scenario(config)
        basis = grid_basis(config.area, config.basis.per_axis, config.basis.length_scale)
        centers = {tuple(c) for c in basis.centers}
        assert all((w.target_x, w.target_y) in centers for w in record.waypoints)

    def test_degenerate_hessian_aborts_run(self, small_scenario):
        config = small_scenario.model_copy(update={
            'estimator': 'exact',
            'exact': small_scenario.exact.model_copy(update={'regularization': 0.0}),
        })
        record = run_scenario(config)
        assert record.aborted
        assert record.failure_reason.startswith('DegenerateHessianError')
        assert record.steps_completed == 0
        assert record.final_mse == record.mse_trace[0]

    def test_eigensolver_failure_aborts_run(self, small_scenario, monkeypatch):
        def failing_eigh(*args, **kwargs):
            raise LinAlgError("did not converge")

        monkeypatch.setattr(sensing, 'eigh', failing_eigh)
        record = run_scenario(small_scenario.with_estimator('approx'))
        assert record.aborted
        assert record.failure_reason.startswith('EigenSolverError')
        assert record.steps_completed == 0

    def test_regret_diagnostics(self):
        """10 个种子、100 步、p = 4：遗憾部分和非负且单调，累计Hessian最小特征值单调"""
        for seed in range(10):
            config = ScenarioConfig(
                seed=seed, steps=100,
                basis={'per_axis': 2, 'length_scale': 40.0},
                eval_grid={'resolution': 4},
                diagnostics={'track_regret': True, 'window': 16},
            )
            record = run_scenario(config)
            assert record.diagnostics_error is None
            assert record.regret.shape == (100,)
            assert record.regret[0] >= -1e-9
            assert np.all(np.diff(record.regret) >= -1e-9)
            assert np.all(np.diff(record.accumulated_min_eigs) >= -1e-9)
            assert record.window_min_eigs.shape == (85,)

    def test_unconverged_batch_keeps_regret(self):
        """批量最优解迭代上限很低时，遗憾序列仍然完整，未收敛的步单独记录"""
        config = ScenarioConfig(
            seed=0, steps=30,
            basis={'per_axis': 2, 'length_scale': 40.0},
            eval_grid={'resolution': 4},
            diagnostics={'track_regret': True, 'window': 8},
            batch_oracle={'max_iterations': 1},
        )
        record = run_scenario(config)
        assert record.diagnostics_error is None
        assert record.regret.shape == (30,)
        assert np.all(np.isfinite(record.regret))
        assert np.all(np.diff(record.regret) >= -1e-9)
        assert len(record.regret_unconverged) >= 1
        assert all(0 <= k < 30 for k in record.regret_unconverged)

    def test_estimate_trace_pairs_estimate_with_history(self, small_scenario):
        record = run_scenario(small_scenario)
        trace = estimate_trace(record)
        assert len(trace) == small_scenario.steps
        beta, history = trace.entry(5)
        np.testing.assert_array_equal(beta, record.beta_trace[5])
        assert len(history) == 6


class TestBatch:

    def test_seeds_are_offsets(self, small_scenario):
        config = small_scenario.model_copy(update={'steps': 5})
        records = run_batch(config, 3)
        assert [r.seed for r in records] == [7, 8, 9]
        assert [r.scenario_id for r in records] == [0, 1, 2]

    def test_batch_reproducible(self, small_scenario):
        config = small_scenario.model_copy(update={'steps': 10})
        a = [comparable(r) for r in run_batch(config, 2, 'exact')]
        b = [comparable(r) for r in run_batch(config, 2, 'exact')]
        assert a == b

    def test_process_pool_matches_serial(self, small_scenario):
        config = small_scenario.model_copy(update={'steps': 10})
        serial = [comparable(r) for r in run_batch(config, 3, workers=1)]
        parallel = [comparable(r) for r in run_batch(config, 3, workers=2)]
        assert serial == parallel

    def test_rejects_empty_batch(self, small_scenario):
        with pytest.raises(ValueError):
            run_batch(small_scenario, 0)


class TestSummary:

    def test_single_record(self):
        summary = summarize([synthetic_record(0, 0.004)])
        assert summary.median_mse == summary.min_mse == summary.max_mse == 0.004
        assert summary.completed == 1

    def test_order_statistics(self):
        summary = summarize([synthetic_record(i, v) for i, v in enumerate([3.0, 1.0, 2.0])])
        assert (summary.median_mse, summary.min_mse, summary.max_mse) == (2.0, 1.0, 3.0)
        assert summary.min_mse <= summary.median_mse <= summary.max_mse

    def test_aborted_runs_counted_not_summarized(self):
        records = [synthetic_record(0, 0.1), synthetic_record(1, 0.3), synthetic_record(2, 99.0, aborted=True)]
        summary = summarize(records)
        assert summary.aborted == 1
        assert summary.completed == 2
        assert summary.max_mse == 0.3
        assert summary.completion_rate == pytest.approx(2 / 3)

    def test_mean_time(self):
        records = [synthetic_record(0, 0.1, time_s=1.0), synthetic_record(1, 0.2, time_s=3.0)]
        assert summarize(records).mean_time_s == 2.0

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            summarize([])

    def test_box_plot_whiskers(self):
        stats = box_plot_stats([1.0, 2.0, 3.0, 4.0, 5.0, 100.0])
        assert stats.median == 3.5
        assert stats.q1 == 2.25
        assert stats.q3 == 4.75
        assert stats.whisker_lo == 1.0
        assert stats.whisker_hi == 5.0
        assert stats.outliers == (100.0,)

    def test_box_plot_empty(self):
        assert np.isnan(box_plot_stats([]).median)


class TestTiming:

    def test_monitor_accumulates_phases(self):
        monitor = StepTimingMonitor()
        for _ in range(3):
            with monitor.phase('estimator'):
                pass
            with monitor.phase('sensing'):
                pass
            monitor.end_step()
        stats = monitor.get_statistics()
        assert stats['total_steps'] == 3
        assert set(stats['by_phase']) == {'estimator', 'sensing'}
        assert monitor.metrics.total_seconds == pytest.approx(sum(monitor.metrics.step_seconds))

    def test_ratio(self):
        assert step_time_ratio([1.0, 1.0, 3.0, 3.0], range(0, 2), range(2, 4)) == 3.0
        with pytest.raises(ValueError):
            step_time_ratio([1.0], range(0, 1), range(5, 6))

    def test_machine_info(self):
        info = machine_info()
        assert info['cpu_count_logical'] >= 1
        assert info['memory_total_gb'] > 0


class TestDefaultScenario:
    """默认 16 核配置下的短运行：估计质量与主动感知的基本行为"""

    def test_approx_moves_and_improves(self):
        config = ScenarioConfig(seed=0, steps=300, eval_grid={'resolution': 8})
        record = run_scenario(config.with_estimator('approx'))
        assert not record.aborted
        targets = {(w.target_x, w.target_y) for w in record.waypoints}
        positions = {(round(w.x, 6), round(w.y, 6)) for w in record.waypoints}
        assert len(targets) > 1
        assert len(positions) > 20
        assert record.final_mse < 0.5 * record.mse_trace[0]

    def test_exact_stays_bounded(self):
        config = ScenarioConfig(seed=0, steps=100, eval_grid={'resolution': 8})
        record = run_scenario(config.with_estimator('exact'))
        assert not record.aborted
        assert np.all(np.isfinite(record.beta_trace))
        assert np.max(np.abs(record.beta_trace)) < 200.0
        assert len({(w.target_x, w.target_y) for w in record.waypoints}) > 1
        assert record.final_mse < record.mse_trace[0]


@pytest.mark.slow
class TestBenchmarkScale:

    def test_approx_step_cost_constant_exact_grows(self):
        config = ScenarioConfig(seed=3, steps=1000)
        approx = run_scenario(config.with_estimator('approx'))
        exact = run_scenario(config.with_estimator('exact'))
        assert step_time_ratio(approx.step_seconds, range(0, 100), range(900, 1000)) <= 1.5
        assert step_time_ratio(exact.step_seconds, range(0, 100), range(900, 1000)) >= 3.0

    def test_benchmark_mse_bands(self):
        config = ScenarioConfig(seed=0, steps=1000)
        approx = summarize(run_batch(config, 100, 'approx', workers=4))
        assert approx.median_mse <= 0.008
        assert approx.max_mse <= 0.05
        assert approx.mean_time_s <= 10.0
        exact = summarize(run_batch(config, 100, 'exact', workers=4))
        assert exact.median_mse <= 0.012
        assert exact.completion_rate >= 0.9
