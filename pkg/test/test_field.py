# 场模型与测量仿真测试

import math

import numpy as np
import pytest
from scipy.stats import norm

from field_estimation.field import (
    FieldModel,
    GroundTruth,
    Measurement,
    detection_probabilities,
    detection_probability,
    evaluation_points,
    field_grid_rows,
    field_value,
    field_values,
    grid_basis,
    kernel_matrix,
    kernel_vector,
    sample_ground_truth,
    scenario_streams,
    simulate_measurement,
    simulate_readings,
)
from field_estimation.models import AreaOfInterest, TruthSamplingConfig


def single_kernel(beta: float = 1.0, center=(50.0, 50.0), sigma: float = 10.0) -> FieldModel:
    return FieldModel([center], [sigma], [beta])


def constant_truth(phi: float, noise_variance: float = 0.1, threshold: float = 1.0) -> GroundTruth:
    """在中心处 phi(c) = beta 的单核真值"""
    return GroundTruth(single_kernel(beta=phi), noise_variance, threshold)


class TestFieldModel:

    def test_rejects_mismatched_lengths(self):
        with pytest.raises(ValueError):
            FieldModel([[0.0, 0.0], [1.0, 1.0]], [1.0], [1.0, 2.0])

    def test_rejects_nonpositive_length_scale(self):
        with pytest.raises(ValueError):
            FieldModel([[0.0, 0.0]], [0.0], [1.0])

    def test_arrays_are_read_only(self):
        model = single_kernel()
        with pytest.raises(ValueError):
            model.coefficients[0] = 2.0

    def test_with_coefficients_keeps_basis(self, basis):
        beta = np.arange(basis.p, dtype=float)
        estimate = basis.with_coefficients(beta)
        np.testing.assert_array_equal(estimate.centers, basis.centers)
        np.testing.assert_array_equal(estimate.coefficients, beta)

    def test_measurement_signed_consistency(self):
        with pytest.raises(ValueError):
            Measurement((0.0, 0.0), 1, -1, 0)
        m = Measurement.from_binary((1, 2), 0, 3)
        assert m.z_signed == -1
        assert m.position == (1.0, 2.0)


class TestKernel:

    def test_kernel_at_center_is_one(self, basis):
        assert kernel_vector(basis, basis.centers[0])[0] == 1.0

    def test_kernel_at_one_length_scale(self):
        model = single_kernel(sigma=10.0)
        assert kernel_vector(model, (60.0, 50.0))[0] == pytest.approx(math.exp(-1.0), abs=1e-15)

    def test_default_grid_matches_scalar_evaluation(self, basis):
        expected = [
            math.exp(-((cx - 50.0) ** 2 + (cy - 50.0) ** 2) / 25.0 ** 2) for cx, cy in basis.centers
        ]
        np.testing.assert_allclose(kernel_vector(basis, (50.0, 50.0)), expected, rtol=1e-14)

    def test_entries_in_unit_interval(self, basis, rng):
        for x in rng.uniform(0, 100, size=(20, 2)):
            k = kernel_vector(basis, x)
            assert np.all(k > 0) and np.all(k <= 1)

    def test_kernel_matrix_matches_vectors(self, basis, rng):
        points = rng.uniform(0, 100, size=(7, 2))
        rows = np.vstack([kernel_vector(basis, x) for x in points])
        np.testing.assert_allclose(kernel_matrix(basis, points), rows, rtol=1e-12)


class TestFieldValue:

    def test_zero_coefficients(self, basis):
        assert field_value(basis, (30.0, 70.0)) == 0.0

    def test_single_kernel_at_center(self):
        assert field_value(single_kernel(beta=1.0), (50.0, 50.0)) == 1.0

    def test_matches_brute_force_sum(self, rng):
        centers = rng.uniform(0, 100, size=(4, 2))
        sigmas = rng.uniform(20, 40, size=4)
        betas = rng.uniform(0.5, 1.5, size=4)
        model = FieldModel(centers, sigmas, betas)
        x = (31.0, 62.0)
        expected = 0.0
        for c, s, b in zip(centers, sigmas, betas):
            expected += b * math.exp(-((c[0] - x[0]) ** 2 + (c[1] - x[1]) ** 2) / s ** 2)
        assert field_value(model, x) == pytest.approx(expected, rel=1e-12)

    def test_linear_in_coefficients(self, basis, rng):
        beta = rng.uniform(0, 1, size=basis.p)
        x = (12.0, 88.0)
        scaled = field_value(basis.with_coefficients(3.5 * beta), x)
        assert scaled == pytest.approx(3.5 * field_value(basis.with_coefficients(beta), x), rel=1e-12)

    def test_vectorized_matches_scalar(self, basis, rng):
        model = basis.with_coefficients(rng.uniform(0, 1, size=basis.p))
        points = rng.uniform(0, 100, size=(10, 2))
        scalar = [field_value(model, x) for x in points]
        np.testing.assert_allclose(field_values(model, points), scalar, rtol=1e-12, atol=1e-12)


class TestDetectionProbability:
    sigma_v = math.sqrt(0.1)

    def test_at_threshold(self):
        assert detection_probability(single_kernel(beta=1.0), self.sigma_v, 1.0, (50, 50)) == pytest.approx(0.5, abs=1e-15)

    def test_one_sigma_above(self):
        model = single_kernel(beta=1.0 + self.sigma_v)
        assert detection_probability(model, self.sigma_v, 1.0, (50, 50)) == pytest.approx(0.841345, abs=1e-6)

    def test_two_sigma_below(self):
        model = single_kernel(beta=1.0 - 2 * self.sigma_v)
        assert detection_probability(model, self.sigma_v, 1.0, (50, 50)) == pytest.approx(0.022750, abs=1e-6)

    def test_matches_normal_cdf(self, rng):
        for phi in rng.uniform(-1, 3, size=20):
            p = detection_probability(single_kernel(beta=phi), self.sigma_v, 1.0, (50, 50))
            assert p == pytest.approx(norm.sf((1.0 - phi) / self.sigma_v), abs=1e-12)

    def test_strictly_increasing_in_field(self):
        values = [
            detection_probability(single_kernel(beta=phi), self.sigma_v, 1.0, (50, 50))
            for phi in np.linspace(0.0, 2.0, 100)
        ]
        assert np.all(np.diff(values) > 0)

    def test_rejects_nonpositive_sigma(self):
        with pytest.raises(ValueError):
            detection_probability(single_kernel(), 0.0, 1.0, (0, 0))

    def test_vectorized_matches_scalar(self, basis, rng):
        model = basis.with_coefficients(rng.uniform(0, 1.5, size=basis.p))
        points = rng.uniform(0, 100, size=(10, 2))
        scalar = [detection_probability(model, self.sigma_v, 1.0, x) for x in points]
        np.testing.assert_allclose(detection_probabilities(model, self.sigma_v, 1.0, points), scalar, atol=1e-12)


class TestGroundTruth:

    def test_rejects_invalid_noise(self):
        with pytest.raises(ValueError):
            GroundTruth(single_kernel(), 0.0, 1.0)

    def test_fixed_seed_reproducible(self, area):
        a = sample_ground_truth(area, np.random.default_rng(3))
        b = sample_ground_truth(area, np.random.default_rng(3))
        np.testing.assert_array_equal(a.model.centers, b.model.centers)
        np.testing.assert_array_equal(a.model.length_scales, b.model.length_scales)
        np.testing.assert_array_equal(a.model.coefficients, b.model.coefficients)

    def test_default_parameters_within_supports(self, area, rng):
        for _ in range(50):
            truth = sample_ground_truth(area, rng)
            model = truth.model
            assert model.p == 4
            assert np.all((model.coefficients >= 0.7) & (model.coefficients <= 1.4))
            assert np.all((model.centers >= 5) & (model.centers <= 95))
            assert np.all((model.length_scales >= 25) & (model.length_scales <= 45))
            assert truth.noise_variance == 0.1
            assert truth.threshold == 1.0

    def test_coefficient_mean(self, area):
        sampling = TruthSamplingConfig(p_true=10_000)
        truth = sample_ground_truth(area, np.random.default_rng(0), sampling)
        assert abs(truth.model.coefficients.mean() - 1.05) < 0.02

    def test_threshold_shared_from_cost(self, area, rng):
        assert sample_ground_truth(area, rng, threshold=1.5).threshold == 1.5


class TestMeasurementSimulation:

    def test_far_above_threshold_always_detects(self, rng):
        truth = constant_truth(1.0 + 100 * math.sqrt(0.1))
        for t in range(100):
            assert simulate_measurement(truth, (50.0, 50.0), t, rng).z == 1

    def test_at_threshold_is_fair_coin(self, rng):
        truth = constant_truth(1.0)
        n = 100_000
        frequency = simulate_readings(truth, (50.0, 50.0), n, rng).mean()
        assert abs(frequency - 0.5) <= 3 * math.sqrt(0.25 / n)

    def test_fixed_seed_bit_reproducible(self, area):
        truth = sample_ground_truth(area, np.random.default_rng(1))
        a = [simulate_measurement(truth, (20.0, 30.0), t, np.random.default_rng(9)) for t in range(5)]
        b = [simulate_measurement(truth, (20.0, 30.0), t, np.random.default_rng(9)) for t in range(5)]
        assert a == b

    def test_monte_carlo_matches_detection_probability(self):
        """5 个真值场 x 5 个位置，经验频率在 3 倍二项标准误内

        25 次比较中单次越过 3 倍标准误的概率约 0.27%，允许其中一次越界但不超过 4 倍。
        """
        area = AreaOfInterest()
        rng = np.random.default_rng(2024)
        n = 100_000
        z_scores = []
        for _ in range(5):
            truth = sample_ground_truth(area, rng)
            for x in rng.uniform(0, 100, size=(5, 2)):
                p = detection_probability(truth.model, truth.noise_std, truth.threshold, x)
                frequency = simulate_readings(truth, x, n, rng).mean()
                stderr = math.sqrt(max(p * (1 - p), 1e-12) / n)
                z_scores.append(abs(frequency - p) / stderr)
        z_scores = np.array(z_scores)
        assert np.sum(z_scores > 3) <= 1
        assert np.all(z_scores <= 4)


class TestGrids:

    def test_default_basis_grid(self, area):
        basis = grid_basis(area, 4, 25.0)
        assert basis.p == 16
        assert sorted(set(basis.centers[:, 0])) == [12.5, 37.5, 62.5, 87.5]
        np.testing.assert_array_equal(basis.centers[1], [12.5, 37.5])
        assert np.all(basis.length_scales == 25.0)
        assert np.all(basis.coefficients == 0.0)

    def test_evaluation_points_cell_centered(self, area):
        points = evaluation_points(area, 32)
        assert points.shape == (1024, 2)
        np.testing.assert_allclose(points[0], [100 / 64, 100 / 64])
        np.testing.assert_allclose(points[1], [100 / 64, 3 * 100 / 64])

    def test_field_grid_rows(self, area):
        truth = sample_ground_truth(area, np.random.default_rng(5))
        rows = field_grid_rows(truth.model, truth.noise_std, truth.threshold, evaluation_points(area, 4))
        assert len(rows) == 16
        for x, y, phi, prob in rows:
            assert 0.0 < prob < 1.0
            assert phi == pytest.approx(field_value(truth.model, (x, y)), rel=1e-12)

    def test_scenario_streams_are_independent_and_reproducible(self):
        a = [g.random() for g in scenario_streams(11)]
        b = [g.random() for g in scenario_streams(11)]
        assert a == b
        assert len(set(a)) == 4
