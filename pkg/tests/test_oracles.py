import math

import numpy as np
import pytest

from misodof.channel import CsitConfig
from misodof.mc import McConfig, estimate
from misodof.oracles import (
    QuadratureConfig,
    QuadratureError,
    conditional_log_bounds_check,
    exp_log_mean,
    rotation_mean_log_closed_form,
    rotation_mean_log_quadrature,
)

# Exact value of the exponential-log constant: -EulerGamma / ln 2.
GAMMA_EXACT = -0.832746177276867

TIGHT = QuadratureConfig(tolerance=1e-9)


class TestRotationIdentity:
    def test_closed_form_values(self):
        assert rotation_mean_log_closed_form(2.0, 1.0) == pytest.approx(2.0)
        assert rotation_mean_log_closed_form(3.0, 3.0) == pytest.approx(math.log2(9.0))
        assert rotation_mean_log_closed_form(0.0, 5.0) == pytest.approx(math.log2(25.0))

    def test_closed_form_domain(self):
        with pytest.raises(ValueError):
            rotation_mean_log_closed_form(0.0, 0.0)
        with pytest.raises(ValueError):
            rotation_mean_log_closed_form(-1.0, 2.0)

    def test_quadrature_reference_pairs(self):
        assert rotation_mean_log_quadrature(2.0, 1.0, TIGHT) == pytest.approx(2.0, abs=1e-9)
        assert rotation_mean_log_quadrature(0.3, 7.0, TIGHT) == pytest.approx(
            math.log2(49.0), abs=1e-9)

    def test_quadrature_singular_case(self):
        val = rotation_mean_log_quadrature(1.0, 1.0, QuadratureConfig(tolerance=1e-6))
        assert abs(val) < 1e-6

    def test_quadrature_random_pairs(self):
        rng = np.random.default_rng(31)
        config = QuadratureConfig(tolerance=1e-6)
        worst = 0.0
        for a, b in rng.uniform(0.05, 10.0, size=(100, 2)):
            err = abs(rotation_mean_log_quadrature(a, b, config)
                      - rotation_mean_log_closed_form(a, b))
            worst = max(worst, err)
        assert worst < 1e-6

    def test_budget_exhaustion_raises(self):
        starved = QuadratureConfig(n_points=64, tolerance=1e-9)
        with pytest.raises(QuadratureError):
            rotation_mean_log_quadrature(1.0, 1.0, starved)


class TestExpLogConstant:
    def test_quadrature_value(self):
        assert exp_log_mean() == pytest.approx(GAMMA_EXACT, abs=1e-4)

    def test_stable_under_budget_doubling(self):
        a = exp_log_mean(QuadratureConfig(n_points=1 << 22, tolerance=1e-6))
        b = exp_log_mean(QuadratureConfig(n_points=1 << 23, tolerance=1e-6))
        assert abs(a - b) < 1e-6

    def test_matches_monte_carlo(self):
        cfg = CsitConfig.from_sigma_sq(100.0, 0.25)

        def f(batch):
            mag_sq = batch.g_tilde[:, 0].real ** 2 + batch.g_tilde[:, 0].imag ** 2
            return np.log2(mag_sq / cfg.sigma_sq)

        est = estimate(f, McConfig(1_000_000, 32), cfg)
        assert abs(exp_log_mean() - est.mean) < 5.0 * est.std_error

    def test_log_scaling(self):
        # E log2(|2 X|^2 / s^2) = gamma + 2 for X with per-entry variance s^2
        cfg = CsitConfig.from_sigma_sq(100.0, 0.25)

        def f(batch):
            scaled = 2.0 * batch.g_tilde[:, 0]
            mag_sq = scaled.real ** 2 + scaled.imag ** 2
            return np.log2(mag_sq / cfg.sigma_sq)

        est = estimate(f, McConfig(1_000_000, 33), cfg)
        assert abs(est.mean - (GAMMA_EXACT + 2.0)) < 5.0 * est.std_error

    def test_config_validation(self):
        with pytest.raises(ValueError):
            QuadratureConfig(n_points=4)
        with pytest.raises(ValueError):
            QuadratureConfig(tolerance=0.0)


class TestConditionalLogBounds:
    def test_reference_configuration_passes(self):
        cfg = CsitConfig.from_sigma_sq(1000.0, 0.1)
        report = conditional_log_bounds_check(
            (cfg.snr_p, 0.0), cfg, McConfig(100_000, 34), n_batches=100)
        assert report.passed
        assert report.upper_margins.min() > 0.0
        assert report.lower_margins.min() > 0.0

    def test_no_csit_jensen_case(self):
        # sigma^2 = 1 zeroes the estimates, so the Jensen bound reads
        # E log2(1 + ||h||^2) <= log2(1 + 2)
        cfg = CsitConfig.from_sigma_sq(100.0, 1.0)
        report = conditional_log_bounds_check(
            (1.0, 1.0), cfg, McConfig(50_000, 35), n_batches=10)
        assert report.passed

        def f(batch):
            return np.log2(1.0 + np.sum(np.abs(batch.h) ** 2, axis=1))

        est = estimate(f, McConfig(200_000, 36), cfg)
        assert est.mean < math.log2(3.0)

    def test_jensen_bound_tight_for_tiny_error(self):
        # with a near-deterministic channel the bound collapses onto the
        # estimate; only tightness is checkable (the true gap sits below
        # the Monte Carlo noise floor)
        cfg = CsitConfig.from_alpha(2.0 ** 40, 1.0)
        report = conditional_log_bounds_check(
            (100.0, 10.0), cfg, McConfig(20_000, 37), n_batches=20)
        assert np.max(np.abs(report.upper_margins)) < 1e-3
        assert report.lower_margins.min() > 0.0

    def test_eigenvalue_validation(self):
        cfg = CsitConfig.from_sigma_sq(100.0, 0.25)
        with pytest.raises(ValueError):
            conditional_log_bounds_check((0.0, 0.0), cfg, McConfig(100, 38))
        with pytest.raises(ValueError):
            conditional_log_bounds_check((1.0, 2.0), cfg, McConfig(100, 38))
