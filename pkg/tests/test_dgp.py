import math

import numpy as np
import pytest

from eivdc.data_model import cross_section_at
from eivdc.dgp import (
    DgpConfig,
    generate_panel,
    sample_std_gamma,
    simulate_ar1,
    target_covariance,
)
from eivdc.errors import CalibrationError, DegeneracyError, ParameterError
from eivdc.estimators import ols


class TestSampleStdGamma:
    def test_standardized_moments(self, rng):
        draws = sample_std_gamma(0.32, 1.0, 10**6, rng)
        # tolerances from the CLT: sd/sqrt(n) with sd 1, plus slack for var
        assert abs(draws.mean()) < 4e-3
        assert abs(draws.var() - 1.0) < 1e-2

    def test_exponential_skewness(self, rng):
        draws = sample_std_gamma(1.0, 1.0, 10**6, rng)
        skew = np.mean(draws**3)  # mean 0, var 1 by construction
        assert abs(skew - 2.0) < 0.05

    def test_invalid_shape(self, rng):
        with pytest.raises(ParameterError):
            sample_std_gamma(0.0, 1.0, 10, rng)
        with pytest.raises(ParameterError):
            sample_std_gamma(1.0, -1.0, 10, rng)


class TestSimulateAr1:
    def test_degenerate_recursion(self):
        v = np.arange(12.0)
        out = simulate_ar1(0.0, 0.0, v, burn_in=5)
        assert np.array_equal(out, v[5:])

    def test_fixed_point_short_burn(self):
        out = simulate_ar1(1.0, 0.5, np.zeros(15), burn_in=10)
        assert np.all(np.abs(out - 2.0) <= 0.5**10 * 2.0 + 1e-12)

    def test_fixed_point_paper_values(self):
        out = simulate_ar1(0.570, 0.78, np.zeros(220), burn_in=200)
        assert np.allclose(out, 0.570 / 0.22, atol=1e-8)

    def test_matrix_input(self):
        v = np.ones((3, 7))
        out = simulate_ar1(0.0, 0.0, v, burn_in=2)
        assert out.shape == (3, 5)

    def test_bad_burn_in(self):
        with pytest.raises(ParameterError):
            simulate_ar1(0.0, 0.5, np.zeros(5), burn_in=5)


class TestTargetCovariance:
    C = np.array([[16.130, 0.489], [0.489, 0.258]])

    def test_hits_target_exactly(self, rng):
        xi = rng.normal(2.0, 3.0, size=(200, 4))
        z = 0.3 * xi + rng.normal(0.0, 1.0, size=(200, 4))
        xi2, z2 = target_covariance(xi, z, self.C, 0.45)
        got = np.cov(np.stack([xi2.ravel(), z2.ravel()]), ddof=1)
        want = np.array([
            [0.45 * 16.130, math.sqrt(0.45) * 0.489],
            [math.sqrt(0.45) * 0.489, 0.258],
        ])
        assert np.allclose(got, want, rtol=1e-10, atol=1e-12)

    def test_means_preserved(self, rng):
        xi = rng.normal(2.0, 3.0, size=1000)
        z = 0.3 * xi + rng.normal(0.0, 1.0, size=1000)
        xi2, z2 = target_covariance(xi, z, self.C, 0.45)
        assert np.isclose(xi2.mean(), xi.mean())
        assert np.isclose(z2.mean(), z.mean())

    def test_idempotent_on_targeted_input(self, rng):
        xi = rng.normal(0.0, 1.0, size=5000)
        z = rng.normal(0.0, 1.0, size=5000)
        xi1, z1 = target_covariance(xi, z, self.C, 0.45)
        xi2, z2 = target_covariance(xi1, z1, self.C, 0.45)
        assert np.allclose(xi1, xi2, rtol=1e-10, atol=1e-10)
        assert np.allclose(z1, z2, rtol=1e-10, atol=1e-10)

    def test_rank_deficient_input(self, rng):
        xi = rng.normal(size=100)
        with pytest.raises(DegeneracyError):
            target_covariance(xi, xi.copy(), self.C, 0.45)


class TestDgpConfig:
    def test_defaults_valid(self):
        DgpConfig()

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"shape_u": 0.0},
            {"tau_sq": 0.0},
            {"tau_sq": 1.5},
            {"phi_xi": 1.0},
            {"burn_in": -1},
            {"sigma_y_sq": 0.0},
            {"c11": -1.0},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ParameterError):
            DgpConfig(**kwargs)

    def test_round_trip_dict(self):
        cfg = DgpConfig(n=10, T=2, seed=5)
        assert DgpConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_field(self):
        with pytest.raises(ParameterError):
            DgpConfig.from_dict({"nope": 1})


class TestGeneratePanel:
    def test_deterministic(self):
        cfg = DgpConfig(n=40, T=3, seed=11)
        a = generate_panel(cfg)
        b = generate_panel(cfg)
        assert np.array_equal(a.y, b.y) and np.array_equal(a.x, b.x)

    def test_beta_gamma_zero_collapse(self):
        cfg = DgpConfig(n=4000, T=5, beta=0.0, gamma=0.0, seed=2)
        sim = generate_panel(cfg)
        var_y = np.var(sim.y.ravel(), ddof=1)
        # var(y) = sigma_y_sq exactly by the calibrated noise scale (up to
        # the sample variance of the standardized noise draw)
        assert abs(var_y - cfg.sigma_y_sq) / cfg.sigma_y_sq < 0.10
        corr = np.corrcoef(sim.x.ravel(), sim.y.ravel())[0, 1]
        assert abs(corr) < 3.0 / math.sqrt(sim.y.size)

    def test_calibration_error_names_values(self):
        with pytest.raises(CalibrationError, match="sigma_y_sq"):
            generate_panel(DgpConfig(n=200, T=3, sigma_y_sq=1e-6, seed=0))

    def test_attenuation_factor_is_tau_sq(self):
        # slope of pooled OLS(y on x alone, demeaned) over true beta -> tau_sq
        cfg = DgpConfig(n=4000, T=10, beta=0.025, gamma=0.0, seed=8)
        sim = generate_panel(cfg)
        x = sim.x.ravel() - sim.x.mean()
        y = sim.y.ravel() - sim.y.mean()
        slope = float(x @ y / (x @ x))
        assert abs(slope / cfg.beta - cfg.tau_sq) < 0.02

    def test_latent_innovation_skewness_positive(self):
        sim = generate_panel(DgpConfig(n=500, T=10, seed=3))
        xi = sim.xi.ravel() - sim.xi.mean()
        assert np.mean(xi**3) > 0

    @pytest.mark.parametrize("shape", [0.005, 0.05, 0.5, 5.0])
    def test_no_nan_across_shape_sweep(self, shape):
        cfg = DgpConfig(
            n=100, T=4, shape_u=shape, shape_e=shape,
            shape_v_xi=shape, shape_v_z=shape, seed=4,
        )
        sim = generate_panel(cfg)
        for arr in (sim.xi, sim.z, sim.x, sim.y):
            assert np.all(np.isfinite(arr))

    def test_ols_attenuation_over_replications(self):
        # pooled OLS slope with controls, averaged over replications, lands
        # on the plim implied by the targeted covariance and noise scales
        slopes = []
        for rep in range(120):
            panel = generate_panel(DgpConfig(n=500, T=5, seed=1000 + rep)).to_panel()
            z = np.column_stack([np.ones(panel.n_obs), panel.z])
            from eivdc.data_model import CrossSection

            beta, _ = ols(CrossSection(panel.y, panel.x, z))
            slopes.append(beta)
        ratio = np.mean(slopes) / 0.025
        assert abs(ratio - 0.44) < 0.02

    def test_to_panel_layout(self):
        sim = generate_panel(DgpConfig(n=7, T=3, seed=1))
        panel = sim.to_panel(first_year=1990)
        assert panel.n_obs == 21
        assert list(panel.years()) == [1990, 1991, 1992]
        assert cross_section_at(panel, 1991).n == 7
