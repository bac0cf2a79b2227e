import math
import warnings

import numpy as np
import pytest

from eivdc.data_model import CrossSection
from eivdc.errors import (
    NearSingularDenominatorError,
    ParameterError,
    SingularDesignError,
)
from eivdc.estimators import (
    asy_var_3m,
    gamma_ci_draws,
    geary_3m,
    moment_sums,
    ols,
    partial_out,
)

# several fixtures are noiseless with symmetric regressors: the ratio is
# exact there, but the denominator is legitimately near its standard error
pytestmark = pytest.mark.filterwarnings(
    "ignore::eivdc.estimators.WeakDenominatorWarning"
)


def brute_residualize(values, z):
    """Textbook normal equations, built independently of the library path."""
    if z.shape[1] == 0:
        return values.copy()
    coef = np.linalg.inv(z.T @ z) @ (z.T @ values)
    return values - z @ coef


def brute_3m(y, x, z):
    """Double-loop third-moment ratio on residualized data."""
    xr = brute_residualize(x, z)
    yr = brute_residualize(y, z)
    num = sum(xr[i] * yr[i] ** 2 for i in range(len(xr)))
    den = sum(xr[i] ** 2 * yr[i] for i in range(len(xr)))
    return num / den


def brute_asy_var(y, x, z, beta):
    xr = brute_residualize(x, z)
    yr = brute_residualize(y, z)
    n = len(xr)
    num = sum((xr[i] * yr[i] * (yr[i] - xr[i] * beta)) ** 2 for i in range(n)) / n
    den = (sum(xr[i] ** 2 * yr[i] for i in range(n)) / n) ** 2
    return num / den / n


class TestOls:
    def test_exact_fit(self):
        x = np.array([1.0, 2.0, 3.0])
        cs = CrossSection(2 * x, x)
        beta, gamma = ols(cs)
        assert beta == pytest.approx(2.0, abs=1e-14)
        assert gamma.size == 0

    def test_orthogonal(self):
        cs = CrossSection(np.array([1.0, 1.0]), np.array([1.0, -1.0]))
        beta, _ = ols(cs)
        assert beta == pytest.approx(0.0, abs=1e-14)

    def test_with_controls_exact(self, rng):
        x = rng.normal(size=50)
        z = np.column_stack([np.ones(50), rng.normal(size=50)])
        y = 1.5 * x + z @ np.array([0.3, -0.7])
        beta, gamma = ols(CrossSection(y, x, z))
        assert beta == pytest.approx(1.5, abs=1e-10)
        assert np.allclose(gamma, [0.3, -0.7], atol=1e-10)

    def test_singular_design(self):
        x = np.array([1.0, 2.0, 3.0])
        z = x[:, None]  # collinear with x
        with pytest.raises(SingularDesignError):
            ols(CrossSection(2 * x, x, z))


class TestGeary3m:
    def test_exact_linear(self):
        x = np.array([1.0, 2.0, 3.0])
        cs = CrossSection(2 * x, x)
        beta, gamma = geary_3m(cs)
        assert beta == pytest.approx(2.0, abs=1e-14)
        sums = moment_sums(cs.x, cs.y)
        assert sums.s_xy2 == pytest.approx(144.0)
        assert sums.s_x2y == pytest.approx(72.0)

    def test_hand_arithmetic(self):
        # sum(x*y^2) = 1 - 1 + 2 = 2, sum(x^2*y) = 1 + 1 - 4 = -2
        x = np.array([1.0, -1.0, 2.0])
        y = np.array([1.0, 1.0, -1.0])
        beta, _ = geary_3m(CrossSection(y, x))
        assert beta == pytest.approx(-1.0, abs=1e-14)
        assert beta == pytest.approx(brute_3m(y, x, np.empty((3, 0))), abs=1e-14)

    def test_matches_brute_force_with_controls(self, rng):
        for trial in range(10):
            n = 25
            x = rng.normal(size=n)
            z = np.column_stack([np.ones(n), rng.normal(size=n)])
            y = 0.4 * x + z @ np.array([0.2, 0.5]) + rng.normal(size=n)
            got, _ = geary_3m(CrossSection(y, x, z))
            want = brute_3m(y, x, z)
            assert got == pytest.approx(want, rel=1e-10)

    def test_gamma_recovered_on_noiseless_data(self, rng):
        x = rng.normal(size=60)
        z = np.column_stack([np.ones(60), rng.normal(size=60)])
        y = 0.8 * x + z @ np.array([1.0, -0.25])
        beta, gamma = geary_3m(CrossSection(y, x, z))
        assert beta == pytest.approx(0.8, abs=1e-8)
        assert np.allclose(gamma, [1.0, -0.25], atol=1e-8)

    def test_near_singular_denominator(self):
        x = np.array([1.0, -1.0])
        y = np.array([-1.0, 1.0])  # sum x^2 y = 0 exactly
        with pytest.raises(NearSingularDenominatorError):
            geary_3m(CrossSection(y, x))

    def test_weak_denominator_warns_on_symmetric_latents(self, rng):
        from eivdc.estimators import WeakDenominatorWarning

        hits = 0
        for _ in range(50):
            x = rng.normal(size=1000)  # symmetric: third moments vanish
            y = rng.normal(size=1000)
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                geary_3m(CrossSection(y, x))
            hits += any(issubclass(w.category, WeakDenominatorWarning) for w in caught)
        assert hits >= 40  # ~95% in theory

    def test_no_weak_warning_under_strong_identification(self, rng):
        from eivdc.estimators import WeakDenominatorWarning

        for _ in range(25):
            x = rng.gamma(1.0, size=1000) - 1.0
            y = 0.4 * x + 0.1 * rng.normal(size=1000)
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                geary_3m(CrossSection(y, x))
            assert not any(
                issubclass(w.category, WeakDenominatorWarning) for w in caught
            )

    def test_ols_equals_3m_on_noiseless_data(self, rng):
        x = rng.normal(size=40) + 0.5
        z = np.column_stack([np.ones(40), rng.normal(size=40)])
        y = 0.6 * x + z @ np.array([0.1, 0.9])
        b_ols, _ = ols(CrossSection(y, x, z))
        b_3m, _ = geary_3m(CrossSection(y, x, z))
        assert b_ols == pytest.approx(b_3m, abs=1e-9)

    def test_scale_equivariance(self, rng):
        x = rng.gamma(2.0, size=30)
        y = 0.7 * x + rng.normal(size=30)
        base, _ = geary_3m(CrossSection(y, x))
        up, _ = geary_3m(CrossSection(3.0 * y, x))
        down, _ = geary_3m(CrossSection(y, 2.0 * x))
        assert up == pytest.approx(3.0 * base, rel=1e-12)
        assert down == pytest.approx(base / 2.0, rel=1e-12)


class TestAsyVar3m:
    def test_zero_on_noiseless_data(self):
        x = np.array([1.0, 2.0, 4.0])
        cs = CrossSection(0.5 * x, x)
        beta, _ = geary_3m(cs)
        assert asy_var_3m(cs, beta) == pytest.approx(0.0, abs=1e-20)

    def test_matches_brute_force(self, rng):
        n = 30
        x = rng.gamma(1.0, size=n)
        z = np.column_stack([np.ones(n), rng.normal(size=n)])
        y = 0.3 * x + z @ np.array([0.2, 0.1]) + 0.5 * rng.normal(size=n)
        beta, _ = geary_3m(CrossSection(y, x, z))
        got = asy_var_3m(CrossSection(y, x, z), beta)
        want = brute_asy_var(y, x, z, beta)
        assert got == pytest.approx(want, rel=1e-10)
        assert got >= 0.0

    def test_nonnegative_fuzz(self, rng):
        for _ in range(25):
            n = 12
            x = rng.normal(size=n) + 1.0
            y = rng.normal(size=n) + 0.2 * x
            cs = CrossSection(y, x)
            beta, _ = geary_3m(cs)
            assert asy_var_3m(cs, beta) >= 0.0


class TestPartialOut:
    def test_no_controls_identity(self, rng):
        cs = CrossSection(rng.normal(size=10), rng.normal(size=10))
        res = partial_out(cs, np.arange(5), np.arange(5, 10))
        assert np.array_equal(res.x_dot, cs.x[:5])
        assert np.array_equal(res.y_ddot, cs.y[5:])

    def test_intercept_only_demeans(self, rng):
        y = rng.normal(size=8)
        x = rng.normal(size=8)
        cs = CrossSection(y, x, np.ones((8, 1)))
        res = partial_out(cs, np.arange(4), np.arange(4, 8))
        assert np.allclose(res.y_dot, y[:4] - y[:4].mean())
        assert np.allclose(res.x_ddot, x[4:] - x[4:].mean())

    def test_residuals_orthogonal_to_own_subset(self, rng):
        n = 40
        y = rng.normal(size=n)
        x = rng.normal(size=n)
        z = np.column_stack([np.ones(n), rng.normal(size=n), rng.normal(size=n)])
        idx1, idx2 = np.arange(20), np.arange(20, 40)
        res = partial_out(CrossSection(y, x, z), idx1, idx2)
        for vec, idx in ((res.x_dot, idx1), (res.y_dot, idx1),
                         (res.x_ddot, idx2), (res.y_ddot, idx2)):
            dots = z[idx].T @ vec
            scale = np.linalg.norm(z[idx], axis=0) * np.linalg.norm(vec) + 1e-30
            assert np.all(np.abs(dots / scale) < 1e-8)

    def test_overlap_rejected(self, rng):
        cs = CrossSection(rng.normal(size=6), rng.normal(size=6))
        with pytest.raises(ParameterError):
            partial_out(cs, np.arange(4), np.arange(3, 6))

    def test_rank_deficient_subset_named(self):
        # controls constant within the second subset only
        z = np.array([[1.0, 0.5], [1.0, 1.5], [1.0, 2.5], [1.0, 1.0], [1.0, 1.0]])
        cs = CrossSection(np.arange(5.0), np.arange(5.0) + 1.0, z)
        with pytest.raises(SingularDesignError, match="second subset"):
            partial_out(cs, np.arange(3), np.arange(3, 5))


class TestGammaCiDraws:
    def test_constant_draws_intercept_only(self, rng):
        y = rng.normal(size=12)
        x = rng.normal(size=12)
        cs = CrossSection(y, x, np.ones((12, 1)))
        beta, _ = ols(cs)
        draws = gamma_ci_draws(cs, np.full(5, beta))
        assert np.allclose(draws, np.mean(y - x * beta))

    def test_zero_draw_equals_ols_of_y_on_z(self, rng):
        n = 15
        y = rng.normal(size=n)
        x = rng.normal(size=n)
        z = np.column_stack([np.ones(n), rng.normal(size=n)])
        draws = gamma_ci_draws(CrossSection(y, x, z), np.array([0.0]))
        want = np.linalg.lstsq(z, y, rcond=None)[0]
        assert np.allclose(draws[0], want, atol=1e-12)

    def test_matches_brute_force_per_draw(self, rng):
        n = 20
        y = rng.normal(size=n)
        x = rng.normal(size=n)
        z = np.column_stack([np.ones(n), rng.normal(size=n)])
        betas = rng.normal(size=399)
        draws = gamma_ci_draws(CrossSection(y, x, z), betas)
        for i in (0, 57, 398):
            want = np.linalg.inv(z.T @ z) @ (z.T @ (y - x * betas[i]))
            assert np.allclose(draws[i], want, atol=1e-12)

    def test_requires_controls(self, rng):
        cs = CrossSection(rng.normal(size=5), rng.normal(size=5))
        with pytest.raises(ParameterError):
            gamma_ci_draws(cs, np.array([0.1]))
