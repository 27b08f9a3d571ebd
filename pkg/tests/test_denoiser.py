import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from softunbias.denoiser import (
    DiscreteSparsePrior,
    GuardConfig,
    SoftEstimate,
    average_mse,
    characteristic_curve,
    posterior_moments,
    unbias_noise,
    unbias_noise_avg,
    unbias_signal,
    unbias_signal_avg,
)
from softunbias.errors import InvalidArgumentError, SingularUnbiasError

SPARSE_PRIOR = DiscreteSparsePrior.ternary(7.5 / 258)
NO_CLAMP = GuardConfig(clamping_enabled=False)


def mp_posterior(z, sigma_n2, prior, dps=60):
    """Direct three-term sum in arbitrary precision."""
    with mp.workdps(dps):
        z = mp.mpf(z)
        s2 = mp.mpf(sigma_n2)
        w = [mp.mpf(p) * mp.exp(-(z - c) ** 2 / (2 * s2)) for c, p in zip(prior.alphabet, prior.probabilities)]
        tot = sum(w)
        mean = sum(c * wi for c, wi in zip(prior.alphabet, w)) / tot
        second = sum(c * c * wi for c, wi in zip(prior.alphabet, w)) / tot
        return mean, second - mean**2


class TestPrior:
    def test_from_sparsity_reference_setup(self):
        prior = DiscreteSparsePrior.from_sparsity([-1, 1], 15, 258)
        assert prior.alphabet == (-1.0, 0.0, 1.0)
        assert prior.probabilities[0] == pytest.approx(7.5 / 258)
        assert prior.sigma_x2 == pytest.approx(15 / 258)
        assert prior.active_probability == pytest.approx(15 / 258)

    @pytest.mark.parametrize("alphabet, probs", [
        ((-1, 1), (0.5, 0.5)),                 # no zero
        ((0, -1, 1), (0.8, 0.1, 0.1)),         # unsorted
        ((-1, 0, 1), (0.1, 0.8, 0.2)),         # does not sum to one
        ((-1, 0, 2), (0.5, 0.25, 0.25)),       # zero mean, not symmetric
        ((-1, 0, 1), (0.2, 0.7, 0.1)),         # nonzero mean
        ((0.0,), (1.0,)),                      # zero variance
    ])
    def test_rejects_invalid(self, alphabet, probs):
        with pytest.raises(InvalidArgumentError):
            DiscreteSparsePrior(alphabet, probs)

    def test_guard_validation(self):
        with pytest.raises(InvalidArgumentError):
            GuardConfig(var_floor=0)
        with pytest.raises(InvalidArgumentError):
            GuardConfig(var_ceiling_ratio=1.0)


class TestPosteriorMoments:
    def test_symmetric_zero(self):
        est = posterior_moments(0.0, 0.3, DiscreteSparsePrior.ternary(0.1))
        assert est.value == 0.0

    def test_uninformative_observation(self):
        prior = DiscreteSparsePrior.ternary(0.1)
        for z in (-1.5, 0.3, 2.0):
            est = posterior_moments(z, 1e6, prior)
            assert abs(est.value) < 1e-3
            assert est.variance == pytest.approx(prior.sigma_x2, abs=1e-3)

    def test_derived_example(self):
        est = posterior_moments(0.8, 0.1, SPARSE_PRIOR)
        assert est.value == pytest.approx(0.38268702151708222, rel=1e-12)
        assert est.variance == pytest.approx(0.23623775121097782, rel=1e-12)
        # pointwise variance exceeds the prior variance here
        assert est.variance > SPARSE_PRIOR.sigma_x2

    @pytest.mark.parametrize("z, s2", [(0.8, 0.1), (-0.37, 0.01), (3.0, 0.05), (0.52, 1e-3), (25.0, 1e-4)])
    def test_matches_arbitrary_precision(self, z, s2):
        mean, var = mp_posterior(z, s2, SPARSE_PRIOR)
        est = posterior_moments(z, s2, SPARSE_PRIOR)
        assert est.value == pytest.approx(float(mean), rel=1e-10, abs=1e-300)
        assert est.variance == pytest.approx(float(var), rel=1e-8, abs=1e-300)

    def test_broadcasts_per_element_variance(self):
        z = np.array([0.1, 0.5, -0.9])
        s2 = np.array([0.1, 0.01, 0.3])
        est = posterior_moments(z, s2, SPARSE_PRIOR)
        for i in range(3):
            single = posterior_moments(z[i], s2[i], SPARSE_PRIOR)
            assert est.value[i] == single.value
            assert est.variance[i] == single.variance

    def test_high_snr_no_underflow(self):
        est = posterior_moments(np.array([0.0, 1.0, 40.0]), 1e-8, SPARSE_PRIOR)
        assert np.all(np.isfinite(est.value))
        np.testing.assert_allclose(est.value, [0.0, 1.0, 1.0])

    @pytest.mark.parametrize("bad", [0.0, -1.0, np.nan])
    def test_rejects_bad_noise_variance(self, bad):
        with pytest.raises(InvalidArgumentError):
            posterior_moments(0.1, bad, SPARSE_PRIOR)

    def test_rejects_nan_observation(self):
        with pytest.raises(InvalidArgumentError):
            posterior_moments(np.nan, 0.1, SPARSE_PRIOR)

    @settings(max_examples=200, deadline=None)
    @given(z=st.floats(-50, 50), s2=st.floats(1e-6, 1e3), p1=st.floats(1e-4, 0.5))
    def test_bounds(self, z, s2, p1):
        prior = DiscreteSparsePrior.ternary(p1)
        est = posterior_moments(z, s2, prior)
        assert est.variance >= 0
        assert -1.0 <= est.value <= 1.0


class TestAverageMse:
    @pytest.mark.parametrize("s2", [0.1, 0.05, 0.01])
    def test_against_plain_quadrature(self, s2):
        # independent route: integrate over z directly against the mixture density
        prior = SPARSE_PRIOR

        def integrand(z):
            dens = sum(p * np.exp(-(z - c) ** 2 / (2 * s2)) for c, p in zip(prior.alphabet, prior.probabilities))
            return float(mp_posterior(z, s2, prior, dps=30)[1]) * dens / np.sqrt(2 * np.pi * s2)

        ref, _ = integrate.quad(integrand, -3, 3, points=[-0.5, 0.5], limit=500, epsabs=1e-14)
        assert average_mse(prior, s2) == pytest.approx(ref, rel=1e-6)

    def test_below_both_references(self):
        for s2 in (1.0, 0.1, 0.01):
            mse = average_mse(SPARSE_PRIOR, s2)
            assert 0 < mse < min(SPARSE_PRIOR.sigma_x2, s2)


class TestUnbiasSignal:
    SX2 = 15 / 258

    def test_derived_example(self):
        out = unbias_signal(SoftEstimate(0.1, 0.02), self.SX2)
        assert out.value == pytest.approx(0.15243902439024390, rel=1e-12)
        assert out.variance == pytest.approx(0.030487804878048780, rel=1e-12)

    def test_zero_fixed_point(self):
        assert unbias_signal(SoftEstimate(0.0, 0.03), self.SX2).value == 0.0

    def test_small_variance_limit(self):
        out = unbias_signal(SoftEstimate(0.4, 1e-10), self.SX2, NO_CLAMP)
        assert out.value == pytest.approx(0.4, rel=1e-8)
        assert out.variance == pytest.approx(0.0, abs=1e-9)

    def test_singular_without_clamp(self):
        with pytest.raises(SingularUnbiasError):
            unbias_signal(SoftEstimate(0.3, 0.2362), self.SX2, NO_CLAMP)

    def test_clamped_is_finite(self):
        out = unbias_signal(SoftEstimate(0.3, 0.2362), self.SX2)
        assert np.isfinite(out.value) and out.variance >= 0.2362

    @given(v=st.floats(0, 0.2), x=st.floats(-1, 1))
    def test_never_reports_smaller_error(self, v, x):
        out = unbias_signal(SoftEstimate(x, v), self.SX2)
        assert out.variance >= v

    def test_average_mse_form(self):
        # constant factor from the MSE, pointwise variance in the error term
        out = unbias_signal(SoftEstimate(np.array([0.1, -0.5]), np.array([0.01, 0.2])), 0.2, mse=0.05)
        c = 0.05 / (0.05 - 0.2)
        np.testing.assert_allclose(out.value, [(1 - c) * 0.1, (1 - c) * -0.5])
        np.testing.assert_allclose(out.variance, (1 - c**2) * np.array([0.01, 0.2]) + c**2 * 0.2)


class TestUnbiasNoise:
    def test_derived_example(self):
        out = unbias_noise(SoftEstimate(0.1, 0.02), 0.3, 0.1)
        assert out.value == pytest.approx(0.05, rel=1e-12)
        assert out.variance == pytest.approx(0.025, rel=1e-12)

    def test_noiseless_feedback(self):
        out = unbias_noise(SoftEstimate(0.7, 1e-14), 0.2, 0.1, NO_CLAMP)
        assert out.value == pytest.approx(0.7, rel=1e-10)

    @given(v=st.floats(0, 0.09), z=st.floats(-3, 3))
    def test_identity_denoiser(self, v, z):
        out = unbias_noise(SoftEstimate(z, v), z, 0.1)
        assert out.value == pytest.approx(z, rel=1e-9, abs=1e-12)

    def test_singular_without_clamp(self):
        with pytest.raises(SingularUnbiasError):
            unbias_noise(SoftEstimate(0.1, 0.2), 0.3, 0.1, NO_CLAMP)

    def test_per_element_noise_variance(self):
        est = SoftEstimate(np.array([0.1, 0.2]), np.array([0.02, 0.01]))
        out = unbias_noise(est, np.array([0.3, 0.0]), np.array([0.1, 0.05]))
        single = unbias_noise(SoftEstimate(0.2, 0.01), 0.0, 0.05)
        assert out.value[1] == single.value and out.variance[1] == single.variance


class TestAverageVariants:
    def test_signal_single_element_matches_individual(self):
        sx2 = 15 / 258
        vals, var = unbias_signal_avg(np.array([0.1]), 0.02, sx2)
        ind = unbias_signal(SoftEstimate(0.1, 0.02), sx2)
        assert vals[0] == pytest.approx(ind.value, abs=1e-12)
        assert vals[0] == pytest.approx(0.15244, abs=1e-5)
        assert var == pytest.approx(ind.variance, abs=1e-12)

    def test_noise_single_element_matches_individual(self):
        vals, var = unbias_noise_avg(np.array([0.1]), np.array([0.3]), 0.02, 0.1)
        assert vals[0] == pytest.approx(0.05, abs=1e-12)
        assert var == pytest.approx(0.025, abs=1e-12)

    def test_zero_and_identity(self):
        vals, _ = unbias_signal_avg(np.zeros(5), 0.01, 0.05)
        assert np.all(vals == 0)
        z = np.linspace(-1, 1, 7)
        vals, _ = unbias_noise_avg(z, z, 0.01, 0.1)
        np.testing.assert_allclose(vals, z, atol=1e-12)

    def test_small_variance_limit(self):
        x = np.array([0.3, -0.8])
        vals, _ = unbias_signal_avg(x, 1e-12, 0.05)
        np.testing.assert_allclose(vals, x, rtol=1e-9)
        vals, _ = unbias_noise_avg(x, np.array([1.0, 2.0]), 1e-12, 0.1)
        np.testing.assert_allclose(vals, x, rtol=1e-9)

    def test_singular_without_clamp(self):
        with pytest.raises(SingularUnbiasError):
            unbias_signal_avg(np.ones(3), 0.06, 0.05, NO_CLAMP)
        with pytest.raises(SingularUnbiasError):
            unbias_noise_avg(np.ones(3), np.ones(3), 0.2, 0.1, NO_CLAMP)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            unbias_noise_avg(np.ones(3), np.ones(2), 0.01, 0.1)

    @settings(deadline=None)
    @given(n=st.integers(1, 30), v=st.floats(1e-6, 0.049), seed=st.integers(0, 2**32 - 1))
    def test_uniform_variance_identity(self, n, v, seed):
        rng = np.random.default_rng(seed)
        x = rng.uniform(-1, 1, n)
        z = x + rng.normal(0, 0.3, n)
        vals, var = unbias_signal_avg(x, v, 0.05)
        ind = unbias_signal(SoftEstimate(x, np.full(n, v)), 0.05)
        assert np.max(np.abs(vals - ind.value)) <= 1e-12 * max(1.0, np.max(np.abs(vals)))
        assert np.max(np.abs(var - ind.variance)) <= 1e-12 * max(1.0, var)
        vals, var = unbias_noise_avg(x, z, v, 0.05)
        ind = unbias_noise(SoftEstimate(x, np.full(n, v)), z, 0.05)
        assert np.max(np.abs(vals - ind.value)) <= 1e-12 * max(1.0, np.max(np.abs(vals)))
        assert np.max(np.abs(var - ind.variance)) <= 1e-12 * max(1.0, var)


class TestCharacteristicCurve:
    GRID = np.linspace(-2, 2, 401)
    PRIOR = DiscreteSparsePrior.ternary(0.1)

    def test_biased_is_odd(self):
        curve = characteristic_curve(self.PRIOR, 0.1, self.GRID, "biased")
        np.testing.assert_allclose(curve.value, -curve.value[::-1], atol=1e-15)

    def test_biased_increasing(self):
        curve = characteristic_curve(self.PRIOR, 0.1, self.GRID, "biased")
        assert np.all(np.diff(curve.value) > 0)

    def test_noise_unbiased_not_monotone(self):
        curve = characteristic_curve(self.PRIOR, 0.1, self.GRID, "noise_unbiased")
        assert np.any(np.diff(curve.value) < 0)

    @pytest.mark.parametrize("mode", ["signal_unbiased", "noise_unbiased"])
    def test_converges_to_biased(self, mode):
        gaps = []
        for s2 in (0.1, 0.01):
            b = characteristic_curve(self.PRIOR, s2, self.GRID, "biased")
            u = characteristic_curve(self.PRIOR, s2, self.GRID, mode)
            gaps.append(np.max(np.abs(u.value - b.value)))
        assert gaps[1] < gaps[0]

    def test_individual_form_uses_pointwise_variance(self):
        z = np.array([0.0, 0.3])
        curve = characteristic_curve(self.PRIOR, 0.1, z, "noise_unbiased", variance_form="individual")
        expected = unbias_noise(posterior_moments(z, 0.1, self.PRIOR), z, 0.1)
        np.testing.assert_array_equal(curve.value, expected.value)

    def test_single_point_and_validation(self):
        assert len(characteristic_curve(self.PRIOR, 0.1, [0.5], "biased").z) == 1
        with pytest.raises(InvalidArgumentError):
            characteristic_curve(self.PRIOR, 0.1, [1.0, 0.0], "biased")
        with pytest.raises(InvalidArgumentError):
            characteristic_curve(self.PRIOR, 0.1, [0.0], "sideways")

    def test_singular_propagates_without_clamp(self):
        with pytest.raises(SingularUnbiasError):
            characteristic_curve(self.PRIOR, 0.1, self.GRID, "signal_unbiased", NO_CLAMP,
                                 variance_form="individual")
