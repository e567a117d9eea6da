import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma as gamma_fn
from scipy.special import kv

import gplfm
from gplfm.errors import UnsupportedKernelError, ValidationError
from gplfm.kernels import (
    KernelSpec,
    gp_regress_batch,
    kernel_from_ssm,
    kernel_to_ssm,
    matern_eval,
    sample_gp,
)


def matern_bessel(nu, alpha2, l, tau):
    """Direct modified-Bessel form of the Matern kernel (test oracle)."""
    tau = abs(tau)
    if tau == 0:
        return alpha2
    z = math.sqrt(2 * nu) * tau / l
    return alpha2 * (2 ** (1 - nu) / gamma_fn(nu)) * z**nu * kv(nu, z)


class TestMaternEval:
    @pytest.mark.parametrize("p", [0, 1, 2])
    def test_zero_lag_is_variance(self, p):
        spec = KernelSpec(p=p, alpha2=3.3, lengthscale=0.9)
        assert matern_eval(spec, 0.0) == pytest.approx(3.3, rel=1e-14)

    def test_exponential_case(self):
        spec = KernelSpec(p=0, alpha2=1.0, lengthscale=1.0)
        assert matern_eval(spec, 1.0) == pytest.approx(np.exp(-1.0), rel=1e-14)

    @pytest.mark.parametrize("p", [0, 1, 2])
    @pytest.mark.parametrize("tau", [0.1, 0.5, 2.0, 7.3])
    def test_against_bessel_form(self, p, tau):
        spec = KernelSpec(p=p, alpha2=1.0, lengthscale=1.0)
        expected = matern_bessel(p + 0.5, 1.0, 1.0, tau)
        assert matern_eval(spec, tau) == pytest.approx(expected, abs=1e-10)

    def test_uses_absolute_lag(self):
        spec = KernelSpec(p=1, alpha2=2.0, lengthscale=0.5)
        assert matern_eval(spec, -0.8) == matern_eval(spec, 0.8)

    def test_unsupported_p(self):
        spec = KernelSpec(p=3, alpha2=1.0, lengthscale=1.0)
        with pytest.raises(UnsupportedKernelError):
            matern_eval(spec, 0.5)


class TestKernelToSsm:
    def test_p0_matrices(self):
        real = kernel_to_ssm(KernelSpec(p=0, alpha2=1.0, lengthscale=2.0))
        np.testing.assert_allclose(real.F_cf, [[-0.5]])
        np.testing.assert_allclose(real.L_cf, [[1.0]])
        np.testing.assert_allclose(real.H_cf, [[1.0]])
        assert real.sigma_w == pytest.approx(1.0, rel=1e-14)
        np.testing.assert_allclose(real.P_inf, [[1.0]], rtol=1e-12)

    def test_p1_matrices(self):
        real = kernel_to_ssm(KernelSpec(p=1, alpha2=1.0, lengthscale=1.0))
        lam = math.sqrt(3.0)
        assert real.lam == pytest.approx(lam, rel=1e-15)
        np.testing.assert_allclose(
            real.F_cf, [[0.0, 1.0], [-(lam**2), -2 * lam]], rtol=1e-14
        )
        assert real.sigma_w == pytest.approx(12 * math.sqrt(3.0), rel=1e-14)

    def test_p2_matrices(self):
        real = kernel_to_ssm(KernelSpec(p=2, alpha2=1.0, lengthscale=1.0))
        lam = math.sqrt(5.0)
        np.testing.assert_allclose(
            real.F_cf[-1], [-(lam**3), -3 * lam**2, -3 * lam], rtol=1e-14
        )
        assert real.sigma_w == pytest.approx(400 * math.sqrt(5.0) / 3.0, rel=1e-14)

    @pytest.mark.parametrize("p", [0, 1, 2])
    def test_realization_invariants(self, p):
        spec = KernelSpec(p=p, alpha2=2.7, lengthscale=0.6)
        real = kernel_to_ssm(spec)
        assert real.order == p + 1
        # All poles at -lambda, multiplicity p + 1.  A defective multiple
        # eigenvalue scatters like eps^(1/(p+1)) numerically.
        eigs = np.linalg.eigvals(real.F_cf)
        np.testing.assert_allclose(eigs.real, -real.lam, rtol=1e-3)
        np.testing.assert_allclose(eigs.imag, 0.0, atol=1e-3 * real.lam)
        # P_inf solves the Lyapunov equation and reproduces the variance.
        residual = real.F_cf @ real.P_inf + real.P_inf @ real.F_cf.T + real.Q_c
        assert np.linalg.norm(residual) <= 1e-10 * np.linalg.norm(real.Q_c)
        assert real.variance == pytest.approx(spec.alpha2, abs=1e-10)
        assert np.all(np.linalg.eigvalsh(real.P_inf) > 0)

    def test_unsupported(self):
        with pytest.raises(UnsupportedKernelError):
            kernel_to_ssm(KernelSpec(p=5, alpha2=1.0, lengthscale=1.0))
        with pytest.raises(UnsupportedKernelError):
            KernelSpec(p=0, alpha2=1.0, lengthscale=1.0, family="periodic")
        with pytest.raises(ValidationError):
            KernelSpec(p=0, alpha2=-1.0, lengthscale=1.0)


class TestKernelFromSsm:
    @pytest.mark.parametrize("p", [0, 1, 2])
    @pytest.mark.parametrize("alpha2", [0.1, 1.0, 10.0])
    @pytest.mark.parametrize("l", [0.1, 1.0, 5.0])
    def test_spectral_factorization_grid(self, p, alpha2, l):
        # The shipped evaluation path must agree with the closed form.
        spec = KernelSpec(p=p, alpha2=alpha2, lengthscale=l)
        real = kernel_to_ssm(spec)
        taus = np.linspace(0.0, 5.0 * l, 41)
        worst = max(
            abs(kernel_from_ssm(real, t) - matern_eval(spec, t)) for t in taus
        )
        assert worst <= 1e-8

    def test_matches_closed_form_example(self):
        spec = KernelSpec(p=1, alpha2=1.0, lengthscale=1.0)
        real = kernel_to_ssm(spec)
        assert kernel_from_ssm(real, 0.7) == pytest.approx(
            matern_eval(spec, 0.7), abs=1e-8
        )

    @given(tau=st.floats(-8.0, 8.0))
    @settings(max_examples=30, deadline=None)
    def test_stationary_symmetry(self, tau):
        real = kernel_to_ssm(KernelSpec(p=1, alpha2=1.3, lengthscale=0.8))
        assert kernel_from_ssm(real, tau) == pytest.approx(
            kernel_from_ssm(real, -tau), rel=1e-12, abs=1e-12
        )

    def test_zero_lag(self):
        real = kernel_to_ssm(KernelSpec(p=2, alpha2=4.2, lengthscale=1.1))
        assert kernel_from_ssm(real, 0.0) == pytest.approx(4.2, abs=1e-10)


class TestGpRegressBatch:
    def test_no_observations_returns_prior(self):
        spec = KernelSpec(p=0, alpha2=2.0, lengthscale=1.0)
        mean, var = gp_regress_batch([], [], spec, 0.1, 0.7)
        assert mean == 0.0
        assert var == pytest.approx(2.0)

    def test_single_observation_closed_form(self):
        spec = KernelSpec(p=1, alpha2=3.0, lengthscale=1.0)
        noise = 0.5
        y1 = 1.7
        mean, var = gp_regress_batch([2.0], [y1], spec, noise, 2.0)
        shrink = spec.alpha2 / (spec.alpha2 + noise)
        assert mean == pytest.approx(shrink * y1, rel=1e-12)
        assert var == pytest.approx(spec.alpha2 * (1 - shrink), rel=1e-12)

    def test_interpolates_noiseless_limit(self):
        spec = KernelSpec(p=2, alpha2=1.0, lengthscale=1.5)
        t = np.linspace(0.5, 4.5, 9)
        y = np.sin(t)
        mean, var = gp_regress_batch(t, y, spec, 1e-10, t)
        np.testing.assert_allclose(mean, y, atol=1e-4)
        assert np.all(var < 1e-4)

    def test_validation(self):
        spec = KernelSpec(p=0, alpha2=1.0, lengthscale=1.0)
        with pytest.raises(ValidationError):
            gp_regress_batch([1.0, 1.0], [0.0, 0.0], spec, 0.1, 0.5)
        with pytest.raises(ValidationError):
            gp_regress_batch([1.0], [0.0], spec, 0.0, 0.5)


class TestSampling:
    def test_empirical_covariance_matches_kernel(self):
        # Statistical check with a Bartlett-style 3 sigma band.
        spec = KernelSpec(p=0, alpha2=1.0, lengthscale=0.5)
        real = kernel_to_ssm(spec)
        dt, n = 0.05, 200_000
        rng = np.random.default_rng(7)
        h = sample_gp(real, dt, n, rng)
        max_m = 400
        c_theory = np.array([matern_eval(spec, m * dt) for m in range(max_m + 1)])
        for lag_s in (0.0, 0.5, 1.0):
            j = int(round(lag_s / dt))
            emp = float(np.mean(h[: n - j] * h[j:]))
            # Bartlett: Var(c_hat(j)) ~ sum_m (c(m)^2 + c(m+j) c(m-j)) / N
            m = np.arange(-max_m, max_m + 1)
            c_m = c_theory[np.abs(m)]
            c_mpj = np.array(
                [c_theory[abs(v)] if abs(v) <= max_m else 0.0 for v in m + j]
            )
            c_mmj = np.array(
                [c_theory[abs(v)] if abs(v) <= max_m else 0.0 for v in m - j]
            )
            se = math.sqrt(np.sum(c_m**2 + c_mpj * c_mmj) / (n - j))
            assert abs(emp - c_theory[j]) <= 3.0 * se

    def test_deterministic_given_seed(self):
        real = kernel_to_ssm(KernelSpec(p=1, alpha2=1.0, lengthscale=1.0))
        a = sample_gp(real, 0.01, 50, np.random.default_rng(3))
        b = sample_gp(real, 0.01, 50, np.random.default_rng(3))
        np.testing.assert_array_equal(a, b)
