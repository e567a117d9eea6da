import numpy as np
import pytest

import gplfm
from gplfm import _filter_np, filtering
from gplfm.errors import ConditioningError, DimensionError, ValidationError

try:
    from gplfm import _filter_cy

    HAVE_CYTHON = True
except ImportError:  # pragma: no cover
    HAVE_CYTHON = False


def random_problem(seed, n=5, m=2, N=60, with_gap=False):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    F = gplfm.matrix_exponential(
        A - (np.max(np.linalg.eigvals(A).real) + 0.5) * np.eye(n), 0.1
    )
    W = rng.standard_normal((n, n))
    Q = 0.01 * W @ W.T + 1e-6 * np.eye(n)
    H = rng.standard_normal((m, n))
    R = np.diag(rng.uniform(0.1, 1.0, m))
    m0 = rng.standard_normal(n)
    P0 = np.eye(n)
    Y = rng.standard_normal((N, m))
    if with_gap:
        Y[N // 3] = np.nan
        Y[N // 2] = np.nan
    return F, Q, H, R, m0, P0, Y


class TestKalmanRecursion:
    def test_zero_data_zero_prior_keeps_zero_mean(self):
        F, Q, H, R, _, P0, _ = random_problem(0)
        Y = np.zeros((20, 2))
        out = filtering.run_kalman(F, Q, H, R, np.zeros(5), P0, Y)
        np.testing.assert_array_equal(out[2], np.zeros((20, 5)))
        # Covariances follow the deterministic Riccati recursion.
        Pf = P0.copy()
        for k in range(3):
            Pp = F @ Pf @ F.T + Q
            S = H @ Pp @ H.T + R
            K = Pp @ H.T @ np.linalg.inv(S)
            IKH = np.eye(5) - K @ H
            Pf = IKH @ Pp @ IKH.T + K @ R @ K.T
            np.testing.assert_allclose(out[3][k], Pf, atol=1e-10)

    def test_scalar_random_walk_one_step(self):
        # F=1, H=1, Q=0, R=1, one observation y=1: posterior mean P0/(P0+1).
        for P0 in (0.5, 1.0, 4.0):
            out = filtering.run_kalman(
                np.eye(1), np.zeros((1, 1)), np.eye(1), np.eye(1),
                np.zeros(1), np.array([[P0]]), np.array([[1.0]]),
            )
            assert out[2][0, 0] == pytest.approx(P0 / (P0 + 1.0), rel=1e-14)

    def test_nll_matches_manual(self):
        F, Q, H, R, m0, P0, Y = random_problem(1, N=10)
        *_, innov, innov_cov, nll = filtering.run_kalman(F, Q, H, R, m0, P0, Y)
        manual = 0.0
        for k in range(10):
            S = innov_cov[k]
            e = innov[k]
            manual += np.log(np.linalg.det(S)) + e @ np.linalg.solve(S, e)
        assert nll == pytest.approx(manual, rel=1e-10)

    def test_gap_steps_are_prediction_only(self):
        F, Q, H, R, m0, P0, Y = random_problem(2, with_gap=True)
        m_pred, P_pred, m_filt, P_filt, innov, innov_cov, _ = filtering.run_kalman(
            F, Q, H, R, m0, P0, Y
        )
        gap = np.where(np.isnan(Y[:, 0]))[0]
        for k in gap:
            np.testing.assert_array_equal(m_filt[k], m_pred[k])
            np.testing.assert_array_equal(P_filt[k], P_pred[k])
            assert np.all(np.isnan(innov[k]))
            assert np.all(np.isnan(innov_cov[k]))

    def test_covariances_stay_psd(self):
        F, Q, H, R, m0, P0, Y = random_problem(3, N=200)
        out = filtering.run_kalman(F, Q, H, R, m0, P0, Y)
        for P in (out[1], out[3]):
            assert np.max(np.abs(P - P.transpose(0, 2, 1))) == 0.0
            eigs = np.linalg.eigvalsh(P)
            traces = np.trace(P, axis1=1, axis2=2)
            assert np.all(eigs.min(axis=1) >= -1e-9 * traces)

    def test_channel_reordering_invariance(self):
        F, Q, H, R, m0, P0, Y = random_problem(4, m=3)
        perm = [2, 0, 1]
        out1 = filtering.run_kalman(F, Q, H, R, m0, P0, Y)
        out2 = filtering.run_kalman(
            F, Q, H[perm], R[np.ix_(perm, perm)], m0, P0, Y[:, perm]
        )
        assert np.max(np.abs(out1[2] - out2[2])) <= 1e-8
        assert np.max(np.abs(out1[3] - out2[3])) <= 1e-8
        assert out1[6] == pytest.approx(out2[6], rel=1e-8)

    def test_joseph_equals_simple_form(self):
        F, Q, H, R, m0, P0, Y = random_problem(5)
        out_j = _filter_np.kf_forward(F, Q, H, R, m0, P0, Y, joseph=True)
        out_s = _filter_np.kf_forward(F, Q, H, R, m0, P0, Y, joseph=False)
        assert np.max(np.abs(out_j[2] - out_s[2])) <= 1e-8
        assert np.max(np.abs(out_j[3] - out_s[3])) <= 1e-8

    def test_conditioning_error_reports_step(self):
        # Zero measurement matrix with zero R makes S singular at step 0.
        with pytest.raises(ConditioningError) as exc:
            filtering.run_kalman(
                np.eye(2), np.eye(2), np.zeros((1, 2)), np.zeros((1, 1)),
                np.zeros(2), np.eye(2), np.ones((5, 1)),
            )
        assert exc.value.step == 0

    def test_dimension_checks(self):
        with pytest.raises(DimensionError):
            filtering.run_kalman(
                np.eye(2), np.eye(2), np.eye(2), np.eye(2),
                np.zeros(2), np.eye(2), np.ones((5, 3)),
            )


class TestRtsSmoother:
    def test_last_step_equals_filtered_and_n1_identity(self):
        F, Q, H, R, m0, P0, Y = random_problem(6)
        out = filtering.run_kalman(F, Q, H, R, m0, P0, Y)
        ms, Ps = filtering.run_rts(F, *out[:4])
        np.testing.assert_array_equal(ms[-1], out[2][-1])
        np.testing.assert_array_equal(Ps[-1], out[3][-1])
        out1 = filtering.run_kalman(F, Q, H, R, m0, P0, Y[:1])
        ms1, Ps1 = filtering.run_rts(F, *out1[:4])
        np.testing.assert_array_equal(ms1[0], out1[2][0])
        np.testing.assert_array_equal(Ps1[0], out1[3][0])

    def test_smoothing_reduces_variance(self):
        F, Q, H, R, m0, P0, Y = random_problem(7, N=100)
        out = filtering.run_kalman(F, Q, H, R, m0, P0, Y)
        _, Ps = filtering.run_rts(F, *out[:4])
        filt_var = np.diagonal(out[3], axis1=1, axis2=2)
        smooth_var = np.diagonal(Ps, axis1=1, axis2=2)
        assert np.all(smooth_var <= filt_var + 1e-12)


@pytest.mark.skipif(not HAVE_CYTHON, reason="compiled backend unavailable")
class TestBackendEquivalence:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_forward_identical(self, seed):
        F, Q, H, R, m0, P0, Y = random_problem(seed, with_gap=(seed == 2))
        out_np = _filter_np.kf_forward(F, Q, H, R, m0, P0, Y)
        out_cy = _filter_cy.kf_forward(F, Q, H, R, m0, P0, Y)
        for a, b in zip(out_np[:4], out_cy[:4]):
            assert np.max(np.abs(a - b)) <= 1e-12
        assert np.nanmax(np.abs(out_np[4] - out_cy[4])) <= 1e-12
        assert out_np[6] == pytest.approx(out_cy[6], rel=1e-12, abs=1e-10)

    def test_backward_identical(self):
        F, Q, H, R, m0, P0, Y = random_problem(8)
        out = _filter_np.kf_forward(F, Q, H, R, m0, P0, Y)
        ms_np, Ps_np = _filter_np.rts_backward(F, *out[:4])
        ms_cy, Ps_cy = _filter_cy.rts_backward(F, *out[:4])
        assert np.max(np.abs(ms_np - ms_cy)) <= 1e-12
        assert np.max(np.abs(Ps_np - Ps_cy)) <= 1e-12

    def test_conditioning_error_step_matches(self):
        with pytest.raises(ConditioningError) as exc:
            _filter_cy.kf_forward(
                np.eye(2), np.eye(2), np.zeros((1, 2)), np.zeros((1, 1)),
                np.zeros(2), np.eye(2), np.ones((4, 1)),
            )
        assert exc.value.step == 0


class TestSequentialBatchEquivalence:
    @pytest.mark.parametrize("p", [0, 1, 2])
    def test_kf_rts_equals_batch_gp(self, p):
        rng = np.random.default_rng(42)
        N, dt = 50, 0.1
        t = dt * np.arange(1, N + 1)
        g = np.sin(2 * np.pi * 0.4 * t) + 0.3 * np.cos(2 * np.pi * 1.1 * t)
        noise_var = 0.05
        y = g + np.sqrt(noise_var) * rng.standard_normal(N)
        spec = gplfm.KernelSpec(p=p, alpha2=1.2, lengthscale=0.8)
        real = gplfm.kernel_to_ssm(spec)

        mean_b, var_b = gplfm.gp_regress_batch(t, y, spec, noise_var, t)

        F_d = gplfm.matrix_exponential(real.F_cf, dt)
        Q_d = gplfm.discrete_process_noise(real.F_cf, real.Q_c, dt)
        out = filtering.run_kalman(
            F_d, Q_d, real.H_cf, np.array([[noise_var]]),
            np.zeros(real.order), real.P_inf, y[:, None],
        )
        ms, Ps = filtering.run_rts(F_d, *out[:4])
        h = real.H_cf[0]
        mean_s = ms @ h
        var_s = np.einsum("kij,i,j->k", Ps, h, h)
        assert np.max(np.abs(mean_s - mean_b)) <= 1e-6
        assert np.max(np.abs(var_s - var_b)) <= 1e-6


class TestModelLevelApi:
    def test_requires_discretized_model(self, sdof_ssm):
        real = gplfm.kernel_to_ssm(gplfm.KernelSpec(p=0, alpha2=1.0, lengthscale=1.0))
        prior = gplfm.GaussianBelief(np.zeros(2), np.eye(2))
        model = gplfm.assemble_augmented(
            sdof_ssm, [real], np.zeros((2, 2)), 0.1 * np.eye(1), prior
        )
        with pytest.raises(ValidationError):
            gplfm.kalman_filter(model, np.zeros((5, 1)))
        with pytest.raises(ValidationError):
            gplfm.rts_smoother(model, None)

    def test_times_and_nll_invariant_to_origin(self, sdof_ssm):
        real = gplfm.kernel_to_ssm(gplfm.KernelSpec(p=0, alpha2=1.0, lengthscale=1.0))
        prior = gplfm.GaussianBelief(np.zeros(2), np.eye(2))
        model = gplfm.discretize(
            gplfm.assemble_augmented(
                sdof_ssm, [real], np.zeros((2, 2)), 0.1 * np.eye(1), prior
            ),
            0.01,
        )
        rng = np.random.default_rng(9)
        y = rng.standard_normal((20, 1))
        r1 = gplfm.kalman_filter(model, y, t0=0.0)
        r2 = gplfm.kalman_filter(model, y, t0=123.0)
        assert r1.nll == r2.nll
        np.testing.assert_allclose(r2.times - r1.times, 123.0)
