import dataclasses

import numpy as np
import pytest
import scipy.linalg

import gplfm
from gplfm.baselines import lcurve_corner
from gplfm.errors import ConfigurationError, DegeneracyError, ValidationError
from gplfm.harness import TimeSeries, simulate_response


@pytest.fixture(scope="module")
def building_setup(building, building_ssm, all_accel_sensors):
    Q_x = 1e-10 * np.eye(20)
    R = 0.1 * np.eye(10)
    prior = gplfm.GaussianBelief(np.zeros(20), 1e-10 * np.eye(20))
    return building, building_ssm, all_accel_sensors, Q_x, R, prior


def simulate_random(building, sensors, seed, n_steps=200, std=1000.0, dt=0.01):
    rng = np.random.default_rng(seed)
    f = std * rng.standard_normal(n_steps + 1)
    exc = TimeSeries(dt=dt, names=["load_10"], values=f[:, None])
    meas, truth = simulate_response(
        building, exc, sensors, noise_fraction=0.10, rng=rng
    )
    return exc, meas, truth


class TestAkfModel:
    def test_property1_identical_filtered_means(self, building_setup):
        # The assembled AKF model must match an independently constructed
        # input-augmented system; with identical discrete noise the
        # filtered means agree to near machine precision.
        building, ssm, sensors, Q_x, R, prior = building_setup
        dt = 0.01
        cfg = gplfm.BaselineConfig(Q_f=1e4)
        akf = gplfm.discretize(gplfm.akf_model(ssm, cfg, Q_x, R, prior), dt)

        n_s, n_f = 20, 1
        F_manual = np.zeros((21, 21))
        F_manual[:n_s, :n_s] = ssm.A_c
        F_manual[:n_s, n_s:] = ssm.B_c
        F_ad = gplfm.matrix_exponential(F_manual, dt)
        H = np.hstack([ssm.G_c, ssm.J_c])
        Q_a = scipy.linalg.block_diag(Q_x, cfg.q_f_matrix(n_f))
        m0 = np.zeros(21)
        P0 = scipy.linalg.block_diag(prior.cov, cfg.p_f0_matrix(n_f))

        assert np.array_equal(akf.F_ad, F_ad)
        assert np.array_equal(akf.H_ad, H)
        assert np.array_equal(akf.Q_a, Q_a)

        _, meas, _ = simulate_random(building, sensors, seed=100)
        res_model = gplfm.kalman_filter(akf, meas.values)
        out_manual = gplfm.filtering.run_kalman(
            F_ad, Q_a, H, R, m0, P0, meas.values
        )
        assert np.max(np.abs(res_model.filtered_means - out_manual[2])) <= 1e-10

    def test_pbh_rank_at_origin(self, building_setup):
        building, ssm, _, Q_x, R, prior = building_setup
        cfg = gplfm.BaselineConfig(Q_f=1e4)
        akf = gplfm.akf_model(ssm, cfg, Q_x, R, prior)
        assert gplfm.pbh_rank(akf.F_ac, akf.H_ac, 0.0).deficiency > 0

        sensors_d = gplfm.SensorLayout.from_dofs(
            10, displacements=[0], accelerations=list(range(10))
        )
        ssm_d = gplfm.assemble_continuous_ssm(building, sensors_d)
        akf_d = gplfm.akf_model(ssm_d, cfg, Q_x, 0.1 * np.eye(11), prior)
        assert gplfm.pbh_rank(akf_d.F_ac, akf_d.H_ac, 0.0).full


class TestAkfdmModel:
    def test_dummy_rows_structure(self, building_setup):
        _, ssm, _, Q_x, R, prior = building_setup
        cfg = gplfm.BaselineConfig(Q_f=1e4, R_dm=0.05, dummy_dofs=(0, 4))
        model = gplfm.akfdm_model(ssm, cfg, Q_x, R, prior)
        assert model.n_dummy == 2
        assert model.H_ac.shape == (12, 21)
        # Appended rows select displacements of dofs 0 and 4, no feedthrough.
        np.testing.assert_array_equal(model.H_ac[10, :21], np.eye(21)[0])
        np.testing.assert_array_equal(model.H_ac[11, :21], np.eye(21)[4])
        np.testing.assert_allclose(model.R[10:, 10:], 0.05 * np.eye(2))
        y = np.ones((7, 10))
        y_ext = gplfm.add_dummy_measurements(y, model)
        assert y_ext.shape == (7, 12)
        assert np.all(y_ext[:, 10:] == 0.0)

    def test_requires_dummy_config(self, building_setup):
        _, ssm, _, Q_x, R, prior = building_setup
        with pytest.raises(ConfigurationError):
            gplfm.akfdm_model(
                ssm, gplfm.BaselineConfig(Q_f=1e4), Q_x, R, prior
            )
        with pytest.raises(ConfigurationError):
            gplfm.akfdm_model(
                ssm,
                gplfm.BaselineConfig(Q_f=1e4, dummy_dofs=(0,)),
                Q_x, R, prior,
            )
        with pytest.raises(ValidationError):
            gplfm.akfdm_model(
                ssm,
                gplfm.BaselineConfig(Q_f=1e4, R_dm=1.0, dummy_dofs=(40,)),
                Q_x, R, prior,
            )

    def test_huge_r_dm_approaches_plain_akf(self, building_setup):
        # With R_dm -> infinity the dummy rows carry no information.
        building, ssm, sensors, Q_x, R, prior = building_setup
        dt = 0.01
        _, meas, _ = simulate_random(building, sensors, seed=200, n_steps=400)
        akf = gplfm.discretize(
            gplfm.akf_model(ssm, gplfm.BaselineConfig(Q_f=1e4), Q_x, R, prior), dt
        )
        res_akf = gplfm.kalman_filter(akf, meas.values)
        cfg = gplfm.BaselineConfig(Q_f=1e4, R_dm=1e12, dummy_dofs=(0,))
        akfdm = gplfm.discretize(gplfm.akfdm_model(ssm, cfg, Q_x, R, prior), dt)
        res_dm = gplfm.kalman_filter(
            akfdm, gplfm.add_dummy_measurements(meas.values, akfdm)
        )
        scale = np.max(np.abs(res_akf.filtered_means))
        diff = np.max(np.abs(res_akf.filtered_means - res_dm.filtered_means))
        assert diff <= 1e-3 * scale


class TestDkf:
    def test_zero_feedthrough_degenerates(self, building_seismic):
        sensors = gplfm.SensorLayout.from_dofs(10, accelerations=range(10))
        ssm = gplfm.assemble_continuous_ssm(building_seismic, sensors)
        assert not np.any(ssm.J_c)
        with pytest.raises(DegeneracyError):
            gplfm.dkf_estimate(
                ssm,
                np.zeros((10, 10)),
                0.01,
                gplfm.BaselineConfig(Q_f=1.0),
                1e-10 * np.eye(20),
                0.1 * np.eye(10),
                gplfm.GaussianBelief(np.zeros(20), 1e-10 * np.eye(20)),
            )

    def test_constant_force_convergence(self, sdof, sdof_ssm):
        # Noiseless collocated data: the input update settles on the true
        # constant force within 1% after 100 steps.
        sensors = gplfm.SensorLayout.from_dofs(1, accelerations=[0])
        dt, N, f0 = 0.01, 200, 5.0
        exc = TimeSeries(
            dt=dt, names=["load_1"], values=np.full((N + 1, 1), f0)
        )
        meas, _ = simulate_response(sdof, exc, sensors, noise_fraction=0.0)
        res = gplfm.dkf_estimate(
            sdof_ssm,
            meas.values,
            dt,
            gplfm.BaselineConfig(Q_f=1.0),
            1e-10 * np.eye(2),
            1e-4 * np.eye(1),
            gplfm.GaussianBelief(np.zeros(2), 1e-10 * np.eye(2)),
        )
        f_est = res.filtered_means[:, 2]
        assert abs(f_est[99] - f0) / f0 <= 0.01
        assert abs(f_est[-1] - f0) / f0 <= 0.01

    def test_zero_qf_freezes_input(self, sdof, sdof_ssm):
        sensors = gplfm.SensorLayout.from_dofs(1, accelerations=[0])
        dt, N = 0.01, 50
        rng = np.random.default_rng(0)
        exc = TimeSeries(
            dt=dt, names=["load_1"], values=5.0 * np.ones((N + 1, 1))
        )
        meas, _ = simulate_response(
            sdof, exc, sensors, noise_fraction=0.05, rng=rng
        )
        res = gplfm.dkf_estimate(
            sdof_ssm,
            meas.values,
            dt,
            gplfm.BaselineConfig(Q_f=0.0, P_f0=0.0),
            1e-10 * np.eye(2),
            1e-4 * np.eye(1),
            gplfm.GaussianBelief(np.zeros(2), 1e-10 * np.eye(2)),
        )
        np.testing.assert_array_equal(res.filtered_means[:, 2], np.zeros(N))

    def test_state_estimates_close_to_akf_when_collocated(self, building_setup):
        # Full collocated measurements: DKF and AKF state estimates agree
        # within a few percent RMSE.
        building, ssm, sensors, Q_x, R, prior = building_setup
        dt = 0.01
        _, meas, truth = simulate_random(building, sensors, seed=300, n_steps=1000)
        cfg = gplfm.BaselineConfig(Q_f=1e4)
        akf = gplfm.discretize(gplfm.akf_model(ssm, cfg, Q_x, R, prior), dt)
        res_akf = gplfm.kalman_filter(akf, meas.values)
        res_dkf = gplfm.dkf_estimate(ssm, meas.values, dt, cfg, Q_x, R, prior)
        # Compare velocity estimates of the top floor against truth.
        v_true = truth.channel("vel_10")
        rmse_akf = gplfm.rmse(res_akf.filtered_means[:, 19], v_true)
        rmse_dkf = gplfm.rmse(res_dkf.filtered_means[:, 19], v_true)
        assert abs(rmse_akf - rmse_dkf) <= 0.05 * max(rmse_akf, rmse_dkf)


class TestLCurve:
    def test_corner_of_synthetic_l_shape(self):
        # Flat tail after a steep drop: the corner is the bend point.
        q = np.logspace(0, 8, 9)
        metric = np.array([1e4, 1e3, 1e2, 1e1, 3.0, 2.8, 2.7, 2.65, 2.6])
        corner, curvature = lcurve_corner(q, metric)
        assert corner == 4  # where the slope collapses
        assert np.argmax(curvature[1:-1]) + 1 == corner

    def test_corner_validation(self):
        with pytest.raises(ValidationError):
            lcurve_corner([1.0, 10.0], [1.0, 2.0])

    def test_grid_validation(self, building_setup):
        building, ssm, sensors, Q_x, R, prior = building_setup
        with pytest.raises(ValidationError):
            gplfm.l_curve(
                ssm, np.zeros((10, 10)), 0.01, "akf", [1.0, 10.0], Q_x, R, prior
            )
        with pytest.raises(ValidationError):
            gplfm.l_curve(
                ssm, np.zeros((10, 10)), 0.01, "akf",
                [1.0, 10.0, 5.0, 100.0, 1000.0], Q_x, R, prior,
            )
        with pytest.raises(ConfigurationError):
            gplfm.l_curve(
                ssm, np.zeros((10, 10)), 0.01, "bogus",
                np.logspace(0, 4, 5), Q_x, R, prior,
            )

    def test_failures_recorded_and_skipped(self, building_seismic):
        # DKF degenerates for every grid point under seismic input.
        sensors = gplfm.SensorLayout.from_dofs(10, accelerations=range(10))
        ssm = gplfm.assemble_continuous_ssm(building_seismic, sensors)
        with pytest.raises(ValidationError):
            gplfm.l_curve(
                ssm, np.zeros((10, 10)), 0.01, "dkf", np.logspace(0, 4, 5),
                1e-10 * np.eye(20), 0.1 * np.eye(10),
                gplfm.GaussianBelief(np.zeros(20), 1e-10 * np.eye(20)),
            )

    def test_akf_impact_curve_decreasing_then_flat(self, building_setup):
        from gplfm.harness.excitation import impact

        building, ssm, sensors, Q_x, R, prior = building_setup
        dt, N = 0.01, 800
        rng = np.random.default_rng(7)
        times = dt * np.arange(N + 1)
        f = impact(times, amplitude=1e4, start=3.0)
        exc = TimeSeries(dt=dt, names=["load_10"], values=f[:, None])
        meas, _ = simulate_response(
            building, exc, sensors, noise_fraction=0.10, rng=rng
        )
        curve = gplfm.l_curve(
            ssm, meas.values, dt, "akf", np.logspace(0, 8, 9), Q_x, R, prior
        )
        assert np.all(np.diff(curve.innovation_metric) <= 1e-9)
        assert curve.corner_index == np.argmax(curve.curvature[1:-1]) + 1
