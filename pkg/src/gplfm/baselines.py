"""Reference joint input-state estimators used for comparison.

AKF appends the force vector to the state with random-walk dynamics;
AKFdm additionally observes artificial zero-valued displacements to arrest
drift; DKF runs successive input-then-state update stages and requires a
nonzero feedthrough.  All share the filtering infrastructure, and the
L-curve helper tunes the fictitious input covariance.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    ConfigurationError,
    DegeneracyError,
    GplfmError,
    ValidationError,
)
from .filtering import EstimationResult, kalman_filter
from .kernels import KernelRealization
from .linalg import discretize_zoh, symmetrize
from .model import AugmentedModel, GaussianBelief, assemble_augmented, discretize
from .structural import ContinuousStateSpace


@dataclass
class BaselineConfig:
    """Tuning covariances for the baseline estimators.

    Q_f is the fictitious input process noise (N^2), interpreted as the
    per-step discrete covariance added to the force block.  R_dm and
    dummy_dofs configure the artificial displacement measurements of
    AKFdm (dofs are 0-based physical indices).  P_f0 is the initial force
    covariance; it defaults to Q_f.
    """

    Q_f: float | np.ndarray
    R_dm: float | np.ndarray | None = None
    dummy_dofs: tuple[int, ...] = ()
    P_f0: float | np.ndarray | None = None

    def q_f_matrix(self, n_f: int) -> np.ndarray:
        Q = np.asarray(self.Q_f, dtype=float)
        Q = Q * np.eye(n_f) if Q.ndim == 0 else Q
        if Q.shape != (n_f, n_f):
            raise ConfigurationError(f"Q_f must be {n_f}x{n_f}, got {Q.shape}")
        return symmetrize(Q)

    def p_f0_matrix(self, n_f: int) -> np.ndarray:
        if self.P_f0 is None:
            return self.q_f_matrix(n_f)
        P = np.asarray(self.P_f0, dtype=float)
        P = P * np.eye(n_f) if P.ndim == 0 else P
        if P.shape != (n_f, n_f):
            raise ConfigurationError(f"P_f0 must be {n_f}x{n_f}, got {P.shape}")
        return symmetrize(P)

    def r_dm_matrix(self, n_dummy: int) -> np.ndarray:
        if self.R_dm is None:
            raise ConfigurationError("AKFdm requires R_dm")
        R = np.asarray(self.R_dm, dtype=float)
        R = R * np.eye(n_dummy) if R.ndim == 0 else R
        if R.shape != (n_dummy, n_dummy):
            raise ConfigurationError(
                f"R_dm must be {n_dummy}x{n_dummy}, got {R.shape}"
            )
        return symmetrize(R)


def degenerate_realizations(ssm: ContinuousStateSpace, P_f0: np.ndarray):
    """Order-1 realizations with zero dynamics: the random-walk force model.

    Feeding these to assemble_augmented reproduces the AKF augmented
    system exactly (F* = 0, B* = B_c, J* = J_c).
    """
    return tuple(
        KernelRealization(
            F_cf=np.zeros((1, 1)),
            L_cf=np.ones((1, 1)),
            H_cf=np.ones((1, 1)),
            sigma_w=0.0,
            P_inf=np.array([[P_f0[j, j]]]),
        )
        for j in range(ssm.n_f)
    )


def akf_model(
    ssm: ContinuousStateSpace,
    cfg: BaselineConfig,
    Q_x: np.ndarray,
    R: np.ndarray,
    prior: GaussianBelief,
) -> AugmentedModel:
    """Augmented Kalman filter model: state [x; f] with zero force dynamics.

    The returned model is continuous; discretizing it adds Q_f to the
    force block of the discrete process noise.  Note P0's force block is
    diagonal (off-diagonal initial force correlation is dropped).
    """
    P_f0 = cfg.p_f0_matrix(ssm.n_f)
    model = assemble_augmented(
        ssm, degenerate_realizations(ssm, P_f0), Q_x, R, prior
    )
    return dataclasses.replace(model, Q_f_disc=cfg.q_f_matrix(ssm.n_f))


def akfdm_model(
    ssm: ContinuousStateSpace,
    cfg: BaselineConfig,
    Q_x: np.ndarray,
    R: np.ndarray,
    prior: GaussianBelief,
) -> AugmentedModel:
    """AKF with artificial zero-valued displacement observations.

    Displacement rows for cfg.dummy_dofs are appended after the real
    measurement rows with noise covariance R_dm; feed the model
    measurement series through add_dummy_measurements.
    """
    dummy = tuple(cfg.dummy_dofs)
    if not dummy:
        raise ConfigurationError("AKFdm requires a nonempty dummy_dofs list")
    n_phys = ssm.n if ssm.expansion is None else ssm.expansion.shape[0]
    S_dummy = np.zeros((len(dummy), n_phys))
    for row, dof in enumerate(dummy):
        if not 0 <= dof < n_phys:
            raise ValidationError(f"dummy dof {dof} out of range [0, {n_phys})")
        S_dummy[row, dof] = 1.0
    if ssm.expansion is not None:
        S_dummy = S_dummy @ ssm.expansion

    n = ssm.n
    G_ext = np.vstack([ssm.G_c, np.hstack([S_dummy, np.zeros((len(dummy), n))])])
    J_ext = np.vstack([ssm.J_c, np.zeros((len(dummy), ssm.n_f))])
    ssm_ext = dataclasses.replace(ssm, G_c=G_ext, J_c=J_ext)
    R_ext = scipy.linalg.block_diag(
        np.asarray(R, dtype=float), cfg.r_dm_matrix(len(dummy))
    )
    model = akf_model(ssm_ext, cfg, Q_x, R_ext, prior)
    return dataclasses.replace(model, n_dummy=len(dummy))


def add_dummy_measurements(y: np.ndarray, model: AugmentedModel) -> np.ndarray:
    """Append the constant-zero observation columns an AKFdm model expects."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if model.n_dummy == 0:
        return y
    return np.hstack([y, np.zeros((y.shape[0], model.n_dummy))])


def dkf_estimate(
    ssm: ContinuousStateSpace,
    y: np.ndarray,
    dt: float,
    cfg: BaselineConfig,
    Q_x: np.ndarray,
    R: np.ndarray,
    prior: GaussianBelief,
    t0: float = 0.0,
) -> EstimationResult:
    """Dual Kalman filter: per step, an input stage then a state stage.

    Input stage: random-walk prediction with covariance inflation Q_f and
    update through the feedthrough J.  State stage: prediction with the
    updated input and update through G.  Requires nonzero feedthrough;
    with J = 0 the input gain vanishes and the method degenerates.

    Returns an EstimationResult over the stacked vector [x; f] with
    block-diagonal covariances (input-state cross terms are not tracked).
    """
    J = np.asarray(ssm.J_c, dtype=float)
    if not np.any(J):
        raise DegeneracyError(
            "DKF requires a nonzero feedthrough matrix; with J = 0 the input "
            "gain is zero and the input update stage degenerates"
        )
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if y.shape[1] != ssm.n_o:
        raise ValidationError(
            f"measurements must be (N, {ssm.n_o}), got {y.shape}"
        )
    n_s, n_f, n_o = ssm.n_s, ssm.n_f, ssm.n_o
    A, B = discretize_zoh(ssm.A_c, ssm.B_c, dt)
    G = np.asarray(ssm.G_c, dtype=float)
    R = np.asarray(R, dtype=float)
    Q_x = np.asarray(Q_x, dtype=float)
    Q_f = cfg.q_f_matrix(n_f)

    x = prior.mean.copy()
    P_x = prior.cov.copy()
    f = np.zeros(n_f)
    P_f = cfg.p_f0_matrix(n_f)

    N = y.shape[0]
    n_a = n_s + n_f
    m_filt = np.empty((N, n_a))
    P_filt = np.zeros((N, n_a, n_a))
    m_pred = np.empty((N, n_a))
    P_pred = np.zeros((N, n_a, n_a))
    innov = np.empty((N, n_o))
    innov_cov = np.empty((N, n_o, n_o))
    I_s = np.eye(n_s)
    I_f = np.eye(n_f)
    nll = 0.0

    for k in range(N):
        # Input stage: random walk through the previous state's prediction.
        f_p = f
        P_fp = P_f + Q_f
        x_pred_in = A @ x + B @ f
        e_f = y[k] - (G @ x_pred_in + J @ f_p)
        S_f = J @ P_fp @ J.T + R
        K_f = np.linalg.solve(S_f, (P_fp @ J.T).T).T
        f = f_p + K_f @ e_f
        IKJ = I_f - K_f @ J
        P_f = symmetrize(IKJ @ P_fp @ IKJ.T + K_f @ R @ K_f.T)

        # State stage with the updated input.
        x_p = A @ x + B @ f
        P_xp = symmetrize(A @ P_x @ A.T + Q_x)
        e_x = y[k] - (G @ x_p + J @ f)
        S_x = symmetrize(G @ P_xp @ G.T + R)
        K_x = np.linalg.solve(S_x, (P_xp @ G.T).T).T
        x = x_p + K_x @ e_x
        IKG = I_s - K_x @ G
        P_x = symmetrize(IKG @ P_xp @ IKG.T + K_x @ R @ K_x.T)

        m_pred[k, :n_s] = x_p
        m_pred[k, n_s:] = f_p
        P_pred[k, :n_s, :n_s] = P_xp
        P_pred[k, n_s:, n_s:] = P_fp
        m_filt[k, :n_s] = x
        m_filt[k, n_s:] = f
        P_filt[k, :n_s, :n_s] = P_x
        P_filt[k, n_s:, n_s:] = P_f
        innov[k] = e_x
        innov_cov[k] = S_x
        sign, logdet = np.linalg.slogdet(S_x)
        nll += logdet + float(e_x @ np.linalg.solve(S_x, e_x))

    times = t0 + dt * np.arange(1, N + 1)
    return EstimationResult(
        times=times,
        filtered_means=m_filt,
        filtered_covs=P_filt,
        predicted_means=m_pred,
        predicted_covs=P_pred,
        innovations=innov,
        innovation_covs=innov_cov,
        nll=nll,
    )


@dataclass
class LCurveResult:
    """Innovation-magnitude curve over a Q_f grid with its detected corner."""

    q_values: np.ndarray
    innovation_metric: np.ndarray
    curvature: np.ndarray
    corner_index: int
    failures: list = field(default_factory=list)

    @property
    def corner_q_f(self) -> float:
        return float(self.q_values[self.corner_index])


def _innovation_metric(result: EstimationResult) -> float:
    """Summed per-channel mean squared innovations."""
    e = result.innovations
    return float(np.nanmean(np.sum(e**2, axis=1)))


def lcurve_corner(q_values, metric_values) -> tuple[int, np.ndarray]:
    """Index of maximum discrete curvature of the log-log polyline.

    Three-point finite differences in index parameterization; endpoints
    are excluded from the corner search.
    """
    q = np.asarray(q_values, dtype=float)
    metric = np.asarray(metric_values, dtype=float)
    if q.size < 3:
        raise ValidationError(
            f"corner detection needs at least 3 points, got {q.size}"
        )
    lx, ly = np.log10(q), np.log10(metric)
    dx, dy = np.gradient(lx), np.gradient(ly)
    d2x, d2y = np.gradient(dx), np.gradient(dy)
    curvature = np.abs(dx * d2y - dy * d2x) / (dx**2 + dy**2) ** 1.5
    corner = 1 + int(np.argmax(curvature[1:-1]))
    return corner, curvature


def l_curve(
    ssm: ContinuousStateSpace,
    y: np.ndarray,
    dt: float,
    method: str,
    q_f_grid,
    Q_x: np.ndarray,
    R: np.ndarray,
    prior: GaussianBelief,
    cfg: BaselineConfig | None = None,
) -> LCurveResult:
    """Run a baseline estimator over a Q_f grid and locate the L-curve corner.

    For each grid value the scalar Q_f = q I is run through the selected
    method and the summed mean squared innovation recorded; the corner is
    the point of maximum discrete curvature of the log-log polyline
    (three-point finite differences).  Estimator failures are recorded
    and their grid points skipped.
    """
    grid = np.asarray(list(q_f_grid), dtype=float)
    if grid.size < 5:
        raise ValidationError(
            f"Q_f grid needs at least 5 points, got {grid.size}"
        )
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValidationError("Q_f grid must be positive and strictly increasing")
    method = method.lower()
    if method not in ("akf", "akfdm", "dkf"):
        raise ConfigurationError(f"unknown L-curve method {method!r}")

    base = cfg if cfg is not None else BaselineConfig(Q_f=1.0)
    q_ok, metric_ok, failures = [], [], []
    for q in grid:
        cfg_q = dataclasses.replace(base, Q_f=float(q))
        try:
            if method == "akf":
                model = discretize(akf_model(ssm, cfg_q, Q_x, R, prior), dt)
                result = kalman_filter(model, y)
            elif method == "akfdm":
                model = discretize(akfdm_model(ssm, cfg_q, Q_x, R, prior), dt)
                result = kalman_filter(model, add_dummy_measurements(y, model))
            else:
                result = dkf_estimate(ssm, y, dt, cfg_q, Q_x, R, prior)
        except GplfmError as err:
            failures.append((float(q), str(err)))
            continue
        q_ok.append(float(q))
        metric_ok.append(_innovation_metric(result))

    q_ok = np.asarray(q_ok)
    metric_ok = np.asarray(metric_ok)
    if q_ok.size < 3:
        raise ValidationError(
            "fewer than 3 grid points succeeded; cannot locate a corner"
        )
    corner, curvature = lcurve_corner(q_ok, metric_ok)
    return LCurveResult(
        q_values=q_ok,
        innovation_metric=metric_ok,
        curvature=curvature,
        corner_index=corner,
        failures=failures,
    )
