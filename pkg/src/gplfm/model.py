"""Augmented latent-force state-space models and estimate extraction.

Joins a structural state-space model with one kernel realization per
input: latent-force states are appended to the structural state, giving a
block-upper-triangular transition matrix whose noise enters only through
the kernel blocks.  Structural process noise is injected at the discrete
level.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, DimensionError, ValidationError
from .kernels import KernelRealization
from .linalg import discrete_process_noise, matrix_exponential, symmetrize
from .structural import ContinuousStateSpace


@dataclass(frozen=True)
class GaussianBelief:
    """Mean and covariance of a Gaussian state distribution."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise DimensionError(
                f"cov shape {cov.shape} does not match mean length {mean.size}"
            )
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValidationError("belief entries must be finite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", symmetrize(cov))

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class StateLayout:
    """Index map of the augmented state vector.

    Model dofs occupy [0, n_dof) (displacements) and [n_dof, 2 n_dof)
    (velocities); each latent-force block j occupies force_slices[j], and
    the force value is recovered as H_rows[j] @ z_j.
    """

    n_dof: int
    force_slices: tuple[slice, ...]
    H_rows: tuple[np.ndarray, ...]

    @property
    def n_s(self) -> int:
        return 2 * self.n_dof

    @property
    def n_f(self) -> int:
        return len(self.force_slices)

    @property
    def n_a(self) -> int:
        return self.n_s + sum(s.stop - s.start for s in self.force_slices)

    @property
    def displacements(self) -> slice:
        return slice(0, self.n_dof)

    @property
    def velocities(self) -> slice:
        return slice(self.n_dof, 2 * self.n_dof)


@dataclass
class AugmentedModel:
    """Continuous augmented model plus (optionally) its discretized form.

    F_ac stacks [[A_c, B*], [0, F*]] and H_ac = [G_c, J*], where B* and J*
    spread the structural input columns over the per-force output rows.
    Q_c is nonzero only on the kernel-noise blocks; the discrete process
    noise is Q_a = Q_d + blkdiag(Q_x, 0, ...).

    ``Q_f_disc`` is a per-step discrete covariance added over the latent
    block at discretization (used by the random-walk baselines, zero for
    latent-force kernels).  ``n_dummy`` counts trailing measurement rows
    that expect constant-zero observations (dummy displacements).
    """

    F_ac: np.ndarray
    H_ac: np.ndarray
    Q_c: np.ndarray
    layout: StateLayout
    Q_x: np.ndarray
    R: np.ndarray
    m0: np.ndarray
    P0: np.ndarray
    ssm: ContinuousStateSpace
    kernels: tuple[KernelRealization, ...]
    B_star: np.ndarray
    J_star: np.ndarray
    F_star: np.ndarray
    dt: float | None = None
    F_ad: np.ndarray | None = None
    Q_a: np.ndarray | None = None
    Q_f_disc: np.ndarray | None = None
    n_dummy: int = 0

    @property
    def n_a(self) -> int:
        return self.F_ac.shape[0]

    @property
    def n_o(self) -> int:
        return self.H_ac.shape[0]

    @property
    def H_ad(self) -> np.ndarray:
        """Discrete measurement matrix (identical to the continuous one)."""
        return self.H_ac

    @property
    def is_discretized(self) -> bool:
        return self.dt is not None


def assemble_augmented(
    ssm: ContinuousStateSpace,
    kernels,
    Q_x: np.ndarray,
    R: np.ndarray,
    prior: GaussianBelief,
) -> AugmentedModel:
    """Combine the structural SSM with one kernel realization per input.

    The initial augmented belief is mean [prior.mean; 0] with covariance
    blkdiag(prior.cov, P_inf_1, ..., P_inf_nf).
    """
    kernels = tuple(kernels)
    if len(kernels) != ssm.n_f:
        raise ConfigurationError(
            f"model has {ssm.n_f} inputs but {len(kernels)} kernels were given"
        )
    n_s, n_o = ssm.n_s, ssm.n_o
    Q_x = np.asarray(Q_x, dtype=float)
    R = np.asarray(R, dtype=float)
    if Q_x.shape != (n_s, n_s):
        raise DimensionError(f"Q_x must be {n_s}x{n_s}, got {Q_x.shape}")
    if R.shape != (n_o, n_o):
        raise DimensionError(f"R must be {n_o}x{n_o}, got {R.shape}")
    try:
        np.linalg.cholesky(R)
    except np.linalg.LinAlgError as err:
        raise ValidationError("R must be symmetric positive definite") from err
    if prior.dim != n_s:
        raise DimensionError(
            f"prior dimension {prior.dim} does not match state size {n_s}"
        )

    orders = [k.order for k in kernels]
    M_total = sum(orders)
    n_a = n_s + M_total

    B_star = np.zeros((n_s, M_total))
    J_star = np.zeros((n_o, M_total))
    slices = []
    offset = 0
    for j, real in enumerate(kernels):
        sl = slice(n_s + offset, n_s + offset + real.order)
        slices.append(sl)
        cols = slice(offset, offset + real.order)
        B_star[:, cols] = np.outer(ssm.B_c[:, j], real.H_cf[0])
        J_star[:, cols] = np.outer(ssm.J_c[:, j], real.H_cf[0])
        offset += real.order
    F_star = (
        scipy.linalg.block_diag(*[k.F_cf for k in kernels])
        if kernels
        else np.zeros((0, 0))
    )

    F_ac = np.zeros((n_a, n_a))
    F_ac[:n_s, :n_s] = ssm.A_c
    F_ac[:n_s, n_s:] = B_star
    F_ac[n_s:, n_s:] = F_star
    H_ac = np.hstack([ssm.G_c, J_star])

    Q_c = np.zeros((n_a, n_a))
    P0 = np.zeros((n_a, n_a))
    P0[:n_s, :n_s] = prior.cov
    for real, sl in zip(kernels, slices):
        Q_c[sl, sl] = real.Q_c
        P0[sl, sl] = real.P_inf
    m0 = np.concatenate([prior.mean, np.zeros(M_total)])

    layout = StateLayout(
        n_dof=ssm.n,
        force_slices=tuple(slices),
        H_rows=tuple(np.asarray(k.H_cf[0], dtype=float) for k in kernels),
    )
    return AugmentedModel(
        F_ac=F_ac,
        H_ac=H_ac,
        Q_c=Q_c,
        layout=layout,
        Q_x=Q_x,
        R=R,
        m0=m0,
        P0=P0,
        ssm=ssm,
        kernels=kernels,
        B_star=B_star,
        J_star=J_star,
        F_star=F_star,
    )


def discretize(model: AugmentedModel, dt: float) -> AugmentedModel:
    """Discretize the augmented model at sampling interval dt.

    F_ad = exp(F_ac dt); Q_a adds the structural process noise block to
    the matrix-fraction-decomposition integral of Q_c.
    """
    dt = float(dt)
    if dt <= 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    F_ad = matrix_exponential(model.F_ac, dt)
    if np.any(model.Q_c):
        Q_d = discrete_process_noise(model.F_ac, model.Q_c, dt)
    else:
        Q_d = np.zeros_like(model.Q_c)
    Q_a = Q_d.copy()
    n_s = model.layout.n_s
    Q_a[:n_s, :n_s] += model.Q_x
    if model.Q_f_disc is not None:
        width = model.n_a - n_s
        if model.Q_f_disc.shape != (width, width):
            raise DimensionError(
                f"Q_f_disc must be {width}x{width}, got {model.Q_f_disc.shape}"
            )
        Q_a[n_s:, n_s:] += model.Q_f_disc
    return dataclasses.replace(model, dt=dt, F_ad=F_ad, Q_a=Q_a)


@dataclass(frozen=True)
class SignalEstimates:
    """Per-signal posterior series extracted from an augmented-state result.

    Displacement/velocity/acceleration arrays are (N, n_physical_dofs);
    force is (N, n_f).  Matching ``*_std`` arrays hold per-step posterior
    standard deviations.
    """

    times: np.ndarray
    displacement: np.ndarray
    displacement_std: np.ndarray
    velocity: np.ndarray
    velocity_std: np.ndarray
    acceleration: np.ndarray
    acceleration_std: np.ndarray
    force: np.ndarray
    force_std: np.ndarray
    which: str


def _acceleration_map(model: AugmentedModel) -> np.ndarray:
    """Rows mapping the augmented state to dof (absolute) accelerations.

    Acceleration of model dof i combines the velocity-derivative rows of
    A_c with the applied-load feedthrough spread over the latent blocks;
    ground-motion feedthrough vanishes for absolute accelerations.
    """
    ssm = model.ssm
    lay = model.layout
    n = lay.n_dof
    H_acc = np.zeros((n, lay.n_a))
    H_acc[:, : lay.n_s] = ssm.A_c[n:, :]
    for j, (sl, h) in enumerate(zip(lay.force_slices, lay.H_rows)):
        if j < ssm.n_p:
            H_acc[:, sl] = np.outer(ssm.B_c[n:, j], h)
    return H_acc


def extract_estimates(
    model: AugmentedModel, result, which: str = "auto"
) -> SignalEstimates:
    """Turn augmented-state beliefs into per-dof and per-force series.

    ``which`` selects "filtered" or "smoothed" beliefs ("auto" prefers
    smoothed when present).  For modally reduced models the series are
    expanded to physical dofs through the stored transformation.
    """
    if which == "auto":
        which = "smoothed" if result.has_smoothed else "filtered"
    if which == "smoothed":
        if not result.has_smoothed:
            raise ValidationError("result has no smoothed estimates")
        means, covs = result.smoothed_means, result.smoothed_covs
    elif which == "filtered":
        means, covs = result.filtered_means, result.filtered_covs
    else:
        raise ValidationError(f"unknown estimate kind {which!r}")

    lay = model.layout
    n = lay.n_dof
    N = means.shape[0]

    def project(T, block_means, block_covs):
        mean = block_means @ T.T
        var = np.einsum("kij,pi,pj->kp", block_covs, T, T)
        return mean, np.sqrt(np.clip(var, 0.0, None))

    expansion = model.ssm.expansion
    Phi = np.eye(n) if expansion is None else expansion

    disp, disp_std = project(
        Phi, means[:, lay.displacements],
        covs[:, lay.displacements, lay.displacements],
    )
    vel, vel_std = project(
        Phi, means[:, lay.velocities], covs[:, lay.velocities, lay.velocities]
    )

    H_acc = _acceleration_map(model)
    acc_model = means @ H_acc.T
    acc_cov = np.einsum("kij,pi,qj->kpq", covs, H_acc, H_acc)
    if expansion is None:
        acc = acc_model
        acc_std = np.sqrt(np.clip(np.diagonal(acc_cov, axis1=1, axis2=2), 0.0, None))
    else:
        acc = acc_model @ Phi.T
        acc_var = np.einsum("kpq,ip,iq->ki", acc_cov, Phi, Phi)
        acc_std = np.sqrt(np.clip(acc_var, 0.0, None))

    force = np.zeros((N, lay.n_f))
    force_std = np.zeros((N, lay.n_f))
    for j, (sl, h) in enumerate(zip(lay.force_slices, lay.H_rows)):
        force[:, j] = means[:, sl] @ h
        var = np.einsum("kij,i,j->k", covs[:, sl, sl], h, h)
        force_std[:, j] = np.sqrt(np.clip(var, 0.0, None))

    return SignalEstimates(
        times=result.times,
        displacement=disp,
        displacement_std=disp_std,
        velocity=vel,
        velocity_std=vel_std,
        acceleration=acc,
        acceleration_std=acc_std,
        force=force,
        force_std=force_std,
        which=which,
    )
