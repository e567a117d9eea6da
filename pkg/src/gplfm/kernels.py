"""Matern covariance functions and their exact LTI state-space realizations.

A half-integer Matern kernel (smoothness nu = p + 1/2 with p in {0, 1, 2})
has a rational spectral density, so the corresponding Gaussian process is
exactly the output of a stable linear system driven by white noise.  This
module evaluates the closed-form kernels, builds the companion-form
realizations, reconstructs the kernel from a realization, and provides the
batch GP-regression posterior used as an oracle for sequential inference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    ConditioningError,
    UnsupportedKernelError,
    ValidationError,
)
from .linalg import discrete_process_noise, matrix_exponential, solve_lyapunov


@dataclass(frozen=True)
class KernelSpec:
    """Stationary covariance choice for one latent force.

    alpha2 is the signal variance (force units squared) and lengthscale is
    in seconds.  Only the Matern family with p in {0, 1, 2} ships; the
    registry below is the extension point for further families.
    """

    p: int
    alpha2: float
    lengthscale: float
    family: str = "matern"

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise UnsupportedKernelError(
                f"unknown kernel family {self.family!r}; available: "
                f"{sorted(KERNEL_FAMILIES)}"
            )
        if not (self.alpha2 > 0 and math.isfinite(self.alpha2)):
            raise ValidationError(f"alpha2 must be positive, got {self.alpha2}")
        if not (self.lengthscale > 0 and math.isfinite(self.lengthscale)):
            raise ValidationError(
                f"lengthscale must be positive, got {self.lengthscale}"
            )

    @property
    def nu(self) -> float:
        return self.p + 0.5


@dataclass(frozen=True)
class KernelRealization:
    """Exact LTI realization of one stationary kernel.

    dz/dt = F_cf z + L_cf w with white noise spectral density sigma_w, and
    kernel output h = H_cf z.  P_inf is the stationary covariance solving
    F_cf P + P F_cf^T + L_cf sigma_w L_cf^T = 0.
    """

    F_cf: np.ndarray
    L_cf: np.ndarray
    H_cf: np.ndarray
    sigma_w: float
    P_inf: np.ndarray
    lam: float | None = None

    @property
    def order(self) -> int:
        return self.F_cf.shape[0]

    @property
    def Q_c(self) -> np.ndarray:
        """Continuous process-noise density L sigma_w L^T."""
        return self.L_cf @ self.L_cf.T * self.sigma_w

    @property
    def variance(self) -> float:
        """Stationary output variance H P_inf H^T."""
        return float((self.H_cf @ self.P_inf @ self.H_cf.T)[0, 0])


def matern_eval(spec: KernelSpec, tau) -> np.ndarray | float:
    """Closed-form half-integer Matern kernel value at lag tau (seconds)."""
    tau = np.asarray(tau, dtype=float)
    r = np.abs(tau) / spec.lengthscale
    a2 = spec.alpha2
    if spec.p == 0:
        out = a2 * np.exp(-r)
    elif spec.p == 1:
        s3 = math.sqrt(3.0) * r
        out = a2 * (1.0 + s3) * np.exp(-s3)
    elif spec.p == 2:
        s5 = math.sqrt(5.0) * r
        out = a2 * (1.0 + s5 + 5.0 * r**2 / 3.0) * np.exp(-s5)
    else:
        raise UnsupportedKernelError(
            f"Matern smoothness p={spec.p} not supported (p in {{0, 1, 2}})"
        )
    return out if out.ndim else float(out)


def _matern_realization(spec: KernelSpec) -> KernelRealization:
    p = spec.p
    if p not in (0, 1, 2):
        raise UnsupportedKernelError(
            f"Matern smoothness p={p} not supported (p in {{0, 1, 2}})"
        )
    m = p + 1
    lam = math.sqrt(2.0 * spec.nu) / spec.lengthscale
    # Companion form of (d/dt + lam)^(p+1) h = w.
    F = np.zeros((m, m))
    if m > 1:
        F[:-1, 1:] = np.eye(m - 1)
    F[-1, :] = [-math.comb(m, k) * lam ** (m - k) for k in range(m)]
    L = np.zeros((m, 1))
    L[-1, 0] = 1.0
    H = np.zeros((1, m))
    H[0, 0] = 1.0
    sigma_w = (
        2.0
        * spec.alpha2
        * math.sqrt(math.pi)
        * lam ** (2 * p + 1)
        * math.gamma(p + 1)
        / math.gamma(p + 0.5)
    )
    P_inf = solve_lyapunov(F, L @ L.T * sigma_w)
    return KernelRealization(F, L, H, sigma_w, P_inf, lam=lam)


# Registry mapping family name to realization builder (extension point).
KERNEL_FAMILIES = {"matern": _matern_realization}


def kernel_to_ssm(spec: KernelSpec) -> KernelRealization:
    """Build the exact state-space realization of a kernel spec."""
    return KERNEL_FAMILIES[spec.family](spec)


def kernel_from_ssm(real: KernelRealization, tau: float) -> float:
    """Evaluate the stationary kernel implied by a realization at lag tau.

    kappa(tau) = H P_inf exp(F tau)^T H^T for tau >= 0, and
    H exp(-F tau) P_inf H^T for tau < 0.
    """
    tau = float(tau)
    H = real.H_cf
    if tau >= 0:
        Phi = matrix_exponential(real.F_cf, tau)
        return float((H @ real.P_inf @ Phi.T @ H.T)[0, 0])
    Phi = matrix_exponential(real.F_cf, -tau)
    return float((H @ Phi @ real.P_inf @ H.T)[0, 0])


def gp_regress_batch(times, y, spec: KernelSpec, noise_var: float, t_star):
    """Batch GP regression posterior at query points t_star.

    Returns (mean, variance) arrays matching the shape of t_star (scalars
    for scalar input).  With no observations the prior (0, alpha2) is
    returned.  Serves as the independent oracle for Kalman/RTS inference
    on the kernel realization.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if times.shape != y.shape:
        raise ValidationError(
            f"times and y must match, got {times.shape} vs {y.shape}"
        )
    if times.size > 1 and not np.all(np.diff(times) > 0):
        raise ValidationError("observation times must be strictly increasing")
    if not noise_var > 0:
        raise ValidationError(f"noise_var must be positive, got {noise_var}")
    scalar = np.ndim(t_star) == 0
    t_star = np.atleast_1d(np.asarray(t_star, dtype=float))

    if times.size == 0:
        mean = np.zeros_like(t_star)
        var = np.full_like(t_star, spec.alpha2)
        return (float(mean[0]), float(var[0])) if scalar else (mean, var)

    K = matern_eval(spec, times[:, None] - times[None, :])
    Ky = K + noise_var * np.eye(times.size)
    try:
        cho = scipy.linalg.cho_factor(Ky, lower=True)
    except scipy.linalg.LinAlgError as err:
        raise ConditioningError(f"Gram matrix factorization failed: {err}") from err
    k_star = matern_eval(spec, times[:, None] - t_star[None, :])
    alpha = scipy.linalg.cho_solve(cho, y)
    mean = k_star.T @ alpha
    v = scipy.linalg.cho_solve(cho, k_star)
    var = spec.alpha2 - np.einsum("ij,ij->j", k_star, v)
    return (float(mean[0]), float(var[0])) if scalar else (mean, var)


def sample_gp(
    real: KernelRealization,
    dt: float,
    n_steps: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw one stationary sample path from a discretized realization.

    Starts from the stationary distribution N(0, P_inf) and propagates
    z_{k+1} = exp(F dt) z_k + w_k with w_k ~ N(0, Q_d).  Returns the
    kernel output h_k = H z_k as a length-n_steps array.
    """
    if n_steps < 1:
        raise ValidationError(f"n_steps must be >= 1, got {n_steps}")
    F_d = matrix_exponential(real.F_cf, dt)
    Q_d = discrete_process_noise(real.F_cf, real.Q_c, dt)
    m = real.order
    chol_Q = np.linalg.cholesky(Q_d + 1e-300 * np.eye(m))
    chol_P = np.linalg.cholesky(real.P_inf)
    z = chol_P @ rng.standard_normal(m)
    noise = rng.standard_normal((n_steps - 1, m)) @ chol_Q.T
    h = np.empty(n_steps)
    H = real.H_cf[0]
    h[0] = H @ z
    for k in range(1, n_steps):
        z = F_d @ z + noise[k - 1]
        h[k] = H @ z
    return h
