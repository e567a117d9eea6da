"""Executable observability diagnostics and estimation quality metrics.

Detectability is checked mode-by-mode with the PBH criterion at the
eigenvalues of the augmented transition matrix (rank loss of [sI - F; H]
is only possible at eigenvalues of F); transmission-zero behavior is
checked through the rank of the augmented system matrix.  The metric
helpers quantify estimate quality against simulated truth, including a
drift metric that isolates spurious low-frequency error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.signal

from .errors import ValidationError
from .linalg import RankReport, pbh_rank, rank_report
from .model import AugmentedModel


@dataclass(frozen=True)
class DetectabilityReport:
    """PBH rank results at every eigenvalue of the augmented system."""

    eigenvalues: np.ndarray
    deficiencies: np.ndarray
    undetectable_modes: np.ndarray
    detectable: bool

    def summary(self) -> str:
        if self.detectable:
            return "detectable"
        modes = ", ".join(f"{m:.3e}" for m in self.undetectable_modes)
        return f"undetectable (modes: {modes})"


def detectability_check(model: AugmentedModel) -> DetectabilityReport:
    """PBH detectability of (F_ac, H_ac), evaluated at each eigenvalue.

    A rank-deficient mode is harmless when strictly stable; the verdict
    is detectable iff every deficient mode has negative real part (within
    a small tolerance, so marginal modes at the origin count as
    undetectable).
    """
    F, H = model.F_ac, model.H_ac
    eigs = np.linalg.eigvals(F)
    deficiencies = np.array(
        [pbh_rank(F, H, s).deficiency for s in eigs], dtype=int
    )
    radius = max(1.0, float(np.max(np.abs(eigs))) if eigs.size else 1.0)
    tol = 1e-8 * radius
    bad = (deficiencies > 0) & (eigs.real >= -tol)
    return DetectabilityReport(
        eigenvalues=eigs,
        deficiencies=deficiencies,
        undetectable_modes=eigs[bad],
        detectable=not np.any(bad),
    )


def transmission_zero_rank(model: AugmentedModel, s: complex) -> RankReport:
    """Rank of the augmented system matrix U(s); full rank is n_s + M.

    U(s) stacks [[A_c - sI, B*], [0, F* - sI], [G_c, J*]].  Marginally
    stable transmission zeros show up as rank deficiency at s on the
    imaginary axis.
    """
    ssm = model.ssm
    n_s = ssm.n_s
    M = model.F_star.shape[0]
    U = np.block([
        [ssm.A_c - s * np.eye(n_s), model.B_star],
        [np.zeros((M, n_s)), model.F_star - s * np.eye(M)],
        [ssm.G_c, model.J_star],
    ])
    return rank_report(U)


def rmse(estimate, truth) -> float:
    """Root mean squared error between two equal-length series."""
    estimate, truth = _pair(estimate, truth)
    return float(np.sqrt(np.mean((estimate - truth) ** 2)))


def nrmse(estimate, truth) -> float:
    """RMSE normalized by the truth RMS (nan for zero truth)."""
    estimate, truth = _pair(estimate, truth)
    denom = float(np.sqrt(np.mean(truth**2)))
    if denom == 0.0:
        return float("nan")
    return rmse(estimate, truth) / denom


def correlation(estimate, truth) -> float:
    """Pearson correlation; nan when either series has zero variance."""
    estimate, truth = _pair(estimate, truth)
    se, st = np.std(estimate), np.std(truth)
    if se == 0.0 or st == 0.0:
        return float("nan")
    return float(
        np.mean((estimate - estimate.mean()) * (truth - truth.mean())) / (se * st)
    )


def peak_error(estimate, truth) -> float:
    """Relative error of the absolute peak value (nan for zero truth peak)."""
    estimate, truth = _pair(estimate, truth)
    pt = float(np.max(np.abs(truth)))
    if pt == 0.0:
        return float("nan")
    return (float(np.max(np.abs(estimate))) - pt) / pt


def drift_metric(estimate, truth, fs: float, cutoff_hz: float = 0.1) -> float:
    """Normalized RMS of the low-frequency error component.

    The error signal is low-passed below cutoff_hz (order-2 Butterworth
    applied forward and backward: 4th-order zero-phase response) and its
    RMS is divided by the truth RMS.  The cutoff should sit below the
    first structural frequency.
    """
    estimate, truth = _pair(estimate, truth)
    if not 0 < cutoff_hz < fs / 2:
        raise ValidationError(
            f"cutoff {cutoff_hz} Hz must lie in (0, Nyquist={fs / 2} Hz)"
        )
    denom = float(np.sqrt(np.mean(truth**2)))
    if denom == 0.0:
        return float("nan")
    sos = scipy.signal.butter(2, cutoff_hz, btype="low", fs=fs, output="sos")
    low = scipy.signal.sosfiltfilt(sos, estimate - truth)
    return float(np.sqrt(np.mean(low**2))) / denom


def _pair(estimate, truth):
    estimate = np.asarray(estimate, dtype=float).reshape(-1)
    truth = np.asarray(truth, dtype=float).reshape(-1)
    if estimate.shape != truth.shape:
        raise ValidationError(
            f"series lengths differ: {estimate.shape} vs {truth.shape}"
        )
    return estimate, truth


@dataclass(frozen=True)
class MetricSet:
    """Standard comparison metrics for one estimated signal."""

    rmse: float
    nrmse: float
    drift: float
    peak_error: float
    correlation: float

    def to_dict(self) -> dict:
        return {
            "rmse": self.rmse,
            "nrmse": self.nrmse,
            "drift": self.drift,
            "peak_error": self.peak_error,
            "correlation": self.correlation,
        }


def compute_metrics(
    estimate, truth, fs: float | None = None, drift_cutoff_hz: float = 0.1
) -> MetricSet:
    """Bundle all metrics for one signal (drift needs the sample rate)."""
    drift = (
        drift_metric(estimate, truth, fs, drift_cutoff_hz)
        if fs is not None
        else float("nan")
    )
    return MetricSet(
        rmse=rmse(estimate, truth),
        nrmse=nrmse(estimate, truth),
        drift=drift,
        peak_error=peak_error(estimate, truth),
        correlation=correlation(estimate, truth),
    )
