"""Kalman filtering and RTS smoothing entry points.

The per-step recursion is the hot loop of the whole package (it runs
hundreds of times inside hyperparameter optimization), so it lives in a
compiled Cython backend with a pure-NumPy fallback selected at import.
Set ``GPLFM_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

import numpy as np

from . import _filter_np
from .errors import DimensionError, ValidationError
from .model import AugmentedModel

if os.environ.get("GPLFM_PURE_PYTHON", "").strip().lower() in ("1", "true", "yes"):
    _impl = _filter_np
else:
    try:
        from . import _filter_cy as _impl
    except ImportError:
        _impl = _filter_np

#: Name of the active recursion backend ("cython" or "numpy").
BACKEND = "numpy" if _impl is _filter_np else "cython"


@dataclass
class EstimationResult:
    """Per-step posterior beliefs plus innovations and the total NLL.

    Innovation rows are NaN for gap (prediction-only) steps.  Smoothed
    fields are filled in by :func:`rts_smoother`.
    """

    times: np.ndarray
    filtered_means: np.ndarray
    filtered_covs: np.ndarray
    predicted_means: np.ndarray
    predicted_covs: np.ndarray
    innovations: np.ndarray
    innovation_covs: np.ndarray
    nll: float
    smoothed_means: np.ndarray | None = None
    smoothed_covs: np.ndarray | None = None

    @property
    def n_steps(self) -> int:
        return self.filtered_means.shape[0]

    @property
    def has_smoothed(self) -> bool:
        return self.smoothed_means is not None


def run_kalman(F, Q, H, R, m0, P0, Y):
    """Forward Kalman recursion on raw matrices (backend dispatch).

    Returns (m_pred, P_pred, m_filt, P_filt, innovations, innovation_covs,
    nll).  Measurement rows containing NaN are prediction-only gaps.
    """
    F = np.ascontiguousarray(F, dtype=float)
    Q = np.ascontiguousarray(Q, dtype=float)
    H = np.ascontiguousarray(H, dtype=float)
    R = np.ascontiguousarray(R, dtype=float)
    Y = np.ascontiguousarray(np.atleast_2d(Y), dtype=float)
    m0 = np.ascontiguousarray(m0, dtype=float).reshape(-1)
    P0 = np.ascontiguousarray(P0, dtype=float)
    n = F.shape[0]
    m = H.shape[0]
    if F.shape != (n, n) or Q.shape != (n, n) or P0.shape != (n, n):
        raise DimensionError("F, Q, P0 must all be n x n")
    if H.shape[1] != n or R.shape != (m, m) or m0.size != n:
        raise DimensionError("H, R, m0 dimensions inconsistent with the state size")
    if Y.shape[1] != m:
        raise DimensionError(
            f"measurements have {Y.shape[1]} channels, model expects {m}"
        )
    return _impl.kf_forward(F, Q, H, R, m0, P0, Y)


def run_rts(F, m_pred, P_pred, m_filt, P_filt):
    """Backward RTS recursion on stored filter quantities (backend dispatch)."""
    return _impl.rts_backward(
        np.ascontiguousarray(F, dtype=float),
        np.ascontiguousarray(m_pred, dtype=float),
        np.ascontiguousarray(P_pred, dtype=float),
        np.ascontiguousarray(m_filt, dtype=float),
        np.ascontiguousarray(P_filt, dtype=float),
    )


def kalman_filter(model: AugmentedModel, y, t0: float = 0.0) -> EstimationResult:
    """Run the Kalman filter over a measurement series.

    ``y`` has one row per sample and one column per measured channel; the
    model must have been discretized at the series' sampling interval.
    Measurement times are t0 + dt, t0 + 2 dt, ...
    """
    if not model.is_discretized:
        raise ValidationError("model must be discretized before filtering")
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if y.ndim != 2 or y.shape[1] != model.n_o:
        raise DimensionError(
            f"measurements must be (N, {model.n_o}), got {y.shape}"
        )
    m_pred, P_pred, m_filt, P_filt, innov, innov_cov, nll = run_kalman(
        model.F_ad, model.Q_a, model.H_ad, model.R, model.m0, model.P0, y
    )
    times = t0 + model.dt * np.arange(1, y.shape[0] + 1)
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


def rts_smoother(model: AugmentedModel, filtered: EstimationResult) -> EstimationResult:
    """Fixed-interval smoothing of a filtered result from the same model."""
    if not model.is_discretized:
        raise ValidationError("model must be discretized before smoothing")
    m_smooth, P_smooth = run_rts(
        model.F_ad,
        filtered.predicted_means,
        filtered.predicted_covs,
        filtered.filtered_means,
        filtered.filtered_covs,
    )
    return dataclasses.replace(
        filtered, smoothed_means=m_smooth, smoothed_covs=P_smooth
    )
