"""Pure-NumPy Kalman filter and RTS smoother recursions (fallback backend).

Mirrors the compiled backend in ``_filter_cy`` exactly; both operate on
raw arrays and know nothing about models.  Measurement rows containing
NaN are treated as gaps and produce prediction-only steps.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import ConditioningError


def _sym(A):
    return 0.5 * (A + A.T)


def kf_forward(F, Q, H, R, m0, P0, Y, joseph: bool = True):
    """Forward Kalman recursion over all rows of Y.

    Returns (m_pred, P_pred, m_filt, P_filt, innovations, innovation_covs,
    nll) where nll = sum_k (log det S_k + e_k^T S_k^{-1} e_k) over updated
    steps.  Gap steps leave NaN in the innovation outputs.
    """
    F = np.ascontiguousarray(F, dtype=float)
    Q = np.ascontiguousarray(Q, dtype=float)
    H = np.ascontiguousarray(H, dtype=float)
    R = np.ascontiguousarray(R, dtype=float)
    Y = np.ascontiguousarray(Y, dtype=float)
    n = F.shape[0]
    N, m = Y.shape

    m_pred = np.empty((N, n))
    P_pred = np.empty((N, n, n))
    m_filt = np.empty((N, n))
    P_filt = np.empty((N, n, n))
    innov = np.full((N, m), np.nan)
    innov_cov = np.full((N, m, m), np.nan)

    I_n = np.eye(n)
    mf = np.asarray(m0, dtype=float).reshape(n)
    Pf = _sym(np.asarray(P0, dtype=float))
    nll = 0.0

    for k in range(N):
        mp = F @ mf
        Pp = _sym(F @ Pf @ F.T + Q)
        m_pred[k] = mp
        P_pred[k] = Pp

        y_k = Y[k]
        if np.any(np.isnan(y_k)):
            mf, Pf = mp, Pp
            m_filt[k] = mf
            P_filt[k] = Pf
            continue

        e = y_k - H @ mp
        PHt = Pp @ H.T
        S = _sym(H @ PHt + R)
        try:
            cho = scipy.linalg.cho_factor(S, lower=True)
        except scipy.linalg.LinAlgError as err:
            raise ConditioningError(
                f"innovation covariance not positive definite at step {k}: {err}",
                step=k,
            ) from err
        K = scipy.linalg.cho_solve(cho, PHt.T).T
        mf = mp + K @ e
        if joseph:
            IKH = I_n - K @ H
            Pf = _sym(IKH @ Pp @ IKH.T + K @ R @ K.T)
        else:
            Pf = _sym(Pp - K @ S @ K.T)
        alpha = scipy.linalg.cho_solve(cho, e)
        nll += 2.0 * float(np.sum(np.log(np.diag(cho[0])))) + float(e @ alpha)

        m_filt[k] = mf
        P_filt[k] = Pf
        innov[k] = e
        innov_cov[k] = S

    return m_pred, P_pred, m_filt, P_filt, innov, innov_cov, nll


def rts_backward(F, m_pred, P_pred, m_filt, P_filt):
    """Fixed-interval RTS smoothing pass over stored filter quantities."""
    F = np.ascontiguousarray(F, dtype=float)
    N = m_filt.shape[0]
    m_smooth = np.array(m_filt, dtype=float, copy=True)
    P_smooth = np.array(P_filt, dtype=float, copy=True)
    for k in range(N - 2, -1, -1):
        G = F @ P_filt[k]
        try:
            cho = scipy.linalg.cho_factor(P_pred[k + 1], lower=True)
        except scipy.linalg.LinAlgError as err:
            raise ConditioningError(
                f"predicted covariance not positive definite at step {k + 1}: {err}",
                step=k + 1,
            ) from err
        N_k = scipy.linalg.cho_solve(cho, G).T
        m_smooth[k] = m_filt[k] + N_k @ (m_smooth[k + 1] - m_pred[k + 1])
        P_smooth[k] = _sym(
            P_filt[k] + N_k @ (P_smooth[k + 1] - P_pred[k + 1]) @ N_k.T
        )
    return m_smooth, P_smooth
