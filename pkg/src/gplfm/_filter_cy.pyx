# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Kalman filter / RTS smoother recursions (hot path).

Semantics match gplfm._filter_np exactly; that module is the reference
implementation and the import-time fallback.
"""

import numpy as np

from libc.math cimport isnan, log, sqrt

from .errors import ConditioningError


cdef inline void _mv(double[::1] out, double[:, ::1] A, double[::1] x,
                     Py_ssize_t ni, Py_ssize_t nk) noexcept nogil:
    cdef Py_ssize_t i, k
    cdef double acc
    for i in range(ni):
        acc = 0.0
        for k in range(nk):
            acc += A[i, k] * x[k]
        out[i] = acc


cdef inline void _mm(double[:, ::1] out, double[:, ::1] A, double[:, ::1] B,
                     Py_ssize_t ni, Py_ssize_t nk, Py_ssize_t nj) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef double acc
    for i in range(ni):
        for j in range(nj):
            acc = 0.0
            for k in range(nk):
                acc += A[i, k] * B[k, j]
            out[i, j] = acc


cdef inline void _mm_nt(double[:, ::1] out, double[:, ::1] A, double[:, ::1] B,
                        Py_ssize_t ni, Py_ssize_t nk, Py_ssize_t nj) noexcept nogil:
    # out = A @ B.T with A (ni, nk), B (nj, nk)
    cdef Py_ssize_t i, j, k
    cdef double acc
    for i in range(ni):
        for j in range(nj):
            acc = 0.0
            for k in range(nk):
                acc += A[i, k] * B[j, k]
            out[i, j] = acc


cdef inline int _chol(double[:, ::1] A, Py_ssize_t n) noexcept nogil:
    # In-place lower-triangular Cholesky; nonzero return means not SPD.
    cdef Py_ssize_t i, j, k
    cdef double s
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s -= A[j, k] * A[j, k]
        if s <= 0.0 or isnan(s):
            return 1
        A[j, j] = sqrt(s)
        for i in range(j + 1, n):
            s = A[i, j]
            for k in range(j):
                s -= A[i, k] * A[j, k]
            A[i, j] = s / A[j, j]
    return 0


cdef inline void _chol_solve(double[:, ::1] L, double[::1] b, double[::1] x,
                             Py_ssize_t n) noexcept nogil:
    # Solve L L^T x = b given the lower Cholesky factor L.
    cdef Py_ssize_t i, k
    cdef double s
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= L[i, k] * x[k]
        x[i] = s / L[i, i]
    for i in range(n - 1, -1, -1):
        s = x[i]
        for k in range(i + 1, n):
            s -= L[k, i] * x[k]
        x[i] = s / L[i, i]


cdef inline void _store2(double[:, ::1] out, Py_ssize_t k, double[::1] src,
                         Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        out[k, i] = src[i]


cdef inline void _store3(double[:, :, ::1] out, Py_ssize_t k, double[:, ::1] src,
                         Py_ssize_t n1, Py_ssize_t n2) noexcept nogil:
    cdef Py_ssize_t i, j
    for i in range(n1):
        for j in range(n2):
            out[k, i, j] = src[i, j]


def kf_forward(double[:, ::1] F, double[:, ::1] Q, double[:, ::1] H,
               double[:, ::1] R, double[::1] m0, double[:, ::1] P0,
               double[:, ::1] Y, bint joseph=True):
    """Forward Kalman recursion; see _filter_np.kf_forward for the contract."""
    cdef Py_ssize_t n = F.shape[0]
    cdef Py_ssize_t N = Y.shape[0]
    cdef Py_ssize_t m = Y.shape[1]

    m_pred_np = np.empty((N, n))
    P_pred_np = np.empty((N, n, n))
    m_filt_np = np.empty((N, n))
    P_filt_np = np.empty((N, n, n))
    innov_np = np.full((N, m), np.nan)
    innov_cov_np = np.full((N, m, m), np.nan)

    cdef double[:, ::1] m_pred = m_pred_np
    cdef double[:, :, ::1] P_pred = P_pred_np
    cdef double[:, ::1] m_filt = m_filt_np
    cdef double[:, :, ::1] P_filt = P_filt_np
    cdef double[:, ::1] innov = innov_np
    cdef double[:, :, ::1] innov_cov = innov_cov_np

    cdef double[::1] mf = np.array(m0, dtype=float, copy=True)
    cdef double[:, ::1] Pf = 0.5 * (np.asarray(P0) + np.asarray(P0).T)
    cdef double[::1] mp = np.empty(n)
    cdef double[:, ::1] Pp = np.empty((n, n))
    cdef double[:, ::1] T1 = np.empty((n, n))
    cdef double[:, ::1] T2 = np.empty((n, n))
    cdef double[:, ::1] PHt = np.empty((n, m))
    cdef double[:, ::1] S = np.empty((m, m))
    cdef double[:, ::1] K = np.empty((n, m))
    cdef double[:, ::1] KR = np.empty((n, m))
    cdef double[::1] e = np.empty(m)
    cdef double[::1] alpha = np.empty(m)
    cdef double[::1] brow = np.empty(max(m, n))
    cdef double[::1] xbuf = np.empty(max(m, n))

    cdef double nll = 0.0
    cdef double acc, v
    cdef Py_ssize_t k, i, j, q
    cdef int gap, info

    for k in range(N):
        # Predict: mp = F mf, Pp = F Pf F^T + Q (symmetrized).
        _mv(mp, F, mf, n, n)
        _mm(T1, F, Pf, n, n, n)
        _mm_nt(Pp, T1, F, n, n, n)
        for i in range(n):
            for j in range(i, n):
                v = 0.5 * (Pp[i, j] + Pp[j, i]) + 0.5 * (Q[i, j] + Q[j, i])
                Pp[i, j] = v
                Pp[j, i] = v
        _store2(m_pred, k, mp, n)
        _store3(P_pred, k, Pp, n, n)

        gap = 0
        for j in range(m):
            if isnan(Y[k, j]):
                gap = 1
                break
        if gap:
            for i in range(n):
                mf[i] = mp[i]
                for j in range(n):
                    Pf[i, j] = Pp[i, j]
            _store2(m_filt, k, mf, n)
            _store3(P_filt, k, Pf, n, n)
            continue

        # Innovation e = y - H mp and covariance S = H Pp H^T + R.
        for i in range(m):
            acc = Y[k, i]
            for j in range(n):
                acc -= H[i, j] * mp[j]
            e[i] = acc
        _mm_nt(PHt, Pp, H, n, n, m)
        _mm(S, H, PHt, m, n, m)
        for i in range(m):
            for j in range(i, m):
                v = 0.5 * (S[i, j] + S[j, i]) + 0.5 * (R[i, j] + R[j, i])
                S[i, j] = v
                S[j, i] = v
        _store2(innov, k, e, m)
        _store3(innov_cov, k, S, m, m)

        info = _chol(S, m)
        if info != 0:
            raise ConditioningError(
                f"innovation covariance not positive definite at step {k}",
                step=k,
            )

        # Gain rows: K[i, :] solves S K[i, :]^T = PHt[i, :]^T.
        for i in range(n):
            for j in range(m):
                brow[j] = PHt[i, j]
            _chol_solve(S, brow, xbuf, m)
            for j in range(m):
                K[i, j] = xbuf[j]

        for i in range(n):
            acc = mp[i]
            for j in range(m):
                acc += K[i, j] * e[j]
            mf[i] = acc

        if joseph:
            # Pf = (I - K H) Pp (I - K H)^T + K R K^T
            _mm(T1, K, H, n, m, n)
            for i in range(n):
                for j in range(n):
                    T1[i, j] = (1.0 if i == j else 0.0) - T1[i, j]
            _mm(T2, T1, Pp, n, n, n)
            _mm_nt(Pf, T2, T1, n, n, n)
            _mm(KR, K, R, n, m, m)
            for i in range(n):
                for j in range(n):
                    acc = Pf[i, j]
                    for q in range(m):
                        acc += KR[i, q] * K[j, q]
                    Pf[i, j] = acc
        else:
            # Pf = Pp - K S K^T with S pre-factorization: recompute K S K^T
            # as K (PHt)^T since S K^T = PHt^T.
            for i in range(n):
                for j in range(n):
                    acc = Pp[i, j]
                    for q in range(m):
                        acc -= K[i, q] * PHt[j, q]
                    Pf[i, j] = acc
        for i in range(n):
            for j in range(i + 1, n):
                v = 0.5 * (Pf[i, j] + Pf[j, i])
                Pf[i, j] = v
                Pf[j, i] = v

        # NLL contribution: log det S + e^T S^{-1} e.
        _chol_solve(S, e, alpha, m)
        acc = 0.0
        for i in range(m):
            acc += 2.0 * log(S[i, i])
            acc += e[i] * alpha[i]
        nll += acc

        _store2(m_filt, k, mf, n)
        _store3(P_filt, k, Pf, n, n)

    return m_pred_np, P_pred_np, m_filt_np, P_filt_np, innov_np, innov_cov_np, nll


def rts_backward(double[:, ::1] F, double[:, ::1] m_pred,
                 double[:, :, ::1] P_pred, double[:, ::1] m_filt,
                 double[:, :, ::1] P_filt):
    """Backward RTS recursion; see _filter_np.rts_backward for the contract."""
    cdef Py_ssize_t N = m_filt.shape[0]
    cdef Py_ssize_t n = m_filt.shape[1]

    m_smooth_np = np.array(m_filt, dtype=float, copy=True)
    P_smooth_np = np.array(P_filt, dtype=float, copy=True)
    cdef double[:, ::1] m_smooth = m_smooth_np
    cdef double[:, :, ::1] P_smooth = P_smooth_np

    cdef double[:, ::1] Pfk = np.empty((n, n))
    cdef double[:, ::1] Pp = np.empty((n, n))
    cdef double[:, ::1] G = np.empty((n, n))
    cdef double[:, ::1] Nk = np.empty((n, n))
    cdef double[:, ::1] dP = np.empty((n, n))
    cdef double[:, ::1] T1 = np.empty((n, n))
    cdef double[:, ::1] T2 = np.empty((n, n))
    cdef double[::1] brow = np.empty(n)
    cdef double[::1] xbuf = np.empty(n)
    cdef double[::1] dm = np.empty(n)

    cdef Py_ssize_t k, i, j
    cdef double acc, v
    cdef int info

    for k in range(N - 2, -1, -1):
        for i in range(n):
            for j in range(n):
                Pfk[i, j] = P_filt[k, i, j]
                Pp[i, j] = P_pred[k + 1, i, j]
        _mm(G, F, Pfk, n, n, n)
        info = _chol(Pp, n)
        if info != 0:
            raise ConditioningError(
                f"predicted covariance not positive definite at step {k + 1}",
                step=k + 1,
            )
        # Nk = (Pp^{-1} G)^T
        for j in range(n):
            for i in range(n):
                brow[i] = G[i, j]
            _chol_solve(Pp, brow, xbuf, n)
            for i in range(n):
                Nk[j, i] = xbuf[i]

        for i in range(n):
            dm[i] = m_smooth[k + 1, i] - m_pred[k + 1, i]
        for i in range(n):
            acc = m_filt[k, i]
            for j in range(n):
                acc += Nk[i, j] * dm[j]
            m_smooth[k, i] = acc

        for i in range(n):
            for j in range(n):
                dP[i, j] = P_smooth[k + 1, i, j] - P_pred[k + 1, i, j]
        _mm(T1, Nk, dP, n, n, n)
        _mm_nt(T2, T1, Nk, n, n, n)
        for i in range(n):
            for j in range(i, n):
                v = Pfk[i, j] + 0.5 * (T2[i, j] + T2[j, i])
                P_smooth[k, i, j] = v
                P_smooth[k, j, i] = v

    return m_smooth_np, P_smooth_np
