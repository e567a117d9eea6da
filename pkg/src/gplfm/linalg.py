"""Dense linear-algebra primitives used throughout the package.

Matrix exponentials, continuous Lyapunov solves, zero-order-hold
discretization, process-noise integrals via matrix fraction decomposition,
and numerical rank tests.  All routines are pure functions on ndarrays and
are safe to call from concurrent tasks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, StabilityError, ValidationError

# Singular values below sigma_max * max(rows, cols) * RANK_TOL_FACTOR are
# treated as zero in rank decisions.
RANK_TOL_FACTOR = 2.0**-40


def _as_square(A: np.ndarray, name: str = "matrix") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    return A


def symmetrize(A: np.ndarray) -> np.ndarray:
    """Average a nearly-symmetric matrix with its transpose."""
    return 0.5 * (A + A.T)


def matrix_exponential(A: np.ndarray, t: float = 1.0) -> np.ndarray:
    """Compute exp(A*t) by scaling-and-squaring with Pade approximation."""
    A = _as_square(A, "A")
    t = float(t)
    if not np.isfinite(t):
        raise ValidationError(f"time argument must be finite, got {t}")
    if A.size == 0:
        return np.zeros((0, 0))
    return scipy.linalg.expm(A * t)


def is_hurwitz(F: np.ndarray, margin: float = 0.0) -> bool:
    """True when every eigenvalue of F has real part < -margin."""
    F = _as_square(F, "F")
    if F.size == 0:
        return True
    return bool(np.all(np.linalg.eigvals(F).real < -margin))


def solve_lyapunov(F: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Solve F P + P F^T + Q = 0 for the steady-state covariance P.

    F must be Hurwitz, otherwise no steady state exists and a
    StabilityError is raised.  The result is explicitly symmetrized.
    """
    F = _as_square(F, "F")
    Q = _as_square(Q, "Q")
    if F.shape != Q.shape:
        raise DimensionError(f"F and Q shapes differ: {F.shape} vs {Q.shape}")
    if not is_hurwitz(F):
        raise StabilityError("F is not Hurwitz; steady-state covariance does not exist")
    P = scipy.linalg.solve_continuous_lyapunov(F, -np.asarray(Q, dtype=float))
    return symmetrize(P)


def discretize_zoh(A_c: np.ndarray, B_c: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Zero-order-hold discretization of (A_c, B_c).

    Returns A = exp(A_c dt) and B = (A - I) A_c^{-1} B_c.  When A_c is
    numerically singular, B is obtained from the block-augmented
    exponential exp([[A_c, B_c], [0, 0]] dt) instead; both paths satisfy
    the same contract.
    """
    A_c = _as_square(A_c, "A_c")
    B_c = np.asarray(B_c, dtype=float)
    if B_c.ndim != 2 or B_c.shape[0] != A_c.shape[0]:
        raise DimensionError(
            f"B_c must have {A_c.shape[0]} rows, got shape {B_c.shape}"
        )
    dt = float(dt)
    if dt <= 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    n, m = B_c.shape
    if m == 0:
        return matrix_exponential(A_c, dt), np.zeros((n, 0))

    sv = np.linalg.svd(A_c, compute_uv=False)
    singular = sv[0] == 0 or sv[-1] <= sv[0] * n * RANK_TOL_FACTOR
    if singular:
        blk = np.zeros((n + m, n + m))
        blk[:n, :n] = A_c
        blk[:n, n:] = B_c
        E = matrix_exponential(blk, dt)
        return E[:n, :n], E[:n, n:]

    A = matrix_exponential(A_c, dt)
    # (A - I) commutes with A_c^{-1}, so solve instead of forming the inverse.
    B = np.linalg.solve(A_c, (A - np.eye(n)) @ B_c)
    return A, B


def discrete_process_noise(F: np.ndarray, Q_c: np.ndarray, dt: float) -> np.ndarray:
    """Integrate the continuous noise density Q_c over one sampling interval.

    Computes Q_d = int_0^dt exp(F (dt-s)) Q_c exp(F (dt-s))^T ds through
    matrix fraction decomposition: with Phi = exp([[F, Q_c], [0, -F^T]] dt),
    Q_d = Phi_12 Phi_11^T.  Result is symmetrized.
    """
    F = _as_square(F, "F")
    Q_c = _as_square(Q_c, "Q_c")
    if F.shape != Q_c.shape:
        raise DimensionError(f"F and Q_c shapes differ: {F.shape} vs {Q_c.shape}")
    dt = float(dt)
    if dt <= 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    if not np.any(Q_c):
        return np.zeros_like(Q_c)
    n = F.shape[0]
    blk = np.zeros((2 * n, 2 * n))
    blk[:n, :n] = F
    blk[:n, n:] = Q_c
    blk[n:, n:] = -F.T
    E = matrix_exponential(blk, dt)
    return symmetrize(E[:n, n:] @ E[:n, :n].T)


@dataclass(frozen=True)
class RankReport:
    """Numerical rank of a matrix together with its column-rank deficiency."""

    rank: int
    deficiency: int
    singular_values: np.ndarray

    @property
    def full(self) -> bool:
        return self.deficiency == 0


def rank_report(M: np.ndarray) -> RankReport:
    """Numerical rank with the documented singular-value cutoff."""
    M = np.asarray(M)
    if M.ndim != 2:
        raise DimensionError(f"rank test needs a 2-D array, got shape {M.shape}")
    if M.size == 0:
        return RankReport(0, 0, np.zeros(0))
    sv = np.linalg.svd(M, compute_uv=False)
    tol = sv[0] * max(M.shape) * RANK_TOL_FACTOR
    rank = int(np.count_nonzero(sv > tol))
    return RankReport(rank, min(M.shape) - rank, sv)


def pbh_rank(F: np.ndarray, H: np.ndarray, s: complex) -> RankReport:
    """Rank of the stacked matrix [s I - F; H] at one test frequency s."""
    F = _as_square(F, "F")
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[1] != F.shape[0]:
        raise DimensionError(
            f"H must have {F.shape[0]} columns, got shape {H.shape}"
        )
    n = F.shape[0]
    stacked = np.vstack([s * np.eye(n) - F, H])
    return rank_report(stacked)
