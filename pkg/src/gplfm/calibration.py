"""Maximum-likelihood hyperparameter estimation for latent-force kernels.

The innovations-based negative log-likelihood is minimized over
log-parameters (positivity by construction) with Nelder-Mead restarts
from a low-discrepancy sequence over a bounded box.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
from scipy.stats import qmc

from .errors import ConditioningError, ValidationError
from .filtering import kalman_filter
from .kernels import KernelSpec, kernel_to_ssm
from .model import GaussianBelief, assemble_augmented, discretize
from .structural import ContinuousStateSpace


@dataclass(frozen=True)
class HyperParams:
    """Per-kernel log signal variance and log lengthscale with fixed masks.

    Fixed entries are held at their current values during optimization.
    ``shared`` ties one (log_alpha2, log_lengthscale) pair across all
    kernels.
    """

    log_alpha2: np.ndarray
    log_lengthscale: np.ndarray
    fixed_alpha2: np.ndarray
    fixed_lengthscale: np.ndarray
    shared: bool = False

    def __post_init__(self):
        la = np.atleast_1d(np.asarray(self.log_alpha2, dtype=float))
        ll = np.atleast_1d(np.asarray(self.log_lengthscale, dtype=float))
        fa = np.atleast_1d(np.asarray(self.fixed_alpha2, dtype=bool))
        fl = np.atleast_1d(np.asarray(self.fixed_lengthscale, dtype=bool))
        if not la.shape == ll.shape == fa.shape == fl.shape:
            raise ValidationError("hyperparameter arrays must share one shape")
        if not (np.all(np.isfinite(la)) and np.all(np.isfinite(ll))):
            raise ValidationError("log-parameters must be finite")
        if self.shared and (len(set(fa)) > 1 or len(set(fl)) > 1):
            raise ValidationError(
                "shared hyperparameters require uniform fixed masks"
            )
        for name, val in (("log_alpha2", la), ("log_lengthscale", ll),
                          ("fixed_alpha2", fa), ("fixed_lengthscale", fl)):
            object.__setattr__(self, name, val)

    @classmethod
    def from_specs(cls, specs, fixed_alpha2=False, fixed_lengthscale=False,
                   shared=False) -> "HyperParams":
        specs = list(specs)
        n = len(specs)
        return cls(
            log_alpha2=np.log([s.alpha2 for s in specs]),
            log_lengthscale=np.log([s.lengthscale for s in specs]),
            fixed_alpha2=np.broadcast_to(np.asarray(fixed_alpha2, bool), n).copy(),
            fixed_lengthscale=np.broadcast_to(
                np.asarray(fixed_lengthscale, bool), n
            ).copy(),
            shared=shared,
        )

    @property
    def n_kernels(self) -> int:
        return self.log_alpha2.size

    @property
    def alpha2(self) -> np.ndarray:
        return np.exp(self.log_alpha2)

    @property
    def lengthscale(self) -> np.ndarray:
        return np.exp(self.log_lengthscale)

    def apply_to(self, specs) -> list[KernelSpec]:
        """Rebuild kernel specs carrying these hyperparameter values."""
        specs = list(specs)
        if len(specs) != self.n_kernels:
            raise ValidationError(
                f"{len(specs)} specs for {self.n_kernels} hyperparameter sets"
            )
        return [
            dataclasses.replace(s, alpha2=float(a2), lengthscale=float(l))
            for s, a2, l in zip(specs, self.alpha2, self.lengthscale)
        ]

    def free_vector(self) -> np.ndarray:
        """Pack the free (non-fixed) log-parameters into a flat vector."""
        parts = []
        if self.shared:
            if not self.fixed_alpha2[0]:
                parts.append(self.log_alpha2[:1])
            if not self.fixed_lengthscale[0]:
                parts.append(self.log_lengthscale[:1])
        else:
            parts.append(self.log_alpha2[~self.fixed_alpha2])
            parts.append(self.log_lengthscale[~self.fixed_lengthscale])
        return np.concatenate(parts) if parts else np.zeros(0)

    def with_free_vector(self, x) -> "HyperParams":
        """Inverse of free_vector: scatter a flat vector into a new instance."""
        x = np.asarray(x, dtype=float).reshape(-1)
        la = self.log_alpha2.copy()
        ll = self.log_lengthscale.copy()
        i = 0
        if self.shared:
            if not self.fixed_alpha2[0]:
                la[:] = x[i]
                i += 1
            if not self.fixed_lengthscale[0]:
                ll[:] = x[i]
                i += 1
        else:
            n_a = int(np.count_nonzero(~self.fixed_alpha2))
            la[~self.fixed_alpha2] = x[i:i + n_a]
            i += n_a
            n_l = int(np.count_nonzero(~self.fixed_lengthscale))
            ll[~self.fixed_lengthscale] = x[i:i + n_l]
            i += n_l
        if i != x.size:
            raise ValidationError(
                f"free vector has {x.size} entries, expected {i}"
            )
        return dataclasses.replace(self, log_alpha2=la, log_lengthscale=ll)

    def free_kinds(self) -> list[str]:
        """Parameter kind ('alpha2' or 'lengthscale') per free-vector slot."""
        kinds = []
        if self.shared:
            if not self.fixed_alpha2[0]:
                kinds.append("alpha2")
            if not self.fixed_lengthscale[0]:
                kinds.append("lengthscale")
        else:
            kinds += ["alpha2"] * int(np.count_nonzero(~self.fixed_alpha2))
            kinds += ["lengthscale"] * int(
                np.count_nonzero(~self.fixed_lengthscale)
            )
        return kinds


def nll(
    params: HyperParams,
    specs,
    ssm: ContinuousStateSpace,
    y: np.ndarray,
    dt: float,
    Q_x: np.ndarray,
    R: np.ndarray,
    prior: GaussianBelief,
) -> float:
    """Innovations negative log-likelihood for one hyperparameter set.

    Rebuilds kernel realizations and the discretized augmented model,
    runs the Kalman filter, and returns sum_k (log det S_k +
    e_k^T S_k^{-1} e_k); the constant 2 pi term is omitted.  Filter
    conditioning failures map to +inf.
    """
    kernels = [kernel_to_ssm(s) for s in params.apply_to(specs)]
    model = discretize(assemble_augmented(ssm, kernels, Q_x, R, prior), dt)
    try:
        return kalman_filter(model, y).nll
    except ConditioningError:
        return float("inf")


@dataclass
class StartRecord:
    """One restart of the local search."""

    x0: np.ndarray
    nll0: float
    x: np.ndarray
    nll: float
    n_iter: int
    converged: bool


@dataclass
class OptimizationReport:
    """Best hyperparameters with per-start trajectories."""

    best_params: HyperParams
    best_nll: float
    best_start: int
    starts: list[StartRecord]
    seed: int
    wall_time: float

    def to_dict(self) -> dict:
        """Serializable summary (wall time intentionally excluded)."""
        return {
            "best": {
                "alpha2": [float(v) for v in self.best_params.alpha2],
                "lengthscale": [float(v) for v in self.best_params.lengthscale],
            },
            "best_nll": float(self.best_nll),
            "best_start": int(self.best_start),
            "seed": int(self.seed),
            "starts": [
                {
                    "x0": [float(v) for v in s.x0],
                    "nll0": float(s.nll0),
                    "x": [float(v) for v in s.x],
                    "nll": float(s.nll),
                    "n_iter": int(s.n_iter),
                    "converged": bool(s.converged),
                }
                for s in self.starts
            ],
        }


def default_bounds(y: np.ndarray, dt: float) -> dict:
    """Log-space search box scaled to the measurements.

    log alpha2 spans [1e-4, 1e6] times the pooled measurement variance;
    log lengthscale spans [dt, N dt].
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    s_y2 = float(np.nanvar(y))
    if s_y2 <= 0:
        s_y2 = 1.0
    T = y.shape[0] * dt
    return {
        "alpha2": (np.log(1e-4 * s_y2), np.log(1e6 * s_y2)),
        "lengthscale": (np.log(dt), np.log(T)),
    }


def optimize(
    ssm: ContinuousStateSpace,
    y: np.ndarray,
    dt: float,
    specs,
    Q_x: np.ndarray,
    R: np.ndarray,
    prior: GaussianBelief,
    n_starts: int = 8,
    bounds: dict | None = None,
    seed: int = 0,
    shared: bool = True,
    fixed_alpha2=False,
    fixed_lengthscale=False,
    init: HyperParams | None = None,
    max_iter: int = 500,
    xatol: float = 1e-6,
) -> OptimizationReport:
    """Multistart Nelder-Mead minimization of the innovations NLL.

    Starts are drawn from a seeded Halton sequence over the log-space
    bounds (paired with the initial specs' own values as start 0 when
    ``init`` is given); re-running with the same seed reproduces the
    report exactly.
    """
    specs = list(specs)
    if n_starts < 1:
        raise ValidationError(f"n_starts must be >= 1, got {n_starts}")
    template = init if init is not None else HyperParams.from_specs(
        specs, fixed_alpha2, fixed_lengthscale, shared
    )
    kinds = template.free_kinds()
    n_free = len(kinds)
    if n_free == 0:
        raise ValidationError("no free hyperparameters to optimize")
    box = dict(default_bounds(y, dt), **(bounds or {}))
    lo = np.array([box[k][0] for k in kinds])
    hi = np.array([box[k][1] for k in kinds])
    if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)) or np.any(lo >= hi):
        raise ValidationError(f"invalid bounds box: {box}")

    def objective(x):
        value = nll(
            template.with_free_vector(np.clip(x, lo, hi)),
            specs, ssm, y, dt, Q_x, R, prior,
        )
        return value if np.isfinite(value) else 1e300

    sampler = qmc.Halton(d=n_free, seed=seed)
    x0s = [lo + (hi - lo) * row for row in sampler.random(n_starts)]
    if init is not None:
        x0s[0] = np.clip(init.free_vector(), lo, hi)

    t_start = time.perf_counter()
    starts: list[StartRecord] = []
    for x0 in x0s:
        f0 = objective(x0)
        res = scipy.optimize.minimize(
            objective,
            x0,
            method="Nelder-Mead",
            bounds=list(zip(lo, hi)),
            options={"maxiter": max_iter, "xatol": xatol, "fatol": 1e-9},
        )
        starts.append(
            StartRecord(
                x0=np.asarray(x0),
                nll0=f0,
                x=np.clip(res.x, lo, hi),
                nll=float(res.fun),
                n_iter=int(res.nit),
                converged=bool(res.success),
            )
        )
    wall = time.perf_counter() - t_start

    best_start = min(range(len(starts)), key=lambda i: (starts[i].nll, i))
    best = starts[best_start]
    assert best.nll <= min(s.nll0 for s in starts) + 1e-12
    return OptimizationReport(
        best_params=template.with_free_vector(best.x),
        best_nll=best.nll,
        best_start=best_start,
        starts=starts,
        seed=seed,
        wall_time=wall,
    )
