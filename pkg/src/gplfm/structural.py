"""Chain/shear-building structural models and their state-space form.

Builds M, C, K for shear-type chains, performs modal analysis and modal
truncation, and assembles the continuous-time state-space model including
sensor selection matrices and the seismic influence path.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionError, ValidationError


@dataclass
class StructuralSystem:
    """Second-order model M u'' + C u' + K u = S_p p - M S_g u''_g.

    S_p maps n_p applied load histories onto dofs; S_g marks the dofs
    affected by n_g ground-motion components.  ``expansion`` is set by
    modal_truncation and maps model coordinates back to physical dofs.
    """

    M: np.ndarray
    C: np.ndarray
    K: np.ndarray
    S_p: np.ndarray
    S_g: np.ndarray
    expansion: np.ndarray | None = None

    def __post_init__(self):
        self.M = np.asarray(self.M, dtype=float)
        self.C = np.asarray(self.C, dtype=float)
        self.K = np.asarray(self.K, dtype=float)
        n = self.M.shape[0]
        for name in ("M", "C", "K"):
            A = getattr(self, name)
            if A.shape != (n, n):
                raise DimensionError(f"{name} must be {n}x{n}, got {A.shape}")
            if not np.allclose(A, A.T, rtol=1e-10, atol=1e-12):
                raise ValidationError(f"{name} must be symmetric")
        try:
            np.linalg.cholesky(self.M)
        except np.linalg.LinAlgError as err:
            raise ValidationError("M must be positive definite") from err
        self.S_p = np.asarray(self.S_p, dtype=float).reshape(n, -1)
        self.S_g = np.asarray(self.S_g, dtype=float).reshape(n, -1)
        if self.expansion is not None:
            self.expansion = np.asarray(self.expansion, dtype=float)
            if self.expansion.shape[1] != n:
                raise DimensionError(
                    f"expansion must have {n} columns, got {self.expansion.shape}"
                )

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @property
    def n_p(self) -> int:
        return self.S_p.shape[1]

    @property
    def n_g(self) -> int:
        return self.S_g.shape[1]

    @property
    def n_physical(self) -> int:
        """Number of physical dofs (before any modal reduction)."""
        return self.n if self.expansion is None else self.expansion.shape[0]


@dataclass(frozen=True)
class SensorLayout:
    """Selection matrices picking measured displacements, velocities, accelerations.

    Rows index physical dofs; each row has exactly one unit entry.
    """

    S_dis: np.ndarray
    S_vel: np.ndarray
    S_acc: np.ndarray

    def __post_init__(self):
        for name in ("S_dis", "S_vel", "S_acc"):
            S = np.asarray(getattr(self, name), dtype=float)
            if S.ndim != 2:
                raise DimensionError(f"{name} must be 2-D, got shape {S.shape}")
            if S.size:
                ok = np.all(np.isin(S, (0.0, 1.0))) and np.all(S.sum(axis=1) == 1)
                if not ok:
                    raise ValidationError(
                        f"{name} rows must each contain exactly one unit entry"
                    )
                if len(np.unique(S.argmax(axis=1))) != S.shape[0]:
                    raise ValidationError(f"{name} contains duplicate rows")
            object.__setattr__(self, name, S)

    @classmethod
    def from_dofs(cls, n: int, displacements=(), velocities=(), accelerations=()):
        """Build a layout from 0-based dof indices for each measurement kind."""

        def selector(dofs):
            dofs = list(dofs)
            S = np.zeros((len(dofs), n))
            for row, dof in enumerate(dofs):
                if not 0 <= dof < n:
                    raise ValidationError(f"dof index {dof} out of range [0, {n})")
                S[row, dof] = 1.0
            return S

        return cls(selector(displacements), selector(velocities), selector(accelerations))

    @property
    def n_outputs(self) -> int:
        return self.S_dis.shape[0] + self.S_vel.shape[0] + self.S_acc.shape[0]


@dataclass(frozen=True)
class ModalData:
    """Undamped modal frequencies (Hz), damping ratios, mass-normalized shapes."""

    frequencies: np.ndarray
    damping_ratios: np.ndarray
    mode_shapes: np.ndarray


@dataclass(frozen=True)
class ContinuousStateSpace:
    """First-order form dx/dt = A_c x + B_c f, y = G_c x + J_c f.

    The state is x = [u; u'] (2n entries); forces stack n_p applied loads
    then n_g ground accelerations.  Ground-motion columns of J_c are
    identically zero: absolute-acceleration measurements carry no direct
    ground-motion feedthrough.
    """

    A_c: np.ndarray
    B_c: np.ndarray
    G_c: np.ndarray
    J_c: np.ndarray
    n_p: int
    n_g: int
    expansion: np.ndarray | None = None

    @property
    def n_s(self) -> int:
        return self.A_c.shape[0]

    @property
    def n(self) -> int:
        return self.n_s // 2

    @property
    def n_f(self) -> int:
        return self.B_c.shape[1]

    @property
    def n_o(self) -> int:
        return self.G_c.shape[0]


def build_shear_building(
    floor_masses,
    storey_stiffnesses,
    rayleigh=(0.0, 0.0),
    load_dofs=(),
    ground_motion: bool = False,
) -> StructuralSystem:
    """Construct a shear-type chain: lumped floor masses on storey springs.

    M is diagonal, K is the standard tridiagonal chain, and
    C = a0 M + a1 K with (a0, a1) = rayleigh.  ``load_dofs`` are 0-based
    dof indices receiving applied load histories (columns of S_p in
    order); ``ground_motion`` adds a single ground-acceleration input
    affecting every dof.
    """
    m = np.atleast_1d(np.asarray(floor_masses, dtype=float))
    k = np.atleast_1d(np.asarray(storey_stiffnesses, dtype=float))
    if m.shape != k.shape or m.ndim != 1:
        raise DimensionError(
            f"mass and stiffness lists must match, got {m.shape} vs {k.shape}"
        )
    if np.any(m <= 0) or np.any(k <= 0):
        raise ValidationError("masses and stiffnesses must all be positive")
    a0, a1 = (float(v) for v in rayleigh)
    n = m.size
    M = np.diag(m)
    K = np.zeros((n, n))
    for i in range(n):
        K[i, i] = k[i] + (k[i + 1] if i + 1 < n else 0.0)
        if i + 1 < n:
            K[i, i + 1] = K[i + 1, i] = -k[i + 1]
    C = a0 * M + a1 * K

    S_p = np.zeros((n, len(tuple(load_dofs))))
    for col, dof in enumerate(load_dofs):
        if not 0 <= dof < n:
            raise ValidationError(f"load dof {dof} out of range [0, {n})")
        S_p[dof, col] = 1.0
    S_g = np.ones((n, 1)) if ground_motion else np.zeros((n, 0))
    return StructuralSystem(M, C, K, S_p, S_g)


def build_benchmark_tower(
    n_floors: int = 76,
    first_frequency_hz: float = 0.16,
    floor_mass: float = 1.0e5,
    damping_ratio: float = 0.01,
    load_dofs=(),
    ground_motion: bool = False,
) -> StructuralSystem:
    """Tall-building stand-in: a uniform chain scaled to a target first frequency.

    The original 76-storey benchmark model ships as external data files,
    so this generator calibrates a uniform shear chain to the published
    first frequency and fits Rayleigh damping to the requested ratio at
    modes 1 and 5.  Higher-mode spacing follows the chain, not the
    cantilever-beam original.
    """
    unit = build_shear_building(
        np.full(n_floors, floor_mass), np.ones(n_floors), rayleigh=(0.0, 0.0)
    )
    f1_unit = modal_analysis(unit).frequencies[0]
    k = (first_frequency_hz / f1_unit) ** 2
    sys = build_shear_building(
        np.full(n_floors, floor_mass),
        np.full(n_floors, k),
        rayleigh=(0.0, 0.0),
        load_dofs=load_dofs,
        ground_motion=ground_motion,
    )
    modal = modal_analysis(sys)
    w1, w5 = 2.0 * np.pi * modal.frequencies[[0, 4]]
    a0 = 2.0 * damping_ratio * w1 * w5 / (w1 + w5)
    a1 = 2.0 * damping_ratio / (w1 + w5)
    return dataclasses.replace(sys, C=a0 * sys.M + a1 * sys.K)


def modal_analysis(sys: StructuralSystem) -> ModalData:
    """Solve the generalized eigenproblem K phi = w^2 M phi.

    Frequencies are returned in Hz, ascending.  Damping ratios come from
    the modal projection zeta_i = phi_i^T C phi_i / (2 w_i) with
    mass-normalized shapes, which reduces to (a0/w + a1 w)/2 for Rayleigh
    damping.
    """
    try:
        w2, Phi = scipy.linalg.eigh(sys.K, sys.M)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as err:
        raise ValidationError(f"modal analysis failed: {err}") from err
    if np.any(w2 <= 0):
        raise ValidationError("stiffness matrix has non-positive eigenvalues")
    omega = np.sqrt(w2)
    zeta = np.einsum("ij,jk,ki->i", Phi.T, sys.C, Phi) / (2.0 * omega)
    return ModalData(omega / (2.0 * np.pi), zeta, Phi)


def assemble_continuous_ssm(
    sys: StructuralSystem, sensors: SensorLayout
) -> ContinuousStateSpace:
    """Assemble A_c, B_c, G_c, J_c from the second-order model and sensors.

    Sensor selection matrices always index physical dofs; for reduced
    models they are composed with the retained mode shapes internally.
    The ground-motion block of J_c is set exactly to zero (absolute
    accelerations carry no direct feedthrough from ground motion).
    """
    n = sys.n
    if sensors.S_dis.size + sensors.S_vel.size + sensors.S_acc.size == 0:
        raise ValidationError("sensor layout selects no measurements")
    n_phys = sys.n_physical
    for name in ("S_dis", "S_vel", "S_acc"):
        S = getattr(sensors, name)
        if S.shape[0] and S.shape[1] != n_phys:
            raise DimensionError(
                f"{name} has {S.shape[1]} columns but the model has {n_phys} "
                "physical dofs"
            )

    MiK = np.linalg.solve(sys.M, sys.K)
    MiC = np.linalg.solve(sys.M, sys.C)
    MiSp = np.linalg.solve(sys.M, sys.S_p)

    A_c = np.block([
        [np.zeros((n, n)), np.eye(n)],
        [-MiK, -MiC],
    ])
    B_c = np.block([
        [np.zeros((n, sys.n_p)), np.zeros((n, sys.n_g))],
        [MiSp, -sys.S_g],
    ])

    if sys.expansion is not None:
        S_dis = sensors.S_dis @ sys.expansion
        S_vel = sensors.S_vel @ sys.expansion
        S_acc = sensors.S_acc @ sys.expansion
    else:
        S_dis, S_vel, S_acc = sensors.S_dis, sensors.S_vel, sensors.S_acc

    n_dis, n_vel, n_acc = (S.shape[0] for S in (S_dis, S_vel, S_acc))
    G_c = np.block([
        [S_dis, np.zeros((n_dis, n))],
        [np.zeros((n_vel, n)), S_vel],
        [-S_acc @ MiK, -S_acc @ MiC],
    ])
    J_c = np.block([
        [np.zeros((n_dis + n_vel, sys.n_p + sys.n_g))],
        [S_acc @ MiSp, np.zeros((n_acc, sys.n_g))],
    ])
    return ContinuousStateSpace(
        A_c, B_c, G_c, J_c, sys.n_p, sys.n_g, expansion=sys.expansion
    )


def modal_truncation(sys: StructuralSystem, n_keep: int) -> StructuralSystem:
    """Reduce to the first n_keep undamped modes (mass-normalized projection).

    The retained frequencies match the full model exactly; the projection
    matrix is stored in ``expansion`` so reduced-coordinate estimates can
    be expanded back to physical dofs.  n_keep == n returns the system
    unchanged.
    """
    if not 1 <= n_keep <= sys.n:
        raise ValidationError(f"n_keep must be in [1, {sys.n}], got {n_keep}")
    if n_keep == sys.n:
        return dataclasses.replace(sys)
    modal = modal_analysis(sys)
    Phi = modal.mode_shapes[:, :n_keep]
    omega = 2.0 * np.pi * modal.frequencies[:n_keep]
    M_r = np.eye(n_keep)
    K_r = np.diag(omega**2)
    C_r = Phi.T @ sys.C @ Phi
    C_r = 0.5 * (C_r + C_r.T)
    S_p_r = Phi.T @ sys.S_p
    S_g_r = Phi.T @ sys.M @ sys.S_g
    expansion = Phi if sys.expansion is None else sys.expansion @ Phi
    return StructuralSystem(M_r, C_r, K_r, S_p_r, S_g_r, expansion=expansion)
