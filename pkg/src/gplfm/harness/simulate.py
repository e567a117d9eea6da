"""Truth generation: exact discrete propagation plus measurement noise.

The true response is propagated with the zero-order-hold discretization
of the structural model (no process noise), so undamped free vibration
conserves energy exactly at the sample instants.  Measurement noise is
white Gaussian, sized per channel as a fraction of the noise-free
response RMS (or as an absolute std).
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError, StabilityError, ValidationError
from ..linalg import discretize_zoh
from ..structural import (
    SensorLayout,
    StructuralSystem,
    assemble_continuous_ssm,
)
from .series import TimeSeries


def _channel_names(prefix, dofs):
    return [f"{prefix}_{d + 1}" for d in dofs]


def sensor_channel_names(sensors: SensorLayout) -> list[str]:
    """Measurement channel names (1-based dof numbering), block order."""
    names = []
    for prefix, S in (
        ("disp", sensors.S_dis),
        ("vel", sensors.S_vel),
        ("acc", sensors.S_acc),
    ):
        names += _channel_names(prefix, list(np.argmax(S, axis=1))) if S.size else []
    return names


def simulate_response(
    sys: StructuralSystem,
    excitation: TimeSeries,
    sensors: SensorLayout,
    noise_fraction: float = 0.0,
    rng: np.random.Generator | None = None,
    noise_std=None,
    initial_state=None,
) -> tuple[TimeSeries, TimeSeries]:
    """Simulate measurements and full-truth series for one excitation.

    The excitation grid includes t0 (the initial instant); outputs start
    one step later, so an excitation with N+1 samples yields N measurement
    samples.  Returns (measurements, truth) where truth carries
    displacement, velocity and absolute acceleration for every physical
    dof.  ``noise_std`` (scalar or per channel) overrides the
    fraction-of-RMS convention.
    """
    if noise_fraction < 0:
        raise ValidationError(f"noise fraction must be >= 0, got {noise_fraction}")
    ssm = assemble_continuous_ssm(sys, sensors)
    if excitation.values.shape[1] != ssm.n_f:
        raise DimensionError(
            f"excitation has {excitation.values.shape[1]} channels, "
            f"model expects {ssm.n_f}"
        )
    dt = excitation.dt
    A, B = discretize_zoh(ssm.A_c, ssm.B_c, dt)
    if np.max(np.abs(np.linalg.eigvals(A))) > 1.0 + 1e-9:
        raise StabilityError("discretized system is unstable")

    f = excitation.values
    n_steps = f.shape[0] - 1
    n_s = ssm.n_s
    x = np.zeros(n_s) if initial_state is None else np.asarray(initial_state, float)
    states = np.empty((n_steps, n_s))
    for k in range(n_steps):
        x = A @ x + B @ f[k]
        states[k] = x
    forces = f[1:]

    y_clean = states @ ssm.G_c.T + forces @ ssm.J_c.T

    # Truth: all physical dofs.  Absolute acceleration = [-M^-1 K, -M^-1 C] x
    # + M^-1 S_p p (ground feedthrough cancels in absolute coordinates).
    n = sys.n
    acc_rows = np.zeros((n, n_s))
    acc_rows[:, :] = np.linalg.solve(sys.M, np.hstack([-sys.K, -sys.C]))
    feed = np.zeros((n, ssm.n_f))
    feed[:, : sys.n_p] = np.linalg.solve(sys.M, sys.S_p)
    acc = states @ acc_rows.T + forces @ feed.T
    disp = states[:, :n]
    vel = states[:, n:]
    if sys.expansion is not None:
        disp = disp @ sys.expansion.T
        vel = vel @ sys.expansion.T
        acc = acc @ sys.expansion.T

    n_phys = disp.shape[1]
    truth = TimeSeries(
        dt=dt,
        names=(
            _channel_names("disp", range(n_phys))
            + _channel_names("vel", range(n_phys))
            + _channel_names("acc", range(n_phys))
        ),
        values=np.hstack([disp, vel, acc]),
        t0=excitation.t0 + dt,
    )

    if noise_std is not None:
        std = np.broadcast_to(
            np.asarray(noise_std, dtype=float), (y_clean.shape[1],)
        ).copy()
        if np.any(std < 0):
            raise ValidationError("noise std must be >= 0")
    else:
        std = noise_fraction * np.sqrt(np.mean(y_clean**2, axis=0))
    noise = (
        (rng.standard_normal(y_clean.shape) * std)
        if rng is not None
        else np.zeros_like(y_clean)
    )
    if rng is None and np.any(std > 0):
        raise ValidationError("noise requested but no rng supplied")

    measurements = TimeSeries(
        dt=dt,
        names=sensor_channel_names(sensors),
        values=y_clean + noise,
        t0=excitation.t0 + dt,
    )
    return measurements, truth
