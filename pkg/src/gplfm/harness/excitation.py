"""Excitation generators for the scenario runner.

Each generator returns one force channel on the run's sampling grid.
Ground-motion records are ingested from two-column files (time s, value)
and resampled by linear interpolation; a deterministic pulse-train
stand-in is available where real records are not.
"""

from __future__ import annotations

import math
import os

import numpy as np
import scipy.signal

from ..errors import ConfigurationError, ValidationError


def impact(times, amplitude=1.0e4, start=3.0, rise=0.05, hold=0.0, fall=0.05):
    """Trapezoidal pulse: linear ramp up, optional hold, linear ramp down."""
    if rise <= 0 or fall <= 0 or hold < 0:
        raise ValidationError("impact rise/fall must be positive, hold >= 0")
    t = np.asarray(times, dtype=float)
    up = np.clip((t - start) / rise, 0.0, 1.0)
    down = np.clip((start + rise + hold + fall - t) / fall, 0.0, 1.0)
    return amplitude * np.minimum(up, down)


def harmonic(times, amplitude=100.0, frequency_hz=1.0, phase=0.0):
    """Constant-amplitude sinusoid A sin(2 pi f t + phase)."""
    t = np.asarray(times, dtype=float)
    return amplitude * np.sin(2.0 * math.pi * frequency_hz * t + phase)


def white_noise(n_samples, std, rng):
    """Zero-mean Gaussian samples, independent per step."""
    if std < 0:
        raise ValidationError(f"noise std must be >= 0, got {std}")
    return std * rng.standard_normal(n_samples)


def filtered_noise(n_samples, std, band_hz, dt, rng):
    """Band-limited Gaussian noise rescaled to the requested std.

    Stand-in for narrow-band environmental loading (wind-like): white
    noise band-passed with a zero-phase order-2 Butterworth filter.
    """
    lo, hi = (float(v) for v in band_hz)
    nyq = 0.5 / dt
    if not 0 < lo < hi < nyq:
        raise ValidationError(
            f"band {band_hz} must satisfy 0 < lo < hi < Nyquist ({nyq} Hz)"
        )
    sos = scipy.signal.butter(2, [lo, hi], btype="bandpass", fs=1.0 / dt, output="sos")
    x = scipy.signal.sosfiltfilt(sos, rng.standard_normal(n_samples))
    rms = float(np.sqrt(np.mean(x**2)))
    return x * (std / rms) if rms > 0 else x


def pulse_train(times, amplitude=1.0, start=1.0, period=2.0, width=0.5, count=5):
    """Deterministic alternating half-sine pulses (ground-motion stand-in)."""
    if width <= 0 or period <= 0 or count < 1:
        raise ValidationError("pulse train needs positive width/period/count")
    t = np.asarray(times, dtype=float)
    out = np.zeros_like(t)
    for i in range(count):
        t_i = start + i * period
        mask = (t >= t_i) & (t <= t_i + width)
        out[mask] += ((-1.0) ** i) * amplitude * np.sin(
            math.pi * (t[mask] - t_i) / width
        )
    return out


def read_record(path):
    """Parse a two-column record file (time, value), comma or whitespace separated.

    A single non-numeric header line is tolerated.
    """
    if not os.path.exists(path):
        raise ConfigurationError(f"record file not found: {path}")
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").split()
            try:
                values = [float(p) for p in parts]
            except ValueError:
                if lineno == 0:
                    continue
                raise ConfigurationError(
                    f"{path}:{lineno + 1}: malformed record line {line!r}"
                ) from None
            if len(values) < 2:
                raise ConfigurationError(
                    f"{path}:{lineno + 1}: need two columns, got {len(values)}"
                )
            rows.append(values[:2])
    if len(rows) < 2:
        raise ConfigurationError(f"{path}: record needs at least 2 samples")
    data = np.asarray(rows, dtype=float)
    if np.any(np.diff(data[:, 0]) <= 0):
        raise ConfigurationError(f"{path}: record times must be strictly increasing")
    return data[:, 0], data[:, 1]


def from_file(times, path, scale=1.0):
    """Resample a record onto the run grid by linear interpolation.

    The record is taken as zero outside its time span.
    """
    rec_t, rec_v = read_record(path)
    t = np.asarray(times, dtype=float)
    return scale * np.interp(t, rec_t, rec_v, left=0.0, right=0.0)


def generate_excitation(spec: dict, times, dt, rng) -> np.ndarray:
    """Dispatch one excitation spec (a config mapping with a 'type' key)."""
    kind = spec.get("type")
    t = np.asarray(times, dtype=float)
    if kind == "impact":
        return impact(
            t,
            amplitude=spec.get("amplitude", 1.0e4),
            start=spec.get("start", 3.0),
            rise=spec.get("rise", 0.05),
            hold=spec.get("hold", 0.0),
            fall=spec.get("fall", 0.05),
        )
    if kind == "harmonic":
        return harmonic(
            t,
            amplitude=spec.get("amplitude", 100.0),
            frequency_hz=spec.get("frequency_hz", 1.0),
            phase=spec.get("phase", 0.0),
        )
    if kind == "white_noise":
        return white_noise(t.size, spec.get("std", 1.0), rng)
    if kind == "filtered_noise":
        return filtered_noise(
            t.size, spec.get("std", 1.0), spec.get("band_hz", (0.05, 1.0)), dt, rng
        )
    if kind == "pulse_train":
        return pulse_train(
            t,
            amplitude=spec.get("amplitude", 1.0),
            start=spec.get("start", 1.0),
            period=spec.get("period", 2.0),
            width=spec.get("width", 0.5),
            count=spec.get("count", 5),
        )
    if kind == "file":
        if "path" not in spec:
            raise ConfigurationError("file excitation needs a 'path' key")
        return from_file(t, spec["path"], scale=spec.get("scale", 1.0))
    raise ConfigurationError(f"unknown excitation type {kind!r}")
