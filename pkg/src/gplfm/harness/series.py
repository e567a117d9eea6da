"""Uniformly sampled multi-channel series with deterministic CSV I/O."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, ValidationError

# All floating-point output is written with 12 significant digits.
FLOAT_FORMAT = "%.12g"


@dataclass
class TimeSeries:
    """Named channels sampled on a uniform grid t0 + k dt."""

    dt: float
    names: list[str]
    values: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape[0] < 2:
            raise ValidationError("a series needs at least 2 samples")
        if len(self.names) != self.values.shape[1]:
            raise DimensionError(
                f"{len(self.names)} names for {self.values.shape[1]} channels"
            )
        if not self.dt > 0:
            raise ValidationError(f"dt must be positive, got {self.dt}")

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_samples)

    def channel(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]


def write_csv(path, times, columns: dict[str, np.ndarray]) -> None:
    """Write a wide CSV: header row, time column first, 12 significant digits."""
    times = np.asarray(times, dtype=float)
    names = list(columns)
    arrays = [np.asarray(columns[n], dtype=float) for n in names]
    for n, a in zip(names, arrays):
        if a.shape != times.shape:
            raise DimensionError(f"column {n!r} length {a.shape} != time {times.shape}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["time"] + names) + "\n")
        for i in range(times.size):
            row = [FLOAT_FORMAT % times[i]] + [FLOAT_FORMAT % a[i] for a in arrays]
            fh.write(",".join(row) + "\n")


def write_series_csv(path, series: TimeSeries) -> None:
    write_csv(path, series.times, dict(zip(series.names, series.values.T)))


def write_long_csv(path, times, channels, truth, estimate, std) -> None:
    """Write a plot-ready long-format CSV for one signal group.

    Columns: time, channel, truth, estimate, std; one row per (time,
    channel) pair, channel-major within each time step.
    """
    times = np.asarray(times, dtype=float)
    truth = np.atleast_2d(np.asarray(truth, dtype=float))
    estimate = np.atleast_2d(np.asarray(estimate, dtype=float))
    std = np.atleast_2d(np.asarray(std, dtype=float))
    n_ch = len(channels)
    for name, a in (("truth", truth), ("estimate", estimate), ("std", std)):
        if a.shape != (times.size, n_ch):
            raise DimensionError(
                f"{name} must be ({times.size}, {n_ch}), got {a.shape}"
            )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("time,channel,truth,estimate,std\n")
        for i in range(times.size):
            t_str = FLOAT_FORMAT % times[i]
            for j, ch in enumerate(channels):
                fh.write(
                    f"{t_str},{ch},"
                    f"{FLOAT_FORMAT % truth[i, j]},"
                    f"{FLOAT_FORMAT % estimate[i, j]},"
                    f"{FLOAT_FORMAT % std[i, j]}\n"
                )


def read_csv(path) -> tuple[np.ndarray, list[str], np.ndarray]:
    """Read a wide CSV written by write_csv: (times, names, values)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if header[0] != "time":
        raise ValidationError(f"{path}: first column must be 'time'")
    return data[:, 0], header[1:], data[:, 1:]
