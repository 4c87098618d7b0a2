"""Six-channel inertial time series container.

Channel layout is fixed project-wide: ax, ay, az in m/s^2 followed by
gx, gy, gz in rad/s, all sampled uniformly at ``sample_rate`` Hz.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

CHANNEL_NAMES = ("ax", "ay", "az", "gx", "gy", "gz")
ACCEL_SLICE = slice(0, 3)
GYRO_SLICE = slice(3, 6)


@dataclass
class Signal:
    """Uniformly sampled 6-channel IMU record.

    Parameters
    ----------
    data : ndarray, shape (6, n)
        Row order follows CHANNEL_NAMES.
    sample_rate : float
        Samples per second, > 0.
    """

    data: np.ndarray
    sample_rate: float

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[0] != len(CHANNEL_NAMES):
            raise InputError(
                f"signal must have shape (6, n), got {self.data.shape}"
            )
        if not np.isfinite(self.data).all():
            raise InputError("signal contains non-finite samples")
        if not (self.sample_rate > 0):
            raise InputError(f"sample_rate must be > 0, got {self.sample_rate}")

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate

    @property
    def accel(self) -> np.ndarray:
        return self.data[ACCEL_SLICE]

    @property
    def gyro(self) -> np.ndarray:
        return self.data[GYRO_SLICE]

    def window(self, start: int, length: int) -> "Signal":
        if start < 0 or start + length > self.n_samples:
            raise InputError(
                f"window [{start}, {start + length}) outside signal of "
                f"length {self.n_samples}"
            )
        return Signal(self.data[:, start:start + length].copy(), self.sample_rate)

    def copy(self) -> "Signal":
        return Signal(self.data.copy(), self.sample_rate)
