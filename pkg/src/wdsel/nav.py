"""Strapdown navigation: attitude integration and dead reckoning.

Conventions match :mod:`wdsel.quat`: quaternions are w-first and map body
vectors to the world frame, gyro rates are body-frame rad/s, accelerometer
samples are body-frame specific force in m/s^2, and gravity defaults to
(0, 0, -9.80665) in the world frame.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quat
from .errors import InputError
from .signals import Signal

GRAVITY = np.array([0.0, 0.0, -9.80665])

# Euler pitch within one degree of +-90 means yaw/roll become degenerate.
GIMBAL_PITCH_LIMIT = np.deg2rad(89.0)


@dataclass(frozen=True)
class Pose:
    t: float
    q: np.ndarray
    v: np.ndarray
    p: np.ndarray


@dataclass
class StateHistory:
    """Dense navigation states, one row per sample."""

    t: np.ndarray
    q: np.ndarray  # (n, 4)
    v: np.ndarray  # (n, 3)
    p: np.ndarray  # (n, 3)

    def __len__(self) -> int:
        return self.t.shape[0]

    def __getitem__(self, i: int) -> Pose:
        return Pose(float(self.t[i]), self.q[i].copy(), self.v[i].copy(), self.p[i].copy())


def integrate_attitude(gyro: np.ndarray, dt: float, q0: np.ndarray) -> np.ndarray:
    """Propagate attitude through body rates with per-step renormalization.

    gyro has shape (3, n); the returned array has shape (n, 4) and starts
    at q0, with q_{k+1} = q_k * exp_half(gyro_k * dt / 2).
    """
    gyro = np.asarray(gyro, dtype=np.float64)
    if gyro.ndim != 2 or gyro.shape[0] != 3:
        raise InputError(f"gyro must have shape (3, n), got {gyro.shape}")
    if not np.isfinite(gyro).all():
        raise InputError("gyro contains non-finite samples")
    if dt <= 0.0:
        raise InputError(f"dt must be positive, got {dt}")
    q0 = quat.check_unit(q0)

    n = gyro.shape[1]
    out = np.empty((n, 4))
    out[0] = q0
    for k in range(n - 1):
        step = quat.exp_half(gyro[:, k] * (dt / 2.0))
        out[k + 1] = quat.normalize(quat.mult(out[k], step))
    return out


def strapdown(signal: Signal, q0: np.ndarray, v0: np.ndarray, p0: np.ndarray,
              gravity: np.ndarray = GRAVITY) -> StateHistory:
    """Dead-reckon position and velocity from a 6-channel IMU signal.

    Specific force is rotated to the world frame through the integrated
    attitude, gravity is added back, and velocity/position use trapezoidal
    integration.
    """
    v0 = np.asarray(v0, dtype=np.float64).reshape(3)
    p0 = np.asarray(p0, dtype=np.float64).reshape(3)
    gravity = np.asarray(gravity, dtype=np.float64).reshape(3)
    dt = signal.dt
    n = signal.n_samples

    q = integrate_attitude(signal.gyro, dt, q0)

    rot = quat.to_matrix_batch(q)
    accel_world = np.einsum("nij,jn->ni", rot, signal.accel) + gravity

    v = np.empty((n, 3))
    p = np.empty((n, 3))
    v[0] = v0
    p[0] = p0
    if n > 1:
        dv = 0.5 * dt * (accel_world[:-1] + accel_world[1:])
        v[1:] = v0 + np.cumsum(dv, axis=0)
        dp = 0.5 * dt * (v[:-1] + v[1:])
        p[1:] = p0 + np.cumsum(dp, axis=0)

    t = np.arange(n) * dt
    return StateHistory(t=t, q=q, v=v, p=p)


@dataclass(frozen=True)
class AttitudeChange:
    """Euler deltas (yaw, pitch, roll in radians) across a window.

    gimbal_proximity is set when either endpoint pitch is within one
    degree of +-90, where yaw and roll deltas lose meaning.
    """

    delta: np.ndarray
    gimbal_proximity: bool

    def __array__(self, dtype=None):
        return np.asarray(self.delta, dtype=dtype)


def window_attitude_change(window: Signal, q0: np.ndarray) -> AttitudeChange:
    q = integrate_attitude(window.gyro, window.dt, q0)
    e0 = quat.to_euler_zyx(q[0])
    e1 = quat.to_euler_zyx(q[-1])
    delta = quat.wrap_angle(e1 - e0)
    near_gimbal = bool(max(abs(e0[1]), abs(e1[1])) > GIMBAL_PITCH_LIMIT)
    return AttitudeChange(delta=delta, gimbal_proximity=near_gimbal)


def window_displacement(window: Signal, q0: np.ndarray, v0: np.ndarray,
                        gravity: np.ndarray = GRAVITY) -> np.ndarray:
    states = strapdown(window, q0, v0, np.zeros(3), gravity)
    return states.p[-1] - states.p[0]
