"""Unit quaternion helpers, w-first storage.

The attitude quaternion q maps body axes into the world frame:
rotate(q, v_body) = v_world, and body angular rate omega advances it by
right multiplication, q_{k+1} = q_k * exp_half(omega * dt / 2).  Euler
angles follow the aerospace Z-Y-X (yaw, pitch, roll) convention, i.e.
matrix(q) = Rz(yaw) @ Ry(pitch) @ Rx(roll).
"""
from __future__ import annotations

import numpy as np

from .errors import InputError

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def mult(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def normalize(q: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(q)
    if n == 0.0:
        raise InputError("cannot normalize a zero quaternion")
    return q / n


def check_unit(q: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (4,):
        raise InputError(f"quaternion must have shape (4,), got {q.shape}")
    if abs(np.linalg.norm(q) - 1.0) > tol:
        raise InputError(f"quaternion is not unit length: |q| = {np.linalg.norm(q)!r}")
    return q


def exp_half(v: np.ndarray) -> np.ndarray:
    """Quaternion exponential of a half rotation vector.

    exp_half(r/2) rotates by angle |r| about r; the Taylor branch keeps
    the map smooth through |v| = 0.
    """
    v = np.asarray(v, dtype=np.float64)
    a = np.linalg.norm(v)
    if a < 1e-12:
        # cos(a) ~ 1 - a^2/2, sinc branch avoids 0/0
        return normalize(np.array([1.0 - 0.5 * a * a, v[0], v[1], v[2]]))
    s = np.sin(a) / a
    return np.array([np.cos(a), s * v[0], s * v[1], s * v[2]])


def rotation_vector(q: np.ndarray) -> np.ndarray:
    """Inverse of exp_half scaled to the full rotation vector (angle * axis)."""
    q = q if q[0] >= 0 else -q  # shortest arc
    w = min(q[0], 1.0)
    vec = q[1:]
    s = np.linalg.norm(vec)
    if s < 1e-12:
        return 2.0 * vec  # small angle: sin(a) ~ a
    angle = 2.0 * np.arctan2(s, w)
    return (angle / s) * vec


def to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix taking body-frame vectors to the world frame."""
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    return to_matrix(q) @ np.asarray(v, dtype=np.float64)


def mult_batch(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Row-wise Hamilton product of two (n, 4) arrays."""
    w1, x1, y1, z1 = q1[:, 0], q1[:, 1], q1[:, 2], q1[:, 3]
    w2, x2, y2, z2 = q2[:, 0], q2[:, 1], q2[:, 2], q2[:, 3]
    return np.stack([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ], axis=1)


def conj_batch(q: np.ndarray) -> np.ndarray:
    out = q.copy()
    out[:, 1:] *= -1.0
    return out


def rotation_vector_batch(q: np.ndarray) -> np.ndarray:
    """Row-wise rotation_vector for an (n, 4) array; returns (n, 3)."""
    q = np.where(q[:, :1] >= 0, q, -q)
    w = np.minimum(q[:, 0], 1.0)
    vec = q[:, 1:]
    s = np.linalg.norm(vec, axis=1)
    angle = 2.0 * np.arctan2(s, w)
    scale = np.where(s < 1e-12, 2.0, angle / np.where(s < 1e-12, 1.0, s))
    return scale[:, None] * vec


def to_matrix_batch(q: np.ndarray) -> np.ndarray:
    """Vectorized to_matrix for an (n, 4) array; returns (n, 3, 3)."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    m = np.empty((q.shape[0], 3, 3))
    m[:, 0, 0] = 1 - 2 * (y * y + z * z)
    m[:, 0, 1] = 2 * (x * y - w * z)
    m[:, 0, 2] = 2 * (x * z + w * y)
    m[:, 1, 0] = 2 * (x * y + w * z)
    m[:, 1, 1] = 1 - 2 * (x * x + z * z)
    m[:, 1, 2] = 2 * (y * z - w * x)
    m[:, 2, 0] = 2 * (x * z - w * y)
    m[:, 2, 1] = 2 * (y * z + w * x)
    m[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def to_euler_zyx(q: np.ndarray) -> np.ndarray:
    """(yaw, pitch, roll) in radians; pitch clamped at +-pi/2."""
    m = to_matrix(q)
    pitch = np.arcsin(np.clip(-m[2, 0], -1.0, 1.0))
    yaw = np.arctan2(m[1, 0], m[0, 0])
    roll = np.arctan2(m[2, 1], m[2, 2])
    return np.array([yaw, pitch, roll])


def from_euler_zyx(yaw: float, pitch: float, roll: float) -> np.ndarray:
    cy, sy = np.cos(yaw / 2), np.sin(yaw / 2)
    cp, sp = np.cos(pitch / 2), np.sin(pitch / 2)
    cr, sr = np.cos(roll / 2), np.sin(roll / 2)
    qz = np.array([cy, 0.0, 0.0, sy])
    qy = np.array([cp, 0.0, sp, 0.0])
    qx = np.array([cr, sr, 0.0, 0.0])
    return mult(mult(qz, qy), qx)


def wrap_angle(x):
    """Wrap to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=np.float64), 2.0 * np.pi)
