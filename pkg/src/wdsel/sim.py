"""Synthetic IMU captures: trajectory models, ideal sensing, noise injection.

A capture is built in three stages.  generate_trajectory produces ground
truth (pose plus analytic velocity and acceleration where the motion model
has them), ideal_imu converts truth into the exact 6-channel measurement a
perfect IMU would report, and inject_noise adds a per-sensor error stack:
white noise, a first-order Gauss-Markov bias, and an integrate-and-round
quantizer.  make_dataset slices captures into labeled training windows.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import lfilter

from . import nav, quat
from .errors import ConfigError, InputError
from .signals import ACCEL_SLICE, GYRO_SLICE, Signal

MOTION_CLASSES = ("static", "linear", "circular", "spline3d")

# Stationary std of the Gauss-Markov bias per unit of bias-instability
# coefficient.  The Allan deviation of a GM process peaks at about
# 0.624 * std near tau = 1.89 * tau_b; dividing the plateau minimum by
# 0.664 (the flicker convention used by the extractor) then lands on the
# configured coefficient.  Checked numerically in the closed-loop tests.
GM_STD_PER_BI = 0.664 / 0.624


@dataclass(frozen=True)
class TrajectorySpec:
    motion_class: str
    duration: float = 40.0
    sample_rate: float = 200.0
    scale: float = 2.0
    angular_rate: float = 0.3
    circle_turns: float = 1.0
    texture: float = 0.3
    texture_knot_s: float = 0.15

    def __post_init__(self):
        if self.motion_class not in MOTION_CLASSES:
            raise ConfigError(
                f"unknown motion class {self.motion_class!r}; expected one of {MOTION_CLASSES}")
        if self.duration <= 0 or self.sample_rate <= 0:
            raise ConfigError("duration and sample_rate must be positive")
        if self.scale <= 0:
            raise ConfigError("scale must be positive")
        if self.texture < 0:
            raise ConfigError("texture must be non-negative")
        if self.texture_knot_s <= 0:
            raise ConfigError("texture_knot_s must be positive")
        n = int(round(self.duration * self.sample_rate))
        if n < 64:
            raise ConfigError(f"trajectory too short: {n} samples, need at least 64")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))


@dataclass
class GroundTruth:
    """Reference trajectory sampled on a uniform clock.

    quaternions map body to world (see wdsel.quat).  velocities and
    accelerations are world-frame analytic derivatives when the motion
    model provides them; consumers fall back to finite differences when
    they are absent.
    """

    timestamps: np.ndarray
    positions: np.ndarray
    quaternions: np.ndarray
    sample_rate: float
    velocities: np.ndarray | None = None
    accelerations: np.ndarray | None = None

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64)
        self.positions = np.asarray(self.positions, dtype=np.float64)
        self.quaternions = np.asarray(self.quaternions, dtype=np.float64)
        n = self.timestamps.shape[0]
        if self.positions.shape != (n, 3) or self.quaternions.shape != (n, 4):
            raise InputError("ground truth arrays have inconsistent shapes")
        if n >= 2:
            steps = np.diff(self.timestamps)
            if np.any(np.abs(steps - steps[0]) > 1e-9 * max(1.0, abs(steps[0]))):
                raise InputError("ground truth timestamps are not uniform")
        norms = np.linalg.norm(self.quaternions, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise InputError("ground truth quaternions are not unit length")
        for name in ("velocities", "accelerations"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=np.float64)
                if arr.shape != (n, 3):
                    raise InputError(f"{name} must have shape ({n}, 3), got {arr.shape}")
                setattr(self, name, arr)

    @property
    def n_samples(self) -> int:
        return self.timestamps.shape[0]

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    def window(self, start: int, length: int) -> "GroundTruth":
        if start < 0 or length < 1 or start + length > self.n_samples:
            raise InputError(
                f"window [{start}, {start + length}) out of range for {self.n_samples} samples")
        sl = slice(start, start + length)
        return GroundTruth(
            timestamps=self.timestamps[sl].copy(),
            positions=self.positions[sl].copy(),
            quaternions=self.quaternions[sl].copy(),
            sample_rate=self.sample_rate,
            velocities=None if self.velocities is None else self.velocities[sl].copy(),
            accelerations=None if self.accelerations is None else self.accelerations[sl].copy(),
        )


def _grid_knots(n: int, dt: float, spacing_s: float) -> np.ndarray:
    """Knot times snapped onto the sample grid, endpoints included."""
    k = max(4, int(round((n - 1) * dt / spacing_s)) + 1)
    idx = np.unique(np.round(np.linspace(0, n - 1, k)).astype(int))
    return idx * dt


# Tremor displacement per unit speed (seconds): at texture=0.3 and a
# typical 0.5 m/s stroke speed this puts millimeter-scale wiggle on the
# position curve, i.e. ~1 m/s^2 of vibration at the texture band.
POS_TEXTURE_GAIN = 0.015
# Fraction of the nominal angular rate that keeps body-rate texture alive
# when the coarse profile passes through zero.
ANG_TEXTURE_FLOOR = 0.25


def _texture_spline(t_knots: np.ndarray, per_knot_std: np.ndarray,
                    rng: np.random.Generator, dims: int) -> CubicSpline:
    """Speed-modulated wiggle as a spline through on-grid knots.

    Modulation enters through the control points, not an envelope
    product, so derivatives stay piecewise polynomial and the trapezoid
    integrator downstream remains exact on the analytic acceleration.
    """
    ctrl = rng.normal(0.0, 1.0, size=(t_knots.shape[0], dims))
    ctrl *= per_knot_std[:, None]
    return CubicSpline(t_knots, ctrl, axis=0)


def _angular_rate_profile(spec: TrajectorySpec, rng: np.random.Generator) -> np.ndarray:
    """Body-rate profile (3, n): smooth base plus speed-scaled texture."""
    n = spec.n_samples
    if spec.motion_class == "static" or spec.angular_rate == 0.0:
        return np.zeros((3, n))
    dt = 1.0 / spec.sample_rate
    t = np.arange(n) * dt
    t_knots = _grid_knots(n, dt, spacing_s=1.0)
    ctrl = rng.normal(0.0, spec.angular_rate, size=(t_knots.shape[0], 3))
    cs = CubicSpline(t_knots, ctrl, axis=0)
    omega = cs(t).T
    if spec.texture > 0.0:
        tex_knots = _grid_knots(n, dt, spacing_s=spec.texture_knot_s)
        vigor = np.linalg.norm(cs(tex_knots), axis=1)
        std = spec.texture * (vigor + ANG_TEXTURE_FLOOR * spec.angular_rate)
        omega = omega + _texture_spline(tex_knots, std, rng, 3)(t).T
    return omega


def generate_trajectory(spec: TrajectorySpec, seed: int) -> GroundTruth:
    rng = np.random.default_rng(seed)
    n = spec.n_samples
    dt = 1.0 / spec.sample_rate
    t = np.arange(n) * dt

    if spec.motion_class == "static":
        pos = np.zeros((n, 3))
        vel = np.zeros((n, 3))
        acc = np.zeros((n, 3))
    elif spec.motion_class == "linear":
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        v = direction * (spec.scale / spec.duration)
        pos = t[:, None] * v
        vel = np.tile(v, (n, 1))
        acc = np.zeros((n, 3))
    elif spec.motion_class == "circular":
        r = spec.scale
        w = 2.0 * np.pi * spec.circle_turns / spec.duration
        th = w * t
        pos = np.stack([r * (np.cos(th) - 1.0), r * np.sin(th), np.zeros(n)], axis=1)
        vel = np.stack([-r * w * np.sin(th), r * w * np.cos(th), np.zeros(n)], axis=1)
        acc = np.stack([-r * w * w * np.cos(th), -r * w * w * np.sin(th), np.zeros(n)], axis=1)
    else:  # spline3d
        t_knots = _grid_knots(n, dt, spacing_s=2.0)
        ctrl = rng.uniform(-spec.scale / 2.0, spec.scale / 2.0, size=(t_knots.shape[0], 3))
        cs = CubicSpline(t_knots, ctrl, axis=0)
        pos = cs(t)
        vel = cs(t, 1)
        acc = cs(t, 2)
        if spec.texture > 0.0:
            # stroke-speed-scaled tremor; static/linear/circular keep
            # their exact closed-form positions
            tex_knots = _grid_knots(n, dt, spacing_s=spec.texture_knot_s)
            speed = np.linalg.norm(cs(tex_knots, 1), axis=1)
            std = spec.texture * POS_TEXTURE_GAIN * speed
            tex = _texture_spline(tex_knots, std, rng, 3)
            pos = pos + tex(t)
            vel = vel + tex(t, 1)
            acc = acc + tex(t, 2)

    omega = _angular_rate_profile(spec, rng)
    if spec.motion_class == "static":
        quats = np.tile(quat.IDENTITY, (n, 1))
    else:
        quats = nav.integrate_attitude(omega, dt, quat.IDENTITY)

    return GroundTruth(timestamps=t, positions=pos, quaternions=quats,
                       sample_rate=spec.sample_rate, velocities=vel, accelerations=acc)


def ideal_imu(truth: GroundTruth, gravity: np.ndarray = nav.GRAVITY) -> Signal:
    """Exact 6-channel measurement of a ground-truth trajectory.

    Gyro samples are the one-sided quaternion increments divided by dt, so
    integrate_attitude applied to the result reproduces the truth attitude
    to rounding error.  Accelerometer samples are body-frame specific
    force; analytic accelerations are used when the truth carries them,
    otherwise second differences of position.
    """
    q = truth.quaternions
    n = truth.n_samples
    if n < 2:
        raise InputError("need at least 2 samples to derive rates")
    dt = truth.dt
    gravity = np.asarray(gravity, dtype=np.float64).reshape(3)

    rel = quat.mult_batch(quat.conj_batch(q[:-1]), q[1:])
    gyro = np.empty((3, n))
    gyro[:, :-1] = (quat.rotation_vector_batch(rel) / dt).T
    gyro[:, -1] = gyro[:, -2]

    if truth.accelerations is not None:
        acc_w = truth.accelerations
    else:
        p = truth.positions
        acc_w = np.empty((n, 3))
        acc_w[1:-1] = (p[2:] - 2.0 * p[1:-1] + p[:-2]) / (dt * dt)
        acc_w[0] = acc_w[1]
        acc_w[-1] = acc_w[-2]

    rot = quat.to_matrix_batch(q)
    # body = R^T world; einsum over rows avoids materializing transposes
    accel = np.einsum("nij,ni->jn", rot, acc_w - gravity)

    data = np.empty((6, n))
    data[ACCEL_SLICE] = accel
    data[GYRO_SLICE] = gyro
    return Signal(data=data, sample_rate=truth.sample_rate)


@dataclass(frozen=True)
class NoiseModel:
    """Per-sensor error stack, applied white -> bias -> quantizer.

    quantization_step is the output LSB q; the quantizer integrates the
    signal, rounds to multiples of q, and differences back, so output
    values are exact multiples of q and the Allan quantization coefficient
    is q / (2*sqrt(3)*rate).  white_density is the flat noise density in
    units/sqrt(Hz).  bias_instability is the target Allan plateau
    coefficient of the Gauss-Markov bias with correlation time
    bias_corr_time; initial_bias is a deterministic offset.
    """

    quantization_step: float = 0.0
    white_density: float = 0.0
    bias_instability: float = 0.0
    bias_corr_time: float = 0.05
    initial_bias: float = 0.0

    def __post_init__(self):
        if min(self.quantization_step, self.white_density, self.bias_instability) < 0:
            raise ConfigError("noise magnitudes must be nonnegative")
        if self.bias_corr_time <= 0:
            raise ConfigError("bias_corr_time must be positive")

    @property
    def is_null(self) -> bool:
        return (self.quantization_step == 0 and self.white_density == 0
                and self.bias_instability == 0 and self.initial_bias == 0)

    def expected_coefficients(self, sample_rate: float) -> dict:
        """Allan coefficients this model should produce, for closed-loop checks."""
        return {
            "QN": self.quantization_step / (2.0 * np.sqrt(3.0) * sample_rate),
            "RW": self.white_density,
            "BI": self.bias_instability,
        }


def _gauss_markov(n: int, dt: float, model: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    sigma = GM_STD_PER_BI * model.bias_instability
    phi = np.exp(-dt / model.bias_corr_time)
    drive = sigma * np.sqrt(1.0 - phi * phi)
    u = rng.standard_normal(n) * drive
    u[0] = sigma * rng.standard_normal()  # stationary start
    return lfilter([1.0], [1.0, -phi], u)


def _quantize(x: np.ndarray, step: float, rate: float) -> np.ndarray:
    total = np.cumsum(x) / rate
    counts = np.rint(total * (rate / step))
    out = np.diff(counts, prepend=0.0) * step
    return out


def inject_noise(clean: Signal, accel_model: NoiseModel, gyro_model: NoiseModel,
                 seed: int) -> Signal:
    """Corrupt a clean signal; identical seeds give bit-identical output."""
    data = clean.data.copy()
    n = clean.n_samples
    rate = clean.sample_rate
    dt = clean.dt
    for c in range(6):
        model = accel_model if c < 3 else gyro_model
        if model.is_null:
            continue
        rng = np.random.default_rng((seed, c))
        y = data[c]
        if model.white_density > 0:
            y = y + model.white_density * np.sqrt(rate) * rng.standard_normal(n)
        if model.bias_instability > 0:
            y = y + model.initial_bias + _gauss_markov(n, dt, model, rng)
        elif model.initial_bias != 0.0:
            y = y + model.initial_bias
        if model.quantization_step > 0:
            y = _quantize(y, model.quantization_step, rate)
        data[c] = y
    return Signal(data=data, sample_rate=rate)


@dataclass
class Capture:
    """One simulated recording: truth plus clean and noisy sensor streams."""

    truth: GroundTruth
    clean: Signal
    noisy: Signal
    motion_class: str
    seed: int


def make_capture(spec: TrajectorySpec, accel_noise: NoiseModel, gyro_noise: NoiseModel,
                 seed: int) -> Capture:
    truth = generate_trajectory(spec, seed)
    clean = ideal_imu(truth)
    noisy = inject_noise(clean, accel_noise, gyro_noise, seed=seed + 1)
    return Capture(truth=truth, clean=clean, noisy=noisy,
                   motion_class=spec.motion_class, seed=seed)


@dataclass
class WindowSample:
    """A labeled window: (noisy, clean, delta_attitude, delta_position, truth).

    Unpacks as that 5-tuple.  delta_attitude is the (yaw, pitch, roll)
    change over the window in radians, wrapped to (-pi, pi]; delta_position
    is in meters.  q0 and v0 are the true initial conditions needed to
    dead-reckon the window; capture links back to the full recording the
    window was cut from.
    """

    noisy: Signal
    clean: Signal
    delta_attitude: np.ndarray
    delta_position: np.ndarray
    truth: GroundTruth
    window_id: int
    capture_index: int
    start: int
    motion_class: str
    q0: np.ndarray
    v0: np.ndarray
    gimbal_proximity: bool
    capture: Capture

    def __iter__(self):
        return iter((self.noisy, self.clean, self.delta_attitude,
                     self.delta_position, self.truth))

    @property
    def length(self) -> int:
        return self.noisy.n_samples


@dataclass(frozen=True)
class DatasetConfig:
    sample_rate: float = 200.0
    capture_duration: float = 40.0
    scale: float = 2.0
    angular_rate: float = 0.3
    texture: float = 0.3
    texture_knot_s: float = 0.15
    motion_classes: tuple = MOTION_CLASSES
    stride: int = 256
    accel_noise: NoiseModel = field(default_factory=NoiseModel)
    gyro_noise: NoiseModel = field(default_factory=NoiseModel)

    def __post_init__(self):
        if self.stride < 1:
            raise ConfigError("stride must be at least 1")
        for mc in self.motion_classes:
            if mc not in MOTION_CLASSES:
                raise ConfigError(f"unknown motion class {mc!r}")
        if not self.motion_classes:
            raise ConfigError("motion_classes must not be empty")


def window_labels(truth: GroundTruth, start: int, length: int):
    """Ground-truth attitude/position deltas for one window."""
    end = start + length - 1
    e0 = quat.to_euler_zyx(truth.quaternions[start])
    e1 = quat.to_euler_zyx(truth.quaternions[end])
    datt = quat.wrap_angle(e1 - e0)
    dpos = truth.positions[end] - truth.positions[start]
    gimbal = bool(max(abs(e0[1]), abs(e1[1])) > nav.GIMBAL_PITCH_LIMIT)
    return datt, dpos, gimbal


def make_dataset(n_windows: int, window_len: int, config: DatasetConfig,
                 seed: int) -> list[WindowSample]:
    """Slice labeled windows out of round-robin captures over the motion mix.

    Labels are read from ground truth directly, never integrated from the
    signal.  The clean window rides along as the denoising reference.
    """
    if n_windows < 1:
        raise InputError("n_windows must be at least 1")
    if window_len < 2:
        raise InputError("window_len must be at least 2")

    samples: list[WindowSample] = []
    capture_idx = 0
    while len(samples) < n_windows:
        motion = config.motion_classes[capture_idx % len(config.motion_classes)]
        spec = TrajectorySpec(
            motion_class=motion,
            duration=config.capture_duration,
            sample_rate=config.sample_rate,
            scale=config.scale,
            angular_rate=config.angular_rate,
            texture=config.texture,
            texture_knot_s=config.texture_knot_s,
        )
        cap = make_capture(spec, config.accel_noise, config.gyro_noise,
                           seed=seed * 1000003 + capture_idx * 101)
        n = cap.truth.n_samples
        if window_len > n:
            raise InputError(
                f"window_len {window_len} exceeds capture length {n}")
        for start in range(0, n - window_len + 1, config.stride):
            if len(samples) >= n_windows:
                break
            datt, dpos, gimbal = window_labels(cap.truth, start, window_len)
            samples.append(WindowSample(
                noisy=cap.noisy.window(start, window_len),
                clean=cap.clean.window(start, window_len),
                delta_attitude=datt,
                delta_position=dpos,
                truth=cap.truth.window(start, window_len),
                window_id=len(samples),
                capture_index=capture_idx,
                start=start,
                motion_class=motion,
                q0=cap.truth.quaternions[start].copy(),
                v0=(np.zeros(3) if cap.truth.velocities is None
                    else cap.truth.velocities[start].copy()),
                gimbal_proximity=gimbal,
                capture=cap,
            ))
        capture_idx += 1
    return samples
