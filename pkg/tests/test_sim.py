import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid

from wdsel import nav, quat
from wdsel.allan import allan_deviation, extract_coefficients
from wdsel.errors import ConfigError, InputError
from wdsel.signals import Signal
from wdsel.sim import (
    GM_STD_PER_BI,
    MOTION_CLASSES,
    DatasetConfig,
    GroundTruth,
    NoiseModel,
    TrajectorySpec,
    generate_trajectory,
    ideal_imu,
    inject_noise,
    make_capture,
    make_dataset,
    window_labels,
)

RATE = 200.0


def zero_signal(n: int, rate: float = RATE) -> Signal:
    return Signal(data=np.zeros((6, n)), sample_rate=rate)


# ---------------------------------------------------------------------------
# trajectory generation


def test_static_trajectory_constant_pose():
    gt = generate_trajectory(TrajectorySpec("static", duration=10.0), seed=3)
    np.testing.assert_array_equal(gt.positions, np.zeros((gt.n_samples, 3)))
    np.testing.assert_array_equal(gt.quaternions, np.tile(quat.IDENTITY, (gt.n_samples, 1)))


def test_linear_positions_follow_constant_velocity():
    gt = generate_trajectory(TrajectorySpec("linear", duration=10.0, scale=3.0), seed=5)
    v = gt.velocities[0]
    np.testing.assert_allclose(gt.velocities, np.tile(v, (gt.n_samples, 1)))
    np.testing.assert_allclose(gt.positions, gt.timestamps[:, None] * v, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(v), 3.0 / 10.0, rtol=1e-12)


def test_circular_speed_matches_r_omega():
    r, turns, dur = 2.0, 1.5, 20.0
    gt = generate_trajectory(
        TrajectorySpec("circular", duration=dur, scale=r, circle_turns=turns), seed=1)
    w = 2.0 * np.pi * turns / dur
    # finite-difference the returned positions, as the contract prescribes
    dp = (gt.positions[2:] - gt.positions[:-2]) / (2.0 * gt.dt)
    speed = np.linalg.norm(dp, axis=1)
    np.testing.assert_allclose(speed, r * w, atol=1e-6)


def test_spline3d_stays_inside_scale_box():
    gt = generate_trajectory(TrajectorySpec("spline3d", duration=20.0, scale=1.0), seed=11)
    # control points live in [-scale/2, scale/2]; spline overshoot plus
    # millimeter texture stays well within 2x that box
    assert np.max(np.abs(gt.positions)) < 1.0


def test_trajectory_determinism():
    spec = TrajectorySpec("spline3d", duration=10.0)
    a = generate_trajectory(spec, seed=42)
    b = generate_trajectory(spec, seed=42)
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.quaternions, b.quaternions)
    c = generate_trajectory(spec, seed=43)
    assert not np.array_equal(a.positions, c.positions)


def test_unknown_motion_class_rejected():
    with pytest.raises(ConfigError, match="unknown motion class"):
        TrajectorySpec("orbital")


def test_too_short_trajectory_rejected():
    with pytest.raises(ConfigError, match="at least 64"):
        TrajectorySpec("static", duration=0.25, sample_rate=200.0)


def test_texture_validation():
    with pytest.raises(ConfigError):
        TrajectorySpec("spline3d", texture=-0.1)
    with pytest.raises(ConfigError):
        TrajectorySpec("spline3d", texture_knot_s=0.0)


def test_texture_perturbs_spline_but_not_closed_forms():
    for mc in ("linear", "circular"):
        smooth = generate_trajectory(TrajectorySpec(mc, duration=10.0, texture=0.0), seed=9)
        rough = generate_trajectory(TrajectorySpec(mc, duration=10.0, texture=0.3), seed=9)
        assert np.array_equal(smooth.positions, rough.positions)
        assert not np.array_equal(smooth.quaternions, rough.quaternions)
    smooth = generate_trajectory(TrajectorySpec("spline3d", duration=10.0, texture=0.0), seed=9)
    rough = generate_trajectory(TrajectorySpec("spline3d", duration=10.0, texture=0.3), seed=9)
    assert not np.array_equal(smooth.positions, rough.positions)
    # tremor is millimeter-scale, not a different trajectory
    assert np.max(np.linalg.norm(smooth.positions - rough.positions, axis=1)) < 0.05


def test_static_ignores_texture():
    a = generate_trajectory(TrajectorySpec("static", texture=0.0), seed=2)
    b = generate_trajectory(TrajectorySpec("static", texture=0.5), seed=2)
    assert np.array_equal(a.quaternions, b.quaternions)


def test_analytic_derivatives_integrate_back():
    """Trapezoid on (acc -> vel -> pos) must reproduce the curve.

    Spline knots sit on the sample grid, so acceleration is piecewise
    linear between samples and the first integration stage is exact;
    the second stage carries only O(dt^3) local error.
    """
    gt = generate_trajectory(TrajectorySpec("spline3d", duration=20.0), seed=4)
    t = gt.timestamps
    vel = gt.velocities[0] + cumulative_trapezoid(gt.accelerations, t, axis=0, initial=0.0)
    np.testing.assert_allclose(vel, gt.velocities, atol=1e-9)
    pos = gt.positions[0] + cumulative_trapezoid(vel, t, axis=0, initial=0.0)
    path = np.sum(np.linalg.norm(np.diff(gt.positions, axis=0), axis=1))
    err = np.max(np.linalg.norm(pos - gt.positions, axis=1))
    assert err < 1e-4 * path


def test_ground_truth_validation():
    n = 10
    t = np.arange(n) / RATE
    p = np.zeros((n, 3))
    q = np.tile(quat.IDENTITY, (n, 1))
    with pytest.raises(InputError, match="not unit length"):
        GroundTruth(t, p, q * 2.0, RATE)
    with pytest.raises(InputError, match="inconsistent shapes"):
        GroundTruth(t, p[:, :2], q, RATE)
    with pytest.raises(InputError, match="not uniform"):
        GroundTruth(np.cumsum(np.linspace(1.0, 2.0, n)), p, q, RATE)


def test_ground_truth_window_bounds():
    gt = generate_trajectory(TrajectorySpec("static", duration=1.0), seed=0)
    w = gt.window(10, 50)
    assert w.n_samples == 50
    np.testing.assert_array_equal(w.timestamps, gt.timestamps[10:60])
    with pytest.raises(InputError):
        gt.window(180, 50)
    with pytest.raises(InputError):
        gt.window(-1, 10)


# ---------------------------------------------------------------------------
# ideal IMU synthesis


def test_static_identity_imu_reads_gravity():
    n = 400
    gt = GroundTruth(
        timestamps=np.arange(n) / RATE,
        positions=np.zeros((n, 3)),
        quaternions=np.tile(quat.IDENTITY, (n, 1)),
        sample_rate=RATE,
    )
    sig = ideal_imu(gt)
    np.testing.assert_allclose(sig.data[0:2], 0.0, atol=1e-6)
    np.testing.assert_allclose(sig.data[2], 9.80665, atol=1e-6)
    np.testing.assert_allclose(sig.data[3:6], 0.0, atol=1e-6)


def test_constant_z_rotation_gyro():
    n, w = 1000, 0.7
    t = np.arange(n) / RATE
    q = np.stack([np.cos(w * t / 2.0), np.zeros(n), np.zeros(n), np.sin(w * t / 2.0)], axis=1)
    gt = GroundTruth(t, np.zeros((n, 3)), q, RATE)
    sig = ideal_imu(gt)
    np.testing.assert_allclose(sig.data[3:5], 0.0, atol=1e-4)
    np.testing.assert_allclose(sig.data[5], w, atol=1e-4)


@pytest.mark.parametrize("mc", ["linear", "circular", "spline3d"])
def test_strapdown_round_trip_recovers_positions(mc):
    gt = generate_trajectory(TrajectorySpec(mc, duration=20.0), seed=8)
    sig = ideal_imu(gt)
    hist = nav.strapdown(sig, gt.quaternions[0], gt.velocities[0], gt.positions[0])
    path = np.sum(np.linalg.norm(np.diff(gt.positions, axis=0), axis=1))
    err = np.max(np.linalg.norm(hist.p - gt.positions, axis=1))
    assert err < 1e-3 * max(path, 1e-9), f"{mc}: {err:.2e} vs path {path:.3f}"


def test_ideal_imu_needs_two_samples():
    gt = GroundTruth(np.zeros(1), np.zeros((1, 3)), quat.IDENTITY[None, :], RATE)
    with pytest.raises(InputError):
        ideal_imu(gt)


# ---------------------------------------------------------------------------
# noise injection


def test_null_model_is_identity():
    clean = ideal_imu(generate_trajectory(TrajectorySpec("spline3d", duration=5.0), seed=1))
    out = inject_noise(clean, NoiseModel(), NoiseModel(), seed=0)
    assert np.array_equal(out.data, clean.data)


def test_noise_model_validation():
    with pytest.raises(ConfigError):
        NoiseModel(white_density=-1.0)
    with pytest.raises(ConfigError):
        NoiseModel(bias_instability=0.1, bias_corr_time=0.0)


def test_expected_coefficients_formulas():
    m = NoiseModel(quantization_step=0.01, white_density=0.02, bias_instability=0.003)
    exp = m.expected_coefficients(200.0)
    np.testing.assert_allclose(exp["QN"], 0.01 / (2.0 * np.sqrt(3.0) * 200.0))
    assert exp["RW"] == 0.02
    assert exp["BI"] == 0.003


def test_injection_determinism():
    clean = zero_signal(4096)
    model = NoiseModel(white_density=0.02, bias_instability=0.01, quantization_step=1e-3)
    a = inject_noise(clean, model, model, seed=5)
    b = inject_noise(clean, model, model, seed=5)
    assert np.array_equal(a.data, b.data)
    c = inject_noise(clean, model, model, seed=6)
    assert not np.array_equal(a.data, c.data)


def test_channels_get_independent_noise():
    out = inject_noise(zero_signal(1024), NoiseModel(white_density=0.1),
                       NoiseModel(white_density=0.1), seed=3)
    for i in range(6):
        for j in range(i + 1, 6):
            assert not np.array_equal(out.data[i], out.data[j])


def test_white_noise_std_matches_density():
    n_density = 0.05
    out = inject_noise(zero_signal(200_000), NoiseModel(white_density=n_density),
                       NoiseModel(), seed=2)
    np.testing.assert_allclose(out.data[0].std(), n_density * np.sqrt(RATE), rtol=0.02)
    np.testing.assert_array_equal(out.data[3:], 0.0)  # gyro model untouched


def test_white_noise_stationarity():
    out = inject_noise(zero_signal(20_000), NoiseModel(white_density=0.02),
                       NoiseModel(white_density=0.02), seed=7)
    for c in range(6):
        half = out.data[c].shape[0] // 2
        ratio = out.data[c][:half].var() / out.data[c][half:].var()
        assert 0.8 <= ratio <= 1.25, f"channel {c}: ratio {ratio:.3f}"


@pytest.mark.parametrize("seed", range(5))
def test_white_noise_allan_closed_loop(seed):
    n_density = 0.01
    out = inject_noise(zero_signal(200_000), NoiseModel(white_density=n_density),
                       NoiseModel(), seed=seed)
    curve = allan_deviation(out.data[0], RATE)
    coeffs = extract_coefficients(curve)
    assert abs(coeffs.RW - n_density) / n_density < 0.10
    # slope -1/2 in the fitted decade
    lo, hi = coeffs.diagnostics["RW"].tau_range
    sel = (curve.taus >= lo) & (curve.taus <= hi)
    slope = np.polyfit(np.log10(curve.taus[sel]), np.log10(curve.adev[sel]), 1)[0]
    assert abs(slope + 0.5) < 0.05


def test_quantizer_output_on_multiples_of_q():
    q = 0.01
    t = np.arange(4096) / RATE
    base = np.sin(2.0 * np.pi * 1.3 * t) * 0.37
    sig = Signal(data=np.tile(base, (6, 1)), sample_rate=RATE)
    out = inject_noise(sig, NoiseModel(quantization_step=q),
                       NoiseModel(quantization_step=q), seed=0)
    steps = out.data / q
    np.testing.assert_allclose(steps, np.rint(steps), atol=1e-6)
    zeros = inject_noise(zero_signal(512), NoiseModel(quantization_step=q),
                         NoiseModel(quantization_step=q), seed=0)
    np.testing.assert_array_equal(zeros.data, 0.0)


def test_quantizer_idempotence():
    q = 0.02
    rng = np.random.default_rng(0)
    sig = Signal(data=rng.normal(size=(6, 2048)), sample_rate=RATE)
    m = NoiseModel(quantization_step=q)
    once = inject_noise(sig, m, m, seed=1)
    twice = inject_noise(once, m, m, seed=99)  # no stochastic terms, seed moot
    assert np.array_equal(once.data, twice.data)


def test_initial_bias_is_plain_offset():
    out = inject_noise(zero_signal(256), NoiseModel(initial_bias=0.25),
                       NoiseModel(initial_bias=-0.03), seed=0)
    np.testing.assert_allclose(out.data[:3], 0.25, atol=1e-15)
    np.testing.assert_allclose(out.data[3:], -0.03, atol=1e-15)


def test_gauss_markov_starts_stationary():
    bi = 0.02
    model = NoiseModel(bias_instability=bi, bias_corr_time=0.05)
    firsts = [
        inject_noise(zero_signal(64), model, NoiseModel(), seed=s).data[0, 0]
        for s in range(500)
    ]
    target = GM_STD_PER_BI * bi
    assert abs(np.std(firsts) - target) / target < 0.15


@pytest.mark.parametrize("seed", range(3))
def test_gauss_markov_allan_plateau_closed_loop(seed):
    bi = 0.005
    model = NoiseModel(bias_instability=bi, bias_corr_time=0.05)
    out = inject_noise(zero_signal(400_000), model, NoiseModel(), seed=seed)
    coeffs = extract_coefficients(allan_deviation(out.data[0], RATE))
    assert abs(coeffs.BI - bi) / bi < 0.25


# ---------------------------------------------------------------------------
# dataset assembly


def small_config(**kw) -> DatasetConfig:
    base = dict(
        capture_duration=10.0,
        accel_noise=NoiseModel(white_density=0.02),
        gyro_noise=NoiseModel(white_density=0.002),
    )
    base.update(kw)
    return DatasetConfig(**base)


def test_window_sample_unpacks_as_five_tuple():
    samples = make_dataset(2, 256, small_config(), seed=1)
    noisy, clean, datt, dpos, truth = samples[0]
    assert noisy.n_samples == clean.n_samples == truth.n_samples == 256
    assert datt.shape == (3,) and dpos.shape == (3,)


def test_static_windows_have_zero_labels():
    cfg = small_config(motion_classes=("static",))
    for s in make_dataset(4, 256, cfg, seed=2):
        np.testing.assert_allclose(s.delta_attitude, 0.0, atol=1e-9)
        np.testing.assert_allclose(s.delta_position, 0.0, atol=1e-9)


def test_linear_window_displacement_is_v_dt():
    cfg = small_config(motion_classes=("linear",))
    for s in make_dataset(4, 256, cfg, seed=3):
        v = s.capture.truth.velocities[0]
        span = (s.length - 1) / cfg.sample_rate
        np.testing.assert_allclose(s.delta_position, v * span, atol=1e-12)


def test_labels_match_truth_slice():
    # recompute from the window's own truth slice: read, not integrated
    for s in make_dataset(6, 256, small_config(), seed=4):
        datt, dpos, gimbal = window_labels(s.truth, 0, s.length)
        np.testing.assert_allclose(datt, s.delta_attitude, atol=1e-9)
        np.testing.assert_allclose(dpos, s.delta_position, atol=1e-9)
        assert gimbal == s.gimbal_proximity


def test_window_initial_conditions_come_from_truth():
    for s in make_dataset(4, 256, small_config(), seed=5):
        full = s.capture.truth
        np.testing.assert_array_equal(s.q0, full.quaternions[s.start])
        np.testing.assert_array_equal(s.v0, full.velocities[s.start])
        np.testing.assert_array_equal(
            s.truth.positions, full.positions[s.start:s.start + s.length])


def test_dataset_round_robin_over_classes():
    # one window per capture forces the class cycle to show
    cfg = small_config(stride=100_000)
    samples = make_dataset(8, 256, cfg, seed=6)
    assert [s.motion_class for s in samples] == list(MOTION_CLASSES) * 2


def test_dataset_determinism():
    cfg = small_config()
    a = make_dataset(3, 256, cfg, seed=7)
    b = make_dataset(3, 256, cfg, seed=7)
    for sa, sb in zip(a, b):
        assert np.array_equal(sa.noisy.data, sb.noisy.data)
        assert np.array_equal(sa.clean.data, sb.clean.data)
        assert np.array_equal(sa.delta_attitude, sb.delta_attitude)


def test_dataset_input_validation():
    cfg = small_config()
    with pytest.raises(InputError):
        make_dataset(0, 256, cfg, seed=0)
    with pytest.raises(InputError):
        make_dataset(1, 1, cfg, seed=0)
    with pytest.raises(InputError):
        make_dataset(1, 100_000, cfg, seed=0)


def test_dataset_config_validation():
    with pytest.raises(ConfigError):
        small_config(stride=0)
    with pytest.raises(ConfigError):
        small_config(motion_classes=("static", "hover"))
    with pytest.raises(ConfigError):
        small_config(motion_classes=())


def test_make_capture_links_streams():
    spec = TrajectorySpec("circular", duration=5.0)
    cap = make_capture(spec, NoiseModel(white_density=0.02), NoiseModel(), seed=11)
    assert cap.motion_class == "circular"
    assert cap.clean.n_samples == cap.noisy.n_samples == cap.truth.n_samples
    # accel channels perturbed, gyro noise model was null
    assert not np.array_equal(cap.noisy.data[:3], cap.clean.data[:3])
    assert np.array_equal(cap.noisy.data[3:], cap.clean.data[3:])
