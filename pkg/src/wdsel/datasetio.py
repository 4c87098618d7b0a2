"""Dataset directory reader/writer.

Layout:
    signals.csv   noisy sensor stream, header t,ax,ay,az,gx,gy,gz
    clean.csv     noise-free reference stream, same header
    truth.csv     ground truth, header t,px,py,pz,qw,qx,qy,qz
    labels.csv    per-window labels, header window_id,dyaw,dpitch,droll,dx,dy,dz
    manifest.json segments, window metadata, seed, simulator config

Captures are concatenated on a single row timeline; the manifest records
segment boundaries, and windows never straddle them.  Floats are written
with repr precision so a read-back dataset is bit-identical to the
in-memory one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .signals import Signal, CHANNEL_NAMES
from .sim import Capture, GroundTruth, WindowSample

SIGNALS_HEADER = "t," + ",".join(CHANNEL_NAMES)
TRUTH_HEADER = "t,px,py,pz,qw,qx,qy,qz"
LABELS_HEADER = "window_id,dyaw,dpitch,droll,dx,dy,dz"


@dataclass
class DatasetBundle:
    """A dataset directory in memory: window samples plus their captures."""

    samples: list
    captures: list
    window_len: int
    sample_rate: float
    manifest: dict

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)


def _format_rows(columns) -> str:
    cols = [np.asarray(c, dtype=np.float64) for c in columns]
    lines = []
    for row in zip(*cols):
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines)


def _write_csv(path: Path, header: str, columns) -> None:
    path.write_text(header + "\n" + _format_rows(columns) + "\n",
                    encoding="utf-8", newline="\n")


def _read_csv(path: Path, header: str) -> np.ndarray:
    if not path.is_file():
        raise FileNotFoundError(f"missing dataset file {path}")
    with path.open(encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first != header:
            raise InputError(
                f"{path}: expected header {header!r}, found {first!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2, dtype=np.float64)
    return data


def write_dataset(samples: list, out_dir, *, seed: int,
                  simulator_config: dict | None = None) -> None:
    """Write window samples (and the captures behind them) as a directory."""
    if not samples:
        raise InputError("cannot write an empty dataset")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    captures: list[Capture] = []
    cap_of = {}
    for s in samples:
        if id(s.capture) not in cap_of:
            cap_of[id(s.capture)] = len(captures)
            captures.append(s.capture)

    rate = captures[0].noisy.sample_rate
    offsets = []
    row = 0
    for cap in captures:
        offsets.append(row)
        row += cap.noisy.n_samples
    t = np.arange(row, dtype=np.float64) / rate

    noisy = np.concatenate([c.noisy.data for c in captures], axis=1)
    clean = np.concatenate([c.clean.data for c in captures], axis=1)
    pos = np.concatenate([c.truth.positions for c in captures], axis=0)
    quat = np.concatenate([c.truth.quaternions for c in captures], axis=0)

    _write_csv(out / "signals.csv", SIGNALS_HEADER, [t, *noisy])
    _write_csv(out / "clean.csv", SIGNALS_HEADER, [t, *clean])
    _write_csv(out / "truth.csv", TRUTH_HEADER,
               [t, pos[:, 0], pos[:, 1], pos[:, 2],
                quat[:, 0], quat[:, 1], quat[:, 2], quat[:, 3]])
    _write_csv(out / "labels.csv", LABELS_HEADER,
               [[s.window_id for s in samples],
                *[[float(s.delta_attitude[i]) for s in samples] for i in range(3)],
                *[[float(s.delta_position[i]) for s in samples] for i in range(3)]])

    manifest = {
        "format": "wdsel-dataset-v1",
        "sample_rate": rate,
        "window_len": samples[0].length,
        "seed": seed,
        "simulator": simulator_config or {},
        "segments": [
            {
                "capture_index": i,
                "motion_class": cap.motion_class,
                "start_row": offsets[i],
                "n_samples": cap.noisy.n_samples,
                "seed": cap.seed,
            }
            for i, cap in enumerate(captures)
        ],
        "windows": [
            {
                "window_id": s.window_id,
                "capture_index": cap_of[id(s.capture)],
                "start": s.start,
                "motion_class": s.motion_class,
                "q0": [float(v) for v in s.q0],
                "v0": [float(v) for v in s.v0],
                "gimbal_proximity": bool(s.gimbal_proximity),
            }
            for s in samples
        ],
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8", newline="\n")


def read_dataset(in_dir) -> DatasetBundle:
    """Load a dataset directory back into window samples and captures."""
    root = Path(in_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise FileNotFoundError(f"missing dataset manifest {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{manifest_path} is not valid JSON: {exc}") from exc
    if manifest.get("format") != "wdsel-dataset-v1":
        raise InputError(f"{manifest_path}: unrecognized dataset format")

    rate = float(manifest["sample_rate"])
    window_len = int(manifest["window_len"])
    signals = _read_csv(root / "signals.csv", SIGNALS_HEADER)
    clean = _read_csv(root / "clean.csv", SIGNALS_HEADER)
    truth = _read_csv(root / "truth.csv", TRUTH_HEADER)
    labels = _read_csv(root / "labels.csv", LABELS_HEADER)
    n_rows = signals.shape[0]
    if clean.shape[0] != n_rows or truth.shape[0] != n_rows:
        raise InputError("signals, clean and truth row counts disagree")

    captures = []
    for seg in manifest["segments"]:
        lo = int(seg["start_row"])
        hi = lo + int(seg["n_samples"])
        if hi > n_rows:
            raise InputError("manifest segment extends past the signal rows")
        ts = np.arange(hi - lo, dtype=np.float64) / rate
        gt = GroundTruth(
            timestamps=ts,
            positions=truth[lo:hi, 1:4].copy(),
            quaternions=truth[lo:hi, 4:8].copy(),
            sample_rate=rate,
        )
        captures.append(Capture(
            truth=gt,
            clean=Signal(data=clean[lo:hi, 1:7].T.copy(), sample_rate=rate),
            noisy=Signal(data=signals[lo:hi, 1:7].T.copy(), sample_rate=rate),
            motion_class=str(seg["motion_class"]),
            seed=int(seg["seed"]),
        ))

    label_by_id = {int(row[0]): row[1:] for row in labels}
    samples = []
    for meta in manifest["windows"]:
        wid = int(meta["window_id"])
        if wid not in label_by_id:
            raise InputError(f"window {wid} has no row in labels.csv")
        cap = captures[int(meta["capture_index"])]
        start = int(meta["start"])
        row = label_by_id[wid]
        samples.append(WindowSample(
            noisy=cap.noisy.window(start, window_len),
            clean=cap.clean.window(start, window_len),
            delta_attitude=np.asarray(row[0:3], dtype=np.float64),
            delta_position=np.asarray(row[3:6], dtype=np.float64),
            truth=cap.truth.window(start, window_len),
            window_id=wid,
            capture_index=int(meta["capture_index"]),
            start=start,
            motion_class=str(meta["motion_class"]),
            q0=np.asarray(meta["q0"], dtype=np.float64),
            v0=np.asarray(meta["v0"], dtype=np.float64),
            gimbal_proximity=bool(meta["gimbal_proximity"]),
            capture=cap,
        ))
    samples.sort(key=lambda s: s.window_id)
    return DatasetBundle(samples=samples, captures=captures,
                         window_len=window_len, sample_rate=rate,
                         manifest=manifest)


def write_signal_csv(signal: Signal, path) -> None:
    t = np.arange(signal.n_samples, dtype=np.float64) / signal.sample_rate
    _write_csv(Path(path), SIGNALS_HEADER, [t, *signal.data])


def read_signal_csv(path) -> Signal:
    data = _read_csv(Path(path), SIGNALS_HEADER)
    if data.shape[0] < 2:
        raise InputError(f"{path}: need at least 2 samples")
    t = data[:, 0]
    steps = np.diff(t)
    if steps.size == 0 or not np.allclose(steps, steps[0], rtol=0, atol=1e-9):
        raise InputError(f"{path}: timestamps are not uniformly spaced")
    if steps[0] <= 0:
        raise InputError(f"{path}: timestamps must increase")
    return Signal(data=data[:, 1:7].T.copy(), sample_rate=1.0 / steps[0])


def write_trajectory_csv(timestamps, positions, quaternions, path) -> None:
    pos = np.asarray(positions, dtype=np.float64)
    qs = np.asarray(quaternions, dtype=np.float64)
    _write_csv(Path(path), TRUTH_HEADER,
               [np.asarray(timestamps, dtype=np.float64),
                pos[:, 0], pos[:, 1], pos[:, 2],
                qs[:, 0], qs[:, 1], qs[:, 2], qs[:, 3]])
