"""Command-line surface.

Every failure exits through one table of (exception, code, category) so
scripts can branch on the exit code or parse the single stderr line:

    wdsel-error code=<n> category=<name> message=<text>
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import allan as allan_mod
from . import checkpoint as ckpt
from . import datasetio, evaluate as evaluate_mod, nav, quat, sim
from .config import (ExperimentConfig, default_config, load_config, save_config)
from .errors import (AlignmentError, AnalysisError, ArchitectureMismatchError,
                     CheckpointVersionError, ConfigError,
                     CorruptCheckpointError, EmptySelectionError, InputError,
                     WdselError)
from .model import ModelConfig, architecture_descriptor
from .pipeline import enhance_hard, enhance_soft, train
from .signals import CHANNEL_NAMES, Signal
from .wavelets import bank_table_rows, get_basis, standard_bank

# order matters: subclasses before their bases
_EXIT_TABLE = (
    (ConfigError, 3, "config"),
    (AnalysisError, 5, "analysis"),
    (AlignmentError, 6, "alignment"),
    (CorruptCheckpointError, 7, "corrupt-checkpoint"),
    (CheckpointVersionError, 8, "checkpoint-version"),
    (ArchitectureMismatchError, 9, "architecture-mismatch"),
    (EmptySelectionError, 10, "empty-selection"),
    (InputError, 4, "input"),
    (WdselError, 11, "internal"),
    (FileNotFoundError, 2, "missing-file"),
    (OSError, 2, "io"),
)


def _fail_line(exc: Exception) -> tuple[int, str]:
    for klass, code, category in _EXIT_TABLE:
        if isinstance(exc, klass):
            message = str(exc).replace("\n", " ")
            return code, f"wdsel-error code={code} category={category} message={message!r}"
    message = str(exc).replace("\n", " ")
    return 1, f"wdsel-error code=1 category=unexpected message={message!r}"


def _load_experiment_config(path) -> ExperimentConfig:
    return load_config(path) if path else default_config()


def _model_config_for(cfg: ExperimentConfig) -> ModelConfig:
    return ModelConfig(min_window=cfg.simulator.window_len)


def _expected_architecture(cfg: ExperimentConfig) -> dict:
    bank = standard_bank(cfg.train.bank_size)
    return architecture_descriptor(_model_config_for(cfg),
                                   [b.name for b in bank])


def _resolve_model_dir(path_str: str, config_flag):
    """Accept a train output directory or a bare checkpoint file."""
    path = Path(path_str)
    if path.is_dir():
        cfg_path = path / "config.json"
        cfg = load_config(cfg_path) if cfg_path.is_file() else default_config()
        return path / "checkpoint.bin", cfg
    return path, _load_experiment_config(config_flag)


def _load_model(path_str: str, config_flag, *, check_arch: bool = False):
    ckpt_path, cfg = _resolve_model_dir(path_str, config_flag)
    expected = _expected_architecture(cfg) if check_arch else None
    model = ckpt.load_checkpoint(ckpt_path, expected_architecture=expected)
    return model, cfg


def _bank_for_model(model: SelectorModel):
    return [get_basis(name) for name in model.bank_names]


def _resolve_dataset(path_str: str, split: str):
    root = Path(path_str)
    if not root.exists():
        raise FileNotFoundError(f"no such dataset directory: {root}")
    if (root / "manifest.json").is_file():
        return root
    candidate = root / split
    if (candidate / "manifest.json").is_file():
        return candidate
    raise InputError(
        f"{root} is neither a dataset directory nor an experiment "
        f"directory containing {split}/")


def _parse_vec(text: str, n: int, what: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != n:
        raise InputError(f"{what} needs {n} comma-separated values")
    try:
        return np.array([float(p) for p in parts], dtype=np.float64)
    except ValueError as exc:
        raise InputError(f"{what}: {exc}") from exc


# ---------------------------------------------------------------------------
# subcommands


def _cmd_simulate(args) -> int:
    cfg = _load_experiment_config(args.config)
    simc = cfg.simulator
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    train_cfg = sim.DatasetConfig(
        sample_rate=simc.sample_rate, capture_duration=simc.capture_duration,
        scale=simc.scale, angular_rate=simc.angular_rate,
        texture=simc.texture, texture_knot_s=simc.texture_knot_s,
        motion_classes=simc.motion_classes, stride=simc.stride,
        accel_noise=simc.accel_noise, gyro_noise=simc.gyro_noise)
    # the test split tiles its captures so evaluation windows chain cleanly
    test_cfg = replace(train_cfg, stride=simc.window_len)

    train_samples = sim.make_dataset(simc.n_train, simc.window_len,
                                     train_cfg, seed=simc.seed)
    test_samples = sim.make_dataset(simc.n_test, simc.window_len,
                                    test_cfg, seed=simc.seed + 9973)

    from .config import config_to_dict
    sim_dict = config_to_dict(cfg)["simulator"]
    datasetio.write_dataset(train_samples, out / "train",
                            seed=simc.seed, simulator_config=sim_dict)
    datasetio.write_dataset(test_samples, out / "test",
                            seed=simc.seed + 9973, simulator_config=sim_dict)
    save_config(cfg, out / "config.json")
    print(f"wrote {len(train_samples)} train and {len(test_samples)} test "
          f"windows under {out}")
    return 0


def _cmd_train(args) -> int:
    data_dir = _resolve_dataset(args.data, "train")
    if args.config:
        cfg = load_config(args.config)
    else:
        parent_cfg = Path(args.data) / "config.json"
        cfg = load_config(parent_cfg) if parent_cfg.is_file() else default_config()
    bundle = datasetio.read_dataset(data_dir)

    tcfg = cfg.train.train_config()
    dconf = cfg.train.denoise_config()
    bank = standard_bank(tcfg.bank_size)
    model, report = train(bundle.samples, tcfg,
                          model_config=_model_config_for(cfg),
                          bank=bank, denoise_config=dconf)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt.save_checkpoint(model, out / "checkpoint.bin")
    header, body = report.rows()
    lines = [",".join(header)]
    for row in body:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v)
                              for v in row))
    (out / "train_report.csv").write_text("\n".join(lines) + "\n",
                                          encoding="utf-8", newline="\n")
    save_config(cfg, out / "config.json")
    final = report.total_loss[-1] if report.total_loss else float("nan")
    print(f"trained {tcfg.epochs} epochs on {len(bundle.samples)} windows; "
          f"final loss {final:.6g}; checkpoint at {out / 'checkpoint.bin'}")
    return 0


def _iter_windows(signal: Signal, window_len: int):
    n_full = (signal.n_samples // window_len) * window_len
    for start in range(0, n_full, window_len):
        yield start, signal.window(start, window_len)


def _cmd_enhance(args) -> int:
    model, cfg = _load_model(args.model, args.config)
    bank = _bank_for_model(model)
    dconf = cfg.train.denoise_config()
    window_len = cfg.simulator.window_len
    signal = datasetio.read_signal_csv(args.input)
    if signal.n_samples < window_len:
        raise InputError(
            f"input has {signal.n_samples} samples; enhancement needs at "
            f"least one full window of {window_len}")

    out_data = signal.data.copy()  # ragged tail stays as-is
    for start, win in _iter_windows(signal, window_len):
        if args.soft:
            y_hat = model.classify_window(win)
            enhanced = enhance_soft(win, y_hat, bank, denoise_config=dconf)
        else:
            enhanced, _ = enhance_hard(win, model, bank, denoise_config=dconf)
        out_data[:, start:start + window_len] = enhanced.data
    datasetio.write_signal_csv(Signal(out_data, signal.sample_rate), args.out)
    print(f"enhanced {signal.n_samples} samples -> {args.out}")
    return 0


def _cmd_select(args) -> int:
    model, cfg = _load_model(args.model, args.config)
    bank = _bank_for_model(model)
    window_len = cfg.simulator.window_len
    signal = datasetio.read_signal_csv(args.input)
    rows = ["window_id,start,selected"]
    for wid, (start, win) in enumerate(_iter_windows(signal, window_len)):
        idx = model.select_index(win)
        rows.append(f"{wid},{start},{bank[idx].name}")
    if len(rows) == 1:
        raise InputError("input shorter than one window; nothing to select")
    Path(args.out).write_text("\n".join(rows) + "\n", encoding="utf-8",
                              newline="\n")
    print(f"selected wavelets for {len(rows) - 1} windows -> {args.out}")
    return 0


def _cmd_allan(args) -> int:
    signal = datasetio.read_signal_csv(args.input)
    report = {}
    for ch, name in enumerate(CHANNEL_NAMES):
        curve = allan_mod.allan_deviation(signal.data[ch], signal.sample_rate,
                                          points_per_decade=args.points_per_decade)
        coeffs = allan_mod.extract_coefficients(curve)
        report[name] = {
            **coeffs.as_dict(),
            "diagnostics": {k: {"status": d.status, "n_points": d.n_points}
                            for k, d in coeffs.diagnostics.items()},
        }
    if args.json:
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    else:
        lines = ["channel,QN,RW,BI"]
        for name, row in report.items():
            lines.append(f"{name},{row['QN']!r},{row['RW']!r},{row['BI']!r}")
        text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_reconstruct(args) -> int:
    signal = datasetio.read_signal_csv(args.input)
    q0 = _parse_vec(args.q0, 4, "--q0") if args.q0 else quat.IDENTITY.copy()
    v0 = _parse_vec(args.v0, 3, "--v0") if args.v0 else np.zeros(3)
    p0 = _parse_vec(args.p0, 3, "--p0") if args.p0 else np.zeros(3)
    states = nav.strapdown(signal, q0, v0, p0)
    datasetio.write_trajectory_csv(states.t, states.p, states.q, args.out)
    print(f"reconstructed {len(states)} states -> {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    data_dir = _resolve_dataset(args.data, "test")
    if args.config:
        cfg = load_config(args.config)
    else:
        parent_cfg = Path(args.data) / "config.json"
        cfg = load_config(parent_cfg) if parent_cfg.is_file() else default_config()
    bundle = datasetio.read_dataset(data_dir)

    models = {}
    for spec_str in args.model:
        label, sep, path = spec_str.partition("=")
        if not sep:
            label, path = "selector", spec_str
        if label in models:
            raise InputError(f"duplicate model label {label!r}")
        model, _ = _load_model(path, args.config, check_arch=True)
        models[label] = model
    first = next(iter(models.values()))
    bank = _bank_for_model(first)
    dconf = cfg.train.denoise_config()

    results = evaluate_mod.run_evaluation(
        bundle, models, bank, dconf,
        points_per_decade=cfg.evaluation.points_per_decade,
        resample_points=cfg.evaluation.resample_points)
    out = Path(args.out)
    evaluate_mod.write_reports(results, out)
    save_config(cfg, out / "config.json")

    summary = results["dynamic"]["summary"]
    for name, stats in summary.items():
        print(f"{name}: attitude {stats['attitude_mae_deg_median']:.4g} deg, "
              f"position {stats['position_mae_m_median']:.4g} m")
    print(f"reports under {out}")
    return 0


def _cmd_features(args) -> int:
    model, _cfg = _load_model(args.model, args.config)
    data_dir = _resolve_dataset(args.data, "test")
    bundle = datasetio.read_dataset(data_dir)
    d = model.config.feature_dim
    header = ["window_id", "motion_class", "selected"] + [f"h{i}" for i in range(d)]
    lines = [",".join(header)]
    for sample in bundle.samples:
        h = model.extract_features(sample.noisy).data
        idx = model.select_index(sample.noisy)
        lines.append(",".join(
            [str(sample.window_id), sample.motion_class, model.bank_names[idx]]
            + [repr(float(v)) for v in h]))
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8",
                              newline="\n")
    print(f"wrote {len(bundle.samples)} feature rows -> {args.out}")
    return 0


def _cmd_export_bank(args) -> int:
    lines = ["name,vanishing_moments,support,tap,dec_lo,dec_hi,rec_lo,rec_hi"]
    for row in bank_table_rows():
        name, vm, support, tap, dlo, dhi, rlo, rhi = row
        lines.append(f"{name},{vm},{support},{tap},{dlo!r},{dhi!r},{rlo!r},{rhi!r}")
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8",
                              newline="\n")
    print(f"wrote filter table -> {args.out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wdsel",
        description="Wavelet-selection signal enhancement toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate train/test datasets")
    p.add_argument("--config", help="experiment config JSON (default: built-in)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("train", help="train a selector on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("enhance", help="denoise a signal CSV with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--config")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--soft", action="store_true",
                   help="blend the whole bank by decision weights")
    p.set_defaults(func=_cmd_enhance)

    p = sub.add_parser("select", help="report the chosen wavelet per window")
    p.add_argument("--model", required=True)
    p.add_argument("--config")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("allan", help="Allan-deviation noise coefficients")
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    p.add_argument("--points-per-decade", type=int, default=20)
    p.set_defaults(func=_cmd_allan)

    p = sub.add_parser("reconstruct", help="strapdown dead reckoning to a trajectory")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--q0", help="initial quaternion w,x,y,z")
    p.add_argument("--v0", help="initial velocity x,y,z")
    p.add_argument("--p0", help="initial position x,y,z")
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("evaluate", help="raw vs baseline vs selector report")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--model", action="append", required=True,
                   metavar="LABEL=PATH",
                   help="repeatable; first entry is the primary selector")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("features", help="export feature vectors per window")
    p.add_argument("--model", required=True)
    p.add_argument("--config")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("export-bank", help="dump all wavelet filter tables")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export_bank)
    return parser


def cli(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # every failure goes through the code table
        code, line = _fail_line(exc)
        print(line, file=sys.stderr)
        return code


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
