"""Evaluation harness: raw vs fixed-wavelet baseline vs trained selectors.

Three report sections mirror the paper-style tables:

* static:   Allan coefficients (QN/RW/BI) per channel on the static
  captures, for the raw stream and every enhancement variant, plus
  percentage reductions vs raw.
* dynamic:  guidance errors per window (the trained head's attitude and
  displacement predictions against ground-truth labels) and a per-capture
  trajectory score built by chaining the predicted displacements and
  comparing against truth with the aligned Frechet metric.  Strapdown
  dead-reckoning errors are reported alongside as a reference; they are
  insensitive to denoising because integration discards exactly the band
  the thresholding removes.
* selection: per-window hard choices vs the exhaustive best-of-bank
  oracle, and a silhouette score of features grouped by selected wavelet.

Per-window work runs through a thread pool capped by WDSEL_THREADS;
result order is deterministic regardless of thread count.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import allan as allan_mod
from . import metrics, nav, quat
from .errors import AlignmentError, AnalysisError, ConfigError, InputError
from .pipeline import denoise_bank, enhance_hard
from .signals import Signal, CHANNEL_NAMES
from .wavelets import DenoiseConfig, denoise

BASELINE_WAVELET = "db4"


def wdsel_threads() -> int:
    raw = os.environ.get("WDSEL_THREADS", "")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError(f"WDSEL_THREADS must be an integer, got {raw!r}")
        if n < 1:
            raise ConfigError("WDSEL_THREADS must be at least 1")
        return n
    return min(4, os.cpu_count() or 1)


def _pmap(fn, items):
    items = list(items)
    n = wdsel_threads()
    if n == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _baseline_basis(bank):
    for basis in bank:
        if basis.name == BASELINE_WAVELET:
            return basis
    return bank[len(bank) // 2]


def _enhance_capture(signal: Signal, window_len: int, enhance_window) -> Signal:
    """Tile a capture into windows and enhance each; drop the ragged tail."""
    n_full = (signal.n_samples // window_len) * window_len
    if n_full == 0:
        raise InputError(
            f"capture shorter ({signal.n_samples}) than one window ({window_len})")
    starts = range(0, n_full, window_len)
    tiles = _pmap(lambda s: enhance_window(signal.window(s, window_len)), starts)
    return Signal(data=np.concatenate([t.data for t in tiles], axis=1),
                  sample_rate=signal.sample_rate)


def _truncate(signal: Signal, window_len: int) -> Signal:
    n_full = (signal.n_samples // window_len) * window_len
    return signal.window(0, n_full)


def _coeff_row(variant, segment, channel, coeffs):
    if coeffs is None:
        return {"variant": variant, "segment": segment, "channel": channel,
                "QN": None, "RW": None, "BI": None, "status": "analysis-failed"}
    return {
        "variant": variant, "segment": segment, "channel": channel,
        "QN": coeffs.QN, "RW": coeffs.RW, "BI": coeffs.BI,
        "status": ",".join(f"{k}={coeffs.diagnostics[k].status}"
                           for k in ("QN", "RW", "BI")),
    }


def static_allan_table(bundle, variants: dict, points_per_decade: int) -> dict:
    """Allan coefficients on static captures for every variant, plus reductions."""
    static_caps = [(i, c) for i, c in enumerate(bundle.captures)
                   if c.motion_class == "static"]
    rows = []
    coeff_map = {}
    for seg_idx, cap in static_caps:
        signals = {name: make(cap.noisy) for name, make in variants.items()}
        for name, sig in signals.items():
            for ch, ch_name in enumerate(CHANNEL_NAMES):
                try:
                    curve = allan_mod.allan_deviation(
                        sig.data[ch], sig.sample_rate,
                        points_per_decade=points_per_decade)
                    coeffs = allan_mod.extract_coefficients(curve)
                except (AnalysisError, InputError):
                    coeffs = None
                coeff_map[(name, seg_idx, ch_name)] = coeffs
                rows.append(_coeff_row(name, seg_idx, ch_name, coeffs))

    reductions = {}
    for name in variants:
        if name == "raw":
            continue
        per_coeff = {"QN": [], "RW": [], "BI": []}
        for seg_idx, _ in static_caps:
            for ch_name in CHANNEL_NAMES:
                raw_c = coeff_map.get(("raw", seg_idx, ch_name))
                enh_c = coeff_map.get((name, seg_idx, ch_name))
                if raw_c is None or enh_c is None:
                    continue
                comp = allan_mod.compare_reports(raw_c, enh_c)
                for key in per_coeff:
                    if comp[key] is not None:
                        per_coeff[key].append(comp[key])
        reductions[name] = {
            key: (float(np.median(vals)) if vals else None)
            for key, vals in per_coeff.items()
        }
    return {"rows": rows, "median_reduction_pct": reductions,
            "n_static_segments": len(static_caps)}


def _window_errors(sample, pred_att, pred_pos):
    att = np.degrees(np.abs(quat.wrap_angle(pred_att - sample.delta_attitude)))
    pos = np.abs(pred_pos - sample.delta_position)
    return float(att.mean()), float(pos.mean())


def _chain_trajectories(bundle, window_preds, resample_points):
    """Per-capture trajectory score from chained displacement predictions.

    Requires the capture's windows to tile it (stride == window length);
    captures whose truth path is degenerate for rigid alignment (static,
    straight-line) are reported as skipped.
    """
    by_capture = {}
    for sample, (_, dpos) in zip(bundle.samples, window_preds):
        by_capture.setdefault(sample.capture_index, []).append((sample, dpos))
    scores = {}
    for cap_idx in sorted(by_capture):
        group = sorted(by_capture[cap_idx], key=lambda t: t[0].start)
        win_len = group[0][0].length
        tiled = all(b.start - a.start == win_len
                    for (a, _), (b, _) in zip(group, group[1:]))
        cap = bundle.captures[cap_idx]
        if not tiled:
            scores[cap_idx] = {"motion_class": cap.motion_class,
                               "status": "not-tiled", "normalized": None}
            continue
        truth_pts = [cap.truth.positions[s.start] for s, _ in group]
        truth_pts.append(cap.truth.positions[group[-1][0].start + win_len - 1])
        pred_pts = [truth_pts[0]]
        for _, dpos in group:
            pred_pts.append(pred_pts[-1] + dpos)
        try:
            sc = metrics.align_then_score(np.asarray(pred_pts),
                                          np.asarray(truth_pts),
                                          n_resample=resample_points)
            scores[cap_idx] = {"motion_class": cap.motion_class, "status": "ok",
                               "normalized": sc.normalized, "frechet_m": sc.frechet}
        except (AlignmentError, InputError) as exc:
            scores[cap_idx] = {"motion_class": cap.motion_class,
                               "status": f"skipped: {exc}", "normalized": None}
    return scores


def _strapdown_reference(bundle, primary_enhanced):
    """Median dead-reckoning errors, raw vs enhanced, with truth initials."""
    att_raw, att_enh, pos_raw, pos_enh = [], [], [], []
    for sample, enh in zip(bundle.samples, primary_enhanced):
        for sig, att_out, pos_out in ((sample.noisy, att_raw, pos_raw),
                                      (enh, att_enh, pos_enh)):
            change = nav.window_attitude_change(sig, sample.q0)
            disp = nav.window_displacement(sig, sample.q0, sample.v0)
            att_out.append(np.degrees(np.abs(quat.wrap_angle(
                change.delta - sample.delta_attitude))).mean())
            pos_out.append(np.abs(disp - sample.delta_position).mean())
    return {
        "attitude_median_deg": {"raw": float(np.median(att_raw)),
                                "enhanced": float(np.median(att_enh))},
        "position_median_m": {"raw": float(np.median(pos_raw)),
                              "enhanced": float(np.median(pos_enh))},
    }


def dynamic_table(bundle, primary_model, model_variants: dict,
                  resample_points: int) -> dict:
    """Guidance-task errors per variant plus chained-trajectory scores.

    The raw and baseline rows reuse the primary selector's guidance head on
    differently prepared inputs, so the comparison isolates the signal
    preparation exactly as the paper's enhanced-vs-raw rows do.
    """
    rows = []
    summaries = {}
    trajectories = {}
    for name, prepare in model_variants.items():
        prepared = _pmap(prepare, bundle.samples)
        preds = [primary_model.guidance_predict(sig) if model is None
                 else model.guidance_predict(sig)
                 for (sig, model) in prepared]
        att_errs, pos_errs = [], []
        for sample, (datt, dpos) in zip(bundle.samples, preds):
            att_e, pos_e = _window_errors(sample, datt, dpos)
            att_errs.append(att_e)
            pos_errs.append(pos_e)
            rows.append({"variant": name, "window_id": sample.window_id,
                         "motion_class": sample.motion_class,
                         "attitude_err_deg": att_e, "position_err_m": pos_e})
        traj = _chain_trajectories(bundle, preds, resample_points)
        traj_scores = [t["normalized"] for t in traj.values()
                       if t["normalized"] is not None]
        summaries[name] = {
            "attitude_mae_deg_median": float(np.median(att_errs)),
            "attitude_mae_deg_mean": float(np.mean(att_errs)),
            "position_mae_m_median": float(np.median(pos_errs)),
            "position_mae_m_mean": float(np.mean(pos_errs)),
            "trajectory_normalized_frechet_median":
                (float(np.median(traj_scores)) if traj_scores else None),
            "n_trajectories_scored": len(traj_scores),
        }
        trajectories[name] = traj
    return {"rows": rows, "summary": summaries, "trajectories": trajectories}


def selection_table(bundle, models: dict, bank, dconf: DenoiseConfig) -> dict:
    """Hard selections vs the exhaustive oracle, plus feature silhouettes."""
    stacks = _pmap(lambda s: denoise_bank(s.noisy, bank, dconf), bundle.samples)
    oracle_mse = []
    for sample, stack in zip(bundle.samples, stacks):
        mse = ((stack - sample.clean.data) ** 2).mean(axis=(1, 2))
        oracle_mse.append(mse)

    rows = []
    summaries = {}
    for name, model in models.items():
        selections = _pmap(lambda s: model.select_index(s.noisy), bundle.samples)
        features = _pmap(lambda s: model.extract_features(s.noisy).data.copy(),
                         bundle.samples)
        hits = 0
        hist = {}
        for sample, mse, sel in zip(bundle.samples, oracle_mse, selections):
            best = int(np.argmin(mse))
            within = bool(mse[sel] <= 1.10 * mse[best])
            hits += within
            hist[bank[sel].name] = hist.get(bank[sel].name, 0) + 1
            rows.append({
                "model": name, "window_id": sample.window_id,
                "motion_class": sample.motion_class,
                "selected": bank[sel].name, "oracle": bank[best].name,
                "selected_mse": float(mse[sel]), "oracle_mse": float(mse[best]),
                "within_10pct": within,
            })
        sil = metrics.silhouette_details(np.asarray(features),
                                         np.asarray(selections))
        summaries[name] = {
            "within_10pct_fraction": hits / len(bundle.samples),
            "selection_histogram": dict(sorted(hist.items())),
            "silhouette": sil["score"],
            "silhouette_excluded_classes": len(sil["excluded_labels"]),
        }
    return {"rows": rows, "summary": summaries}


def run_evaluation(bundle, models: dict, bank, dconf: DenoiseConfig,
                   *, points_per_decade: int = 20,
                   resample_points: int = metrics.RESAMPLE_POINTS) -> dict:
    """Full harness over a test bundle.

    models maps label -> SelectorModel; the first entry is the primary
    selector whose head also serves the raw and baseline rows.
    """
    if not models:
        raise InputError("run_evaluation needs at least one model")
    if not bundle.samples:
        raise InputError("test dataset has no windows")
    primary_label = next(iter(models))
    primary = models[primary_label]
    window_len = bundle.window_len
    baseline = _baseline_basis(bank)

    def enhance_with(model):
        return lambda win: enhance_hard(win, model, bank, denoise_config=dconf)[0]

    static_variants = {"raw": lambda sig: _truncate(sig, window_len),
                       baseline.name: lambda sig, b=baseline: _enhance_capture(
                           sig, window_len, lambda w: denoise(w, b, dconf))}
    for name, model in models.items():
        static_variants[name] = lambda sig, m=model: _enhance_capture(
            sig, window_len, enhance_with(m))

    dynamic_variants = {
        "raw": lambda s: (s.noisy, None),
        baseline.name: lambda s, b=baseline: (denoise(s.noisy, b, dconf), None),
    }
    for name, model in models.items():
        dynamic_variants[name] = lambda s, m=model: (
            enhance_hard(s.noisy, m, bank, denoise_config=dconf)[0], m)

    static = static_allan_table(bundle, static_variants, points_per_decade)
    dynamic = dynamic_table(bundle, primary, dynamic_variants, resample_points)
    selection = selection_table(bundle, models, bank, dconf)

    primary_enhanced = _pmap(enhance_with(primary), [s.noisy for s in bundle.samples])
    strapdown_ref = _strapdown_reference(bundle, primary_enhanced)

    return {
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "primary_model": primary_label,
        "baseline_wavelet": baseline.name,
        "n_test_windows": len(bundle.samples),
        "static": static,
        "dynamic": dynamic,
        "selection": selection,
        "strapdown_reference": strapdown_ref,
    }


def _csv_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_rows_csv(path: Path, fieldnames, rows, stamp: str) -> None:
    lines = [f"# generated {stamp}", ",".join(fieldnames)]
    for row in rows:
        lines.append(",".join(_csv_value(row.get(k)) for k in fieldnames))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_reports(results: dict, out_dir) -> None:
    """Persist the harness output: one JSON summary plus per-section CSVs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stamp = results["generated_at"]
    (out / "results.json").write_text(
        json.dumps(results, indent=2, sort_keys=True) + "\n",
        encoding="utf-8", newline="\n")
    _write_rows_csv(out / "static_allan.csv",
                    ["variant", "segment", "channel", "QN", "RW", "BI", "status"],
                    results["static"]["rows"], stamp)
    _write_rows_csv(out / "dynamic_errors.csv",
                    ["variant", "window_id", "motion_class",
                     "attitude_err_deg", "position_err_m"],
                    results["dynamic"]["rows"], stamp)
    _write_rows_csv(out / "selection.csv",
                    ["model", "window_id", "motion_class", "selected", "oracle",
                     "selected_mse", "oracle_mse", "within_10pct"],
                    results["selection"]["rows"], stamp)
