"""Trajectory and selection-quality metrics.

Trajectory comparison resamples both curves by arc length, rigidly aligns
the reconstruction to the truth (rotation + translation, no scale), and
scores the discrete Frechet distance normalized by the truth path length.
Window-level guidance is scored as wrap-aware attitude MAE (degrees) and
position MAE (meters).  Feature-space clustering quality uses the mean
silhouette over classes with at least two members.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from . import quat
from .errors import AlignmentError, InputError


def discrete_frechet(p: np.ndarray, q: np.ndarray) -> float:
    """Discrete Frechet distance between two polylines of shape (n, d)."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.ndim != 2 or q.ndim != 2 or p.shape[0] == 0 or q.shape[0] == 0:
        raise InputError("discrete_frechet needs two non-empty (n, d) point arrays")
    if p.shape[1] != q.shape[1]:
        raise InputError(f"point dimensions differ: {p.shape[1]} vs {q.shape[1]}")
    d = cdist(p, q)
    n, m = d.shape
    prev = np.empty(m)
    prev[0] = d[0, 0]
    for j in range(1, m):
        prev[j] = max(prev[j - 1], d[0, j])
    cur = np.empty(m)
    for i in range(1, n):
        cur[0] = max(prev[0], d[i, 0])
        row = d[i]
        for j in range(1, m):
            cur[j] = max(min(prev[j], prev[j - 1], cur[j - 1]), row[j])
        prev, cur = cur, prev
    return float(prev[m - 1])


def path_length(points: np.ndarray) -> float:
    points = np.asarray(points, dtype=np.float64)
    return float(np.linalg.norm(np.diff(points, axis=0), axis=1).sum())


def arclength_resample(points: np.ndarray, n_out: int) -> np.ndarray:
    """Resample a polyline at n_out points equally spaced in arc length."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 2:
        raise InputError("need at least 2 points to resample")
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] <= 0.0:
        raise AlignmentError("polyline has zero total length; cannot parameterize")
    grid = np.linspace(0.0, s[-1], n_out)
    return np.stack([np.interp(grid, s, points[:, k]) for k in range(points.shape[1])], axis=1)


def rigid_align(source: np.ndarray, target: np.ndarray):
    """Least-squares rotation and translation taking source onto target.

    Solves the orthogonal Procrustes problem without scaling; the proper
    rotation branch (det = +1) is enforced.  Degenerate (collinear or
    coincident) geometry has no unique rotation and raises AlignmentError.
    """
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if source.shape != target.shape or source.ndim != 2 or source.shape[0] < 3:
        raise InputError("rigid_align needs matching (n>=3, d) point arrays")
    cs = source.mean(axis=0)
    ct = target.mean(axis=0)
    h = (source - cs).T @ (target - ct)
    u, sv, vt = np.linalg.svd(h)
    if sv[0] <= 0.0 or sv[1] <= 1e-9 * sv[0]:
        raise AlignmentError(
            "point sets are collinear or coincident; rotation is not identifiable")
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d][:sv.shape[0]]) @ u.T
    trans = ct - rot @ cs
    return rot, trans


@dataclass(frozen=True)
class TrajectoryScore:
    frechet: float
    truth_path_length: float
    normalized: float
    rotation: np.ndarray
    translation: np.ndarray


RESAMPLE_POINTS = 200


def align_then_score(recon: np.ndarray, truth: np.ndarray,
                     n_resample: int = RESAMPLE_POINTS) -> TrajectoryScore:
    """Rigidly align a reconstructed path to truth and score Frechet distance.

    Both paths are resampled to n_resample points by arc length first, so
    the score is insensitive to sampling density.  normalized = frechet
    divided by the truth path length.
    """
    truth = np.asarray(truth, dtype=np.float64)
    recon = np.asarray(recon, dtype=np.float64)
    length = path_length(truth)
    if length <= 0.0:
        raise AlignmentError("truth path has zero length; normalized score is undefined")
    r_t = arclength_resample(truth, n_resample)
    r_r = arclength_resample(recon, n_resample)
    rot, trans = rigid_align(r_r, r_t)
    aligned = r_r @ rot.T + trans
    fd = discrete_frechet(aligned, r_t)
    return TrajectoryScore(frechet=fd, truth_path_length=length,
                           normalized=fd / length, rotation=rot, translation=trans)


def guidance_errors(pred_attitude: np.ndarray, pred_position: np.ndarray,
                    true_attitude: np.ndarray, true_position: np.ndarray) -> dict:
    """Window-level MAE: attitude in degrees (wrap-aware), position in meters."""
    pa = np.atleast_2d(np.asarray(pred_attitude, dtype=np.float64))
    pp = np.atleast_2d(np.asarray(pred_position, dtype=np.float64))
    ta = np.atleast_2d(np.asarray(true_attitude, dtype=np.float64))
    tp = np.atleast_2d(np.asarray(true_position, dtype=np.float64))
    if pa.shape != ta.shape or pp.shape != tp.shape or pa.shape[0] != pp.shape[0]:
        raise InputError("prediction and label arrays have mismatched shapes")
    if pa.shape[0] == 0:
        raise InputError("guidance_errors needs at least one window")
    att_err = np.abs(quat.wrap_angle(pa - ta))
    return {
        "attitude_mae_deg": float(np.degrees(att_err.mean())),
        "position_mae_m": float(np.abs(pp - tp).mean()),
    }


def silhouette_details(features: np.ndarray, labels: np.ndarray) -> dict:
    """Silhouette analysis with explicit handling of degenerate classes.

    Classes with a single member are excluded from scoring.  Fewer than
    two usable classes leaves the score undefined (None).  Returns a dict
    with "score", "n_used", "excluded_labels".
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
        raise InputError("features must be (n, d) with one label per row")
    if x.shape[0] == 0:
        raise InputError("silhouette needs at least one sample")

    uniq, counts = np.unique(y, return_counts=True)
    usable = uniq[counts >= 2]
    excluded = [lbl.item() if hasattr(lbl, "item") else lbl for lbl in uniq[counts < 2]]
    if usable.shape[0] < 2:
        return {"score": None, "n_used": 0, "excluded_labels": excluded}

    keep = np.isin(y, usable)
    xk, yk = x[keep], y[keep]
    d = cdist(xk, xk)
    scores = np.empty(xk.shape[0])
    for i in range(xk.shape[0]):
        same = yk == yk[i]
        a = d[i, same].sum() / (same.sum() - 1)
        b = min(d[i, yk == lbl].mean() for lbl in usable if lbl != yk[i])
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return {"score": float(scores.mean()), "n_used": int(xk.shape[0]),
            "excluded_labels": excluded}


def silhouette_score(features: np.ndarray, labels: np.ndarray):
    """Mean silhouette, or None when fewer than two classes have >= 2 members."""
    return silhouette_details(features, labels)["score"]
