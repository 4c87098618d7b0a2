"""Overlapping Allan deviation and noise-coefficient extraction.

Conventions: for a rate signal x sampled at `rate`, theta = cumsum(x)/rate
and the overlapping Allan variance at averaging time tau = m/rate is

    sigma^2(tau) = sum_k (theta[k+2m] - 2 theta[k+m] + theta[k])^2
                   / (2 (N - 2m) tau^2).

Coefficients are read off the canonical log-log slopes: quantization at
slope -1 (sigma = sqrt(3) QN / tau), angle/velocity random walk at slope
-1/2 (sigma = RW / sqrt(tau)), and bias instability from the flat region
(BI = min sigma / 0.664).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AnalysisError, InputError

MIN_SAMPLES = 128
SLOPE_TOLERANCE = 0.15
MIN_REGION_POINTS = 3
BI_SCALE = 0.664


@dataclass(frozen=True)
class AllanCurve:
    taus: np.ndarray
    adev: np.ndarray
    rate: float
    n_samples: int


def allan_deviation(x: np.ndarray, rate: float, points_per_decade: int = 20) -> AllanCurve:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InputError(f"expected a 1-D signal, got shape {x.shape}")
    if rate <= 0:
        raise InputError(f"rate must be positive, got {rate}")
    if points_per_decade < 1:
        raise InputError("points_per_decade must be at least 1")
    n = x.shape[0]
    if n < MIN_SAMPLES:
        raise InputError(f"need at least {MIN_SAMPLES} samples, got {n}")
    if not np.isfinite(x).all():
        raise InputError("signal contains non-finite samples")

    theta = np.cumsum(x) / rate
    m_max = (n - 1) // 2
    grid = np.logspace(0.0, np.log10(m_max), int(np.log10(m_max) * points_per_decade) + 1)
    ms = np.unique(np.round(grid).astype(int))
    ms = ms[(ms >= 1) & (ms <= m_max)]

    taus = ms / rate
    adev = np.empty(ms.shape[0])
    for i, m in enumerate(ms):
        d = theta[2 * m:] - 2.0 * theta[m:-m] + theta[:-2 * m]
        avar = np.dot(d, d) / (2.0 * (n - 2 * m) * taus[i] * taus[i])
        adev[i] = np.sqrt(avar)
    return AllanCurve(taus=taus, adev=adev, rate=rate, n_samples=n)


@dataclass(frozen=True)
class RegionFit:
    """Diagnostics for one slope-region fit (taus in seconds)."""

    status: str  # "ok" or "absent"
    tau_range: tuple | None = None
    n_points: int = 0
    residual_log10: float = 0.0


@dataclass(frozen=True)
class NoiseCoefficients:
    QN: float
    RW: float
    BI: float
    diagnostics: dict

    def as_dict(self) -> dict:
        return {"QN": self.QN, "RW": self.RW, "BI": self.BI}


def _local_slopes(log_tau: np.ndarray, log_sig: np.ndarray) -> np.ndarray:
    n = log_tau.shape[0]
    s = np.empty(n)
    s[1:-1] = (log_sig[2:] - log_sig[:-2]) / (log_tau[2:] - log_tau[:-2])
    s[0] = (log_sig[1] - log_sig[0]) / (log_tau[1] - log_tau[0])
    s[-1] = (log_sig[-1] - log_sig[-2]) / (log_tau[-1] - log_tau[-2])
    return s


def _longest_run(mask: np.ndarray) -> slice | None:
    best, cur_start, best_len = None, None, 0
    for i, flag in enumerate(np.append(mask, False)):
        if flag and cur_start is None:
            cur_start = i
        elif not flag and cur_start is not None:
            if i - cur_start > best_len:
                best, best_len = slice(cur_start, i), i - cur_start
            cur_start = None
    return best


def _fit_fixed_slope(log_tau, log_sig, slope):
    """Least-squares intercept with the slope pinned; returns (sigma(1), rms residual)."""
    intercept = np.mean(log_sig - slope * log_tau)
    resid = log_sig - (slope * log_tau + intercept)
    return 10.0 ** intercept, float(np.sqrt(np.mean(resid * resid)))


def extract_coefficients(curve: AllanCurve) -> NoiseCoefficients:
    """Read QN/RW/BI off an Allan curve, flagging regions that are absent.

    The curve must span at least two decades of tau.  Each coefficient is
    fit over the longest contiguous run where the local slope stays within
    0.15 of its canonical value; a missing region yields coefficient 0.0
    with an "absent" diagnostic rather than an error.  An identically zero
    curve reports all three absent; a nonzero curve matching no signature
    at all raises AnalysisError.
    """
    if curve.taus.shape[0] < 2 or curve.taus[-1] / curve.taus[0] < 100.0:
        raise AnalysisError(
            "Allan curve spans less than two decades of tau; collect a longer signal")
    positive = curve.adev > 0
    if not positive.any():
        # a silent channel carries no noise at all: report zeros, not an error
        absent = {name: RegionFit(status="absent") for name in ("QN", "RW", "BI")}
        return NoiseCoefficients(QN=0.0, RW=0.0, BI=0.0, diagnostics=absent)

    log_tau = np.log10(curve.taus[positive])
    log_sig = np.log10(curve.adev[positive])
    slopes = _local_slopes(log_tau, log_sig)

    results = {}
    diagnostics = {}
    for name, target in (("QN", -1.0), ("RW", -0.5), ("BI", 0.0)):
        run = _longest_run(np.abs(slopes - target) < SLOPE_TOLERANCE)
        if run is None or (run.stop - run.start) < MIN_REGION_POINTS:
            results[name] = 0.0
            diagnostics[name] = RegionFit(status="absent")
            continue
        lt, ls = log_tau[run], log_sig[run]
        if name == "QN":
            sigma_at_1, resid = _fit_fixed_slope(lt, ls, -1.0)
            value = sigma_at_1 / np.sqrt(3.0)
        elif name == "RW":
            sigma_at_1, resid = _fit_fixed_slope(lt, ls, -0.5)
            value = sigma_at_1
        else:
            value = float(10.0 ** ls.min()) / BI_SCALE
            resid = float(np.sqrt(np.mean((ls - ls.mean()) ** 2)))
        results[name] = value
        diagnostics[name] = RegionFit(
            status="ok",
            tau_range=(float(10.0 ** lt[0]), float(10.0 ** lt[-1])),
            n_points=int(run.stop - run.start),
            residual_log10=resid,
        )

    if all(d.status == "absent" for d in diagnostics.values()):
        raise AnalysisError(
            "no slope region matched any noise signature; collect a longer signal")
    return NoiseCoefficients(QN=results["QN"], RW=results["RW"], BI=results["BI"],
                             diagnostics=diagnostics)


def compare_reports(raw: NoiseCoefficients, enhanced: NoiseCoefficients) -> dict:
    """Percent reduction per coefficient, None where raw is zero (undefined)."""
    out = {}
    for name in ("QN", "RW", "BI"):
        r = getattr(raw, name)
        e = getattr(enhanced, name)
        out[name] = None if r == 0.0 else 100.0 * (r - e) / r
    return out
