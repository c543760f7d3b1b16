"""Log-log slopes and three-point power-law extrapolation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

__all__ = ["LogLogFit", "loglog_fit", "PowerLawLimit", "power_law_limit"]


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    rms_residual: float

    @property
    def decay_exponent(self) -> float:
        return -self.slope


def loglog_fit(x, y) -> LogLogFit:
    """Least-squares line through ``(log x, log y)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("need at least two matching samples for a log-log fit")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit requires positive data")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return LogLogFit(float(slope), float(intercept), float(np.sqrt(np.mean(resid**2))))


@dataclass(frozen=True)
class PowerLawLimit:
    """Result of fitting ``f(R) = limit + c R**(-p)`` through three samples.

    ``exponent`` is ``inf`` when the samples already agree to the noise
    floor; ``converged`` is False when successive differences change sign
    or grow, in which case ``limit`` is only the last sample.
    """

    limit: float
    exponent: float
    coefficient: float
    converged: bool


def power_law_limit(radii, values, noise: float = 1e-13) -> PowerLawLimit:
    r = np.asarray(radii, dtype=float)[-3:]
    f = np.asarray(values, dtype=float)[-3:]
    if r.size < 3:
        raise ValueError("power-law extrapolation needs three radii")
    if not np.all(np.diff(r) > 0):
        raise ValueError("radii must be strictly increasing")
    scale = max(1.0, float(np.max(np.abs(f))))
    d1, d2 = f[0] - f[1], f[1] - f[2]
    if abs(d1) <= noise * scale and abs(d2) <= noise * scale:
        return PowerLawLimit(float(f[2]), np.inf, 0.0, True)
    if abs(d2) <= noise * scale or d1 * d2 <= 0 or abs(d2) >= abs(d1):
        return PowerLawLimit(float(f[2]), np.nan, np.nan, False)

    ratio = d1 / d2
    lr = np.log(r)

    def mismatch(p):
        a, b, c = np.exp(-p * (lr - lr[2]))
        return (a - b) - ratio * (b - c)

    lo, hi = 1e-6, 1.0
    while mismatch(hi) < 0 and hi < 1e3:
        hi *= 2.0
    if mismatch(lo) * mismatch(hi) > 0:
        return PowerLawLimit(float(f[2]), np.nan, np.nan, False)
    p = brentq(mismatch, lo, hi, xtol=1e-14, rtol=1e-14)
    coef = d2 / (r[1] ** -p - r[2] ** -p)
    return PowerLawLimit(float(f[2] - coef * r[2] ** -p), float(p), float(coef), True)
