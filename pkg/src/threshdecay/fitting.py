"""Log-log power-law fitting used by every decay-exponent claim."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DegenerateFitError(RuntimeError):
    """Raised when the data cannot support a power-law fit."""


@dataclass(frozen=True)
class DecayFitResult:
    """Fitted slope of log y against log x with residual diagnostics."""

    slope: float
    intercept: float
    residual: float
    per_series: tuple[float, ...] = field(default_factory=tuple)

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "per_series": list(self.per_series),
        }


def fit_loglog(x, y, floor: float = 1e-300) -> DecayFitResult:
    """Least-squares slope of log|y| vs log x; errors out on degenerate data."""
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y))
    if x.size != y.size or x.size < 2:
        raise DegenerateFitError("need at least two samples to fit a slope")
    if np.any(~np.isfinite(x)) or np.any(~np.isfinite(y)):
        raise DegenerateFitError("non-finite samples in fit data")
    if np.all(y <= floor):
        raise DegenerateFitError("all values at or below the numerical floor")
    if np.any(y <= 0):
        raise DegenerateFitError("nonpositive values cannot be fit on a log scale")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))
    return DecayFitResult(slope=float(slope), intercept=float(intercept), residual=resid)


def fit_loglog_multi(x, ys) -> DecayFitResult:
    """Fit the max over several series, recording each series' own slope."""
    ys = np.abs(np.asarray(ys))
    if ys.ndim != 2:
        raise DegenerateFitError("expected a 2-d array (n_x, n_series)")
    env = ys.max(axis=1)
    base = fit_loglog(x, env)
    per = []
    for k in range(ys.shape[1]):
        try:
            per.append(fit_loglog(x, ys[:, k]).slope)
        except DegenerateFitError:
            per.append(float("nan"))
    return DecayFitResult(
        slope=base.slope,
        intercept=base.intercept,
        residual=base.residual,
        per_series=tuple(per),
    )
