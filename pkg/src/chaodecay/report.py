"""Comparison reports: measured decay against the analytic rate and peak."""

from __future__ import annotations

import math

import numpy as np

from .ensemble import EscapeFit, SurvivalCurve, fit_escape_rate
from .errors import ValidationError
from .formulas import SemiclassicalParams, correction_peak
from .io import read_csv

__all__ = ["survival_from_csv", "compare_report"]

_SURVIVAL_COLUMNS = ["time", "survival", "std_error"]


def survival_from_csv(path: str) -> SurvivalCurve:
    """Rebuild a survival curve from a CSV written by the simulate command."""
    manifest, header, rows = read_csv(path)
    if header != _SURVIVAL_COLUMNS:
        raise ValidationError(
            f"{path}: expected columns {_SURVIVAL_COLUMNS}, found {header}"
        )
    if manifest is None or "ensemble" not in manifest:
        raise ValidationError(f"{path}: missing embedded manifest with ensemble block")
    data = np.asarray(rows, dtype=float)
    return SurvivalCurve(
        times=data[:, 0],
        survival=data[:, 1],
        std_error=data[:, 2],
        n_samples=int(manifest["ensemble"]["n_samples"]),
        geometry_hash=str(manifest.get("geometry_hash", "")),
    )


def compare_report(
    survival_csv: str,
    params: SemiclassicalParams,
    fit_window: tuple[float, float] | None = None,
    regime: str = "plain",
) -> dict:
    """Fitted escape rate vs analytic 1/dwell_time, plus peak metadata.

    The fit window defaults to [0.15, 0.95] of the sampled time range, which
    skips the ballistic transient while keeping enough decades of decay.
    """
    curve = survival_from_csv(survival_csv)
    if fit_window is None:
        t_hi = float(curve.times[-1])
        fit_window = (0.15 * t_hi, 0.95 * t_hi)
    fit: EscapeFit = fit_escape_rate(curve, fit_window)
    analytic = 1.0 / params.dwell_time
    t_star, peak_value = correction_peak(params, regime=regime)
    return {
        "fitted_rate": fit.rate,
        "fitted_rate_stderr": fit.std_error,
        "fit_window": list(fit.window),
        "fit_points": fit.n_points,
        "analytic_rate": analytic,
        "rel_deviation": abs(fit.rate - analytic) / analytic,
        "peak": {
            "regime": regime,
            "t_star": t_star,
            "value": peak_value,
            "t_star_over_dwell": t_star / params.dwell_time,
        },
    }
