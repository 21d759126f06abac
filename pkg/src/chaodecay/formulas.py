"""Closed-form survival probability and loop corrections for open chaotic cavities.

Everything here is an analytic formula: the classical exponential decay of an
open cavity, the leading quantum (weak-localization-like) enhancement of the
survival probability, and its suppression by coupling to a high-temperature
Ohmic environment.  The corrections are organised around three time scales:

* ``dwell_time``       -- mean classical escape time through the opening,
* ``heisenberg_time``  -- phase-space volume over Planck cell, the scale on
                          which the bare quantum correction becomes O(1),
* ``decoherence_time`` -- inverse of (2 x coupling x position variance), the
                          scale on which the environment kills the loop
                          interference.

All formula functions broadcast over numpy arrays of times.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy import optimize

from .errors import NumericError

__all__ = [
    "BathSpec",
    "SemiclassicalParams",
    "CorrectionCurve",
    "CorrectionTable",
    "alpha_from_bath",
    "dwell_time",
    "heisenberg_time",
    "classical_survival",
    "bare_quantum_correction",
    "decoherence_time",
    "loop_kernel",
    "loop_correction",
    "loop_correction_short_time",
    "loop_correction_ehrenfest",
    "ehrenfest_time",
    "min_loop_time",
    "total_survival",
    "correction_peak",
    "figure3_curves",
]

REGIMES = ("plain", "short_time", "ehrenfest")

# Relative tolerance used to declare an explicitly supplied decoherence time
# inconsistent with the one derived from (coupling, variance).
_TAU_D_CONSISTENCY_RTOL = 1e-15

# Threshold below which exp(-y) - 1 + y switches to its Taylor series.  At the
# seam both evaluations agree to ~1e-13 relative, far below any tolerance used
# downstream.
_KERNEL_SERIES_CUTOFF = 1e-3


# ---------------------------------------------------------------------------
# parameter containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BathSpec:
    """High-temperature Ohmic environment.

    ``damping`` is the Ohmic spectral-density slope, ``inverse_temperature``
    the usual 1/(kT).  The white-noise (delta-kernel) reduction used by the
    rest of the package is only valid when the thermal time is short compared
    with every system frequency; pass ``characteristic_frequency`` to get a
    loud warning when that assumption is doubtful.
    """

    damping: float
    inverse_temperature: float
    hbar: float = 1.0
    characteristic_frequency: float | None = None

    def __post_init__(self) -> None:
        if self.damping < 0:
            raise ValueError("damping must be non-negative")
        if self.inverse_temperature <= 0:
            raise ValueError("inverse_temperature must be positive")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        if not self.high_temperature_ok:
            warnings.warn(
                "bath is not in the high-temperature regime "
                f"(beta*hbar*omega = {self.thermal_phase:.3g} > 0.1); "
                "the white-noise decoherence kernel is unreliable here",
                stacklevel=2,
            )

    @property
    def thermal_phase(self) -> float | None:
        """beta * hbar * omega_char, or None when no frequency was given."""
        if self.characteristic_frequency is None:
            return None
        return self.inverse_temperature * self.hbar * self.characteristic_frequency

    @property
    def high_temperature_ok(self) -> bool:
        """True unless a supplied characteristic frequency violates beta*hbar*omega << 1."""
        phase = self.thermal_phase
        return phase is None or phase <= 0.1


def alpha_from_bath(bath: BathSpec) -> float:
    """Effective decoherence coupling of the white-noise kernel.

    alpha = 2 * damping / (hbar**2 * inverse_temperature); the pair-weight
    exponent is alpha * integral |r - r'|^2 dt.
    """
    return 2.0 * bath.damping / (bath.hbar**2 * bath.inverse_temperature)


def decoherence_time(coupling_strength: float, position_variance: float) -> float:
    """Time scale 1/(2 alpha sigma^2) on which loop decoherence saturates."""
    if coupling_strength < 0 or position_variance < 0:
        raise ValueError("coupling and variance must be non-negative")
    denom = 2.0 * coupling_strength * position_variance
    if denom == 0.0:
        return math.inf
    return 1.0 / denom


def dwell_time(area: float, opening_length: float, speed: float = 1.0, mass: float = 1.0) -> float:
    """Mean escape time pi*A/(l*v) of a 2-D cavity with a small opening.

    Equals (phase-space shell volume) / (2 * opening * momentum) with shell
    volume 2*pi*m*A for a free particle in two dimensions.
    """
    if area <= 0 or opening_length <= 0 or speed <= 0 or mass <= 0:
        raise ValueError("area, opening_length, speed and mass must be positive")
    return math.pi * area / (opening_length * speed)


def heisenberg_time(area: float, mass: float = 1.0, hbar: float = 1.0) -> float:
    """Shell volume over Planck cell: m*A/hbar for a free particle in 2-D."""
    if area <= 0 or mass <= 0 or hbar <= 0:
        raise ValueError("area, mass and hbar must be positive")
    return mass * area / hbar


@dataclass(frozen=True)
class SemiclassicalParams:
    """Bag of time scales entering the loop-correction formulas.

    ``decoherence_time`` may be supplied directly (use ``math.inf`` for a
    decoherence-free system) or derived from ``coupling_strength`` and
    ``position_variance``; supplying both redundantly is allowed only when
    they agree to 1e-15 relative.
    """

    dwell_time: float
    heisenberg_time: float
    lyapunov: float | None = None
    encounter_scale: float | None = None  # bounds |s*u| inside the linearized encounter
    coupling_strength: float | None = None
    position_variance: float | None = None
    decoherence_time: float | None = None
    encounter_shape_factor: float = 1.0
    hbar: float = 1.0
    ehrenfest_time: float = 0.0
    loop_formation_time: float = 0.0
    cavity_size: float | None = None

    def __post_init__(self) -> None:
        if self.dwell_time <= 0:
            raise ValueError("dwell_time must be positive")
        if self.heisenberg_time <= 0:
            raise ValueError("heisenberg_time must be positive")
        if self.lyapunov is not None and self.lyapunov < 0:
            raise ValueError("lyapunov must be non-negative")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        if self.ehrenfest_time < 0 or self.loop_formation_time < 0:
            raise ValueError("gating times must be non-negative")

        derived = None
        if self.coupling_strength is not None and self.position_variance is not None:
            derived = decoherence_time(self.coupling_strength, self.position_variance)
        if self.decoherence_time is None:
            tau = derived if derived is not None else math.inf
            object.__setattr__(self, "decoherence_time", tau)
        else:
            if self.decoherence_time <= 0:
                raise ValueError("decoherence_time must be positive")
            if derived is not None and not _close(self.decoherence_time, derived, _TAU_D_CONSISTENCY_RTOL):
                raise ValueError(
                    "decoherence_time inconsistent with coupling_strength and "
                    f"position_variance: given {self.decoherence_time!r}, derived {derived!r}"
                )

    # informative regime checks; None when the needed inputs are absent
    @property
    def deep_chaos(self) -> bool | None:
        """True when lyapunov * dwell_time >= 10 (many stretchings per dwell)."""
        if self.lyapunov is None:
            return None
        return self.lyapunov * self.dwell_time >= 10.0

    @property
    def weak_coupling(self) -> bool | None:
        """True when coupling/lyapunov <= 0.01 (environment slower than chaos)."""
        if self.lyapunov is None or self.coupling_strength is None or self.lyapunov == 0:
            return None
        return self.coupling_strength / self.lyapunov <= 0.01

    def with_(self, **changes) -> "SemiclassicalParams":
        """Copy with fields replaced (decoherence_time re-derived if cleared)."""
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# ---------------------------------------------------------------------------
# survival probability pieces
# ---------------------------------------------------------------------------


def classical_survival(params: SemiclassicalParams, t):
    """exp(-t/dwell_time): ergodic escape through the opening."""
    t = _check_times(t)
    return np.exp(-t / params.dwell_time)


def bare_quantum_correction(params: SemiclassicalParams, t):
    """Decoherence-free loop enhancement exp(-t/tau_D) * t^2/(2 T_H tau_D)."""
    t = _check_times(t)
    tau_D, T_H = params.dwell_time, params.heisenberg_time
    return np.exp(-t / tau_D) * t * t / (2.0 * T_H * tau_D)


def loop_kernel(y):
    """exp(-y) - 1 + y, evaluated without cancellation for small y.

    This combination (~y^2/2 for small y) carries the entire decoherence
    dependence of the loop correction; evaluating it naively loses all digits
    once y < 1e-6.
    """
    y = np.asarray(y)
    if np.iscomplexobj(y):
        # complex arguments come from contour-deformed quadrature; same seam
        small = np.abs(y) < _KERNEL_SERIES_CUTOFF
        out = np.where(small, _kernel_series(y), np.exp(-y) - 1.0 + y)
        return out
    out = np.where(
        np.abs(y) < _KERNEL_SERIES_CUTOFF,
        _kernel_series(y),
        np.expm1(-y) + y,
    )
    return out


def _kernel_series(y):
    # y^2/2 - y^3/6 + y^4/24 - y^5/120; truncation < 3e-15 relative at |y|=1e-3
    return y * y * (1.0 / 2.0 + y * (-1.0 / 6.0 + y * (1.0 / 24.0 - y / 120.0)))


def loop_correction(params: SemiclassicalParams, t):
    """Leading loop correction bracket with environmental decoherence.

    bracket(t) = exp(-t/tau_D) * tau_d^2/(T_H tau_D) * (exp(-t/tau_d) - 1 + t/tau_d)

    which for tau_d -> inf reduces to the bare t^2/(2 T_H tau_D) enhancement
    and for strong decoherence is cut down to ~ tau_d * t/(T_H tau_D).
    """
    t = _check_times(t)
    tau_D, T_H, tau_d = params.dwell_time, params.heisenberg_time, params.decoherence_time
    decay = np.exp(-t / tau_D)
    if math.isinf(tau_d):
        return decay * t * t / (2.0 * T_H * tau_D)
    return decay * (tau_d * tau_d / (T_H * tau_D)) * loop_kernel(t / tau_d)


def loop_correction_short_time(params: SemiclassicalParams, t, order: int = 3):
    """Taylor expansion of the loop correction for t << min(tau_D, tau_d).

    order=2 keeps t^2/(2 T_H tau_D); order=3 adds -t^3/(6 T_H tau_D tau_d).
    The neglected term is O(t^4 / (tau_d^2 T_H tau_D)).
    """
    if order not in (2, 3):
        raise ValueError("order must be 2 or 3")
    t = _check_times(t)
    tau_D, T_H, tau_d = params.dwell_time, params.heisenberg_time, params.decoherence_time
    decay = np.exp(-t / tau_D)
    out = t * t / (2.0 * T_H * tau_D)
    if order >= 3 and not math.isinf(tau_d):
        out = out - t**3 / (6.0 * T_H * tau_D * tau_d)
    return decay * out


def ehrenfest_time(lyapunov: float, encounter_scale: float, hbar: float) -> float:
    """log(encounter_scale/hbar)/lyapunov: time to stretch a Planck cell to classical size."""
    if lyapunov <= 0 or encounter_scale <= 0 or hbar <= 0:
        raise ValueError("lyapunov, encounter_scale and hbar must be positive")
    if encounter_scale < hbar:
        raise ValueError("encounter_scale below hbar gives a negative time")
    return math.log(encounter_scale / hbar) / lyapunov


def min_loop_time(lyapunov: float, cavity_size: float, opening_length: float) -> float:
    """log(cavity_size/opening)/lyapunov: minimal time to close a loop."""
    if lyapunov <= 0 or cavity_size <= 0 or opening_length <= 0:
        raise ValueError("lyapunov, cavity_size and opening_length must be positive")
    if cavity_size < opening_length:
        raise ValueError("cavity_size below opening_length gives a negative time")
    return math.log(cavity_size / opening_length) / lyapunov


def loop_correction_ehrenfest(params: SemiclassicalParams, t):
    """Loop correction with finite-resolution gating.

    The correction only switches on once a loop has had time to form:
    t > 2*t_E + 2*t_lL with t_E = params.ehrenfest_time and
    t_lL = params.loop_formation_time.  Past the gate,

    bracket = exp(-(t - t_E)/tau_D) * exp(-2 t_lL/tau_d)
              * tau_d^2/(T_H tau_D) * kernel((t - 2 t_E - 2 t_lL)/tau_d)

    which at t_E = t_lL = 0 is exactly the plain loop correction (same code
    path for the kernel, so the reduction holds to machine precision).
    """
    t = _check_times(t)
    tau_D, T_H, tau_d = params.dwell_time, params.heisenberg_time, params.decoherence_time
    t_E, t_lL = params.ehrenfest_time, params.loop_formation_time
    dt = t - 2.0 * t_E - 2.0 * t_lL
    gate = dt >= 0.0
    decay = np.exp(-(t - t_E) / tau_D)
    if math.isinf(tau_d):
        body = decay * np.where(gate, dt, 0.0) ** 2 / (2.0 * T_H * tau_D)
        return body
    body = (
        decay
        * math.exp(-2.0 * t_lL / tau_d)
        * (tau_d * tau_d / (T_H * tau_D))
        * loop_kernel(np.where(gate, dt, 0.0) / tau_d)
    )
    return np.where(gate, body, 0.0)


def total_survival(params: SemiclassicalParams, t, regime: str = "plain"):
    """Classical survival plus the regime's loop correction."""
    bracket = _bracket_for_regime(params, t, regime)
    return classical_survival(params, t) + bracket


def _bracket_for_regime(params: SemiclassicalParams, t, regime: str):
    if regime == "plain":
        return loop_correction(params, t)
    if regime == "short_time":
        return loop_correction_short_time(params, t, order=3)
    if regime == "ehrenfest":
        return loop_correction_ehrenfest(params, t)
    raise ValueError(f"unknown regime {regime!r}; expected one of {REGIMES}")


# ---------------------------------------------------------------------------
# curves, peaks, tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorrectionCurve:
    """Loop-correction bracket sampled on a time grid."""

    times: np.ndarray
    bracket: np.ndarray
    regime: str
    params: SemiclassicalParams

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        bracket = np.asarray(self.bracket, dtype=float)
        if times.ndim != 1 or times.shape != bracket.shape:
            raise ValueError("times and bracket must be matching 1-D arrays")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "bracket", bracket)
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")


def correction_curve(params: SemiclassicalParams, times, regime: str = "plain") -> CorrectionCurve:
    """Evaluate the requested bracket on a time grid."""
    times = _check_times(times)
    return CorrectionCurve(
        times=times,
        bracket=np.asarray(_bracket_for_regime(params, times, regime), dtype=float),
        regime=regime,
        params=params,
    )


def correction_peak(params: SemiclassicalParams, regime: str = "plain") -> tuple[float, float]:
    """Location and value of the interior maximum of the bracket.

    Grid scan (log-spaced near the origin, linear beyond) to bracket the
    maximum, then bounded scalar minimisation of the negated bracket.  For
    tau_d -> inf the peak sits at exactly 2*tau_D.
    """
    tau_D = params.dwell_time
    tau_d = params.decoherence_time
    scale = max(tau_D, min(tau_d, 1e3 * tau_D) if not math.isinf(tau_d) else tau_D)
    t_hi = 20.0 * scale
    t_lo = 1e-9 * tau_D
    gate = 2.0 * params.ehrenfest_time + 2.0 * params.loop_formation_time
    if regime == "ehrenfest" and gate > 0:
        t_lo = gate + 1e-12 * tau_D
        t_hi = max(t_hi, gate + 20.0 * scale)

    grid = np.unique(
        np.concatenate(
            [
                np.geomspace(t_lo, t_hi, 2048),
                np.linspace(t_lo, t_hi, 2048),
            ]
        )
    )
    values = np.asarray(_bracket_for_regime(params, grid, regime), dtype=float)
    k = int(np.argmax(values))
    if k == 0 or k == len(grid) - 1 or values[k] <= 0.0:
        raise NumericError(
            "no interior maximum found for the correction bracket "
            f"(argmax at grid index {k} of {len(grid)})"
        )
    lo, hi = grid[k - 1], grid[k + 1]
    res = optimize.minimize_scalar(
        lambda t: -float(_bracket_for_regime(params, np.asarray(t), regime)),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-12 * scale},
    )
    t_star = float(res.x)
    return t_star, float(_bracket_for_regime(params, np.asarray(t_star), regime))


@dataclass(frozen=True)
class CorrectionTable:
    """Family of loop-correction curves over a shared grid (one column per tau_d)."""

    times: np.ndarray  # in units of the Heisenberg time
    columns: dict[str, np.ndarray]
    reference: np.ndarray  # decoherence-free column
    dwell_over_heisenberg: float

    def labels(self) -> list[str]:
        return list(self.columns)


def figure3_curves(
    taud_over_TH: list[float],
    tauD_over_TH: float = 0.3,
    t_max_over_TH: float = 3.0,
    n_points: int = 301,
) -> CorrectionTable:
    """Loop-correction curves for a family of decoherence times.

    Times and time scales are measured in units of the Heisenberg time; the
    decoherence-free curve is always included as ``reference``.  Entries of
    ``taud_over_TH`` may be ``inf``; such columns coincide with the reference.
    """
    if tauD_over_TH <= 0:
        raise ValueError("tauD_over_TH must be positive")
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    times = np.linspace(0.0, t_max_over_TH, n_points)
    base = SemiclassicalParams(dwell_time=tauD_over_TH, heisenberg_time=1.0)
    columns: dict[str, np.ndarray] = {}
    for ratio in taud_over_TH:
        if not (ratio > 0):
            raise ValueError("taud_over_TH entries must be positive (inf allowed)")
        p = base.with_(decoherence_time=float(ratio))
        label = "inf" if math.isinf(ratio) else f"{ratio:g}"
        columns[f"taud_{label}"] = np.asarray(loop_correction(p, times), dtype=float)
    reference = np.asarray(
        loop_correction(base.with_(decoherence_time=math.inf), times), dtype=float
    )
    return CorrectionTable(
        times=times,
        columns=columns,
        reference=reference,
        dwell_over_heisenberg=tauD_over_TH,
    )


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _check_times(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("times must be non-negative")
    return t


def _close(a: float, b: float, rtol: float) -> bool:
    return abs(a - b) <= rtol * max(abs(a), abs(b))
