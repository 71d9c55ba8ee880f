"""
Delayed start-stop coincidence measurement: source, counters, randoms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import PS_TO_NS, S_TO_NS, ValidationError, require_positive, require_unit_interval

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))

ANNIHILATION_LOW = "annihilation_low"
FULL_ENERGY = "full_energy"
NUCLEAR = "nuclear"
OTHER = "other"

DEFAULT_WINDOWS = {
    ANNIHILATION_LOW: (400.0, 600.0),
    FULL_ENERGY: (900.0, 1150.0),
    NUCLEAR: (1150.0, 1400.0),
}


@dataclass(frozen=True)
class SourceSpec:
    """Positron source. ``activity`` in s^-1, gamma energy MeV, lifetime ps."""

    activity: float = 1e5
    nuclear_gamma_energy: float = 1.27
    nuclear_lifetime: float = 5.24
    label: str = "Na-22"

    def __post_init__(self):
        require_positive("source.activity", self.activity)
        require_positive("source.nuclear_gamma_energy", self.nuclear_gamma_energy)
        require_positive("source.nuclear_lifetime", self.nuclear_lifetime)

    @property
    def nuclear_lifetime_ns(self) -> float:
        return self.nuclear_lifetime * PS_TO_NS


@dataclass(frozen=True)
class DetectorSpec:
    """Stop-counter and coincidence-circuit parameters.

    Efficiencies and solid angles are fractions in (0, 1]; ``resolving_time``
    and ``timing_fwhm`` are in ns; ``energy_fwhm_511`` is the relative FWHM at
    511 keV. ``resolving_time`` is the full width of the coincidence window.
    ``windows`` maps energy-window labels to half-open keV intervals.
    """

    eff_low: float = 0.3
    eff_high: float = 0.2
    solid_angle_high: float = 0.1
    solid_angle_low_mean: float = 0.05
    resolving_time: float = 1.0
    timing_fwhm: float = 0.3
    energy_fwhm_511: float = 0.10
    windows: dict = field(default_factory=lambda: dict(DEFAULT_WINDOWS))

    def __post_init__(self):
        for name in ("eff_low", "eff_high", "solid_angle_high", "solid_angle_low_mean"):
            require_unit_interval(f"detector.{name}", getattr(self, name), open_low=True)
        require_positive("detector.resolving_time", self.resolving_time)
        require_positive("detector.timing_fwhm", self.timing_fwhm)
        require_positive("detector.energy_fwhm_511", self.energy_fwhm_511)
        windows = {str(k): (float(v[0]), float(v[1])) for k, v in dict(self.windows).items()}
        if OTHER in windows:
            raise ValidationError("detector.windows", f"{OTHER!r} is reserved for the complement")
        spans = sorted(windows.items(), key=lambda kv: kv[1])
        for label, (lo, hi) in spans:
            if not 0 <= lo < hi:
                raise ValidationError(f"detector.windows.{label}",
                                      f"need 0 <= low < high (got [{lo}, {hi}))")
        for (la, (_, hi)), (lb, (lo, _)) in zip(spans, spans[1:]):
            if lo < hi:
                raise ValidationError("detector.windows", f"{la} overlaps {lb}")
        object.__setattr__(self, "windows", dict(spans))

    def __hash__(self):
        return hash(tuple((f, getattr(self, f)) for f in self.__dataclass_fields__ if f != "windows")
                    + tuple(self.windows.items()))

    @property
    def timing_sigma(self) -> float:
        return self.timing_fwhm / FWHM_PER_SIGMA

    def energy_sigma(self, energy_kev):
        """Gaussian width in keV; scales as sqrt(E) from the 511 keV anchor."""
        e = np.asarray(energy_kev, dtype=float)
        return self.energy_fwhm_511 * 511.0 / FWHM_PER_SIGMA * np.sqrt(np.clip(e, 0.0, None) / 511.0)

    @property
    def efficiency_ratio(self) -> float:
        """``eps_1.27 Omega_2(1.27) / (eps_0.5 mean Omega_2(<=0.5))``."""
        return (self.eff_high * self.solid_angle_high) / (self.eff_low * self.solid_angle_low_mean)


def random_to_true_ratio(source: SourceSpec, det: DetectorSpec) -> float:
    """Accidental-to-true coincidence ratio ``R/C``."""
    return source.activity * det.resolving_time / S_TO_NS * (2.0 + det.efficiency_ratio)


def nuclear_random_fraction(det: DetectorSpec) -> float:
    """Share of random stops that are the nuclear quantum, from the bracket of R/C."""
    r = det.efficiency_ratio
    return r / (2.0 + r)


def random_rate_density(source: SourceSpec, det: DetectorSpec, n_true: float, window: float) -> float:
    """Flat accidental level in counts per ns of delay for a run with ``n_true`` true events."""
    if n_true < 0:
        raise ValidationError("n_true", "must be >= 0")
    require_positive("window", window)
    return random_to_true_ratio(source, det) * n_true / window


def classify_energy(deposited, det: DetectorSpec | None = None):
    """Label deposits by energy window; anything outside a window is ``other``.

    Scalars return a string, arrays an object array of labels.
    """
    windows = (det.windows if det is not None else DEFAULT_WINDOWS)
    e = np.asarray(deposited, dtype=float)
    if np.any(e < 0):
        raise ValidationError("deposited", "energy must be >= 0")
    labels = np.full(e.shape, OTHER, dtype=object)
    for label, (lo, hi) in windows.items():
        labels[(e >= lo) & (e < hi)] = label
    if labels.ndim == 0:
        return str(labels[()])
    return labels
