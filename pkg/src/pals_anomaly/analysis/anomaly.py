"""
Relative excess of the fitted o-Ps decay rate over the QED value.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from ..core import PAPER, PER_US_TO_PER_NS, PhysicalConstants
from .fitting import FitResult

# Reported excesses (fraction, 1 sigma) at the ends of the measured range.
BAND_LOW = (0.0014, 0.00023)
BAND_HIGH = (0.0019, 0.0002)
ORTHO_LIFETIME_RANGE = (50.0, 500.0)  # ns


class AnomalyError(ValueError):
    pass


@dataclass(frozen=True)
class AnomalyEstimate:
    """``fraction = (lambda_obs - lambda_theor) / lambda_theor``; rates in us^-1."""

    fraction: float
    sigma: float
    lambda_obs: float
    lambda_obs_sigma: float
    lambda_theor: float
    band: tuple = (BAND_LOW[0], BAND_HIGH[0])
    band_errors: tuple = (BAND_LOW[1], BAND_HIGH[1])
    compatible: bool = False
    distance_to_band: float = 0.0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["band"] = list(self.band)
        out["band_errors"] = list(self.band_errors)
        out["units"] = {"lambda_obs": "us^-1", "lambda_theor": "us^-1", "fraction": "1"}
        return out


def band_compatibility(fraction: float, sigma: float) -> tuple[bool, float]:
    """Distance from the reported band and whether it is within combined 1 sigma."""
    (lo, lo_err), (hi, hi_err) = BAND_LOW, BAND_HIGH
    if fraction < lo:
        dist, err = lo - fraction, lo_err
    elif fraction > hi:
        dist, err = fraction - hi, hi_err
    else:
        return True, 0.0
    return dist <= math.hypot(sigma, err), dist


def anomaly_from_rate(lambda_obs: float, lambda_obs_sigma: float,
                      constants: PhysicalConstants = PAPER) -> AnomalyEstimate:
    """Anomaly for an o-Ps rate given in us^-1."""
    theor = constants.lambda_T_theor
    fraction = (lambda_obs - theor) / theor
    sigma = math.hypot(lambda_obs_sigma / theor, lambda_obs * constants.lambda_T_theor_sigma / theor ** 2)
    compatible, dist = band_compatibility(fraction, sigma)
    return AnomalyEstimate(fraction, sigma, lambda_obs, lambda_obs_sigma, theor,
                           compatible=compatible, distance_to_band=dist)


def ortho_component(fit: FitResult, lifetime_range=ORTHO_LIFETIME_RANGE) -> int:
    """Index of the longest-lived identifiable component inside ``lifetime_range``."""
    lo, hi = lifetime_range
    for j, (rate, ok) in enumerate(zip(fit.rates, fit.identifiable)):
        if ok and lo <= 1.0 / rate <= hi:
            return j
    raise AnomalyError(f"no identifiable component with lifetime in [{lo}, {hi}] ns")


def extract_anomaly(fit: FitResult, constants: PhysicalConstants = PAPER,
                    lifetime_range=ORTHO_LIFETIME_RANGE) -> AnomalyEstimate:
    if not fit.converged:
        raise AnomalyError("fit did not converge")
    j = ortho_component(fit, lifetime_range)
    if fit.rate_errors[j] is None:
        raise AnomalyError("o-Ps rate has no uncertainty (fixed or singular covariance)")
    lam = fit.rates[j] / PER_US_TO_PER_NS
    return anomaly_from_rate(lam, fit.rate_errors[j] / PER_US_TO_PER_NS, constants)
