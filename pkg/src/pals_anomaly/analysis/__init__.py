"""Lifetime fitting, anomaly extraction and energy-line search."""
from .anomaly import AnomalyEstimate, extract_anomaly
from .emg import bin_fractions, survival
from .fitting import FitModelSpec, FitResult, fit_lifetime
from .lines import LineSearchResult, energy_line_search
from .oracle import grid_oracle_fit

__all__ = ["AnomalyEstimate", "extract_anomaly", "bin_fractions", "survival", "FitModelSpec", "FitResult",
           "fit_lifetime", "LineSearchResult", "energy_line_search", "grid_oracle_fit"]
