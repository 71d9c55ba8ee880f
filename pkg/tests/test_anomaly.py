import math

import pytest
from hypothesis import given, strategies as st

from pals_anomaly.analysis.anomaly import (AnomalyError, anomaly_from_rate, band_compatibility,
                                           extract_anomaly, ortho_component)
from pals_anomaly.analysis.fitting import FitModelSpec, FitResult, fit_lifetime
from pals_anomaly.core import CODATA, PAPER


def test_injected_branching_fraction():
    est = anomaly_from_rate(7.05132, 1e-3)
    assert est.fraction == pytest.approx(1.85e-3, rel=1e-3)
    assert est.compatible
    assert est.distance_to_band == 0.0


def test_sigma_combines_fit_and_theory():
    est = anomaly_from_rate(7.0383, 0.0)
    assert est.sigma == pytest.approx(0.00005 / 7.0383, rel=1e-9)
    est = anomaly_from_rate(7.0383, 0.01)
    assert est.sigma == pytest.approx(math.hypot(0.01, 0.00005) / 7.0383, rel=1e-6)


@pytest.mark.parametrize("fraction, sigma, compatible", [(0.0016, 1e-4, True), (0.0, 1e-4, False),
                                                        (0.0012, 1e-4, True), (0.0030, 1e-4, False),
                                                        (0.0022, 3e-4, True), (0.0011, 1e-4, False)])
def test_band_compatibility(fraction, sigma, compatible):
    assert band_compatibility(fraction, sigma)[0] is compatible


@given(st.floats(0.0014, 0.0019))
def test_inside_band_always_compatible(f):
    assert band_compatibility(f, 1e-9) == (True, 0.0)


def test_profile_independent_theory_rate():
    assert anomaly_from_rate(7.1, 0.01, CODATA).lambda_theor == anomaly_from_rate(7.1, 0.01, PAPER).lambda_theor


def _result(rates, errors, identifiable=None, converged=True):
    n = len(rates)
    return FitResult(rates=rates, rate_errors=errors, intensities=[1 / n] * n, intensity_errors=[None] * n,
                     amplitudes=[1.0] * n, amplitude_errors=[None] * n, background=0.0, background_error=None,
                     response_fwhm=0.3, chi2=0.0, pearson_chi2=0.0, dof=1, converged=converged, iterations=1,
                     covariance=None, param_names=[], gradient_norm=0.0, last_step=0.0,
                     identifiable=identifiable or [True] * n, variance_model="poisson")


def test_ortho_component_selection():
    fit = _result([1e-4, 7.05e-3, 0.25, 8.0], [1e-6] * 4)
    assert ortho_component(fit) == 1
    assert extract_anomaly(fit).lambda_obs == pytest.approx(7.05)


@pytest.mark.parametrize("fit", [_result([0.25, 8.0], [1e-3, 1e-2]),
                                 _result([7e-3], [1e-6], converged=False),
                                 _result([7e-3], [None]),
                                 _result([7e-3], [1e-6], identifiable=[False])])
def test_extract_anomaly_errors(fit):
    with pytest.raises(AnomalyError):
        extract_anomaly(fit)


def test_extract_from_fit(two_component_spectrum):
    model, h = two_component_spectrum
    fit = fit_lifetime(h, FitModelSpec(n_components=1, fit_window=(50.0, 1000.0)))
    est = extract_anomaly(fit)
    # no anomaly injected in this spectrum
    assert abs(est.fraction) < 3 * est.sigma
    assert est.to_dict()["units"]["lambda_obs"] == "us^-1"
