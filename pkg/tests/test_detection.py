import numpy as np
import pytest
from hypothesis import given, strategies as st

from pals_anomaly.core import ValidationError
from pals_anomaly.detection import (DetectorSpec, SourceSpec, classify_energy, nuclear_random_fraction,
                                    random_rate_density, random_to_true_ratio)

# efficiency-angle ratio 0.5
HALF = DetectorSpec(eff_low=0.3, solid_angle_low_mean=0.05, eff_high=0.075, solid_angle_high=0.1)


def test_random_to_true_ratio_example():
    assert HALF.efficiency_ratio == pytest.approx(0.5)
    assert random_to_true_ratio(SourceSpec(activity=1e6), HALF) == pytest.approx(2.5e-3, rel=1e-12)


def test_weak_source_limit():
    assert random_to_true_ratio(SourceSpec(activity=1e-12), HALF) < 1e-20


@given(st.floats(1e-3, 1e9), st.floats(1e-3, 1e3))
def test_ratio_linear_and_bounded(q, dt):
    det = DetectorSpec(resolving_time=dt)
    r = random_to_true_ratio(SourceSpec(activity=q), det)
    assert random_to_true_ratio(SourceSpec(activity=2 * q), det) == pytest.approx(2 * r, rel=1e-14)
    assert random_to_true_ratio(SourceSpec(activity=q), DetectorSpec(resolving_time=2 * dt)) == \
        pytest.approx(2 * r, rel=1e-14)
    assert r >= 2 * q * dt * 1e-9 * (1 - 1e-15)


def test_random_rate_density():
    b = random_rate_density(SourceSpec(activity=1e6), HALF, 1e6, 1000.0)
    assert b == pytest.approx(2.5, rel=1e-12)
    assert random_rate_density(SourceSpec(activity=1e6), HALF, 1e6, 500.0) == pytest.approx(2 * b)
    assert random_rate_density(SourceSpec(activity=1e6), HALF, 0.0, 1000.0) == 0.0


def test_nuclear_random_fraction():
    assert nuclear_random_fraction(HALF) == pytest.approx(0.5 / 2.5)


@pytest.mark.parametrize("energy, label", [(511, "annihilation_low"), (1022, "full_energy"),
                                           (1270, "nuclear"), (100, "other"), (1400, "other"),
                                           (600, "other"), (400, "annihilation_low")])
def test_classify_energy(energy, label):
    assert classify_energy(energy) == label


@given(st.floats(0, 1e5))
def test_classification_total(e):
    assert classify_energy(e) in {"annihilation_low", "full_energy", "nuclear", "other"}


def test_classify_array():
    labels = classify_energy(np.array([511.0, 1022.0]))
    assert list(labels) == ["annihilation_low", "full_energy"]


def test_classify_negative():
    with pytest.raises(ValidationError):
        classify_energy(-1.0)


@pytest.mark.parametrize("kwargs, field", [
    ({"eff_low": 0.0}, "detector.eff_low"),
    ({"solid_angle_high": 1.5}, "detector.solid_angle_high"),
    ({"resolving_time": -1.0}, "detector.resolving_time"),
    ({"timing_fwhm": 0.0}, "detector.timing_fwhm"),
    ({"windows": {"a": (0, 500), "b": (400, 600)}}, "detector.windows"),
])
def test_detector_validation(kwargs, field):
    with pytest.raises(ValidationError) as info:
        DetectorSpec(**kwargs)
    assert info.value.field == field


@pytest.mark.parametrize("kwargs", [{"activity": 0.0}, {"nuclear_lifetime": -5.0}])
def test_source_validation(kwargs):
    with pytest.raises(ValidationError):
        SourceSpec(**kwargs)


def test_energy_sigma_scaling():
    det = DetectorSpec()
    assert det.energy_sigma(511.0) == pytest.approx(0.10 * 511 / 2.354820045, rel=1e-9)
    assert det.energy_sigma(4 * 511.0) == pytest.approx(2 * det.energy_sigma(511.0), rel=1e-12)
