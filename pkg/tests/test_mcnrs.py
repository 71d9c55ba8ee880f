import json
import math

import pytest
from hypothesis import given, strategies as st

from pals_anomaly.core import CODATA, PAPER, DomainError, GasState
from pals_anomaly.mcnrs import (N_BAR_DEFAULT, McnrsReport, ResonanceParameters, amplified_branching,
                                branching_single_gamma, collective_size, format_report, full_report,
                                gamma_wavelength, lattice_constant_exp, lattice_constant_theory,
                                macroscopic_cross_section, mcns_radius, mossbauer_factor, packing_comparison,
                                resonant_cross_section, resonant_mean_free_path, round_sig,
                                virtual_photon_time)

positive = st.floats(1e-6, 1e6, allow_nan=False)


@pytest.mark.parametrize("n_bar, eta, expected", [(5.278e4, 0.09, 4750.2), (5.278e4, 1.0, 5.278e4),
                                                  (5.278e4, 0.092, 4855.76)])
def test_collective_size(n_bar, eta, expected):
    assert collective_size(n_bar, eta) == pytest.approx(expected, rel=1e-9)


@pytest.mark.parametrize("eta", [0.0, 1.5, -0.1])
def test_collective_size_domain(eta):
    with pytest.raises(DomainError):
        collective_size(N_BAR_DEFAULT, eta)


def test_lattice_constant_exp():
    assert lattice_constant_exp(4 / 3 * math.pi * 8, N_BAR_DEFAULT) == pytest.approx(8.595e-2, rel=1e-3)
    assert lattice_constant_exp(1.0, 1.0) == 1.0


@given(positive, st.floats(0.1, 10))
def test_lattice_constant_exp_scaling(volume, k):
    assert lattice_constant_exp(k ** 3 * volume, N_BAR_DEFAULT) == pytest.approx(
        k * lattice_constant_exp(volume, N_BAR_DEFAULT), rel=1e-12)


def test_lattice_constant_theory_forms():
    paper = lattice_constant_theory(PAPER)
    assert paper.from_hyperfine == pytest.approx(197.327e-13 * 1e6 / 3.6e-4, rel=1e-12)
    assert paper.from_hyperfine == pytest.approx(5.48e-2, rel=1e-3)
    codata = lattice_constant_theory(CODATA)
    assert codata.from_alpha == pytest.approx(5.45e-2, rel=2e-3)
    assert codata.relative_difference < 0.01


def test_virtual_photon_time():
    t = virtual_photon_time(PAPER)
    assert t == pytest.approx(1.83, rel=1e-3)
    assert virtual_photon_time(PAPER, 2 * PAPER.hyperfine_energy_3_7) == pytest.approx(t / 2, rel=1e-14)
    assert t * 1e-12 * PAPER.hyperfine_energy_3_7 / PAPER.hbar == pytest.approx(1.0, rel=1e-14)


def test_mcns_radius():
    assert mcns_radius(N_BAR_DEFAULT, 5.5e-2) == pytest.approx(1.28, rel=1e-3)
    assert mcns_radius(1.0, 1.0) == pytest.approx((3 / (4 * math.pi)) ** (1 / 3), rel=1e-14)


@given(positive, st.floats(1e-4, 10))
def test_mcns_radius_round_trip(n_bar, delta):
    r = mcns_radius(n_bar, delta)
    assert 4 / 3 * math.pi * r ** 3 == pytest.approx(n_bar * delta ** 3, rel=1e-12)


@pytest.mark.parametrize("energy, expected", [(1.27, 9.763e-11), (0.511, 2.426e-10)])
def test_gamma_wavelength(energy, expected):
    assert gamma_wavelength(energy) == pytest.approx(expected, rel=1e-3)


def test_gamma_wavelength_inverse_and_domain():
    assert gamma_wavelength(2.54) == pytest.approx(gamma_wavelength(1.27) / 2, rel=1e-14)
    with pytest.raises(DomainError):
        gamma_wavelength(0.0)


@pytest.mark.parametrize("msd, expected", [((2.5e-13) ** 2, 0.9997), (0.0, 1.0)])
def test_mossbauer_factor(msd, expected):
    assert mossbauer_factor(msd, 9.77e-11) == pytest.approx(expected, abs=1e-4)


def test_mossbauer_factor_unit_exponent():
    lam = 9.77e-11
    assert mossbauer_factor(lam ** 2 / (4 * math.pi ** 2), lam) == pytest.approx(math.exp(-1), rel=1e-14)


def test_resonant_cross_section():
    frozen = ResonanceParameters(mean_square_displacement=0.0)
    assert resonant_cross_section(frozen) == pytest.approx(7.6e-21, rel=0.01)
    scalar = ResonanceParameters(spin_excited=0.0, mean_square_displacement=0.0)
    assert resonant_cross_section(scalar) == pytest.approx(scalar.wavelength ** 2 / (2 * math.pi), rel=1e-14)


@given(st.floats(0, 1e-21), st.floats(0, 1e-21))
def test_cross_section_monotone_in_recoil_free_fraction(a, b):
    lo, hi = sorted([a, b])
    # smaller displacement -> larger f_M -> larger sigma
    assert resonant_cross_section(ResonanceParameters(mean_square_displacement=lo)) >= \
        resonant_cross_section(ResonanceParameters(mean_square_displacement=hi))


def test_cross_section_increases_with_wavelength():
    assert resonant_cross_section(ResonanceParameters(gamma_energy=1.0)) > \
        resonant_cross_section(ResonanceParameters(gamma_energy=1.27))


def test_mean_free_path():
    assert resonant_mean_free_path(0.09, 50 * 2.7e19, 7.5e-21) == pytest.approx(1.097, rel=1e-3)


@given(st.floats(1e-3, 1), positive, st.floats(1e-25, 1e-15))
def test_mean_free_path_inverse(eta, nu, sigma):
    assert resonant_mean_free_path(eta, nu, sigma) * eta * nu * sigma == pytest.approx(1.0, rel=1e-14)


def test_macroscopic_cross_section():
    assert macroscopic_cross_section(4750, 7.5e-21) == pytest.approx(3.5625e-17, rel=1e-12)
    assert macroscopic_cross_section(1, 7.5e-21) == 7.5e-21


def test_packing_comparison():
    p = packing_comparison(0.09, 5.5e-2, 1.1)
    assert p.two_delta == pytest.approx(0.11)
    assert p.ratio == pytest.approx(10.0)
    assert p.packing == pytest.approx(0.0833, abs=1e-4)


@pytest.mark.parametrize("x, expected", [(0.0, 3.5e-8), (1.0, 0.0), (0.5, 3.28125e-8)])
def test_branching_single_gamma(x, expected):
    assert branching_single_gamma(x) == pytest.approx(expected, rel=1e-12, abs=1e-30)


@given(st.floats(0, 1), st.floats(0, 1))
def test_branching_monotone(a, b):
    lo, hi = sorted([a, b])
    assert branching_single_gamma(lo) >= branching_single_gamma(hi)


def test_branching_domain():
    with pytest.raises(DomainError):
        branching_single_gamma(1.2)


def test_amplified_branching():
    assert amplified_branching(3.5e-8, N_BAR_DEFAULT) == pytest.approx(1.847e-3, rel=1e-3)
    assert amplified_branching(3.5e-8, 1) == 3.5e-8
    with pytest.raises(DomainError):
        amplified_branching(0.1, 100)


def test_round_sig():
    assert round_sig(0.054812) == 0.055
    assert round_sig(1847.3, 3) == 1850


def test_report_round_trip():
    report = full_report(GasState())
    again = McnrsReport.from_dict(json.loads(report.to_json()))
    assert again == report


def test_report_pure_isotope():
    report = full_report(GasState(mix={"Ne-22": 1.0}))
    assert report.n == pytest.approx(N_BAR_DEFAULT)


def test_report_flags_prior_limit():
    report = full_report(GasState())
    assert report.prior_limit_ratio == pytest.approx(461.8, rel=1e-3)


def test_format_report_has_provenance_and_both_profiles():
    text = format_report(full_report(GasState()), full_report(GasState(), CODATA))
    header = text.splitlines()[0].split()
    assert header[:3] == ["quantity", "paper", "codata"]
    assert "source" in header
