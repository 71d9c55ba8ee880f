import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from pals_anomaly.core import ValidationError
from pals_anomaly.detection import DetectorSpec, SourceSpec, random_to_true_ratio
from pals_anomaly.montecarlo import (FREE, ORTHO_1G, ORTHO_3G, PARA, AnnihilationModel, Shoulder,
                                     SimulationConfig, chunk_plan, chunk_rng, ore_powell_density,
                                     sample_event, sample_events, shoulder_rate, simulate_spectrum)

DET = DetectorSpec()
SRC = SourceSpec()


def test_ortho_mean_lifetime():
    model = AnnihilationModel.single("ortho")
    batch = sample_events(model, DET, 1_000_000, chunk_rng(1, 0, 0), apply_response=False)
    assert batch.true_time.mean() == pytest.approx(142.08, abs=0.5)


def test_para_mean_lifetime():
    batch = sample_events(AnnihilationModel.single("para"), DET, 200_000, chunk_rng(2, 0, 0))
    assert batch.true_time.mean() == pytest.approx(0.125, rel=0.01)


def test_full_single_quantum_branching():
    model = AnnihilationModel.single("ortho", anomaly_branching=1.0)
    batch = sample_events(model, DET, 1000, chunk_rng(3, 0, 0), apply_response=False)
    assert np.all(batch.component == ORTHO_1G)
    assert np.all(batch.deposited_energy == 1022.0)


def test_observed_rate_exceeds_three_quantum_rate():
    model = AnnihilationModel(anomaly_branching=1.85e-3)
    assert model.rate_ortho_observed / model.rate_ortho - 1 == pytest.approx(1.85e-3 / (1 - 1.85e-3), rel=1e-12)


@pytest.mark.parametrize("component, rate", [("para", 8.0), ("ortho", 7.0383), ("free", 0.25)])
def test_exponential_draws_ks_and_mean(component, rate):
    model = AnnihilationModel.single(component)
    lam = rate * (1e-3 if component == "ortho" else 1.0)
    n = 100_000
    t = sample_events(model, DET, n, chunk_rng(4, 0, 0), apply_response=False).true_time
    assert abs(t.mean() - 1 / lam) < 4 / lam / math.sqrt(n)
    assert stats.kstest(t, "expon", args=(0, 1 / lam)).pvalue > 0.01


def test_shoulder_rate():
    model = AnnihilationModel()
    assert shoulder_rate(0.0, model) == 0.0
    assert shoulder_rate(1e3, model) == pytest.approx(model.rate_free)
    flat = replace(model, shoulder=Shoulder(enabled=False))
    assert shoulder_rate(0.0, flat) == model.rate_free
    with pytest.raises(ValidationError):
        shoulder_rate(-1.0, model)


def test_shoulder_vanishing_rise_is_exponential():
    model = AnnihilationModel.single("free", shoulder=Shoulder(enabled=True, rise_time=1e-9))
    t = sample_events(model, DET, 100_000, chunk_rng(5, 0, 0), apply_response=False).true_time
    assert stats.kstest(t, "expon", args=(0, 1 / model.rate_free)).pvalue > 0.01


def test_shoulder_survival_matches_thinned_draws():
    model = AnnihilationModel.single("free", shoulder=Shoulder(enabled=True, rise_time=3.0))
    t = sample_events(model, DET, 100_000, chunk_rng(6, 0, 0), apply_response=False).true_time
    lam, tau = model.rate_free, 3.0

    def cdf(x):
        # cumulative hazard lam*(x - tau*(1 - exp(-x/tau)))
        return -np.expm1(-lam * (x - tau * -np.expm1(-x / tau)))
    assert stats.kstest(t, cdf).pvalue > 0.01


def test_anomaly_tag_fraction():
    f = 0.01
    model = AnnihilationModel.single("ortho", anomaly_branching=f)
    comp = sample_events(model, DET, 200_000, chunk_rng(7, 0, 0)).component
    n1 = np.sum(comp == ORTHO_1G)
    n = comp.size
    assert abs(n1 / n - f) < 3 * math.sqrt(f * (1 - f) / n)


def test_energy_signature_without_response():
    model = AnnihilationModel(anomaly_branching=0.05)
    b = sample_events(model, DET, 50_000, chunk_rng(8, 0, 0), apply_response=False)
    assert np.all(b.deposited_energy[b.component == ORTHO_1G] == 1022.0)
    assert np.all(b.deposited_energy[b.component == PARA] == 511.0)
    assert np.all(b.deposited_energy[b.component == FREE] == 511.0)
    e3 = b.deposited_energy[b.component == ORTHO_3G]
    assert e3.min() >= 0 and e3.max() <= 511.0


def test_true_time_nonnegative_and_single_event():
    ev = sample_event(AnnihilationModel(), DET, chunk_rng(9, 0, 0))
    assert ev.true_time >= 0
    assert ev.component in ("para", "ortho_3g", "ortho_1g", "free")


def test_ore_powell_shape():
    x = np.linspace(0.01, 0.99, 99)
    d = ore_powell_density(x)
    assert np.all(d > 0)
    assert np.argmax(d) > 80  # rises toward the endpoint


def test_ore_powell_continuum_sampling():
    model = AnnihilationModel.single("ortho", continuum="ore_powell")
    b = sample_events(model, DET, 20_000, chunk_rng(10, 0, 0), apply_response=False)
    assert np.all((b.deposited_energy > 0) & (b.deposited_energy <= 511.0))
    assert np.median(b.deposited_energy) > 255.5


@pytest.mark.parametrize("kwargs", [{"intensity_para": 0.5}, {"rate_para": 0.0},
                                    {"anomaly_branching": 1.5}, {"continuum": "flat"}])
def test_model_validation(kwargs):
    with pytest.raises(ValidationError):
        AnnihilationModel(**kwargs)


def test_random_count_and_conservation():
    det = DetectorSpec(eff_high=0.075)
    src = SourceSpec(activity=1e6)
    assert random_to_true_ratio(src, det) == pytest.approx(2.5e-3)
    sim = SimulationConfig(n_events=1_000_000, seed=3)
    h = simulate_spectrum(AnnihilationModel(), det, src, sim)
    assert h.metadata["n_random"] == 2500
    assert h.total == 1_002_500


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 5000), st.integers(0, 2 ** 32), st.floats(0.0, 50.0), st.integers(5, 200))
def test_count_conservation_property(n, seed, scale, bins):
    sim = SimulationConfig(n_events=n, seed=seed, random_scale=scale, bins=bins, chunk_size=997)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        h = simulate_spectrum(AnnihilationModel(), DET, SRC, sim)
    assert h.total == n + h.metadata["n_random"]
    assert h.time_counts.dtype.kind == "i" and h.time_counts.min() >= 0


def test_seed_determinism():
    sim = SimulationConfig(n_events=20_000, seed=42)
    a = simulate_spectrum(AnnihilationModel(), DET, SRC, sim)
    b = simulate_spectrum(AnnihilationModel(), DET, SRC, sim)
    c = simulate_spectrum(AnnihilationModel(), DET, SRC, replace(sim, seed=43))
    assert a.time_csv_text() == b.time_csv_text()
    assert a.energy_csv_text() == b.energy_csv_text()
    assert np.any(a.time_counts != c.time_counts)


def test_worker_count_does_not_change_result():
    sim = SimulationConfig(n_events=40_000, seed=5, chunk_size=10_000)
    one = simulate_spectrum(AnnihilationModel(), DET, SRC, sim)
    two = simulate_spectrum(AnnihilationModel(), DET, SRC, replace(sim, workers=2))
    assert np.array_equal(one.time_counts, two.time_counts)
    for k in one.energy_counts:
        assert np.array_equal(one.energy_counts[k], two.energy_counts[k])


def test_chunk_plan():
    assert chunk_plan(10, 4) == [4, 4, 2]
    assert chunk_plan(8, 4) == [4, 4]
    assert sum(chunk_plan(1_000_001, 1000)) == 1_000_001


def test_ortho_tail_log_slope():
    model = AnnihilationModel.single("ortho", anomaly_branching=1.85e-3)
    sim = SimulationConfig(n_events=1_000_000, seed=9, random_scale=0.0)
    h = simulate_spectrum(model, DET, SRC, sim)
    t, y = h.time_centers, h.time_counts.astype(float)
    sel = (t >= 300) & (t <= 900) & (y > 0)
    w = y[sel]  # var(log y) ~ 1/y
    fit, cov = np.polyfit(t[sel], np.log(y[sel]), 1, w=np.sqrt(w), cov="unscaled")
    assert abs(-fit[0] - model.rate_ortho_observed) < 3 * math.sqrt(cov[0, 0])


def test_short_window_warns():
    sim = SimulationConfig(n_events=100, t_min=0.0, t_max=0.5, bins=10)
    with pytest.warns(UserWarning, match="shorter than"):
        h = simulate_spectrum(AnnihilationModel(), DET, SRC, sim)
    assert h.metadata["notes"]


def test_metadata_records_rng():
    h = simulate_spectrum(AnnihilationModel(), DET, SRC, SimulationConfig(n_events=100, seed=1))
    assert h.metadata["rng"]["algorithm"] == "numpy.random.PCG64"
    assert h.metadata["seed"] == 1
    assert sum(h.metadata["component_counts"].values()) == h.total


@pytest.mark.parametrize("kwargs", [{"n_events": 0}, {"t_max": -30.0}, {"bins": 0}, {"seed": -1},
                                    {"random_scale": -1.0}, {"delay_windows": {"a": (5, 1)}}])
def test_simulation_config_validation(kwargs):
    with pytest.raises(ValidationError):
        SimulationConfig(**kwargs)
