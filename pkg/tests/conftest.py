import numpy as np
import pytest

from pals_anomaly.detection import DetectorSpec, SourceSpec
from pals_anomaly.histogram import TimeEnergyHistogram
from pals_anomaly.montecarlo import AnnihilationModel, SimulationConfig, simulate_spectrum


@pytest.fixture
def detector():
    return DetectorSpec()


@pytest.fixture
def source():
    return SourceSpec()


def poisson_histogram(edges, expected, seed=0):
    rng = np.random.default_rng(seed)
    return TimeEnergyHistogram(time_edges=np.asarray(edges, float), time_counts=rng.poisson(expected))


@pytest.fixture(scope="session")
def two_component_spectrum():
    model = AnnihilationModel(intensity_para=0.25, intensity_ortho=0.75, intensity_free=0.0,
                              anomaly_branching=0.0)
    sim = SimulationConfig(n_events=1_000_000, seed=11)
    return model, simulate_spectrum(model, DetectorSpec(), SourceSpec(), sim)


@pytest.fixture(scope="session")
def default_spectrum():
    sim = SimulationConfig(n_events=300_000, seed=2)
    return simulate_spectrum(AnnihilationModel(), DetectorSpec(), SourceSpec(), sim)


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.summary_lines():
        terminalreporter.write_line(line)
