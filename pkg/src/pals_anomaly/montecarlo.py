"""
Monte Carlo generator for delayed-coincidence lifetime spectra.

Events are produced in fixed-size chunks. Chunk ``i`` of stream ``s`` draws
from ``PCG64(SeedSequence(seed, spawn_key=(s, i)))``, so the merged histogram
depends only on (configuration, seed, chunk size) and never on the number
of worker processes.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import PER_US_TO_PER_NS, ValidationError, require_positive, require_unit_interval
from .detection import DetectorSpec, SourceSpec, nuclear_random_fraction, random_to_true_ratio
from .histogram import TimeEnergyHistogram

log = logging.getLogger(__name__)

PARA, ORTHO_3G, ORTHO_1G, FREE, RANDOM = range(5)
COMPONENT_NAMES = ("para", "ortho_3g", "ortho_1g", "free", "random")

ELECTRON_REST_KEV = 511.0
SINGLE_QUANTUM_KEV = 2 * ELECTRON_REST_KEV

TRUE_STREAM = 0
RANDOM_STREAM = 1
RNG_ALGORITHM = "numpy.random.PCG64"
SEEDING = "SeedSequence(seed, spawn_key=(stream, chunk))"


@dataclass(frozen=True)
class Shoulder:
    """Delayed onset of free annihilation, ``rate * (1 - exp(-t/rise_time))``."""

    enabled: bool = True
    rise_time: float = 3.0

    def __post_init__(self):
        if self.enabled:
            require_positive("model.shoulder.rise_time", self.rise_time)


@dataclass(frozen=True)
class AnnihilationModel:
    """Component intensities and rates.

    ``rate_para`` and ``rate_free`` are in ns^-1, ``rate_ortho_3gamma`` in
    us^-1. ``anomaly_branching`` is the fraction of o-Ps decays that go
    through the single-quantum channel; the channel adds to the decay rate.
    ``continuum`` selects the stop-deposit shape of three-quantum decays:
    ``"uniform"`` on (0, 511) keV or ``"ore_powell"``.
    """

    intensity_para: float = 0.25
    intensity_ortho: float = 0.35
    intensity_free: float = 0.40
    rate_para: float = 8.0
    rate_ortho_3gamma: float = 7.03830
    anomaly_branching: float = 1.847e-3
    rate_free: float = 0.25
    shoulder: Shoulder = field(default_factory=Shoulder)
    continuum: str = "uniform"

    def __post_init__(self):
        intensities = (self.intensity_para, self.intensity_ortho, self.intensity_free)
        for name, value in zip(("intensity_para", "intensity_ortho", "intensity_free"), intensities):
            require_unit_interval(f"model.{name}", value)
        if abs(math.fsum(intensities) - 1.0) > 1e-9:
            raise ValidationError("model.intensities",
                                  f"intensities must sum to 1 (got {math.fsum(intensities)!r})")
        for name in ("rate_para", "rate_ortho_3gamma", "rate_free"):
            require_positive(f"model.{name}", getattr(self, name))
        require_unit_interval("model.anomaly_branching", self.anomaly_branching)
        if self.continuum not in ("uniform", "ore_powell"):
            raise ValidationError("model.continuum", "must be 'uniform' or 'ore_powell'")

    @property
    def rate_ortho(self) -> float:
        """Three-quantum o-Ps rate in ns^-1."""
        return self.rate_ortho_3gamma * PER_US_TO_PER_NS

    @property
    def rate_ortho_observed(self) -> float:
        """Total o-Ps decay rate in ns^-1 including the single-quantum channel."""
        if self.anomaly_branching >= 1.0:
            return math.inf
        return self.rate_ortho / (1.0 - self.anomaly_branching)

    @classmethod
    def single(cls, component: str, rate: float | None = None, **kw) -> "AnnihilationModel":
        """Pure one-component model; ``rate`` in the component's own unit."""
        intens = {"para": (1.0, 0.0, 0.0), "ortho": (0.0, 1.0, 0.0), "free": (0.0, 0.0, 1.0)}[component]
        kw.setdefault("anomaly_branching", 0.0)
        if component == "free":
            kw.setdefault("shoulder", Shoulder(enabled=False))
        if rate is not None:
            kw[{"para": "rate_para", "ortho": "rate_ortho_3gamma", "free": "rate_free"}[component]] = rate
        return cls(*intens, **kw)


@dataclass(frozen=True)
class AnnihilationEvent:
    true_time: float
    observed_time: float
    component: str
    deposited_energy: float


@dataclass
class EventBatch:
    true_time: np.ndarray
    observed_time: np.ndarray
    component: np.ndarray
    deposited_energy: np.ndarray

    def __len__(self):
        return len(self.true_time)

    def event(self, i: int) -> AnnihilationEvent:
        return AnnihilationEvent(float(self.true_time[i]), float(self.observed_time[i]),
                                 COMPONENT_NAMES[self.component[i]], float(self.deposited_energy[i]))


@dataclass(frozen=True)
class SimulationConfig:
    """Run parameters. Times in ns, energies in keV.

    ``random_scale`` multiplies the accidental count predicted from R/C; it
    is a manual knob for studying enhanced backgrounds.
    """

    n_events: int = 1_000_000
    t_min: float = -20.0
    t_max: float = 1000.0
    bins: int = 1200
    seed: int = 0
    chunk_size: int = 1_000_000
    energy_max: float = 1600.0
    energy_bins: int = 400
    delay_windows: dict = field(default_factory=lambda: {"prompt": (-20.0, 50.0), "late": (50.0, 1000.0)})
    apply_response: bool = True
    random_scale: float = 1.0
    workers: int = 1

    def __post_init__(self):
        if int(self.n_events) != self.n_events or self.n_events <= 0:
            raise ValidationError("simulation.n_events", "n_events must be a positive integer")
        if not self.t_max > self.t_min:
            raise ValidationError("simulation.t_max", "t_max must be > t_min")
        for name in ("bins", "chunk_size", "energy_bins", "workers"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) <= 0:
                raise ValidationError(f"simulation.{name}", f"{name} must be a positive integer")
        require_positive("simulation.energy_max", self.energy_max)
        if self.random_scale < 0:
            raise ValidationError("simulation.random_scale", "random_scale must be >= 0")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValidationError("simulation.seed", "seed must be a non-negative integer")
        windows = {str(k): (float(v[0]), float(v[1])) for k, v in dict(self.delay_windows).items()}
        for label, (lo, hi) in windows.items():
            if not hi > lo:
                raise ValidationError(f"simulation.delay_windows.{label}", "need low < high")
        object.__setattr__(self, "delay_windows", windows)

    def __hash__(self):
        return hash(json.dumps(asdict(self), sort_keys=True))

    @property
    def window(self) -> float:
        return self.t_max - self.t_min


def shoulder_rate(t, model: AnnihilationModel):
    """Instantaneous free-annihilation rate (ns^-1) at delay ``t`` ns."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValidationError("t", "shoulder rate is defined for t >= 0")
    base = np.full_like(t, model.rate_free)
    if model.shoulder.enabled:
        base = model.rate_free * -np.expm1(-t / model.shoulder.rise_time)
    return base if base.ndim else float(base)


def _sample_free(model: AnnihilationModel, n: int, rng: np.random.Generator) -> np.ndarray:
    if not model.shoulder.enabled:
        return rng.exponential(1.0 / model.rate_free, n)
    # Thinning of a rate-bounded process against the constant bound rate_free.
    t = np.zeros(n)
    pending = np.arange(n)
    while pending.size:
        t[pending] += rng.exponential(1.0 / model.rate_free, pending.size)
        accept = rng.random(pending.size) < -np.expm1(-t[pending] / model.shoulder.rise_time)
        pending = pending[~accept]
    return t


def ore_powell_density(x):
    """Unnormalized o-Ps three-photon energy spectrum, ``x = E / m_e c^2`` in (0, 1]."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        one = 1.0 - x
        log1 = np.where(one > 0, np.log(np.where(one > 0, one, 1.0)), 0.0)
        f = (x * one / (2 - x) ** 2
             - 2 * one ** 2 / (2 - x) ** 3 * log1
             + (2 - x) / x
             + 2 * one / x ** 2 * log1)
    return 2.0 * f


def _sample_continuum(kind: str, n: int, rng: np.random.Generator) -> np.ndarray:
    if kind == "uniform":
        return rng.uniform(0.0, ELECTRON_REST_KEV, n)
    # Rejection under the constant envelope 2 = density(1), the maximum.
    out = np.empty(n)
    filled = 0
    while filled < n:
        m = max(2 * (n - filled), 64)
        x = rng.uniform(1e-6, 1.0, m)
        keep = x[rng.uniform(0.0, 2.0, m) < ore_powell_density(x)]
        take = min(keep.size, n - filled)
        out[filled:filled + take] = keep[:take]
        filled += take
    return out * ELECTRON_REST_KEV


def _smear_energy(e: np.ndarray, det: DetectorSpec, rng: np.random.Generator) -> np.ndarray:
    return np.clip(e + det.energy_sigma(e) * rng.standard_normal(e.size), 0.0, None)


def sample_events(model: AnnihilationModel, det: DetectorSpec, n: int, rng: np.random.Generator,
                  *, apply_response: bool = True, source: SourceSpec | None = None) -> EventBatch:
    """Draw ``n`` true start-stop events.

    The observed delay is the annihilation time minus the nuclear
    de-excitation delay of the start quantum, plus Gaussian timing jitter
    when ``apply_response`` is set.
    """
    source = source or SourceSpec()
    probs = np.array([model.intensity_para, model.intensity_ortho, model.intensity_free])
    kind = rng.choice(3, size=n, p=probs / probs.sum())
    t = np.empty(n)
    comp = np.empty(n, dtype=np.int8)
    energy = np.empty(n)

    sel = kind == 0
    t[sel] = rng.exponential(1.0 / model.rate_para, sel.sum())
    comp[sel] = PARA
    energy[sel] = ELECTRON_REST_KEV

    sel = np.flatnonzero(kind == 1)
    rate = model.rate_ortho_observed
    t[sel] = 0.0 if math.isinf(rate) else rng.exponential(1.0 / rate, sel.size)
    single = rng.random(sel.size) < model.anomaly_branching
    comp[sel] = np.where(single, ORTHO_1G, ORTHO_3G)
    energy[sel[single]] = SINGLE_QUANTUM_KEV
    energy[sel[~single]] = _sample_continuum(model.continuum, int((~single).sum()), rng)

    sel = kind == 2
    t[sel] = _sample_free(model, int(sel.sum()), rng)
    comp[sel] = FREE
    energy[sel] = ELECTRON_REST_KEV

    observed = t - rng.exponential(source.nuclear_lifetime_ns, n)
    if apply_response:
        observed = observed + det.timing_sigma * rng.standard_normal(n)
        energy = _smear_energy(energy, det, rng)
    return EventBatch(t, observed, comp, energy)


def sample_event(model: AnnihilationModel, det: DetectorSpec, rng: np.random.Generator,
                 *, apply_response: bool = True) -> AnnihilationEvent:
    return sample_events(model, det, 1, rng, apply_response=apply_response).event(0)


def sample_random_events(det: DetectorSpec, source: SourceSpec, n: int, t_min: float, t_max: float,
                         rng: np.random.Generator, *, apply_response: bool = True) -> EventBatch:
    """Accidental coincidences: uniform delay, nuclear or annihilation-like stop."""
    t = rng.uniform(t_min, t_max, n)
    nuclear = rng.random(n) < nuclear_random_fraction(det)
    energy = np.where(nuclear, source.nuclear_gamma_energy * 1e3, ELECTRON_REST_KEV)
    if apply_response:
        energy = _smear_energy(energy, det, rng)
    return EventBatch(t, t.copy(), np.full(n, RANDOM, dtype=np.int8), energy)


def chunk_rng(seed: int, stream: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream, chunk))))


def chunk_plan(total: int, chunk_size: int) -> list[int]:
    full, rest = divmod(int(total), int(chunk_size))
    return [chunk_size] * full + ([rest] if rest else [])


def _bin_index(x: np.ndarray, lo: float, hi: float, bins: int) -> np.ndarray:
    """Uniform-bin index with out-of-range values folded into the edge bins."""
    idx = np.floor((x - lo) * (bins / (hi - lo))).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def _histogram_chunk(args):
    model, det, source, sim, stream, chunk, size = args
    rng = chunk_rng(sim.seed, stream, chunk)
    if stream == TRUE_STREAM:
        batch = sample_events(model, det, size, rng, apply_response=sim.apply_response, source=source)
    else:
        batch = sample_random_events(det, source, size, sim.t_min, sim.t_max, rng,
                                     apply_response=sim.apply_response)
    tcounts = np.bincount(_bin_index(batch.observed_time, sim.t_min, sim.t_max, sim.bins),
                          minlength=sim.bins)
    ecounts = {}
    for label, (lo, hi) in sim.delay_windows.items():
        inside = (batch.observed_time >= lo) & (batch.observed_time < hi)
        ecounts[label] = np.bincount(
            _bin_index(batch.deposited_energy[inside], 0.0, sim.energy_max, sim.energy_bins),
            minlength=sim.energy_bins)
    comp = np.bincount(batch.component, minlength=len(COMPONENT_NAMES))
    return tcounts, ecounts, comp


def config_digest(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()


def simulate_spectrum(model: AnnihilationModel, det: DetectorSpec, source: SourceSpec,
                      sim: SimulationConfig, *, config_echo: dict | None = None) -> TimeEnergyHistogram:
    """Generate, bin and merge ``sim.n_events`` true events plus accidentals.

    The accidental count is ``round(random_scale * R/C * n_events)``. Delays
    outside ``[t_min, t_max]`` are folded into the first or last time bin, so
    the total of the time histogram equals the number of generated events.
    """
    notes = []
    if sim.window < 5.0 / model.rate_para:
        msg = f"delay window {sim.window} ns is shorter than 5 p-Ps lifetimes"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    ratio = random_to_true_ratio(source, det)
    n_random = int(round(sim.random_scale * ratio * sim.n_events))
    jobs = [(model, det, source, sim, TRUE_STREAM, i, size)
            for i, size in enumerate(chunk_plan(sim.n_events, sim.chunk_size))]
    jobs += [(model, det, source, sim, RANDOM_STREAM, i, size)
             for i, size in enumerate(chunk_plan(n_random, sim.chunk_size))]
    if sim.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=sim.workers) as pool:
            parts = list(pool.map(_histogram_chunk, jobs))
    else:
        parts = [_histogram_chunk(job) for job in jobs]

    time_counts = np.zeros(sim.bins, dtype=np.int64)
    energy_counts = {label: np.zeros(sim.energy_bins, dtype=np.int64) for label in sim.delay_windows}
    components = np.zeros(len(COMPONENT_NAMES), dtype=np.int64)
    for tc, ec, comp in parts:
        time_counts += tc
        components += comp
        for label in energy_counts:
            energy_counts[label] += ec[label]
    log.debug("simulated %d true + %d random events in %d chunks", sim.n_events, n_random, len(jobs))

    echo = config_echo if config_echo is not None else {
        "model": asdict(model), "detector": asdict(det), "source": asdict(source), "simulation": asdict(sim)}
    metadata = {
        "seed": int(sim.seed),
        "n_true": int(sim.n_events),
        "n_random": n_random,
        "random_to_true": ratio,
        "random_level_per_ns": n_random / sim.window,
        "component_counts": {name: int(c) for name, c in zip(COMPONENT_NAMES, components)},
        "rng": {"algorithm": RNG_ALGORITHM, "numpy": np.__version__, "seeding": SEEDING,
                "chunk_size": int(sim.chunk_size)},
        "edge_bins": "open-ended: under/overflow folded into first/last bin",
        "units": {"time": "ns", "energy": "keV", "counts": "events per bin"},
        "config": echo,
        "config_hash": config_digest(echo),
        "notes": notes,
    }
    return TimeEnergyHistogram(
        time_edges=np.linspace(sim.t_min, sim.t_max, sim.bins + 1),
        time_counts=time_counts,
        energy_edges=np.linspace(0.0, sim.energy_max, sim.energy_bins + 1),
        energy_counts=energy_counts,
        delay_windows=dict(sim.delay_windows),
        metadata=metadata,
    )
