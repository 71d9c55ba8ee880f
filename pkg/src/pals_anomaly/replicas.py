"""
Replica (pull) studies: simulate many spectra at fixed truth, fit each, and
summarize ``(fitted - true) / sigma_fit`` of the o-Ps rate.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .analysis.anomaly import AnomalyError, ortho_component
from .analysis.fitting import FitModelSpec, fit_lifetime
from .detection import DetectorSpec, SourceSpec
from .montecarlo import AnnihilationModel, SimulationConfig, simulate_spectrum


@dataclass(frozen=True)
class ReplicaRecord:
    seed: int
    converged: bool
    rate: float
    rate_error: float
    pull: float


def _one(args) -> ReplicaRecord:
    model, det, source, sim, spec, seed = args
    hist = simulate_spectrum(model, det, source, replace(sim, seed=seed, workers=1), config_echo={})
    truth = model.rate_ortho_observed
    try:
        fit = fit_lifetime(hist, spec)
        j = ortho_component(fit)
        err = fit.rate_errors[j]
        if not fit.converged or err is None:
            raise AnomalyError("no usable o-Ps rate")
        return ReplicaRecord(seed, True, fit.rates[j], err, (fit.rates[j] - truth) / err)
    except (AnomalyError, ValueError, RuntimeError):
        return ReplicaRecord(seed, False, math.nan, math.nan, math.nan)


def run_replicas(model: AnnihilationModel, det: DetectorSpec, source: SourceSpec, sim: SimulationConfig,
                 spec: FitModelSpec, seeds, workers: int = 1) -> list[ReplicaRecord]:
    """One record per seed, in the order of ``seeds`` regardless of ``workers``."""
    jobs = [(model, det, source, sim, spec, int(s)) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_one, jobs))
    return [_one(job) for job in jobs]


def summarize(records) -> dict:
    pulls = np.array([r.pull for r in records if r.converged])
    out = {"replicas": len(records), "converged": int(pulls.size)}
    if pulls.size >= 2:
        out.update(pull_mean=float(pulls.mean()), pull_std=float(pulls.std(ddof=1)),
                   pull_mean_error=float(pulls.std(ddof=1) / math.sqrt(pulls.size)))
    return out
