"""
Exhaustive two-parameter grid search over the fit objective.

Used to check the optimizer on one-component problems; it shares only the
objective with :func:`fit_lifetime`, not the search.
"""
from __future__ import annotations

import math

import numpy as np

from ..histogram import TimeEnergyHistogram
from .fitting import FitModelSpec, FitResult, LifetimeModel, initial_guess, objective, select_window


def grid_search_2d(fun, xs, ys, reverse: bool = False):
    """Return ``(i, j, value)`` of the smallest ``fun(xs[i], ys[j])``.

    Ties go to the first point met in traversal order; ``reverse`` traverses
    from the far corner.
    """
    best = (None, None, math.inf)
    ii = range(len(xs) - 1, -1, -1) if reverse else range(len(xs))
    for i in ii:
        jj = range(len(ys) - 1, -1, -1) if reverse else range(len(ys))
        for j in jj:
            v = fun(xs[i], ys[j])
            if v < best[2]:
                best = (i, j, v)
    if best[0] is None:
        raise ValueError("objective is not finite anywhere on the grid")
    return best


def grid_oracle_fit(hist: TimeEnergyHistogram, spec: FitModelSpec, *, amplitude: float | None = None,
                    span: float = 3.0, points: int = 81, refine_cells: int = 2,
                    reverse: bool = False, center=None) -> FitResult:
    """Two-pass grid minimum for one component.

    Free pair is (log rate, log amplitude) when the background is fixed in
    ``spec``, or (log rate, log background) when ``amplitude`` is given. The
    coarse pass spans a factor ``span`` either side of ``center`` (default:
    the automatic starting point); the fine pass covers ``refine_cells``
    coarse cells around the coarse minimum with the same number of points.
    ``FitResult.grid_cell`` holds the fine cell sizes in log units.
    """
    if spec.n_components != 1 or spec.response_free or spec.rate_is_fixed(0):
        raise ValueError("grid oracle needs exactly one component with a free rate")
    if spec.background_free == (amplitude is None):
        raise ValueError("exactly two free parameters: fix either background (in spec) or amplitude")
    fit_edges, widths, counts, _ = select_window(hist, spec)
    fixed_bkg_spec = FitModelSpec(**{**spec.__dict__, "background_free": False,
                                     "background_level": spec.background_level or 0.0})
    model = LifetimeModel(fit_edges, widths, fixed_bkg_spec)
    amps0, rates0, bkg0, sigma = initial_guess(counts, fit_edges, widths, spec)
    if center is not None:
        rates0, second0 = [center[0]], center[1]
    else:
        second0 = amps0[0] if amplitude is None else max(bkg0, 1e-6)

    def value(log_rate, log_second):
        if amplitude is None:
            theta = np.array([log_second, log_rate])
            return objective(counts, model.expected(theta), spec.variance_model)
        theta = np.array([math.log(amplitude), log_rate])
        mu = model.expected(theta) - (spec.background_level or 0.0) * widths + math.exp(log_second) * widths
        return objective(counts, mu, spec.variance_model)

    half = math.log(span)
    xs = math.log(rates0[0]) + np.linspace(-half, half, points)
    ys = math.log(second0) + np.linspace(-half, half, points)
    i, j, _ = grid_search_2d(value, xs, ys, reverse)
    dx, dy = xs[1] - xs[0], ys[1] - ys[0]
    xs = xs[i] + np.linspace(-refine_cells * dx, refine_cells * dx, points)
    ys = ys[j] + np.linspace(-refine_cells * dy, refine_cells * dy, points)
    i, j, best = grid_search_2d(value, xs, ys, reverse)
    rate = math.exp(xs[i])
    second = math.exp(ys[j])
    amp = second if amplitude is None else amplitude
    bkg = (spec.background_level or 0.0) if amplitude is None else second
    cells = [xs[1] - xs[0], ys[1] - ys[0]]
    return FitResult(
        rates=[rate], rate_errors=[None], intensities=[1.0], intensity_errors=[None],
        amplitudes=[amp], amplitude_errors=[None], background=bkg, background_error=None,
        response_fwhm=spec.response_fwhm, chi2=best, pearson_chi2=math.nan, dof=int(counts.size - 2),
        converged=True, iterations=2 * points * points, covariance=None, grid_cell=tuple(cells),
        param_names=["log_rate_0", "log_amplitude_0" if amplitude is None else "log_background"],
        gradient_norm=math.nan, last_step=min(cells), identifiable=[True], variance_model=spec.variance_model,
        message="grid search", fit_window=spec.fit_window or (float(hist.time_edges[0]), float(hist.time_edges[-1])),
    )
