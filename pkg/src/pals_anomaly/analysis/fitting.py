"""
Multi-exponential lifetime fit with a flat background.

Expected counts in bin ``i`` are

    mu_i = sum_j A_j * (S_j(a_i) - S_j(b_i)) + b * w_i

with ``S_j`` the survival function of component ``j`` smeared by the
Gaussian response (see :mod:`.emg`), ``A_j`` its number of counts, ``b`` the
background level in counts/ns and ``w_i`` the nominal bin width. Open-ended
edge bins get ``a = -inf`` or ``b = +inf``.

The optimizer works on log-amplitudes, log-rates, log-background and
log-width, so positivity holds by construction. It is a damped Gauss-Newton
(Levenberg-Marquardt) iteration using the Fisher information as curvature.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..detection import FWHM_PER_SIGMA
from ..histogram import TimeEnergyHistogram
from .emg import bin_fractions, delayed_survival_derivatives

POISSON = "poisson"
GAUSSIAN = "gaussian"

AMPLITUDE_FLOOR = 1e-6
BACKGROUND_FLOOR = 1e-9
MAX_LOG_STEP = 5.0
MAX_RATE_PER_SIGMA = 100.0
MIN_AMPLITUDE_SIGNIFICANCE = 2.0


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class FitModelSpec:
    """What to fit.

    Components are ordered by descending lifetime; ``fixed_rates`` (ns^-1,
    ``None`` for free) follows that order. ``background_level`` is counts/ns
    and acts as the fixed value when ``background_free`` is false or as the
    starting value otherwise. ``fit_window`` is a delay interval in ns,
    ``None`` meaning the whole histogram. ``time_zero`` (ns) is the prompt
    position; with ``time_zero_free`` it is only the starting value.
    ``start_delay`` (ns) is the mean exponential lag of the start signal.
    """

    n_components: int = 1
    fixed_rates: tuple | None = None
    background_free: bool = True
    background_level: float | None = None
    response_fwhm: float = 0.3
    response_free: bool = False
    time_zero: float = 0.0
    time_zero_free: bool = False
    start_delay: float = 0.0
    fit_window: tuple | None = None
    variance_model: str = POISSON
    max_iterations: int = 200
    gtol: float = 1e-8
    xtol: float = 1e-10
    initial_rates: tuple | None = None

    def __post_init__(self):
        if int(self.n_components) != self.n_components or self.n_components < 1:
            raise ValueError("n_components must be an integer >= 1")
        if self.fixed_rates is not None:
            rates = tuple(None if r is None else float(r) for r in self.fixed_rates)
            if len(rates) != self.n_components:
                raise ValueError("fixed_rates needs one entry per component")
            if any(r is not None and not r > 0 for r in rates):
                raise ValueError("fixed rates must be > 0")
            object.__setattr__(self, "fixed_rates", rates)
        if self.initial_rates is not None:
            if len(self.initial_rates) != self.n_components:
                raise ValueError("initial_rates needs one entry per component")
            object.__setattr__(self, "initial_rates", tuple(float(r) for r in self.initial_rates))
        if not self.response_fwhm > 0:
            raise ValueError("response_fwhm must be > 0")
        if self.variance_model not in (POISSON, GAUSSIAN):
            raise ValueError(f"variance_model must be {POISSON!r} or {GAUSSIAN!r}")
        if self.start_delay < 0:
            raise ValueError("start_delay must be >= 0")
        if self.background_level is not None and self.background_level < 0:
            raise ValueError("background_level must be >= 0")
        if self.fit_window is not None:
            lo, hi = map(float, self.fit_window)
            if not hi > lo:
                raise ValueError("fit_window must be a nonempty interval")
            object.__setattr__(self, "fit_window", (lo, hi))

    def rate_is_fixed(self, j: int) -> bool:
        return self.fixed_rates is not None and self.fixed_rates[j] is not None


class LifetimeModel:
    """Expected counts and their derivatives over a window of bins."""

    def __init__(self, edges, widths, spec: FitModelSpec):
        self.spec = spec
        self.edges = np.asarray(edges, dtype=float)
        self.widths = np.asarray(widths, dtype=float)
        n = spec.n_components
        names = [f"log_amplitude_{j}" for j in range(n)]
        names += [f"log_rate_{j}" for j in range(n) if not spec.rate_is_fixed(j)]
        if spec.background_free:
            names.append("log_background")
        if spec.response_free:
            names.append("log_sigma")
        if spec.time_zero_free:
            names.append("time_zero")
        self.names = names
        self.index = {name: i for i, name in enumerate(names)}

    @property
    def n_params(self) -> int:
        return len(self.names)

    def unpack(self, theta):
        spec = self.spec
        n = spec.n_components
        amps = np.exp(theta[:n])
        rates = np.empty(n)
        for j in range(n):
            key = f"log_rate_{j}"
            rates[j] = math.exp(theta[self.index[key]]) if key in self.index else spec.fixed_rates[j]
        bkg = math.exp(theta[self.index["log_background"]]) if spec.background_free \
            else (spec.background_level or 0.0)
        sigma = math.exp(theta[self.index["log_sigma"]]) if spec.response_free \
            else spec.response_fwhm / FWHM_PER_SIGMA
        return amps, rates, bkg, sigma

    def time_zero(self, theta) -> float:
        return float(theta[self.index["time_zero"]]) if self.spec.time_zero_free else self.spec.time_zero

    def pack(self, amps, rates, bkg, sigma) -> np.ndarray:
        theta = np.empty(self.n_params)
        theta[:self.spec.n_components] = np.log(amps)
        for j, r in enumerate(rates):
            key = f"log_rate_{j}"
            if key in self.index:
                theta[self.index[key]] = math.log(r)
        if self.spec.background_free:
            theta[self.index["log_background"]] = math.log(max(bkg, BACKGROUND_FLOOR))
        if self.spec.response_free:
            theta[self.index["log_sigma"]] = math.log(sigma)
        if self.spec.time_zero_free:
            theta[self.index["time_zero"]] = self.spec.time_zero
        return theta

    def expected(self, theta) -> np.ndarray:
        amps, rates, bkg, sigma = self.unpack(theta)
        mu = bkg * self.widths
        for a, lam in zip(amps, rates):
            mu = mu + a * bin_fractions(self.edges, lam, sigma, self.time_zero(theta), self.spec.start_delay)
        return mu

    def expected_and_jacobian(self, theta):
        amps, rates, bkg, sigma = self.unpack(theta)
        u = self.edges - self.time_zero(theta)
        mu = bkg * self.widths
        jac = np.zeros((self.widths.size, self.n_params))
        for j, (a, lam) in enumerate(zip(amps, rates)):
            s, ds_lam, ds_sig, ds_u = delayed_survival_derivatives(u, lam, sigma, self.spec.start_delay)
            frac = s[:-1] - s[1:]
            mu = mu + a * frac
            jac[:, j] = a * frac
            key = f"log_rate_{j}"
            if key in self.index:
                jac[:, self.index[key]] = a * lam * (ds_lam[:-1] - ds_lam[1:])
            if self.spec.response_free:
                jac[:, self.index["log_sigma"]] += a * sigma * (ds_sig[:-1] - ds_sig[1:])
            if self.spec.time_zero_free:
                jac[:, self.index["time_zero"]] -= a * (ds_u[:-1] - ds_u[1:])
        if self.spec.background_free:
            jac[:, self.index["log_background"]] = bkg * self.widths
        return mu, jac


def objective_terms(counts, mu, variance_model):
    """Per-bin objective; Poisson deviance or Gaussian chi-square."""
    if variance_model == POISSON:
        with np.errstate(divide="ignore", invalid="ignore"):
            log_term = np.where(counts > 0, counts * np.log(counts / mu), 0.0)
        return 2.0 * (mu - counts + log_term)
    return (counts - mu) ** 2 / np.maximum(counts, 1.0)


def _impossible(counts, mu) -> bool:
    """Poisson model that cannot produce the data: counts where ``mu`` is 0."""
    return bool(np.any(mu < 0) or np.any((mu <= 0) & (counts > 0)))


def objective(counts, mu, variance_model=POISSON) -> float:
    if variance_model == POISSON and _impossible(counts, mu):
        return math.inf
    return float(np.sum(objective_terms(counts, mu, variance_model)))


def objective_gradient(counts, mu, jac, variance_model=POISSON):
    """Gradient of :func:`objective` and its Gauss-Newton curvature."""
    if variance_model == POISSON:
        pos = mu > 0
        safe = np.where(pos, mu, 1.0)
        resid = np.where(pos, 1.0 - counts / safe, 1.0)
        weight = np.where(pos, 1.0 / safe, 0.0)
    else:
        weight = 1.0 / np.maximum(counts, 1.0)
        resid = -(counts - mu) * weight
    grad = 2.0 * jac.T @ resid
    curv = 2.0 * (jac * weight[:, None]).T @ jac
    return grad, curv


@dataclass
class FitResult:
    """Fitted parameters ordered by descending lifetime.

    Rates are in ns^-1, background in counts/ns, response FWHM in ns.
    Uncertainties are 1 sigma; ``None`` where a parameter was fixed, pinned
    at its lower bound or the covariance was singular.
    """

    rates: list
    rate_errors: list
    intensities: list
    intensity_errors: list
    amplitudes: list
    amplitude_errors: list
    background: float
    background_error: float | None
    response_fwhm: float
    chi2: float
    pearson_chi2: float
    dof: int
    converged: bool
    iterations: int
    covariance: list | None
    param_names: list
    gradient_norm: float
    last_step: float
    identifiable: list
    variance_model: str
    message: str = ""
    fit_window: tuple = (0.0, 0.0)
    singular_covariance: bool = False
    grid_cell: tuple | None = None
    curve: dict = field(default_factory=dict, repr=False)

    @property
    def lifetimes(self) -> list:
        return [1.0 / r for r in self.rates]

    def to_dict(self, with_curve: bool = False) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "curve"}
        out["lifetimes"] = self.lifetimes
        out["fit_window"] = list(self.fit_window)
        out["units"] = {"rates": "ns^-1", "lifetimes": "ns", "background": "counts/ns",
                        "response_fwhm": "ns", "amplitudes": "counts"}
        if with_curve:
            out["curve"] = self.curve
        return _jsonable(out)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def select_window(hist: TimeEnergyHistogram, spec: FitModelSpec):
    """Bins whose centres lie in the fit window, edges opened at histogram ends."""
    edges = hist.time_edges
    centers = hist.time_centers
    lo, hi = spec.fit_window if spec.fit_window is not None else (edges[0], edges[-1])
    if lo < edges[0] - 1e-9 or hi > edges[-1] + 1e-9:
        raise ValueError(f"fit window [{lo}, {hi}] outside histogram range [{edges[0]}, {edges[-1]}]")
    sel = np.flatnonzero((centers >= lo) & (centers <= hi))
    if sel.size < 2:
        raise ValueError("fit window contains fewer than two bins")
    i0, i1 = sel[0], sel[-1] + 1
    fit_edges = edges[i0:i1 + 1].astype(float)
    if i0 == 0:
        fit_edges[0] = -np.inf
    if i1 == len(centers):
        fit_edges[-1] = np.inf
    counts = np.asarray(hist.time_counts[i0:i1], dtype=float)
    widths = np.diff(edges[i0:i1 + 1])
    if counts.sum() <= 0:
        raise ValueError("histogram is empty over the fit window")
    return fit_edges, widths, counts, (i0, i1)


def _weighted_log_slope(t, y, var):
    """Weighted least squares of ``log y`` against ``t``; returns slope, intercept."""
    w = y ** 2 / np.maximum(var, 1.0)
    sw = w.sum()
    tm = (w * t).sum() / sw
    ym = (w * np.log(y)).sum() / sw
    stt = (w * (t - tm) ** 2).sum()
    if stt <= 0:
        return math.nan, math.nan
    slope = (w * (t - tm) * (np.log(y) - ym)).sum() / stt
    return slope, ym - slope * tm


def initial_guess(counts, fit_edges, widths, spec: FitModelSpec):
    """Starting amplitudes, rates and background.

    Background comes from bins well before the prompt peak; rates are peeled
    from the longest lifetime down, each from a log-slope fit over its own
    stretch of the tail (log-spaced stretches), and the shortest from the
    mean delay of what remains around the prompt peak.
    """
    sigma = spec.response_fwhm / FWHM_PER_SIGMA
    t0 = spec.time_zero
    finite_lo = np.where(np.isfinite(fit_edges[:-1]), fit_edges[:-1], fit_edges[1:] - widths)
    finite_hi = np.where(np.isfinite(fit_edges[1:]), fit_edges[1:], fit_edges[:-1] + widths)
    centers = 0.5 * (finite_lo + finite_hi)
    interior = np.isfinite(fit_edges[:-1]) & np.isfinite(fit_edges[1:])
    median_w = float(np.median(widths))

    if not spec.background_free:
        bkg = spec.background_level or 0.0
    elif spec.background_level is not None:
        bkg = spec.background_level
    else:
        pre = interior & (finite_hi < t0 - 5 * sigma)
        if pre.sum() >= 3:
            bkg = counts[pre].sum() / widths[pre].sum()
        else:
            tail = interior & (centers > centers[-1] - 0.1 * (centers[-1] - centers[0]))
            bkg = 0.5 * np.min(counts[tail] / widths[tail]) if tail.any() else 0.0
        bkg = max(bkg, 1e-3 / median_w)
    net = counts - bkg * widths

    # Last delay with a significant integrated excess behind it.
    rev_net = np.cumsum(np.where(interior, net, 0.0)[::-1])[::-1]
    rev_bkg = np.cumsum(np.where(interior, bkg * widths, 0.0)[::-1])[::-1]
    signif = rev_net > 5.0 * np.sqrt(rev_bkg + np.abs(rev_net)) + 10.0
    t_end = centers[np.flatnonzero(signif)[-1]] if signif.any() else centers[-1]
    t_p = t0 + 3.0 * sigma + 2.0 * median_w

    n = spec.n_components
    amps = np.ones(n)
    rates = np.ones(n)
    resid = net.copy()
    if t_end > t_p * 1.5 and n > 1:
        breaks = t_end * (t_p / t_end) ** (np.arange(n) / (n - 1))
    elif t_end > t_p * 1.5:
        breaks = np.array([t_end, t_p])
    else:
        breaks = np.array([t_end] * n)
    prompt_lo = t0 - 5.0 * sigma - median_w
    for j in range(n):
        last = j == n - 1
        lo, hi = (prompt_lo, breaks[j] if j < len(breaks) else t_end) if (last and n > 1) \
            else (breaks[j + 1] if j + 1 < len(breaks) else t_p, breaks[j])
        sel = interior & (centers >= lo) & (centers <= hi)
        if spec.initial_rates is not None:
            lam = spec.initial_rates[j]
        elif spec.rate_is_fixed(j):
            lam = spec.fixed_rates[j]
        else:
            lam = math.nan
            pos = sel & (resid > 0)
            if not (last and n > 1) and pos.sum() >= 3:
                slope, _ = _weighted_log_slope(centers[pos] - t0, resid[pos], counts[pos])
                lam = -slope
            if not (lam > 0 and math.isfinite(lam)):
                region = interior & (centers >= prompt_lo) & (centers <= max(hi, t_p))
                weight = np.clip(resid[region], 0.0, None)
                tau = (weight * (centers[region] - t0)).sum() / weight.sum() if weight.sum() > 0 else math.nan
                lam = 1.0 / tau if tau > 0.01 * median_w else 1.0 / max(0.1 * median_w, 1e-3)
        shape = bin_fractions(fit_edges, lam, sigma, t0)
        region = sel if sel.sum() >= 1 else interior
        denom = float(np.sum(shape[region] ** 2))
        amp = float(np.sum(resid[region] * shape[region]) / denom) if denom > 0 else 1.0
        amps[j] = max(amp, 1.0)
        rates[j] = lam
        resid = resid - amps[j] * shape
    order = np.argsort(rates)
    return amps[order], rates[order], bkg, sigma


def _gradient_norm(grad, curv, active):
    g = grad[active]
    h = curv[np.ix_(active, active)]
    try:
        step = np.linalg.solve(h, g)
        return float(math.sqrt(max(g @ step, 0.0)))
    except np.linalg.LinAlgError:
        return float(np.max(np.abs(g) / np.sqrt(np.maximum(np.diag(h), 1e-300))))


def levenberg_marquardt(fun, theta0, active, *, max_iterations=200, gtol=1e-8, xtol=1e-10,
                        bounds=None):
    """Minimize ``fun(theta) -> (value, grad, curvature)`` over ``active`` parameters.

    The convergence measure is the Newton decrement ``sqrt(g^T H^-1 g)``,
    which is invariant to reparametrization. Parameters leaving their
    ``bounds`` interval are pinned at the violated bound and dropped from
    ``active``.
    """
    theta = np.array(theta0, dtype=float)
    active = np.array(active, dtype=bool)
    bounds = {} if bounds is None else bounds
    f, grad, curv = fun(theta)
    if not math.isfinite(f):
        raise FitError("objective is not finite at the starting point")
    damping = 1e-3
    step_norm = math.inf
    pinned = []
    it = 0
    message = "maximum iterations reached"
    converged = False
    while it < max_iterations:
        it += 1
        idx = np.flatnonzero(active)
        if idx.size == 0:
            converged, message = True, "no free parameters"
            break
        gnorm = _gradient_norm(grad, curv, active)
        if gnorm < gtol:
            converged, message = True, "gradient tolerance reached"
            break
        h = curv[np.ix_(idx, idx)]
        g = grad[idx]
        diag = np.maximum(np.diag(h), 1e-12 * max(np.max(np.diag(h)), 1e-300))
        accepted = False
        while damping < 1e16:
            try:
                delta = np.linalg.solve(h + damping * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                damping *= 10
                continue
            delta = np.clip(delta, -MAX_LOG_STEP, MAX_LOG_STEP)
            trial = theta.copy()
            trial[idx] += delta
            f_new, grad_new, curv_new = fun(trial)
            if math.isfinite(f_new) and f_new <= f:
                accepted = True
                break
            damping *= 4.0
        if not accepted:
            converged = gnorm < 1e-4
            message = "step rejected at maximum damping" + (" (at numerical minimum)" if converged else "")
            break
        step_norm = float(np.max(np.abs(delta)))
        theta, f, grad, curv = trial, f_new, grad_new, curv_new
        damping = max(damping / 3.0, 1e-12)
        newly_pinned = [i for i, (lo, hi) in bounds.items() if active[i] and not lo <= theta[i] <= hi]
        if newly_pinned:
            for i in newly_pinned:
                theta[i] = min(max(theta[i], bounds[i][0]), bounds[i][1])
                active[i] = False
            pinned += newly_pinned
            f, grad, curv = fun(theta)
            continue
        if step_norm < xtol:
            gnorm = _gradient_norm(grad, curv, active)
            converged = gnorm < 1e-4
            message = "step tolerance reached"
            break
    gnorm = _gradient_norm(grad, curv, active) if active.any() else 0.0
    return theta, f, grad, curv, active, dict(iterations=it, converged=converged, message=message,
                                              gradient_norm=gnorm, last_step=step_norm, pinned=pinned)


def _rename(name: str, order) -> str:
    head, _, tail = name.rpartition("_")
    if head in ("log_amplitude", "log_rate"):
        return f"{head}_{int(np.flatnonzero(order == int(tail))[0])}"
    return name


def fit_lifetime(hist: TimeEnergyHistogram, spec: FitModelSpec, initial=None) -> FitResult:
    """Fit ``hist`` with the multi-exponential model described by ``spec``.

    ``initial`` may be a tuple ``(amplitudes, rates, background, sigma)``;
    otherwise :func:`initial_guess` is used.
    """
    fit_edges, widths, counts, (i0, i1) = select_window(hist, spec)
    model = LifetimeModel(fit_edges, widths, spec)
    if initial is None:
        initial = initial_guess(counts, fit_edges, widths, spec)
    amps, rates, bkg, sigma = initial
    theta0 = model.pack(np.maximum(amps, AMPLITUDE_FLOOR * 10), rates, bkg, sigma)
    n = spec.n_components
    total = max(counts.sum(), 1.0)

    def fun(theta):
        mu, jac = model.expected_and_jacobian(theta)
        if spec.variance_model == POISSON and _impossible(counts, mu):
            return math.inf, None, None
        grad, curv = objective_gradient(counts, mu, jac, spec.variance_model)
        return objective(counts, mu, spec.variance_model), grad, curv

    bounds = {j: (math.log(AMPLITUDE_FLOOR), math.inf) for j in range(n)}
    if spec.background_free:
        bounds[model.index["log_background"]] = (math.log(BACKGROUND_FLOOR * total / widths.sum()), math.inf)
    # Lifetimes far below the response width are indistinguishable from zero.
    for j in range(n):
        key = f"log_rate_{j}"
        if key in model.index:
            bounds[model.index[key]] = (-math.inf, math.log(MAX_RATE_PER_SIGMA / sigma))
    active = np.ones(model.n_params, dtype=bool)
    theta, f, grad, curv, active, info = levenberg_marquardt(
        fun, theta0, active, max_iterations=spec.max_iterations, gtol=spec.gtol, xtol=spec.xtol,
        bounds=bounds)

    mu = model.expected(theta)
    amps, rates, bkg, sigma = model.unpack(theta)
    curv = fun(theta)[2]
    span = float(np.sum(widths))

    def covariance(active):
        full = np.full((model.n_params, model.n_params), np.nan)
        idx = np.flatnonzero(active)
        if idx.size == 0:
            return full, False
        h = curv[np.ix_(idx, idx)]
        eig = np.linalg.eigvalsh(h)
        if eig.min() <= eig.max() * 1e-14:
            return full, True
        full[np.ix_(idx, idx)] = 2.0 * np.linalg.inv(h)
        return full, False

    # Components pinned at zero amplitude, indistinguishable from a flat
    # background, or not significant carry no information on their rate.
    identifiable = [bool(active[j]) for j in range(n)]
    for _ in range(n + 1):
        for j in range(n):
            key = f"log_rate_{j}"
            if not identifiable[j]:
                active[j] = False
                if key in model.index:
                    active[model.index[key]] = False
        cov_full, singular = covariance(active)
        weak = []
        for j in range(n):
            if not identifiable[j]:
                continue
            flat = spec.background_free and rates[j] * span < 1e-2
            v = cov_full[j, j]
            insignificant = math.isfinite(v) and v > 0 and 1.0 / math.sqrt(v) < MIN_AMPLITUDE_SIGNIFICANCE
            if flat or insignificant:
                weak.append(j)
        if not weak:
            break
        for j in weak:
            identifiable[j] = False
    var = np.diag(cov_full)
    idx = np.flatnonzero(active)

    def err(i, scale):
        v = var[i]
        return float(scale * math.sqrt(v)) if math.isfinite(v) and v > 0 else None

    amp_err = [err(j, amps[j]) for j in range(n)]
    rate_err = [err(model.index[f"log_rate_{j}"], rates[j]) if f"log_rate_{j}" in model.index else None
                for j in range(n)]
    bkg_err = err(model.index["log_background"], bkg) if spec.background_free else None
    live = np.where(identifiable, amps, 0.0)
    asum = live.sum()
    intens = live / asum if asum > 0 else np.zeros(n)
    inten_err = [None] * n
    cov_a = cov_full[:n, :n]
    if np.all(np.isfinite(cov_a[np.ix_(identifiable, identifiable)])) and any(identifiable):
        dj = np.diag(intens) - np.outer(intens, intens)
        mask = np.array(identifiable)
        ca = np.where(np.outer(mask, mask), cov_a, 0.0)
        ca = np.nan_to_num(ca)
        vi = np.einsum("ij,jk,ik->i", dj, ca, dj)
        inten_err = [float(math.sqrt(v)) if v > 0 and (n > 1) else None for v in vi]

    pearson = float(np.sum((counts - mu) ** 2 / np.maximum(mu, 1e-300)))
    dof = int(counts.size - idx.size)
    order = np.argsort(rates)  # descending lifetime
    perm = lambda seq: [seq[k] for k in order]  # noqa: E731
    message = info["message"]
    if not all(identifiable):
        message += "; non-identifiable components: " + \
            ", ".join(str(int(np.flatnonzero(order == j)[0])) for j in range(n) if not identifiable[j])
    rate_pinned = [model.names[i] for i in info["pinned"] if model.names[i].startswith("log_rate")]
    if rate_pinned:
        message += "; at rate bound: " + ", ".join(_rename(name, order) for name in rate_pinned)
    if singular:
        message += "; singular covariance, uncertainties omitted"

    lo = fit_edges[0] if np.isfinite(fit_edges[0]) else hist.time_edges[0]
    hi = fit_edges[-1] if np.isfinite(fit_edges[-1]) else hist.time_edges[-1]
    curve = {"t_bin_center_ns": hist.time_centers[i0:i1].tolist(), "counts": counts.tolist(),
             "model": mu.tolist(),
             "residual": ((counts - mu) / np.sqrt(np.maximum(mu, 1e-300))).tolist()}
    return FitResult(
        rates=perm(rates.tolist()),
        rate_errors=perm(rate_err),
        intensities=perm(intens.tolist()),
        intensity_errors=perm(inten_err),
        amplitudes=perm(amps.tolist()),
        amplitude_errors=perm(amp_err),
        background=float(bkg),
        background_error=bkg_err,
        response_fwhm=float(sigma * FWHM_PER_SIGMA),
        chi2=float(f),
        pearson_chi2=pearson,
        dof=dof,
        converged=bool(info["converged"]),
        iterations=int(info["iterations"]),
        covariance=None if singular else np.where(np.isfinite(cov_full), cov_full, 0.0).tolist(),
        param_names=[_rename(name, order) for name in model.names],
        gradient_norm=float(info["gradient_norm"]),
        last_step=float(info["last_step"]),
        identifiable=perm(identifiable),
        variance_model=spec.variance_model,
        message=message,
        fit_window=(float(lo), float(hi)),
        singular_covariance=singular,
        curve=curve,
    )
