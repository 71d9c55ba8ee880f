"""
Search for a mono-energetic line in a delay-selected energy spectrum.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..detection import DetectorSpec
from ..histogram import TimeEnergyHistogram


class EmptyWindowError(ValueError):
    pass


@dataclass(frozen=True)
class LineSearchResult:
    """Counts in the line window (``on``) and the two sidebands (``off``).

    ``alpha`` is the on/off width ratio, so ``alpha * off`` is the continuum
    expected under the line. Energies in keV.
    """

    line: float
    line_window: tuple
    sidebands: tuple
    on_counts: int
    off_counts: int
    alpha: float
    background: float
    excess_counts: float
    significance: float

    def to_dict(self) -> dict:
        return asdict(self)


def on_off_significance(n_on: float, n_off: float, alpha: float) -> float:
    """Signed likelihood-ratio significance of an on/off counting measurement."""
    if n_on + n_off <= 0:
        return 0.0
    total = n_on + n_off
    term = 0.0
    if n_on > 0:
        term += n_on * math.log((1 + alpha) / alpha * n_on / total)
    if n_off > 0:
        term += n_off * math.log((1 + alpha) * n_off / total)
    s = math.sqrt(max(2.0 * term, 0.0))
    return s if n_on >= alpha * n_off else -s


def line_window(line: float, det: DetectorSpec, n_sigma: float = 2.0):
    sigma = float(det.energy_sigma(line))
    return line - n_sigma * sigma, line + n_sigma * sigma


def energy_line_search(hist: TimeEnergyHistogram, window: str = "late", line: float = 1022.0,
                       det: DetectorSpec | None = None, n_sigma: float = 2.0) -> LineSearchResult:
    """Excess at ``line`` keV above a continuum interpolated from sidebands.

    The line window spans ``line +- n_sigma`` resolution widths, widened to
    whole bins. Each sideband is half the line window wide and adjacent to
    it, so a linear continuum is interpolated exactly.
    """
    det = det or DetectorSpec()
    if hist.energy_edges is None or window not in hist.energy_counts:
        raise EmptyWindowError(f"no energy histogram for delay window {window!r}")
    counts = np.asarray(hist.energy_counts[window])
    if counts.sum() <= 0:
        raise EmptyWindowError(f"delay window {window!r} holds no events")
    edges = hist.energy_edges
    lo, hi = line_window(line, det, n_sigma)
    i_lo = int(np.searchsorted(edges, lo, side="right") - 1)
    i_hi = int(np.searchsorted(edges, hi, side="left"))
    i_lo = max(i_lo, 0)
    i_hi = min(i_hi, len(edges) - 1)
    n_on_bins = i_hi - i_lo
    side = max(int(math.ceil(n_on_bins / 2)), 1)
    l_lo = max(i_lo - side, 0)
    r_hi = min(i_hi + side, len(edges) - 1)
    if l_lo == i_lo or r_hi == i_hi:
        raise EmptyWindowError("sidebands fall outside the energy histogram")
    n_on = int(counts[i_lo:i_hi].sum())
    n_off = int(counts[l_lo:i_lo].sum() + counts[i_hi:r_hi].sum())
    w_on = edges[i_hi] - edges[i_lo]
    w_off = (edges[i_lo] - edges[l_lo]) + (edges[r_hi] - edges[i_hi])
    alpha = w_on / w_off
    bkg = alpha * n_off
    return LineSearchResult(
        line=float(line),
        line_window=(float(edges[i_lo]), float(edges[i_hi])),
        sidebands=((float(edges[l_lo]), float(edges[i_lo])), (float(edges[i_hi]), float(edges[r_hi]))),
        on_counts=n_on,
        off_counts=n_off,
        alpha=float(alpha),
        background=float(bkg),
        excess_counts=float(n_on - bkg),
        significance=on_off_significance(n_on, n_off, alpha),
    )
