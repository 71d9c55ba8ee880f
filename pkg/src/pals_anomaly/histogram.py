"""
Binned lifetime spectrum with per-delay-window energy histograms, plus the
CSV/JSON file formats used by the command line.
"""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


@dataclass
class TimeEnergyHistogram:
    """Delay histogram (ns) and energy histograms (keV) keyed by delay window.

    The first and last time bins are open-ended: they also hold events that
    fell below ``time_edges[0]`` or above ``time_edges[-1]``.
    """

    time_edges: np.ndarray
    time_counts: np.ndarray
    energy_edges: np.ndarray | None = None
    energy_counts: dict = field(default_factory=dict)
    delay_windows: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.time_edges = np.asarray(self.time_edges, dtype=float)
        self.time_counts = np.asarray(self.time_counts)
        if self.time_edges.ndim != 1 or self.time_edges.size != self.time_counts.size + 1:
            raise ValueError("time_edges must have one more entry than time_counts")
        if np.any(np.diff(self.time_edges) <= 0):
            raise ValueError("time_edges must be increasing")
        if np.any(self.time_counts < 0):
            raise ValueError("counts must be nonnegative")

    @property
    def time_centers(self) -> np.ndarray:
        return 0.5 * (self.time_edges[1:] + self.time_edges[:-1])

    @property
    def bin_width(self) -> np.ndarray:
        return np.diff(self.time_edges)

    @property
    def total(self) -> int:
        return int(self.time_counts.sum())

    @property
    def energy_centers(self) -> np.ndarray:
        return 0.5 * (self.energy_edges[1:] + self.energy_edges[:-1])

    def scaled(self, factor: float) -> "TimeEnergyHistogram":
        """Copy with counts multiplied by ``factor`` (float counts)."""
        return TimeEnergyHistogram(self.time_edges.copy(), self.time_counts * float(factor),
                                   self.energy_edges, {k: v * float(factor) for k, v in self.energy_counts.items()},
                                   dict(self.delay_windows), dict(self.metadata))

    def time_csv_text(self) -> str:
        head = {
            "format": "pals-time-spectrum",
            "format_version": FORMAT_VERSION,
            "t_min_ns": float(self.time_edges[0]),
            "t_max_ns": float(self.time_edges[-1]),
            "bins": int(self.time_counts.size),
            **{k: self.metadata[k] for k in ("seed", "n_true", "n_random", "config_hash", "rng")
               if k in self.metadata},
        }
        lines = [f"# {k}: {json.dumps(v, sort_keys=True)}" for k, v in head.items()]
        lines.append("t_bin_center_ns,counts")
        lines += [f"{c!r},{_fmt_count(n)}" for c, n in zip(self.time_centers.tolist(), self.time_counts.tolist())]
        return "\n".join(lines) + "\n"

    def energy_csv_text(self) -> str:
        labels = list(self.energy_counts)
        lines = [f"# delay_windows_ns: {json.dumps(self.delay_windows, sort_keys=True)}",
                 f"# energy_max_kev: {json.dumps(float(self.energy_edges[-1]))}",
                 "e_bin_center_kev," + ",".join(f"counts_{label}" for label in labels)]
        cols = [self.energy_counts[label].tolist() for label in labels]
        for i, c in enumerate(self.energy_centers.tolist()):
            lines.append(f"{c!r}," + ",".join(_fmt_count(col[i]) for col in cols))
        return "\n".join(lines) + "\n"

    def write(self, path: str | os.PathLike) -> dict:
        """Write ``path`` (time CSV), ``<stem>_energy.csv`` and ``<stem>.json``."""
        path = Path(path)
        out = {"time": path}
        atomic_write(path, self.time_csv_text())
        if self.energy_edges is not None and self.energy_counts:
            out["energy"] = path.with_name(path.stem + "_energy.csv")
            atomic_write(out["energy"], self.energy_csv_text())
        out["metadata"] = path.with_suffix(".json")
        atomic_write(out["metadata"], json.dumps(self.metadata, indent=2, sort_keys=True, default=str) + "\n")
        return out

    @classmethod
    def read(cls, path: str | os.PathLike) -> "TimeEnergyHistogram":
        """Read a time CSV and, when present, its energy CSV and JSON sidecar."""
        path = Path(path)
        header, rows = _read_csv(path)
        counts = rows[:, 1]
        if np.all(counts == np.round(counts)):
            counts = counts.astype(np.int64)
        edges = np.linspace(header["t_min_ns"], header["t_max_ns"], int(header["bins"]) + 1)
        metadata = {}
        sidecar = path.with_suffix(".json")
        if sidecar.exists():
            metadata = json.loads(sidecar.read_text())
        energy_path = path.with_name(path.stem + "_energy.csv")
        energy_edges, energy_counts, windows = None, {}, {}
        if energy_path.exists():
            eheader, erows, names = _read_csv(energy_path, with_names=True)
            energy_edges = np.linspace(0.0, eheader["energy_max_kev"], erows.shape[0] + 1)
            windows = {k: tuple(v) for k, v in eheader["delay_windows_ns"].items()}
            for j, name in enumerate(names[1:], start=1):
                energy_counts[name.removeprefix("counts_")] = erows[:, j].astype(np.int64)
        return cls(edges, counts, energy_edges, energy_counts, windows, metadata)


def _fmt_count(n) -> str:
    return str(int(n)) if float(n).is_integer() else repr(float(n))


def _read_csv(path: Path, with_names: bool = False):
    header, names, data = {}, None, []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            try:
                header[key.strip()] = json.loads(value)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: bad header value for {key.strip()!r}") from exc
        elif names is None:
            names = line.strip().split(",")
        else:
            try:
                data.append([float(x) for x in line.split(",")])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    rows = np.array(data, dtype=float)
    return (header, rows, names) if with_names else (header, rows)


def atomic_write(path: str | os.PathLike, text: str) -> None:
    """Write via a temporary file in the same directory and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
