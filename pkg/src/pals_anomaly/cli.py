"""
Command-line front end: ``pals {estimate,simulate,fit,replicas,report}``.

Exit status: 0 success, 1 invalid input or configuration, 2 runtime or fit
failure.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis.anomaly import AnomalyError, extract_anomaly
from .analysis.fitting import FitError, FitResult, fit_lifetime
from .analysis.lines import EmptyWindowError, energy_line_search
from .config import Config, ConfigError, apply_overrides, build_config, config_to_dict, load_config
from .core import DomainError, ValidationError
from .detection import random_to_true_ratio
from .histogram import TimeEnergyHistogram, atomic_write
from .mcnrs import format_report, full_report
from .montecarlo import simulate_spectrum
from .replicas import run_replicas, summarize

log = logging.getLogger("pals")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class RunFailure(RuntimeError):
    pass


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="YAML configuration file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one configuration value (repeatable); units as in the config file")
    p.add_argument("--out-dir", type=Path, default=None, help="directory for artifacts (default: current)")
    p.add_argument("--seed", type=int, default=None, help="base random seed (integer >= 0)")
    p.add_argument("--profile", choices=["paper", "codata"], default=None, help="physical-constant profile")
    p.add_argument("--format", choices=["text", "json", "csv"], default="text", help="stdout format")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="pals", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("estimate", parents=[common],
                   help="closed-form estimates and the random/true coincidence ratio",
                   description="Print every closed-form estimate (lengths cm, cross-sections cm^2, "
                               "times ps) for both constant profiles, plus R/C.")

    p = sub.add_parser("simulate", parents=[common], help="generate a synthetic lifetime spectrum",
                       description="Simulate delayed coincidences; times in ns, energies in keV.")
    p.add_argument("--events", type=int, help="number of true start-stop events (count)")
    p.add_argument("--workers", type=int, help="worker processes (count); output does not depend on it")
    p.add_argument("--out", type=Path, help="time-spectrum CSV path (default: <out-dir>/spectrum.csv)")

    p = sub.add_parser("fit", parents=[common], help="fit a lifetime spectrum",
                       description="Fit exponentials (rates ns^-1) plus flat background (counts/ns).")
    p.add_argument("--in", dest="input", type=Path, required=True, help="time-spectrum CSV")
    p.add_argument("--model", type=Path, help="YAML with a 'fit' section (overrides --config's)")
    p.add_argument("--components", type=int, help="number of exponential components (count)")
    p.add_argument("--out", type=Path, help="output JSON (default: <out-dir>/fit.json)")

    p = sub.add_parser("replicas", parents=[common], help="pull study over seeds",
                       description="Simulate and fit many spectra; report pulls of the o-Ps rate (ns^-1).")
    p.add_argument("--replicas", type=int, default=200, help="number of replicas (count)")
    p.add_argument("--events", type=int, help="true events per replica (count)")
    p.add_argument("--workers", type=int, default=1, help="worker processes (count)")
    p.add_argument("--out", type=Path, help="output CSV (default: <out-dir>/replicas.csv)")

    p = sub.add_parser("report", parents=[common], help="combine estimate, spectrum and fit",
                       description="Text report plus plot-ready CSVs: data, fitted curve and residuals "
                                   "versus delay (ns), energy spectra (keV).")
    p.add_argument("--in", dest="input", type=Path, required=True, help="time-spectrum CSV")
    p.add_argument("--fit", dest="fit_json", type=Path, help="fit JSON from 'pals fit' (refit if omitted)")
    return parser


def _config(args, extra_overrides=()) -> Config:
    overrides = list(args.overrides) + list(extra_overrides)
    if args.profile:
        overrides.append(f"profile={args.profile}")
    if args.seed is not None:
        overrides.append(f"simulation.seed={args.seed}")
    return load_config(args.config, overrides)


def run_id(command: str, cfg: Config, seeds) -> str:
    payload = {"command": command, "config": config_to_dict(cfg), "seeds": list(seeds),
               "tool_version": __version__}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def write_manifest(out_dir: Path, command: str, cfg: Config, seeds, outputs: dict, argv, started) -> Path:
    """Record what produced ``outputs``; enough to regenerate them."""
    rid = run_id(command, cfg, seeds)
    manifest = {
        "run_id": rid,
        "command": command,
        "argv": list(argv),
        "config_hash": cfg.digest(),
        "config": config_to_dict(cfg),
        "seeds": list(seeds),
        "tool_version": __version__,
        "numpy_version": np.__version__,
        "started": started,
        "finished": _now(),
        "outputs": {k: {"path": str(v), "sha256": hashlib.sha256(Path(v).read_bytes()).hexdigest()}
                    for k, v in outputs.items()},
    }
    path = out_dir / f"manifest_{command}.json"
    atomic_write(path, json.dumps(manifest, indent=2) + "\n")
    return path


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def cmd_estimate(args, argv) -> int:
    cfg = _config(args)
    other = "codata" if cfg.profile == "paper" else "paper"
    kw = dict(n_bar=cfg.mcnrs.n_bar, mass_ratio=cfg.mcnrs.mass_ratio)
    main = full_report(cfg.gas, cfg.constants, resonance=cfg.resonance(), **kw)
    alt_cfg = replace(cfg, profile=other)
    alt = full_report(cfg.gas, alt_cfg.constants, resonance=alt_cfg.resonance(), **kw)
    ratio = random_to_true_ratio(cfg.source, cfg.detector)
    payload = {profile: rep.to_dict() for profile, rep in ((cfg.profile, main), (other, alt))}
    payload["random_to_true"] = {"value": ratio, "unit": "1",
                                 "activity_per_s": cfg.source.activity,
                                 "resolving_time_ns": cfg.detector.resolving_time}
    text = format_report(main, alt) + f"\n\nR/C = {ratio:.4g} (Q = {cfg.source.activity:g} s^-1, " \
                                      f"resolving time {cfg.detector.resolving_time:g} ns)"
    if args.format == "json":
        print(json.dumps(payload, indent=2))
    elif args.format == "csv":
        print("quantity,value,unit")
        for key, value in main.values().items():
            print(f"{key},{value!r},{main.to_dict()['units'][key]}")
    else:
        print(text)
    if args.out_dir is not None:
        started = _now()
        rid = run_id("estimate", cfg, [])
        payload["run_id"] = rid
        out = args.out_dir / "estimate.json"
        atomic_write(out, json.dumps(payload, indent=2) + "\n")
        atomic_write(args.out_dir / "estimate.txt", f"# run_id: {rid}\n" + text + "\n")
        write_manifest(args.out_dir, "estimate", cfg, [], {"json": out, "text": args.out_dir / "estimate.txt"},
                       argv, started)
    return EXIT_OK


def cmd_simulate(args, argv) -> int:
    extra = []
    if args.events is not None:
        extra.append(f"simulation.n_events={args.events}")
    if args.workers is not None:
        extra.append(f"simulation.workers={args.workers}")
    cfg = _config(args, extra)
    started = _now()
    out_dir = args.out_dir or Path(".")
    out = args.out or out_dir / "spectrum.csv"
    echo = config_to_dict(cfg)
    # Worker count never changes the result; keep it out of the reproducibility record.
    echo["simulation"].pop("workers", None)
    hist = simulate_spectrum(cfg.model, cfg.detector, cfg.source, cfg.simulation, config_echo=echo)
    rid = run_id("simulate", replace(cfg, simulation=replace(cfg.simulation, workers=1)), [cfg.simulation.seed])
    hist.metadata["run_id"] = rid
    hist.metadata["defaults_applied"] = [k for k in cfg.defaulted if k != "simulation.workers"]
    paths = hist.write(out)
    write_manifest(out.parent, "simulate", cfg, [cfg.simulation.seed], paths, argv, started)
    summary = {"run_id": rid, "n_true": hist.metadata["n_true"], "n_random": hist.metadata["n_random"],
               "total": hist.total, "outputs": {k: str(v) for k, v in paths.items()}}
    print(json.dumps(summary, indent=2) if args.format == "json" else
          f"wrote {paths['time']} ({hist.total} counts: {summary['n_true']} true + "
          f"{summary['n_random']} random)")
    return EXIT_OK


def _fit_config(args) -> Config:
    cfg = _config(args)
    extra = []
    if args.model is not None:
        try:
            import yaml
            raw = yaml.safe_load(args.model.read_text()) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read model file: {exc.strerror}", source=str(args.model)) from None
        fit_raw = raw.get("fit", raw) if isinstance(raw, dict) else raw
        base = config_to_dict(cfg)
        base["fit"].update(fit_raw or {})
        if "response_fwhm" not in (fit_raw or {}):
            base["fit"]["response_fwhm"] = cfg.fit.response_fwhm
        cfg = build_config(base, source=str(args.model))
    if getattr(args, "components", None):
        extra.append(f"fit.n_components={args.components}")
        cfg = build_config(apply_overrides(config_to_dict(cfg), extra))
    return cfg


def analyse(hist: TimeEnergyHistogram, cfg: Config) -> dict:
    fit = fit_lifetime(hist, cfg.fit)
    out = {"fit": fit.to_dict()}
    try:
        out["anomaly"] = extract_anomaly(fit, cfg.constants).to_dict()
    except AnomalyError as exc:
        out["anomaly"] = {"error": str(exc)}
    if hist.energy_counts:
        try:
            out["line_search"] = energy_line_search(hist, "late", 1022.0, cfg.detector).to_dict()
        except EmptyWindowError as exc:
            out["line_search"] = {"error": str(exc)}
    return out, fit


def cmd_fit(args, argv) -> int:
    cfg = _fit_config(args)
    started = _now()
    hist = TimeEnergyHistogram.read(args.input)
    try:
        payload, fit = analyse(hist, cfg)
    except FitError as exc:
        raise RunFailure(str(exc)) from exc
    rid = run_id("fit", cfg, [])
    payload["run_id"] = rid
    payload["input"] = {"path": str(args.input), "sha256": hashlib.sha256(args.input.read_bytes()).hexdigest()}
    out = args.out or (args.out_dir or Path(".")) / "fit.json"
    atomic_write(out, json.dumps(payload, indent=2) + "\n")
    write_manifest(out.parent, "fit", cfg, [], {"fit": out}, argv, started)
    if args.format == "json":
        print(json.dumps(payload, indent=2))
    else:
        print(format_fit(fit, payload))
    if not fit.converged:
        log.error("fit did not converge: %s", fit.message)
        return EXIT_RUNTIME
    return EXIT_OK


def format_fit(fit: FitResult, payload: dict) -> str:
    lines = [f"converged: {fit.converged} ({fit.message}), iterations {fit.iterations}",
             f"{fit.variance_model} objective {fit.chi2:.2f} for {fit.dof} dof",
             "component  lifetime_ns      rate_ns^-1        intensity"]
    for j, (r, dr, i, di) in enumerate(zip(fit.rates, fit.rate_errors, fit.intensities, fit.intensity_errors)):
        dr_s = f"{dr:.3g}" if dr is not None else "-"
        di_s = f"{di:.3g}" if di is not None else "-"
        lines.append(f"{j:<10d} {1 / r:<16.5g} {r:.6g} +- {dr_s:<8} {i:.4f} +- {di_s}")
    be = f"{fit.background_error:.3g}" if fit.background_error is not None else "-"
    lines.append(f"background {fit.background:.4g} +- {be} counts/ns")
    an = payload.get("anomaly", {})
    if "fraction" in an:
        lines.append(f"o-Ps rate {an['lambda_obs']:.5f} +- {an['lambda_obs_sigma']:.5f} us^-1; "
                     f"excess over theory {100 * an['fraction']:.4f} +- {100 * an['sigma']:.4f} % "
                     f"(reported band {100 * an['band'][0]:.2f}-{100 * an['band'][1]:.2f} %: "
                     f"{'compatible' if an['compatible'] else 'incompatible'})")
    elif an:
        lines.append(f"anomaly: {an['error']}")
    ls = payload.get("line_search", {})
    if "significance" in ls:
        lines.append(f"1022 keV line, late window: excess {ls['excess_counts']:.1f} counts, "
                     f"significance {ls['significance']:.2f}")
    return "\n".join(lines)


def cmd_replicas(args, argv) -> int:
    extra = [f"simulation.n_events={args.events}"] if args.events is not None else []
    cfg = _config(args, extra)
    started = _now()
    base = cfg.simulation.seed
    seeds = list(range(base, base + args.replicas))
    records = run_replicas(cfg.model, cfg.detector, cfg.source, cfg.simulation, cfg.fit, seeds, args.workers)
    summary = summarize(records)
    summary["truth_rate_ns"] = cfg.model.rate_ortho_observed
    out = args.out or (args.out_dir or Path(".")) / "replicas.csv"
    rid = run_id("replicas", cfg, seeds)
    lines = [f"# run_id: {rid}", "# units: rate ns^-1", "seed,converged,rate,rate_error,pull"]
    lines += [f"{r.seed},{int(r.converged)},{r.rate!r},{r.rate_error!r},{r.pull!r}" for r in records]
    atomic_write(out, "\n".join(lines) + "\n")
    summary_path = out.with_suffix(".json")
    atomic_write(summary_path, json.dumps({"run_id": rid, **summary}, indent=2) + "\n")
    write_manifest(out.parent, "replicas", cfg, seeds, {"replicas": out, "summary": summary_path}, argv, started)
    print(json.dumps(summary, indent=2) if args.format == "json" else
          "  ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in summary.items()))
    return EXIT_OK if summary["converged"] else EXIT_RUNTIME


def cmd_report(args, argv) -> int:
    cfg = _config(args)
    started = _now()
    hist = TimeEnergyHistogram.read(args.input)
    if args.fit_json is not None:
        payload = json.loads(args.fit_json.read_text())
    else:
        payload, _ = analyse(hist, cfg)
    curve = payload["fit"].get("curve")
    fit = None
    if curve is None:
        # Refit to regenerate the curve; the stored parameters stay authoritative in the text.
        _, fit = analyse(hist, cfg)
        curve = fit.curve
    out_dir = args.out_dir or Path(".")
    rid = run_id("report", cfg, [])
    curve_path = out_dir / "report_curve.csv"
    rows = [f"# run_id: {rid}", "t_bin_center_ns,counts,model,residual"]
    rows += [f"{t!r},{c!r},{m!r},{r!r}" for t, c, m, r in
             zip(curve["t_bin_center_ns"], curve["counts"], curve["model"], curve["residual"])]
    atomic_write(curve_path, "\n".join(rows) + "\n")
    outputs = {"curve": curve_path}
    if hist.energy_counts:
        energy_path = out_dir / "report_energy.csv"
        atomic_write(energy_path, f"# run_id: {rid}\n" + hist.energy_csv_text())
        outputs["energy"] = energy_path
    est = full_report(cfg.gas, cfg.constants, n_bar=cfg.mcnrs.n_bar, resonance=cfg.resonance(),
                      mass_ratio=cfg.mcnrs.mass_ratio)
    fit_obj = fit or _fit_from_dict(payload["fit"])
    text = "\n\n".join([
        f"run_id: {rid}",
        "== closed-form estimates ==\n" + format_report(est),
        f"== spectrum ==\n{args.input}: {hist.total} counts in {hist.time_counts.size} bins "
        f"[{hist.time_edges[0]:g}, {hist.time_edges[-1]:g}] ns",
        "== fit ==\n" + format_fit(fit_obj, payload),
    ])
    report_path = out_dir / "report.txt"
    atomic_write(report_path, text + "\n")
    outputs["report"] = report_path
    write_manifest(out_dir, "report", cfg, [], outputs, argv, started)
    print(text)
    return EXIT_OK


def _fit_from_dict(d: dict) -> FitResult:
    keys = FitResult.__dataclass_fields__
    kw = {k: d[k] for k in keys if k in d and k != "curve"}
    kw["fit_window"] = tuple(kw.get("fit_window", (0.0, 0.0)))
    for k in ("chi2", "pearson_chi2", "gradient_norm", "last_step"):
        if kw.get(k) is None:
            kw[k] = float("nan")
    return FitResult(**kw)


COMMANDS = {"estimate": cmd_estimate, "simulate": cmd_simulate, "fit": cmd_fit,
            "replicas": cmd_replicas, "report": cmd_report}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, argv)
    except (ConfigError, ValidationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (RunFailure, FitError, AnomalyError, EmptyWindowError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except FileNotFoundError as exc:
        print(f"error: input: no such file {exc.filename}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
