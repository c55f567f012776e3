"""Command-line runner: sweeps, regime reports, force budgets, spectral checks.

Verbs
-----
- ``sweep``     write one CSV of spectral densities per scenario, plus a manifest
- ``oracle``    time-domain Monte Carlo check of the analytic spectra
- ``regime``    print the operating-regime report
- ``minforce``  print the minimum-detectable-force budget
- ``presets``   list the named scenarios

Exit codes: 0 success, 1 usage/config error, 2 numerical failure,
3 spectral comparison failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .params import (
    DerivedParams,
    ParameterError,
    PhysParams,
    check_regime,
    derive,
    load_config,
    table1_preset,
)
from .scenarios import ORACLE_SCENARIOS, SWEEP_SCENARIOS, Scenario
from .spectra import SpectrumRecord, make_grid, spectrum_sweep
from .sqlimit import min_force
from .timedomain import (
    SimulationError,
    default_band,
    default_sim_config,
    estimate_psd,
    analytic_records_for,
    compare,
    simulate,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_COMPARISON = 3

CSV_COLUMNS = ("omega_rad_s", "omega_tau_over_2pi", "y_re", "y_im",
               "S_qu", "S_T", "S_f", "S_SQL", "R")


class ConfigError(ValueError):
    """Usage-level problem: bad flags, missing or malformed config."""


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv_text(records: list[SpectrumRecord], tau: float) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for r in records:
        row = (
            r.omega,
            r.omega * tau / (2.0 * math.pi),
            r.y.real,
            r.y.imag,
            r.s_qu,
            r.s_t,
            r.s_f,
            r.s_sql,
            r.ratio,
        )
        lines.append(",".join(repr(v) for v in row))
    return "\n".join(lines) + "\n"


def _resolve_params(args) -> PhysParams:
    if args.config is not None:
        try:
            return load_config(args.config, use_preset_defaults=args.preset is not None)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {exc.filename}") from exc
    if args.preset is not None:
        return table1_preset()
    raise ConfigError("provide --config PATH or --preset table1")


def _parse_grid(spec: str):
    """Parse ``{log|linear}:N:lo:hi`` (lo/hi in rad/s) into make_grid kwargs."""
    parts = spec.split(":")
    if len(parts) != 4:
        raise ConfigError(f"grid spec must be kind:N:lo:hi, got {spec!r}")
    kind, n, lo, hi = parts
    if kind not in ("log", "linear"):
        raise ConfigError(f"grid kind must be 'log' or 'linear', got {kind!r}")
    try:
        return {"kind": kind, "n": int(n), "lo": float(lo), "hi": float(hi)}
    except ValueError as exc:
        raise ConfigError(f"cannot parse grid spec {spec!r}: {exc}") from exc


def _manifest(p: PhysParams, d: DerivedParams, extra: dict) -> str:
    payload = {
        "schema_version": 1,
        "tool": "optotriplet",
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "phys_params": dataclasses.asdict(p),
        "derived": {
            "gamma_m": d.gamma_m,
            "gamma_plus": d.gamma_plus,
            "gamma_minus": d.gamma_minus,
            "gamma": d.gamma,
            "x0": d.x0,
            "omega0": d.omega0,
            "eta_plus": d.eta_plus,
            "eta_minus": d.eta_minus,
            "c0_sq": d.c0_sq,
            "n_t": d.n_t,
            "b_thermal": d.b_thermal,
        },
    }
    payload.update(extra)
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _scenario_entry(s: Scenario) -> dict:
    entry = dataclasses.asdict(s)
    if not isinstance(entry["y_policy"], str):
        entry["y_policy"] = repr(entry["y_policy"])
    return entry


def cmd_sweep(args) -> int:
    p = _resolve_params(args)
    names = args.scenario or list(SWEEP_SCENARIOS)
    unknown = [n for n in names if n not in SWEEP_SCENARIOS]
    if unknown:
        raise ConfigError(
            f"unknown scenario(s): {', '.join(unknown)}; "
            f"known: {', '.join(SWEEP_SCENARIOS)}"
        )
    os.makedirs(args.out, exist_ok=True)
    grid_override = _parse_grid(args.grid) if args.grid else None

    d_base = derive(p)
    scen_entries = []
    for name in names:
        scen = SWEEP_SCENARIOS[name]
        p_s = scen.apply(p)
        d_s = derive(p_s)
        grid = make_grid(p_s.tau, **grid_override) if grid_override else scen.grid(p_s.tau)
        records = spectrum_sweep(d_s, grid, y_policy=scen.y_policy, tag=name)
        out_path = os.path.join(args.out, f"{name}.csv")
        _atomic_write(out_path, _csv_text(records, p_s.tau))
        print(f"wrote {out_path} ({len(records)} rows, {scen.describe()})")
        entry = _scenario_entry(scen)
        entry["csv"] = f"{name}.csv"
        if grid_override:
            entry["grid_override"] = grid_override
        scen_entries.append(entry)

    manifest = _manifest(p, d_base, {"command": "sweep", "scenarios": scen_entries})
    _atomic_write(os.path.join(args.out, "manifest.json"), manifest)
    return EXIT_OK


def cmd_oracle(args) -> int:
    p = _resolve_params(args)
    scen = ORACLE_SCENARIOS.get(args.scenario_name)
    if scen is None:
        raise ConfigError(
            f"unknown scenario {args.scenario_name!r}; known: {', '.join(ORACLE_SCENARIOS)}"
        )
    d = derive(scen.apply(p))
    overrides = {"seed": args.seed, "tag": scen.name}
    if args.trajectories is not None:
        overrides["n_traj"] = args.trajectories
    if args.duration is not None:
        overrides["t_dur"] = args.duration
    if args.dt is not None:
        overrides["dt"] = args.dt
    cfg = default_sim_config(d, **overrides)

    ts = simulate(d, cfg)
    est = estimate_psd(ts, segments=args.segments)
    band = default_band(d, cfg)
    analytic = analytic_records_for(d, est, band, y_policy=cfg.y_policy, tag=scen.name)
    report = compare(analytic, est, band)

    os.makedirs(args.out, exist_ok=True)
    header = (
        f"scenario {scen.name} ({scen.describe()})\n"
        f"trajectories {cfg.n_traj}, duration {cfg.t_dur!r} s, dt {cfg.dt!r} s, "
        f"segments {args.segments}, seed {cfg.seed}\n"
    )
    report_text = header + report.format() + "\n"
    _atomic_write(os.path.join(args.out, f"{scen.name}-report.txt"), report_text)
    if args.dump_timeseries:
        ts.dump_text(os.path.join(args.out, f"{scen.name}-timeseries.txt"))
    manifest = _manifest(p, d, {
        "command": "oracle",
        "scenario": _scenario_entry(scen),
        "sim": {
            "dt": cfg.dt, "t_dur": cfg.t_dur, "n_traj": cfg.n_traj,
            "seed": cfg.seed, "segments": args.segments, "band": list(report.band),
        },
    })
    _atomic_write(os.path.join(args.out, f"{scen.name}-manifest.json"), manifest)
    print(report_text, end="")
    return EXIT_OK if report.passed else EXIT_COMPARISON


def cmd_regime(args) -> int:
    p = _resolve_params(args)
    d = derive(p)
    print(check_regime(d).format())
    return EXIT_OK


def cmd_minforce(args) -> int:
    p = _resolve_params(args)
    d = derive(p)
    tau = args.tau if args.tau is not None else p.tau
    if tau <= 0.0 or not math.isfinite(tau):
        raise ConfigError(f"tau must be positive and finite, got {tau!r}")
    print(min_force(d, tau).format())
    return EXIT_OK


def cmd_presets(args) -> int:
    base = table1_preset()
    print("sweep scenarios (vs the default parameter set):")
    for name, scen in SWEEP_SCENARIOS.items():
        print(f"  {name:<26s} {scen.describe()}")
    print("time-domain check scenarios:")
    for name, scen in ORACLE_SCENARIOS.items():
        print(f"  {name:<26s} {scen.describe()}")
    print(f"default pulse duration tau = {base.tau!r} s")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="optotriplet",
        description="Quantum-noise budget of the three-mode optomechanical force sensor",
    )
    ap.add_argument("--version", action="version", version=f"optotriplet {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", metavar="PATH", help="flat key = value parameter file")
        sp.add_argument("--preset", choices=["table1"],
                        help="use the default parameter set (fills missing config keys)")

    sp = sub.add_parser("sweep", help="write spectral-density CSVs per scenario")
    add_common(sp)
    sp.add_argument("--scenario", action="append", metavar="NAME",
                    help="repeatable; default: all sweep presets")
    sp.add_argument("--out", default="out", metavar="DIR")
    sp.add_argument("--grid", metavar="KIND:N:LO:HI",
                    help="override the scenario grid (lo/hi in rad/s)")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("oracle", help="Monte Carlo check of the analytic spectra")
    add_common(sp)
    sp.add_argument("--scenario", dest="scenario_name", default="sym-lossless",
                    metavar="NAME", help=f"one of: {', '.join(ORACLE_SCENARIOS)}")
    sp.add_argument("--out", default="out", metavar="DIR")
    sp.add_argument("--seed", type=int, default=0, metavar="U64")
    sp.add_argument("--trajectories", type=int, default=None, metavar="N")
    sp.add_argument("--duration", type=float, default=None, metavar="S")
    sp.add_argument("--dt", type=float, default=None, metavar="S")
    sp.add_argument("--segments", type=int, default=16, metavar="N")
    sp.add_argument("--dump-timeseries", action="store_true",
                    help="also write the first trajectory as columnar text")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("regime", help="print the operating-regime report")
    add_common(sp)
    sp.set_defaults(func=cmd_regime)

    sp = sub.add_parser("minforce", help="print the minimum detectable force budget")
    add_common(sp)
    sp.add_argument("--tau", type=float, default=None, metavar="S",
                    help="override the pulse duration")
    sp.set_defaults(func=cmd_minforce)

    sp = sub.add_parser("presets", help="list the named scenarios")
    sp.set_defaults(func=cmd_presets)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SimulationError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
