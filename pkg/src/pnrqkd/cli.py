"""Command-line entry point producing figure data and report files.

Every command writes exactly one output file (CSV or JSON) and prints a
one-line summary. Exit status: 0 success, 1 domain/config/I-O error, 2 usage.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import attacks, montecarlo, optimize
from .channel import ExperimentPreset, load_overrides, load_preset, parse_fields
from .errors import ConfigError, DegenerateCrossover, DomainError, InsufficientDataError, PresetNotFound
from .photon_stats import DetectorModel, SourceModel

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2

ATTACK_COLUMNS = ("e", "i_si_n", "i_cmp_n")


@dataclass
class Table:
    columns: tuple
    rows: list
    config: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".10g")
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def write_table(table: Table, fmt: str, path) -> Path:
    """Write ``table`` as CSV (header + rows, 10 significant digits, LF) or JSON."""
    path = Path(path)
    if fmt == "csv":
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(table.columns)
            for row in table.rows:
                w.writerow([_fmt(v) for v in row])
    elif fmt == "json":
        doc = {
            "config": _jsonable(table.config),
            "rows": [_jsonable(dict(zip(table.columns, r))) for r in table.rows],
            "summary": _jsonable(table.summary),
        }
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    else:
        raise ConfigError(f"unknown output format {fmt!r}")
    return path


def write_json(doc: dict, path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(doc), fh, indent=2)
        fh.write("\n")
    return path


def write_plot_script(data_path: Path, xcol: int, ycols: Sequence[int], xlabel: str, ylabel: str, logy=False):
    """Companion gnuplot script for a CSV written by this tool."""
    script = data_path.with_suffix(".gp")
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
    ]
    if logy:
        lines.append("set logscale y")
    plots = ", ".join(f"'{data_path.name}' using {xcol}:{y} with lines" for y in ycols)
    lines.append(f"plot {plots}")
    script.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return script


# ---------------------------------------------------------------- presets


def resolve_preset(args) -> ExperimentPreset:
    preset = load_preset(args.preset, getattr(args, "preset_dir", None))
    overrides = {}
    if getattr(args, "override", None):
        overrides.update(load_overrides(args.override))
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        overrides.update(parse_fields({k.strip(): v}))
    return preset.with_overrides(**overrides) if overrides else preset


def _preset_config(p: ExperimentPreset) -> dict:
    return {
        "preset": p.name,
        "attenuation_db_per_km": p.attenuation_db_per_km,
        "receiver_efficiency": p.receiver_efficiency,
        "e0": p.e0,
        "dark_per_pulse": p.dark_per_pulse,
        "pulse_rate": p.pulse_rate,
    }


# ---------------------------------------------------------------- commands


def cmd_attack_info(args):
    es = np.linspace(args.e_min, args.e_max, args.e_steps)
    ns = args.n or [1, 2, 3, 4, 5]
    multi = len(ns) > 1
    rows = []
    for n in ns:
        for e in es:
            e = float(e)
            row = (e, n * attacks.si_information(e), attacks.cmp_information(n, e))
            rows.append((n,) + row if multi else row)
    cols = (("n",) if multi else ()) + ATTACK_COLUMNS
    table = Table(cols, rows, config={"n": ns, "e_min": args.e_min, "e_max": args.e_max, "e_steps": args.e_steps})
    msg = f"attack-info: {len(rows)} rows for n={ns}"
    return table, msg, (1 + multi, [2 + multi, 3 + multi], "QBER e", "information (bits)")


def cmd_crossover(args):
    try:
        e_star = attacks.crossover_qber(args.n)
        msg = f"crossover n={args.n}: I_CMP > {args.n} I_SI for e < {e_star:.6f}"
    except DegenerateCrossover:
        e_star = math.nan
        msg = "crossover n=1: degenerate, I_CMP(1) is identical to I_SI"
    table = Table(("n", "e_star"), [(args.n, e_star)], config={"n": args.n}, summary={"e_star": e_star})
    return table, msg, None


def cmd_rate_curve(args):
    preset = resolve_preset(args)
    mus = args.mu or [preset.mu]
    multi = len(mus) > 1
    rows, flagged = [], []
    for mu in mus:
        t = optimize.sweep(preset, "distance", args.d_min, args.d_max, args.steps, mu=mu, workers=args.workers)
        rows.extend(((mu,) + r) if multi else r for r in t.rows)
        flagged.extend((mu, x, err) for x, err in t.flagged)
    cols = (("mu",) if multi else ()) + optimize.DISTANCE_COLUMNS
    cfg = _preset_config(preset) | {"mu": mus, "d_min": args.d_min, "d_max": args.d_max, "steps": args.steps}
    table = Table(cols, rows, config=cfg, summary={"flagged": flagged})
    msg = f"rate-curve: {len(rows)} rows for mu={mus} ({len(flagged)} flagged)"
    return table, msg, (1 + multi, [5 + multi], "distance (km)", "R_f (bits/pulse)")


def cmd_optimize_mu(args):
    preset = resolve_preset(args)
    rep = optimize.optimal_mu(preset, args.distance, tol=args.tol, grid_step=args.grid_step)
    cols = ("distance_km", "mu_star", "rate_at_optimum", "grid_mu", "iterations", "unimodal", "status")
    row = (args.distance, rep.mu_star, rep.rate_at_optimum, rep.grid_mu, rep.iterations, rep.unimodal, rep.status)
    table = Table(cols, [row], config=_preset_config(preset), summary=dict(zip(cols, row)))
    if rep.positive:
        msg = f"optimize-mu: mu* = {rep.mu_star:.4f} at {args.distance} km, R_f = {rep.rate_at_optimum:.4e}"
    else:
        msg = f"optimize-mu: no positive key rate at {args.distance} km"
    return table, msg, None


def cmd_max_distance(args):
    preset = resolve_preset(args)
    rows = []
    for tok in args.mu or [str(preset.mu)]:
        if tok == "opt":
            rep = optimize.distance_optimal_mu(preset)
        else:
            try:
                mu = float(tok)
            except ValueError:
                raise ConfigError(f"--mu expects a number or 'opt', got {tok!r}") from None
            rep = optimize.max_distance(preset, mu)
        rows.append((rep.mu, rep.distance_km, rep.positive, rep.capped))
    cols = ("mu", "distance_km", "positive", "capped")
    table = Table(cols, rows, config=_preset_config(preset))
    parts = []
    for mu, L, pos, cap in rows:
        parts.append(f"mu={mu:.4g}: " + ("no positive rate" if not pos else f"{L:.2f} km" + (" (cap)" if cap else "")))
    return table, "max-distance: " + "; ".join(parts), None


def _sim_config(args, mu) -> montecarlo.SimConfig:
    if args.eta is not None:
        eta = args.eta
    else:
        preset = resolve_preset(args)
        eta = preset.eta(args.distance)
    detector = DetectorModel(args.resolving_power, args.dark_rate_hz)
    source = SourceModel(mu, args.pulse_rate)
    strategy = montecarlo.block_singles(eta) if args.strategy == "block_singles" else montecarlo.beam_splitter(eta)
    return montecarlo.SimConfig(
        source=source,
        eta=eta,
        detector=detector,
        n_pulses=args.pulses,
        seed=args.seed,
        eve_strategy=strategy,
        batch_size=args.batch_size,
    )


def cmd_simulate(args):
    cfg = _sim_config(args, args.mu)
    res = montecarlo.simulate(cfg, workers=args.workers)
    rep = res.to_report()
    cols = ("detected_n", "overflow", "count")
    table = Table(cols, [tuple(r[c] for c in cols) for r in rep["rows"]], config=rep["config"], summary=rep["summary"])
    d = rep["summary"]["empirical_delta"]
    msg = f"simulate: {res.n_pulses} pulses, {res.sifted_singles} sifted, delta = " + (
        "n/a" if d is None else f"{d:.5f} +- {rep['summary']['stderr_delta']:.5f}"
    )
    return table, msg, None


def cmd_decoy_check(args):
    base = _sim_config(args, args.mu)
    if args.strategy == "intensity_aware":
        honest, biased = montecarlo.intensity_aware_tables(base.eta, args.single_pass_factor * base.eta)
        sig_cfg = montecarlo.SimConfig(base.source, base.eta, base.detector, args.pulses, args.seed, honest, args.batch_size)
        dec_cfg = montecarlo.SimConfig(
            SourceModel(args.decoy_mu, args.pulse_rate), base.eta, base.detector, args.pulses, args.seed + 1, biased, args.batch_size
        )
    else:
        sig_cfg = base
        dec_cfg = montecarlo.SimConfig(
            SourceModel(args.decoy_mu, args.pulse_rate), base.eta, base.detector, args.pulses, args.seed + 1, base.eve_strategy, args.batch_size
        )
    sig = montecarlo.simulate(sig_cfg, workers=args.workers)
    dec = montecarlo.simulate(dec_cfg, workers=args.workers)
    verdict = montecarlo.verify_decoy_consistency(sig, dec, alpha=args.alpha)
    cols = ("n", "y_signal", "y_decoy", "z", "pvalue", "rejected")
    rows = [(r.n, r.yield_signal, r.yield_decoy, r.z, r.pvalue, r.rejected) for r in verdict.rows]
    cfg = {"signal": sig_cfg.summary(), "decoy": dec_cfg.summary(), "alpha": args.alpha, "strategy": args.strategy}
    table = Table(cols, rows, config=cfg, summary={"passed": verdict.passed, "rejected_n": verdict.rejected_n})
    msg = "decoy-check: PASS" if verdict.passed else f"decoy-check: REJECT at n={verdict.rejected_n}"
    return table, msg, None


def cmd_pns_threshold(args):
    mus = args.mu or [0.1]
    rows = [(mu, attacks.pns_full_info_threshold(mu)) for mu in mus]
    table = Table(("mu", "eta_threshold"), rows)
    msg = "pns-threshold: " + "; ".join(f"mu={m:g}: eta < {t:.6g}" for m, t in rows)
    return table, msg, None


COMMANDS = {
    "attack-info": (cmd_attack_info, "csv"),
    "crossover": (cmd_crossover, "csv"),
    "rate-curve": (cmd_rate_curve, "csv"),
    "optimize-mu": (cmd_optimize_mu, "csv"),
    "max-distance": (cmd_max_distance, "csv"),
    "simulate": (cmd_simulate, "json"),
    "decoy-check": (cmd_decoy_check, "json"),
    "pns-threshold": (cmd_pns_threshold, "csv"),
}


# ---------------------------------------------------------------- parser


def _common(p, preset=False, plot=False):
    p.add_argument("--out", "-o", help="output file (default: <command>.<format>)")
    p.add_argument("--format", choices=("csv", "json"), help="output format")
    if preset:
        p.add_argument("--preset", default="gys", help="preset name (default: gys)")
        p.add_argument("--preset-dir", help="extra directory of *.ini presets (or $PNRQKD_PRESET_DIR)")
        p.add_argument("--override", help="key-value file overriding preset fields")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one preset field")
    if plot:
        p.add_argument("--plot-script", action="store_true", help="also write a gnuplot script next to the CSV")


def _sim_args(p):
    p.add_argument("--mu", type=float, default=0.1)
    p.add_argument("--eta", type=float, help="channel transmittance (default: from preset and --distance)")
    p.add_argument("--distance", type=float, default=0.0, help="fiber length in km when --eta is not given")
    p.add_argument("--pulses", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resolving-power", type=int, default=None)
    p.add_argument("--dark-rate-hz", type=float, default=0.0)
    p.add_argument("--pulse-rate", type=float, default=1e6)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--batch-size", type=int, default=montecarlo.DEFAULT_BATCH)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pnrqkd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("attack-info", help="I_SI * n and I_CMP(n) on a QBER grid")
    p.add_argument("--n", type=int, action="append", help="photon number (repeatable; default 1..5)")
    p.add_argument("--e-min", type=float, default=0.0)
    p.add_argument("--e-max", type=float, default=0.5)
    p.add_argument("--e-steps", type=int, default=51)
    _common(p, plot=True)

    p = sub.add_parser("crossover", help="QBER where I_CMP(n) = n I_SI")
    p.add_argument("n", type=int)
    _common(p)

    p = sub.add_parser("rate-curve", help="final key rate vs distance")
    p.add_argument("--mu", type=float, action="append", help="intensity (repeatable; default: preset mu)")
    p.add_argument("--d-min", type=float, default=0.0)
    p.add_argument("--d-max", type=float, default=170.0)
    p.add_argument("--steps", type=int, default=171)
    p.add_argument("--workers", type=int, default=1)
    _common(p, preset=True, plot=True)

    p = sub.add_parser("optimize-mu", help="intensity maximizing R_f at a distance")
    p.add_argument("--distance", type=float, required=True, help="fiber length in km")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--grid-step", type=float, default=1e-4)
    _common(p, preset=True)

    p = sub.add_parser("max-distance", help="longest fiber with a positive key rate")
    p.add_argument("--mu", action="append", help="intensity, or 'opt' for the distance-optimal one (repeatable)")
    _common(p, preset=True)

    p = sub.add_parser("simulate", help="pulse-level Monte Carlo run")
    _sim_args(p)
    p.add_argument("--strategy", choices=("beam_splitter", "block_singles"), default="beam_splitter")
    _common(p, preset=True)

    p = sub.add_parser("decoy-check", help="compare per-photon-number yields of signal and decoy runs")
    _sim_args(p)
    p.add_argument("--decoy-mu", type=float, default=0.3)
    p.add_argument("--strategy", choices=("beam_splitter", "intensity_aware"), default="beam_splitter")
    p.add_argument(
        "--single-pass-factor",
        type=float,
        default=0.5,
        help="intensity-aware Eve: one-photon pulses in the decoy run pass with this fraction of eta",
    )
    p.add_argument("--alpha", type=float, default=1e-3)
    _common(p, preset=True)

    p = sub.add_parser("pns-threshold", help="transmittance below which PNS gives Eve full information")
    p.add_argument("--mu", type=float, action="append")
    _common(p)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    fn, default_fmt = COMMANDS[args.command]
    fmt = args.format or default_fmt
    out = Path(args.out or f"{args.command}.{fmt}")
    try:
        table, msg, plot = fn(args)
        path = write_table(table, fmt, out)
        if plot and getattr(args, "plot_script", False) and fmt == "csv":
            write_plot_script(path, plot[0], plot[1], plot[2], plot[3])
    except (DomainError, ConfigError, InsufficientDataError, ArithmeticError, OSError) as exc:
        print(f"pnrqkd {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except PresetNotFound as exc:
        print(f"pnrqkd {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    print(f"{msg} -> {path}")
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
