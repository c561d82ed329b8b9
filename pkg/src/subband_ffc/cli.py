"""Command-line entry point: ``subband-ffc {design-bank,simulate,report}``.

Exit codes: 0 success, 1 usage or configuration error, 2 quality shortfall,
3 divergence during a run.
"""

import argparse
from dataclasses import dataclass
import json
import math
import os
from pathlib import Path
import sys
import time

import numpy as np

from . import _kernels
from .analysis import (attenuation_report, controller_fit, evaluation_window,
                       optimal_controller)
from .errors import (BankDesignError, ConfigurationError, DivergenceError,
                     SubbandFFCError)
from .filterbank import BankSpec, design_bank, isolation_report
from .plantsim import (DIFFICULTIES, Scenario, SimulationTrace, make_fullband_scenario,
                       make_synthetic_scenario, run_open_loop, with_measurement_noise)
from .scheduler import Scheduler, run
from .sysid import extract_model, in_band_fit_report

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SHORTFALL = 2
EXIT_DIVERGED = 3

SEED_ENV = "SUBBAND_FFC_SEED"
BUILTINS = DIFFICULTIES + ("fullband",)
TAIL_SAMPLES = 32768

TRACE_FILE = "trace.csv"
SUMMARY_FILE = "summary.json"
SCENARIO_FILE = "scenario.json"
REPORT_FILE = "report.json"


class UsageError(Exception):
    """Raised by the argument parser instead of exiting."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    """Resolved settings of one ``simulate`` invocation."""

    scenario: Scenario
    out_dir: Path
    samples: int
    open_loop: bool = False
    with_report: bool = True


# -- helpers -----------------------------------------------------------------

def _finite_or_none(x):
    """JSON-safe copy of ``x``: non-finite floats become ``None``."""
    if isinstance(x, dict):
        return {str(k): _finite_or_none(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite_or_none(v) for v in x]
    if isinstance(x, np.ndarray):
        return _finite_or_none(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    return x


def _dump_json(obj):
    return json.dumps(_finite_or_none(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write(path, text):
    with open(path, "w", newline="") as f:
        f.write(text)


def _err(msg):
    print(f"subband-ffc: {msg}", file=sys.stderr)


def load_scenario(source):
    """Builtin name (``smoke``, ``desk``, ``full``, ``fullband``) or JSON path."""
    if source in BUILTINS:
        if source == "fullband":
            return make_fullband_scenario()
        return make_synthetic_scenario(difficulty=source)
    path = Path(source)
    if not path.is_file():
        raise ConfigurationError(
            f"scenario {source!r} is neither a builtin ({', '.join(BUILTINS)}) "
            "nor a readable file")
    return Scenario.from_json(path.read_text())


def resolve_seed(cli_seed, environ=None):
    """``--seed`` wins, then ``SUBBAND_FFC_SEED``; ``None`` keeps config seeds."""
    if cli_seed is not None:
        return cli_seed
    raw = (os.environ if environ is None else environ).get(SEED_ENV, "").strip()
    if not raw:
        return None
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{SEED_ENV} must be an integer, got {raw!r}") from exc


def default_samples(scenario):
    """Enough samples for every region to use its full budget, plus a tail
    for measuring the converged attenuation."""
    return scenario.num_regions * scenario.convergence.max_samples + TAIL_SAMPLES


def _prepare_out_dir(path):
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"cannot create output directory {path}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise ConfigurationError(f"output directory {path} is not writable")
    return path


# -- analysis shared by simulate and report -----------------------------------

def build_report(scenario, trace, summary):
    """Attenuation table plus per-region model and controller fits."""
    bank = scenario.make_bank()
    K = len(trace)
    start, stop = evaluation_window(summary.get("events", []), K)
    baseline = trace.v_b + trace.n
    atten = attenuation_report(baseline, trace.e, bank, start, stop)
    bands = []
    for i, db in enumerate(atten):
        lo, hi = bank.band_edges[i]
        bands.append({"band": i, "lo_hz": float(lo), "hi_hz": float(hi),
                      "attenuation_db": float(db)})
    regions = []
    for snap in summary.get("snapshots", {}).get("regions", []):
        i = snap["region"]
        edges = bank.band_edges[i]
        entry = {"region": i, "channel": snap["channel"], "reason": snap["reason"]}
        orders = scenario.region_orders[i]
        model = extract_model(snap["theta_S"], orders, scenario.sample_rate_hz)
        fit = in_band_fit_report(model, scenario.plant_for_region(i), edges)
        entry["model_fit"] = {"mag_db": fit["mag_db"], "phase_deg": fit["phase_deg"]}
        ref = optimal_controller(scenario, i, scenario.controller_taps, bank)
        if ref.undefined_in_band:
            entry["controller_fit"] = None
        else:
            cf = controller_fit(snap["theta_Q"], ref, edges)
            entry["controller_fit"] = {"mag_db": cf["mag_db"], "phase_deg": cf["phase_deg"],
                                       "reference_delay": ref.delay}
        regions.append(entry)
    return {"window": [start, stop], "bands": bands, "regions": regions}


def format_report(report):
    """Fixed-width text rendering of :func:`build_report` output."""
    start, stop = report["window"]
    lines = [f"attenuation over samples [{start}, {stop})",
             f"{'band':>4}  {'lo_hz':>9}  {'hi_hz':>9}  {'atten_db':>9}"]
    for b in report["bands"]:
        lines.append(f"{b['band']:>4}  {b['lo_hz']:>9.1f}  {b['hi_hz']:>9.1f}  "
                     f"{b['attenuation_db']:>9.2f}")
    if report["regions"]:
        lines += ["", "model fit (estimate vs true plant, central 80% of band)",
                  f"{'region':>6}  {'reason':>9}  {'mag_db':>8}  {'phase_deg':>9}"]
        for r in report["regions"]:
            m = r["model_fit"]
            lines.append(f"{r['region']:>6}  {str(r['reason']):>9}  "
                         f"{m['mag_db']:>8.3f}  {m['phase_deg']:>9.3f}")
        lines += ["", "controller fit (adapted FIR vs least-squares optimum)",
                  f"{'region':>6}  {'delay':>5}  {'mag_db':>8}  {'phase_deg':>9}"]
        for r in report["regions"]:
            c = r["controller_fit"]
            if c is None:
                lines.append(f"{r['region']:>6}  {'-':>5}  {'undefined':>8}")
            else:
                lines.append(f"{r['region']:>6}  {c['reference_delay']:>5}  "
                             f"{c['mag_db']:>8.3f}  {c['phase_deg']:>9.3f}")
    return "\n".join(lines) + "\n"


# -- subcommands ---------------------------------------------------------------

def cmd_design_bank(args):
    spec = BankSpec(args.regions, args.taps, args.atten_db, args.fs_hz)
    shortfall = None
    try:
        bank = design_bank(spec, strict=True)
    except BankDesignError as exc:
        bank, shortfall = exc.bank, exc.achieved_db
    iso = isolation_report(bank)
    result = {
        "spec": spec.to_dict(),
        "band_width_hz": bank.band_width_hz,
        "bands": [{"band": i, "lo_hz": float(lo), "hi_hz": float(hi),
                   "center_hz": bank.center_hz(i)}
                  for i, (lo, hi) in enumerate(bank.band_edges)],
        "achieved_atten_db": bank.attenuation_db,
        "meets_target": shortfall is None,
        "isolation": iso.to_dict(),
    }
    if args.out:
        record = dict(result)
        record["bank"] = {"num_regions": spec.num_regions, "num_taps": spec.num_taps,
                          "stopband_atten_db": spec.stopband_atten_db,
                          "coeffs": bank.coeffs.tolist()}
        _write(args.out, _dump_json(record))
    sys.stdout.write(_dump_json(result))
    if shortfall is not None:
        _err(f"stopband attenuation shortfall: achieved {shortfall:.2f} dB, "
             f"target {spec.stopband_atten_db:.2f} dB")
        return EXIT_SHORTFALL
    return EXIT_OK


def _resolve_run_config(args):
    scenario = load_scenario(args.scenario)
    if args.bank:
        try:
            record = json.loads(Path(args.bank).read_text())
            bank = record.get("bank", record)
            scenario = Scenario.from_dict({**scenario.to_dict(), "bank": bank})
        except (OSError, json.JSONDecodeError, AttributeError) as exc:
            raise ConfigurationError(f"cannot read bank file {args.bank}: {exc}") from exc
    seed = resolve_seed(args.seed)
    if seed is not None:
        scenario = scenario.with_seed(seed)
    if args.noise_db is not None:
        scenario = with_measurement_noise(scenario, args.noise_db)
    samples = default_samples(scenario) if args.samples is None else args.samples
    if samples < 1:
        raise ConfigurationError("--samples must be positive")
    return RunConfig(scenario, _prepare_out_dir(args.out), samples,
                     args.open_loop, not args.no_report)


def execute(config):
    """Run one simulation, write its outputs and return ``(exit_code, summary)``."""
    scenario, out = config.scenario, config.out_dir
    _write(out / SCENARIO_FILE, scenario.to_json() + "\n")
    summary = {"scenario": scenario.name, "samples": config.samples,
               "backend": _kernels.BACKEND}
    if config.open_loop:
        trace = run_open_loop(scenario, config.samples)
        summary.update(status="open_loop", events=[], snapshots={},
                       budget_exhausted=False)
        code = EXIT_OK
    else:
        sched = Scheduler(scenario)
        try:
            trace = run(sched, scenario, config.samples)
        except DivergenceError as exc:
            summary.update(status="diverged", diverged_region=exc.region,
                           message=str(exc), events=list(sched.events),
                           snapshots={"regions": sched.snapshots()})
            _write(out / SUMMARY_FILE, _dump_json(summary))
            _err(f"divergence in region {exc.region}: {exc}")
            return EXIT_DIVERGED, summary
        regions = trace.snapshots["regions"]
        converged = [r["reason"] == "converged" for r in regions]
        flags = [r["reason"] != "converged" for r in regions]
        summary.update(
            events=trace.events, snapshots=trace.snapshots,
            regions_converged=converged,
            budget_flags=flags,
            budget_exhausted=any(flags),
            status="converged" if all(converged) else "budget_exhausted")
        code = EXIT_OK if all(converged) else EXIT_SHORTFALL
    trace.to_csv(out / TRACE_FILE)
    if config.with_report:
        report = build_report(scenario, trace, summary)
        summary["attenuation_db"] = [b["attenuation_db"] for b in report["bands"]]
        summary["evaluation_window"] = report["window"]
        _write(out / REPORT_FILE, _dump_json(report))
    _write(out / SUMMARY_FILE, _dump_json(summary))
    return code, summary


def cmd_simulate(args):
    config = _resolve_run_config(args)
    t0 = time.perf_counter()
    code, summary = execute(config)
    elapsed = time.perf_counter() - t0
    line = {"status": summary["status"], "samples": summary["samples"],
            "out": str(config.out_dir)}
    if "attenuation_db" in summary:
        line["attenuation_db"] = [round(x, 2) for x in summary["attenuation_db"]]
    for ev in summary.get("events", []):
        if ev.get("event") in ("frozen", "diverged"):
            print(json.dumps(_finite_or_none(ev), sort_keys=True))
    print(json.dumps(line, sort_keys=True))
    print(f"elapsed {elapsed:.2f} s ({summary['backend']} kernels)", file=sys.stderr)
    return code


def load_trace_dir(path):
    """``(scenario, trace, summary)`` of a finished run; raises
    :class:`ConfigurationError` when anything is missing or truncated."""
    path = Path(path)
    files = [path / n for n in (SCENARIO_FILE, SUMMARY_FILE, TRACE_FILE)]
    missing = [f.name for f in files if not f.is_file()]
    if missing:
        raise ConfigurationError(f"trace directory {path} lacks {', '.join(missing)}")
    scenario = Scenario.from_json(files[0].read_text())
    try:
        summary = json.loads(files[1].read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"corrupt {SUMMARY_FILE}: {exc}") from exc
    if summary.get("status") == "diverged":
        raise ConfigurationError("run diverged; no complete trace to report on")
    try:
        trace = SimulationTrace.from_csv(files[2], scenario.sample_rate_hz)
    except (ValueError, StopIteration, IndexError) as exc:
        raise ConfigurationError(f"unreadable {TRACE_FILE}: {exc}") from exc
    if len(trace) != summary.get("samples"):
        raise ConfigurationError(
            f"partial trace: {len(trace)} rows, expected {summary.get('samples')}")
    return scenario, trace, summary


def cmd_report(args):
    scenario, trace, summary = load_trace_dir(args.trace_dir)
    report = build_report(scenario, trace, summary)
    sys.stdout.write(format_report(report))
    if args.json:
        _write(args.json, _dump_json(report))
    return EXIT_OK


# -- entry point ---------------------------------------------------------------

def build_parser():
    p = _Parser(prog="subband-ffc",
                description="Frequency-separation adaptive feedforward control simulator.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("design-bank", help="design a cosine-modulated analysis bank")
    d.add_argument("--regions", type=int, default=4)
    d.add_argument("--taps", type=int, default=64)
    d.add_argument("--atten-db", type=float, default=110.0)
    d.add_argument("--fs-hz", type=float, default=41760.0)
    d.add_argument("--out", help="write coefficients and metrics (JSON) to this file")
    d.set_defaults(func=cmd_design_bank)

    s = sub.add_parser("simulate", help="run one closed-loop simulation")
    s.add_argument("--scenario", default="smoke",
                   help=f"builtin ({', '.join(BUILTINS)}) or scenario JSON file")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--samples", type=int, help="total sample budget")
    s.add_argument("--seed", type=int, help=f"override seeds (beats {SEED_ENV})")
    s.add_argument("--noise-db", type=float,
                   help="add measurement noise this many dB below the disturbance")
    s.add_argument("--bank", help="bank file written by design-bank")
    s.add_argument("--open-loop", action="store_true", help="record u = 0 baseline only")
    s.add_argument("--no-report", action="store_true", help="skip attenuation and fits")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("report", help="tables for a finished simulate directory")
    r.add_argument("trace_dir")
    r.add_argument("--json", help="also write the report as JSON to this file")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        _err(str(exc))
        return EXIT_USAGE
    try:
        return args.func(args)
    except (ConfigurationError, SubbandFFCError, OSError) as exc:
        _err(str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
