"""Command-line pipeline: convert, fit, estimate, and reproduce lab runs.

Exit codes: 0 success, 1 computation failure, 2 usage or input-parse error.
Machine-readable output goes to files or stdout; human summaries go to
stderr so the commands compose in shell pipelines.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys

import numpy as np

from . import circuits, estimator, pdn_lab, spectra, touchstone, vector_fit
from .waveform import WaveformCsvError, read_waveform_csv, write_waveform_csv

USAGE_EXIT = 2
COMPUTE_EXIT = 1


class _InputError(Exception):
    """Bad input file or argument combination (exit code 2)."""


def _say(args, msg: str):
    if not getattr(args, "quiet", False):
        print(msg, file=sys.stderr)


def _outpath(args, path: str) -> str:
    if os.path.isabs(path) or not getattr(args, "output_dir", None):
        return path
    os.makedirs(args.output_dir, exist_ok=True)
    return os.path.join(args.output_dir, path)


def _read_touchstone(path: str, ports: int | None):
    try:
        if ports is None:
            ports, _ = touchstone.infer_ports_and_kind(path)
        with open(path, "r", encoding="utf-8") as fh:
            return touchstone.parse_touchstone(fh.read(), ports)
    except (touchstone.TouchstoneParseError, OSError, ValueError) as exc:
        raise _InputError(f"{path}: {exc}") from exc


def _read_waveform(path: str):
    try:
        return read_waveform_csv(path)
    except (WaveformCsvError, OSError) as exc:
        raise _InputError(str(exc)) from exc


def _read_model(path: str):
    try:
        return vector_fit.load_model(path)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise _InputError(f"{path}: {exc}") from exc


def _as_y(resp, args):
    if resp.kind == "Y":
        return resp
    _say(args, f"note: converting {resp.kind}-parameters to Y for fitting")
    return spectra.convert(resp, "Y")


def _report_json(path: str, payload: dict):
    doc = dict(payload)
    doc["metadata"] = {
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat()
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_convert(args) -> int:
    resp, opts = _read_touchstone(args.input, args.ports)
    converted = spectra.convert(resp, args.to.upper())
    out_opts = touchstone.TouchstoneOptions(
        freq_unit=args.unit,
        param_kind=converted.kind,
        value_format=args.format,
        ref_resistance=converted.ref_impedance,
    )
    out = _outpath(args, args.out)
    touchstone.write_touchstone_file(out, converted, out_opts)
    _say(args, f"wrote {converted.kind}-parameters ({converted.n_freqs} points) to {out}")
    return 0


def cmd_vfit(args) -> int:
    if args.poles < 1:
        raise _InputError("--poles must be >= 1")
    resp, _ = _read_touchstone(args.input, args.ports)
    resp = _as_y(resp, args)
    model = vector_fit.vector_fit(
        resp, args.poles, args.iters, args.weighting, fit_e=args.fit_e
    )
    p_report = vector_fit.passivity_check(model)
    model.passive = p_report.is_passive
    out = _outpath(args, args.out)
    vector_fit.save_model(out, model)
    _say(args, f"fit_error: {model.fit_error:.6g}")
    _say(args, f"passive: {'true' if p_report.is_passive else 'false'}")
    if not p_report.is_passive:
        worst = p_report.worst()
        _say(args, f"worst conductance eigenvalue: {worst:.6g} S")
    _say(args, f"wrote rational model ({model.n_poles} poles) to {out}")
    return 0


def cmd_estimate(args) -> int:
    model = _read_model(args.model)
    v1 = _read_waveform(args.v1)
    v2 = _read_waveform(args.v2)
    if args.path == "time":
        result = estimator.nice_time_domain(
            model, v1, v2, method=args.method, allow_nonpassive=args.allow_nonpassive
        )
    else:
        result = estimator.nice_freq_domain(
            model,
            v1,
            v2,
            extrapolate_dc=args.extrapolate_dc,
            allow_out_of_band=args.allow_out_of_band,
        )
    i1, i2 = result.i1, result.i2
    if args.load_convention:
        i2 = i2.with_samples(-i2.samples)
    write_waveform_csv(_outpath(args, args.out_prefix + "_i1.csv"), i1)
    write_waveform_csv(_outpath(args, args.out_prefix + "_i2.csv"), i2)
    _report_json(
        _outpath(args, args.out_prefix + "_diagnostics.json"),
        {
            "path": result.path,
            "load_convention": bool(args.load_convention),
            "diagnostics": result.diagnostics,
        },
    )
    _say(args, f"estimated currents via {result.path}; wrote {args.out_prefix}_i1.csv / _i2.csv")
    return 0


def cmd_lab(args) -> int:
    if bool(args.scenario) == bool(args.preset):
        raise _InputError("pass exactly one of --scenario or --preset")
    if args.scenario:
        try:
            sc = pdn_lab.load_scenario(args.scenario)
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            raise _InputError(f"{args.scenario}: {exc}") from exc
    else:
        sc = pdn_lab.preset_scenario(args.preset)
    fit_opts = vector_fit.FitOptions(n_poles=args.poles, n_iter=args.iters)
    report = pdn_lab.run_lab(
        sc, fit_opts, args.path, method=args.method, allow_nonpassive=args.allow_nonpassive
    )

    v1, v2, i_load, i_src = pdn_lab.simulate_pdn(sc)
    prefix = args.out_prefix
    write_waveform_csv(_outpath(args, prefix + "_v1.csv"), v1)
    write_waveform_csv(_outpath(args, prefix + "_v2.csv"), v2)
    write_waveform_csv(_outpath(args, prefix + "_iload.csv"), i_load)
    write_waveform_csv(_outpath(args, prefix + "_isrc.csv"), i_src)
    _report_json(
        _outpath(args, prefix + "_report.json"),
        {
            "scenario": pdn_lab.scenario_to_dict(sc),
            "rel_rms_error_load": report.report2.rel_rms_error,
            "rel_rms_error_source": report.report1.rel_rms_error,
            "max_abs_error_load": report.report2.max_abs_error,
            "diagnostics": report.diagnostics,
            "runtime": report.runtime,
        },
    )
    err = report.report2.rel_rms_error
    print(f"{err:.12g}")
    _say(args, f"load-current relative RMS error: {err:.4%}")
    return 0 if err < 0.05 else COMPUTE_EXIT


def cmd_cap(args) -> int:
    resp, _ = _read_touchstone(args.input, args.ports)
    if resp.kind != "Y":
        resp = spectra.convert(resp, "Y")
    if resp.n_ports != 1:
        raise _InputError("capacitance extraction expects a 1-port file")
    if args.freqs:
        try:
            freqs = [float(tok) for tok in args.freqs.split(",")]
        except ValueError:
            raise _InputError(f"--freqs must be comma-separated numbers, got {args.freqs!r}")
    else:
        freqs = list(resp.freqs)
    print("freq_hz,capacitance_f")
    for f in freqs:
        c = spectra.capacitance_at(resp, f)
        print(f"{f:.12g},{c:.12g}")
    return 0


def cmd_fit_circuit(args) -> int:
    resp, _ = _read_touchstone(args.input, args.ports)
    resp = _as_y(resp, args)
    if resp.n_ports != 1:
        raise _InputError("equivalent-circuit fitting expects a 1-port file")
    branches, report = circuits.fit_equivalent_circuit(resp, args.branches)
    doc = {
        "version": 1,
        "branches": [
            {"r": b.r, "l": b.l, "c": b.c} for b in branches.branches
        ],
        "misfit": report.misfit,
        "n_evaluations": report.n_evaluations,
        "converged": report.converged,
        "bound_active": report.bound_active,
    }
    out = _outpath(args, args.out)
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    _say(args, f"misfit: {report.misfit:.6g} ({report.n_evaluations} evaluations)")
    if report.warning:
        _say(args, "warning: fit did not converge cleanly or hit parameter bounds")
    return 0


def cmd_deembed(args) -> int:
    thru, _ = _read_touchstone(args.thru, 2)
    dut, _ = _read_touchstone(args.dut, 2)
    result = circuits.deembed_2x_thru(thru, dut)
    out = _outpath(args, args.out)
    touchstone.write_touchstone_file(
        out,
        result,
        touchstone.TouchstoneOptions("Hz", "S", "RI", result.ref_impedance),
    )
    _say(args, f"wrote de-embedded S-parameters to {out}")
    return 0


def cmd_passivity(args) -> int:
    model = _read_model(args.model)
    report = vector_fit.passivity_check(model)
    _say(args, f"passive: {'true' if report.is_passive else 'false'}")
    for (f_lo, f_hi), worst in report.violations:
        _say(args, f"violation: {f_lo:.6g}..{f_hi:.6g} Hz, worst eigenvalue {worst:.6g} S")
    if args.enforce:
        if not args.out:
            raise _InputError("--enforce requires --out for the corrected model")
        fixed = vector_fit.passivity_enforce(model)
        vector_fit.save_model(_outpath(args, args.out), fixed)
        final = vector_fit.passivity_check(fixed)
        _say(args, f"after enforcement: passive: {'true' if final.is_passive else 'false'}")
        return 0 if final.is_passive else COMPUTE_EXIT
    return 0 if report.is_passive else COMPUTE_EXIT


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nicepdn",
        description="Non-invasive current estimation toolkit for power delivery networks",
    )
    parser.add_argument("--verbose", action="store_true", help="extra progress output")
    parser.add_argument("--quiet", action="store_true", help="suppress stderr summaries")
    parser.add_argument("--output-dir", help="directory for relative output paths")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert a Touchstone file between S/Y/Z")
    p.add_argument("input")
    p.add_argument("--to", required=True, choices=["s", "y", "z"])
    p.add_argument("--out", required=True)
    p.add_argument("--ports", type=int)
    p.add_argument("--format", default="RI", choices=["RI", "MA", "DB"])
    p.add_argument("--unit", default="Hz", choices=["Hz", "kHz", "MHz", "GHz"])
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("vfit", help="vector-fit a Touchstone file to a rational model")
    p.add_argument("input")
    p.add_argument("--poles", type=int, required=True)
    p.add_argument("--iters", type=int, default=15)
    p.add_argument("--weighting", default="inverse_magnitude",
                   choices=["uniform", "inverse_magnitude"])
    p.add_argument("--fit-e", action="store_true", dest="fit_e")
    p.add_argument("--out", required=True)
    p.add_argument("--ports", type=int)
    p.set_defaults(func=cmd_vfit)

    p = sub.add_parser("estimate", help="reconstruct port currents from V1/V2 records")
    p.add_argument("--model", required=True)
    p.add_argument("--v1", required=True)
    p.add_argument("--v2", required=True)
    p.add_argument("--path", default="time", choices=["time", "freq"])
    p.add_argument("--method", default="zoh", choices=["zoh", "trapezoidal"])
    p.add_argument("--load-convention", action="store_true",
                   help="negate I2 so it overlays the load current")
    p.add_argument("--allow-nonpassive", action="store_true")
    p.add_argument("--extrapolate-dc", action="store_true")
    p.add_argument("--allow-out-of-band", action="store_true")
    p.add_argument("--out", dest="out_prefix", required=True,
                   help="output prefix for _i1.csv/_i2.csv/_diagnostics.json")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("lab", help="run the synthetic bench end to end and score it")
    p.add_argument("--scenario", help="scenario JSON file")
    p.add_argument("--preset", choices=["pulse", "ramp", "sine", "sawtooth", "exponential"])
    p.add_argument("--path", default="time", choices=["time", "freq"])
    p.add_argument("--method", default="zoh", choices=["zoh", "trapezoidal"])
    p.add_argument("--poles", type=int, default=None)
    p.add_argument("--iters", type=int, default=15)
    p.add_argument("--allow-nonpassive", action="store_true")
    p.add_argument("--out", dest="out_prefix", required=True)
    p.set_defaults(func=cmd_lab)

    p = sub.add_parser("cap", help="report effective capacitance over frequency")
    p.add_argument("input")
    p.add_argument("--freqs", help="comma-separated spot frequencies in Hz")
    p.add_argument("--ports", type=int)
    p.set_defaults(func=cmd_cap)

    p = sub.add_parser("fit-circuit", help="fit a multi-branch RLC equivalent circuit")
    p.add_argument("input")
    p.add_argument("--branches", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ports", type=int)
    p.set_defaults(func=cmd_fit_circuit)

    p = sub.add_parser("deembed", help="remove a symmetric 2x-THRU fixture")
    p.add_argument("--thru", required=True)
    p.add_argument("--dut", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_deembed)

    p = sub.add_parser("passivity", help="check (and optionally enforce) model passivity")
    p.add_argument("--model", required=True)
    p.add_argument("--enforce", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_passivity)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except Exception as exc:  # computation failures
        print(f"error: {exc}", file=sys.stderr)
        if args.verbose:
            raise
        return COMPUTE_EXIT


if __name__ == "__main__":
    sys.exit(main())
