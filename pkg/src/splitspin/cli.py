"""Command-line entry points tying the pipeline together.

Subcommands: simulate, analyze, sweep-theta, calibrate, pulse-check, plot.
Exit codes: 0 success, 2 user error, 3 I/O error, 4 internal invariant
violation.  The default config path may be set via the SPLITSPIN_CONFIG
environment variable; explicit --config wins, built-in defaults apply last.
"""

from __future__ import annotations

import argparse
import dataclasses
import importlib.resources
import json
import math
import os
import sys
import time

import numpy as np

from . import calibration, criteria, formats, pulses, sampler
from .config import RunConfig, config_hash, load_config
from .exceptions import ModelError, SplitspinError

ENV_CONFIG = "SPLITSPIN_CONFIG"

EXIT_OK = 0
EXIT_USER = 2
EXIT_IO = 3
EXIT_INTERNAL = 4


def _resolve_config(path: str | None) -> RunConfig:
    if path is None:
        path = os.environ.get(ENV_CONFIG)
    if path is None:
        return RunConfig()
    return load_config(path)


def _write_sidecar_log(out_path: str, lines) -> None:
    with open(str(out_path) + ".log", "w") as fh:
        for line in lines:
            fh.write(line + "\n")


def _block_spec_from_header(headers) -> criteria.BlockSpec:
    for head in headers:
        cfg = head.get("config")
        if cfg:
            return criteria.BlockSpec(n_z=cfg.get("block_z", 100),
                                      n_y=cfg.get("block_y", 100),
                                      n_x=cfg.get("block_x", 20))
    return criteria.BlockSpec()


def cmd_simulate(args) -> int:
    config = _resolve_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    started = time.strftime("%Y-%m-%dT%H:%M:%S")
    records = sampler.run_experiment(config)
    header = {
        "format": "splitspin-shots-v1",
        "config_hash": config_hash(config),
        "seed": config.seed,
        "config": config.to_dict(),
    }
    formats.write_shot_records(args.out, records, header)
    _write_sidecar_log(args.out, [
        f"started {started}",
        f"finished {time.strftime('%Y-%m-%dT%H:%M:%S')}",
        f"records {len(records)}",
    ])
    print(f"wrote {len(records)} records to {args.out}")
    return EXIT_OK


def _check_hashes(headers, force: bool) -> None:
    hashes = {h.get("config_hash") for h in headers if "config_hash" in h}
    if len(hashes) > 1 and not force:
        raise ValueError(
            f"records file mixes {len(hashes)} different config hashes "
            f"({sorted(hashes)}); pass --force to analyze anyway"
        )


def cmd_analyze(args) -> int:
    headers, records = formats.read_shot_records(args.records)
    if not records:
        raise ValueError(f"{args.records}: no shot records found")
    _check_hashes(headers, args.force)
    policy = criteria.CorrectionPolicy(jitter_correction=not args.no_jitter_correction)
    spec = _block_spec_from_header(headers)
    report = criteria.build_report(records, policy=policy, spec=spec,
                                   n_resamples=args.bootstrap,
                                   seed=args.bootstrap_seed)
    payload = report.to_json_dict()
    if args.single_block:
        single = report.single_block
        key_ab = "epr_a_to_b" if policy.jitter_correction else "epr_a_to_b_uncorrected"
        key_ba = "epr_b_to_a" if policy.jitter_correction else "epr_b_to_a_uncorrected"
        payload["criteria"] = dict(single)
        payload["criteria"]["epr_a_to_b"] = single[key_ab]
        payload["criteria"]["epr_b_to_a"] = single[key_ba]
        payload["analysis_mode"] = "single_block"
    else:
        payload["analysis_mode"] = "block_average"
    if args.direction != "both":
        drop = "epr_b_to_a" if args.direction == "a2b" else "epr_a_to_b"
        payload["criteria"] = {k: v for k, v in payload["criteria"].items()
                               if not k.startswith(drop)}
    payload["meta"] = {
        "records_file": str(args.records),
        "config_hash": headers[0].get("config_hash") if headers else None,
        "n_records": len(records),
    }
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if args.csv:
        formats.write_report_csv(args.csv, report)
    crit = payload["criteria"]
    shown = {k: round(v, 4) for k, v in crit.items()
             if k in ("epr_a_to_b", "epr_b_to_a", "ent", "hei_a", "hei_b")}
    print(f"analysis of {len(records)} records ({report.n_blocks} blocks): {shown}")
    return EXIT_OK


def cmd_sweep_theta(args) -> int:
    config = _resolve_config(args.config)
    try:
        thetas = [float(t) for t in args.thetas.split(",") if t.strip()]
    except ValueError as exc:
        raise ValueError(f"could not parse --thetas {args.thetas!r}: {exc}") from exc
    if not thetas:
        raise ValueError("theta list must not be empty")
    rows = []
    for theta in thetas:
        cfg = dataclasses.replace(config, theta_b=theta)
        records = sampler.run_experiment(cfg)
        spec = criteria.BlockSpec(n_z=cfg.block_z, n_y=cfg.block_y, n_x=cfg.block_x)
        report = criteria.build_report(records, spec=spec,
                                       n_resamples=args.bootstrap,
                                       seed=args.bootstrap_seed)
        rows.append({
            "theta_rad": theta,
            "ent": report.ent, "ent_err": report.errors["ent"],
            "epr_b_to_a": report.epr_b_to_a,
            "epr_b_to_a_err": report.errors["epr_b_to_a"],
            "hei_a": report.hei_a, "hei_a_err": report.errors["hei_a"],
            "corr_zz": report.corr_zz,
        })
        print(f"theta={theta:.4f}: ent={report.ent:.4f} "
              f"epr_b_to_a={report.epr_b_to_a:.4f} hei_a={report.hei_a:.3f} "
              f"corr_zz={report.corr_zz:+.3f}")
    formats.write_sweep_csv(args.out_csv, rows)
    if args.out_svg:
        _sweep_svg(args.out_svg, rows)
    return EXIT_OK


def _sweep_svg(path, rows) -> None:
    thetas = [r["theta_rad"] for r in rows]
    formats.svg_line_plot(
        path, thetas,
        {"E_Ent": [r["ent"] for r in rows],
         "E_EPR (B->A)": [r["epr_b_to_a"] for r in rows],
         "E_Hei (A)": [r["hei_a"] for r in rows]},
        xlabel="theta (rad)", ylabel="criterion value",
        title="criteria vs. relative measurement angle", hline=1.0,
    )


def cmd_calibrate(args) -> int:
    detectivity = tuple(float(d) for d in args.detectivity.split(","))
    truth = calibration.DetectorModel(conversion=args.conversion,
                                      detectivity=detectivity,
                                      readout_sigma=args.readout_sigma)
    scan_counts = calibration.rabi_scan_counts(args.scan_points, args.n_atoms)
    scan_signals = calibration.simulate_raw_signals(scan_counts, truth, seed=args.seed)
    det_est = calibration.calibrate_detectivity(scan_signals)

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(args.seed + 1)))
    n1 = rng.binomial(args.n_atoms, 0.5, size=args.shots).astype(float)
    css_counts = np.stack([n1, args.n_atoms - n1,
                           np.zeros(args.shots), np.zeros(args.shots)], axis=1)
    css_signals = calibration.simulate_raw_signals(css_counts, truth, seed=args.seed + 2)
    conv_est = calibration.calibrate_conversion(css_signals, args.n_atoms,
                                                detectivity=det_est)
    fitted = calibration.DetectorModel(conversion=conv_est,
                                       detectivity=tuple(det_est),
                                       readout_sigma=args.readout_sigma)
    inverted = calibration.invert_counts(css_signals, fitted)
    rms = float(np.sqrt(((inverted - css_counts) ** 2).mean()))
    payload = {
        "truth": {"conversion": args.conversion, "detectivity": list(detectivity),
                  "readout_sigma": args.readout_sigma},
        "estimates": {"conversion": conv_est, "detectivity": list(det_est)},
        "relative_errors": {
            "conversion": conv_est / args.conversion - 1.0,
            "detectivity": [e / t - 1.0 for e, t in zip(det_est, detectivity)],
        },
        "inversion_rms_atoms": rms,
        "n_shots": args.shots, "scan_points": args.scan_points, "seed": args.seed,
    }
    formats.write_calibration_json(args.out, payload)
    print(f"conversion {conv_est:.4f} (true {args.conversion}), "
          f"detectivity {np.round(det_est, 4).tolist()}, inversion rms {rms:.2f} atoms")
    return EXIT_OK


def _default_scheme_path() -> str:
    return str(importlib.resources.files("splitspin").joinpath(
        "data/splitting_scheme.json"))


def cmd_pulse_check(args) -> int:
    scheme = pulses.load_scheme(args.scheme)
    rows = pulses.selectivity_report(scheme)
    formats.write_selectivity_csv(args.out, rows)
    for row in rows:
        print(f"{row['transition']}: peak {row['peak_transfer']:.4f}, "
              f"at duration {row['transfer_at_duration']:.4f}")
    if not rows:
        print("no spurious couplings listed in scheme")
    return EXIT_OK


def cmd_plot(args) -> int:
    rows = formats.read_sweep_csv(args.csv)
    if not rows:
        raise ValueError(f"{args.csv}: no rows to plot")
    _sweep_svg(args.out, rows)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splitspin",
        description="Simulate and analyze EPR steering between two split "
                    "atomic collective spins.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the pipeline and write shot records")
    p.add_argument("--config", help="JSON config path (default: $SPLITSPIN_CONFIG "
                                    "or built-in defaults)")
    p.add_argument("--out", required=True, help="output records file (JSON lines)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="evaluate all criteria on a records file")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--csv", help="optional flat CSV summary path")
    p.add_argument("--no-jitter-correction", action="store_true")
    p.add_argument("--single-block", action="store_true",
                   help="headline criteria from the whole dataset as one block")
    p.add_argument("--direction", choices=("a2b", "b2a", "both"), default="both")
    p.add_argument("--force", action="store_true",
                   help="analyze even if config hashes are mixed")
    p.add_argument("--bootstrap", type=int, default=500)
    p.add_argument("--bootstrap-seed", type=int, default=0)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep-theta", help="simulate+analyze over relative angles")
    p.add_argument("--config")
    p.add_argument("--thetas", required=True,
                   help="comma-separated angles in radians")
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-svg")
    p.add_argument("--bootstrap", type=int, default=300)
    p.add_argument("--bootstrap-seed", type=int, default=0)
    p.set_defaults(func=cmd_sweep_theta)

    p = sub.add_parser("calibrate", help="simulate and solve the detector calibration")
    p.add_argument("--out", required=True, help="calibration JSON path")
    p.add_argument("--conversion", type=float, default=2.0)
    p.add_argument("--detectivity", default="1.0,0.95,1.02,0.9")
    p.add_argument("--readout-sigma", type=float, default=6.0,
                   help="readout noise in signal units")
    p.add_argument("--n-atoms", type=int, default=1400)
    p.add_argument("--shots", type=int, default=1000)
    p.add_argument("--scan-points", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("pulse-check", help="selectivity table for a drive scheme")
    p.add_argument("--scheme", default=_default_scheme_path())
    p.add_argument("--out", required=True, help="selectivity CSV path")
    p.set_defaults(func=cmd_pulse_check)

    p = sub.add_parser("plot", help="render an SVG from a sweep CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ModelError as exc:
        print(f"error: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (ValueError, SplitspinError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
