"""Command-line interface.

Subcommands: ingest, riskmatrix, fit-curve, kappa, simulate, govern, serve.
Exit codes: 0 success, 1 domain/configuration error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .config import ENV_CONFIG, load_bundle
from .errors import EmuSafetyError
from .risk import (
    RiskMatrix,
    build_risk_matrix,
    fit_expectation_curve,
    parse_crossings,
    threshold_crossings,
)
from .service import LimitServer, govern_stream
from .simulator import ApproachScenario, export_plot_data, export_trace, run_approach
from .trials import (
    MERGE_POLICIES,
    cue_counts_by_trial_index,
    first_trial_outlier,
    format_kappa_report,
    kappa_report,
    parse_annotation_pairs,
    parse_trials,
)

DEFAULT_Q_R = 0.15
DEFAULT_D_MAX = 0.30


def _write_output(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        Path(out).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")


def _write_bytes(data: bytes, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.buffer.write(data)
    else:
        Path(out).write_bytes(data)


def cmd_ingest(args) -> int:
    records = parse_trials(Path(args.trials).read_bytes())
    participants = {r.participant_id for r in records}
    coders = {r.coder_id for r in records}
    n_imo = sum(1 for r in records if r.imo)
    counts = cue_counts_by_trial_index(records)
    print(f"trials: {len(records)}")
    print(f"participants: {len(participants)}")
    print(f"coders: {len(coders)}")
    print(f"trials with IMO: {n_imo}")
    for idx in sorted(counts):
        print(f"cues at trial index {idx}: {counts[idx]}")
    print(f"first_trial_outlier: {str(first_trial_outlier(counts)).lower()}")
    return 0


def cmd_riskmatrix(args) -> int:
    records = parse_trials(Path(args.trials).read_bytes())
    matrix = build_risk_matrix(
        records,
        exclude_first_trial=not args.include_first_trial,
        distance_bin_width=args.distance_bin_width,
        velocity_bin_width=args.velocity_bin_width,
        merge_policy=args.merge_policy,
        coder=args.coder,
    )
    _write_output(json.dumps(matrix.to_dict(), indent=2), args.out)
    return 0


def cmd_fit_curve(args) -> int:
    text = Path(args.input).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        matrix = RiskMatrix.from_dict(json.loads(text))
        crossings = threshold_crossings(matrix, args.q_r)
    else:
        crossings = parse_crossings(text)
    curve = fit_expectation_curve(crossings, args.q_r, d_max=args.d_max)
    _write_output(json.dumps(curve.to_dict(), indent=2), args.out)
    return 0


def cmd_kappa(args) -> int:
    pair = parse_annotation_pairs(Path(args.pairs).read_bytes())
    report = kappa_report(pair)
    if args.json:
        _write_output(json.dumps(report, indent=2), args.out)
    else:
        _write_output(format_kappa_report(report), args.out)
    return 0


def cmd_simulate(args) -> int:
    bundle = load_bundle(args.config)
    doc = json.loads(Path(args.scenario).read_text(encoding="utf-8"))
    arm = bundle.arm if "joint_path" in doc else None
    if "max_accel" not in doc:
        doc["max_accel"] = bundle.max_accel
    scenario = ApproachScenario.from_dict(doc, arm=arm)
    trace = run_approach(scenario, bundle.safety_curves, bundle.policy)
    if args.emit_plot_data:
        _write_bytes(export_plot_data(trace), args.out)
    else:
        _write_bytes(export_trace(trace, format=args.format), args.out)
    return 0


def cmd_govern(args) -> int:
    bundle = load_bundle(args.config)
    govern_stream(bundle, sys.stdin, sys.stdout)
    return 0


def cmd_serve(args) -> int:
    bundle = load_bundle(args.config)
    host, _, port = args.bind.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"--bind expects HOST:PORT, got {args.bind!r}")
    with LimitServer((host, int(port)), bundle) as server:
        addr = server.server_address
        print(f"listening on {addr[0]}:{addr[1]}", file=sys.stderr)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emu",
        description="Risk matrices, expectation curves and a composed velocity governor "
        "for human-robot approach scenarios.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        default=None,
        help=f"configuration bundle path (default: ${ENV_CONFIG})",
    )
    common.add_argument("--out", default=None, help="output path (default: stdout)")

    p = sub.add_parser("ingest", parents=[common], help="validate and summarize a trials CSV")
    p.add_argument("trials")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("riskmatrix", parents=[common], help="trials CSV -> risk matrix JSON")
    p.add_argument("trials")
    p.add_argument("--include-first-trial", action="store_true",
                   help="keep first approaches (excluded by default)")
    p.add_argument("--distance-bin-width", type=float, default=0.05)
    p.add_argument("--velocity-bin-width", type=float, default=0.05)
    p.add_argument("--merge-policy", choices=MERGE_POLICIES, default="either_coder")
    p.add_argument("--coder", default=None, help="coder id for the specific_coder policy")
    p.set_defaults(func=cmd_riskmatrix)

    p = sub.add_parser(
        "fit-curve",
        parents=[common],
        help="risk matrix JSON or crossings CSV -> expectation curve JSON",
    )
    p.add_argument("input")
    p.add_argument("--q-r", type=float, default=DEFAULT_Q_R, dest="q_r",
                   help="IMO occurrence threshold (default 0.15)")
    p.add_argument("--d-max", type=float, default=DEFAULT_D_MAX, dest="d_max",
                   help="curve validity range in meters (default 0.30)")
    p.set_defaults(func=cmd_fit_curve)

    p = sub.add_parser("kappa", parents=[common], help="paired annotations CSV -> reliability report")
    p.add_argument("pairs")
    p.add_argument("--json", action="store_true", help="emit the machine-readable report")
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("simulate", parents=[common], help="run an approach scenario")
    p.add_argument("--scenario", required=True, help="scenario JSON path")
    p.add_argument("--format", choices=("csv", "document"), default="csv")
    p.add_argument("--emit-plot-data", action="store_true",
                   help="emit (d_h, v_cmd) pairs instead of the full trace")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("govern", parents=[common],
                       help="read telemetry lines on stdin, write limit lines on stdout")
    p.set_defaults(func=cmd_govern)

    p = sub.add_parser("serve", parents=[common], help="run the TCP limit service")
    p.add_argument("--bind", default="127.0.0.1:7180", help="HOST:PORT to listen on")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (EmuSafetyError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
