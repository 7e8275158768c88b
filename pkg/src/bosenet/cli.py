"""Command-line entry point: ``bosenet run|sweep|design|validate-config``.

Exit codes: 0 success, 1 domain error (integration, unsupported setup),
2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import BosenetError, ConfigError
from .scenarios import (
    convergence_study,
    design_report,
    drive_from_dict,
    load_config,
    load_json,
    run_scenario,
    sweep,
)

EXIT_OK, EXIT_DOMAIN, EXIT_CONFIG = 0, 1, 2


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_run(args):
    cfg = load_config(args.config)
    result = run_scenario(cfg)
    _emit(result.to_csv(), args.out or cfg.output)
    md = result.metadata
    print(f"{cfg.scenario}: steady fidelity {md['steady_fidelity']:.4f}, "
          f"purity {md['steady_purity']:.4f}, horizon gamma*t = {md['horizon']:.4g}",
          file=sys.stderr)
    if args.convergence:
        print(json.dumps(convergence_study(cfg), indent=2, sort_keys=True), file=sys.stderr)
    return EXIT_OK


def _parse_values(text):
    try:
        values = json.loads(text)
    except json.JSONDecodeError:
        values = [json.loads(v) for v in text.split(",") if v.strip()]
    if not isinstance(values, list):
        values = [values]
    return values


def cmd_sweep(args):
    cfg = load_config(args.config)
    try:
        values = _parse_values(args.values)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse value list: {exc.msg}", "--values") from exc
    results = sweep(cfg, args.param, values)
    out = Path(args.out or cfg.output or f"{cfg.scenario}_sweep.csv")
    failed = 0
    for res in results:
        path = out.with_name(f"{out.stem}_{args.param}={res.value}{out.suffix or '.csv'}")
        if res.error is not None:
            failed += 1
            print(f"{args.param}={res.value}: FAILED: {res.error}", file=sys.stderr)
            continue
        res.output.write(path)
        md = res.output.metadata
        print(f"{args.param}={res.value}: steady fidelity {md['steady_fidelity']:.4f}, "
              f"purity {md['steady_purity']:.4f} -> {path}", file=sys.stderr)
    return EXIT_DOMAIN if failed else EXIT_OK


def cmd_design(args):
    data = load_json(args.config)
    if "drive" not in data:
        raise ConfigError("required", "drive")
    drive = drive_from_dict(data["drive"])
    report = design_report(drive, gamma=float(data.get("gamma", 7.5)),
                           ell_max=int(data.get("ell_max", 1)), n_max=data.get("n_max"),
                           threshold=float(data.get("threshold", 10.0)))
    sys.stdout.write(report.to_text())
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_validate(args):
    data = load_json(args.config)
    if isinstance(data, dict) and "drive" in data and "scenario" not in data:
        drive_from_dict(data["drive"])
    else:
        load_config(args.config)
    print(f"{args.config}: ok")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="bosenet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="evolve one scenario and write a CSV table")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--convergence", action="store_true",
                   help="also report cutoff+1 and horizon x2 variants")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a scenario once per parameter value")
    p.add_argument("--config", required=True)
    p.add_argument("--param", required=True, help="dotted config path, e.g. rates.gamma0")
    p.add_argument("--values", required=True, help="JSON list or comma-separated values")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("design", help="effective couplings, rates and regime checks")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="also write the report as JSON")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("validate-config", help="parse a config and report problems")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BosenetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
