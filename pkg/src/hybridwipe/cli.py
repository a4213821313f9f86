"""Command-line front end: ``simulate``, ``scan`` and ``report``.

Exit codes: 0 success, 2 parse/config error, 3 runtime simulation error.
"""

import argparse
import json
import os
import sys

from .errors import ConfigError, SimulationError
from .forensics import scan_medium
from .harness import (SimulationAborted, canonical_json, emit_report, load_config,
                      load_trace, manifest_from_json, manifest_to_json, run_scenario)
from .memory import read_image, write_image

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _write_text(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def cmd_simulate(args):
    scenario = load_config(args.config, master_seed=args.seed)
    records = load_trace(args.trace)
    os.makedirs(args.out, exist_ok=True)
    try:
        report = run_scenario(scenario, records)
    except SimulationAborted as exc:
        _write_text(os.path.join(args.out, "report.partial.json"), canonical_json(exc.partial))
        raise
    _write_text(os.path.join(args.out, "report.json"), emit_report(report, "json"))
    _write_text(os.path.join(args.out, "manifest.json"), canonical_json(manifest_to_json(report.manifest)))
    with open(os.path.join(args.out, "image.bin"), "wb") as fh:
        fh.write(report.image)
    _write_text(os.path.join(args.out, "image.meta.json"),
                json.dumps(report.image_meta, sort_keys=True, indent=1) + "\n")
    rem = report.remanence
    print(f"{len(records)} records, {len(report.completions)} deletion requests, "
          f"remanence {rem.deleted_pages_recoverable}/{rem.deleted_pages_total}")
    return EXIT_OK


def cmd_scan(args):
    image, geometry, _ = read_image(args.image)
    try:
        with open(args.manifest) as fh:
            manifest = manifest_from_json(json.load(fh), geometry.page_size)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read manifest: {exc}") from exc
    if args.window < 1:
        raise ConfigError("window must be positive")
    report = scan_medium(image, geometry, manifest, args.window)
    text = canonical_json(report.as_dict())
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_report(args):
    reports = []
    for d in args.inputs:
        path = os.path.join(d, "report.json") if os.path.isdir(d) else d
        try:
            with open(path) as fh:
                reports.append(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read report {path}: {exc}") from exc
    sys.stdout.write(emit_report(reports[0] if len(reports) == 1 else reports, args.format))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="hybridwipe",
                                     description="Hybrid DRAM+NVM privacy-deletion simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="replay a trace and write report/image")
    p.add_argument("--config", required=True, metavar="<file>")
    p.add_argument("--trace", required=True, metavar="<file>")
    p.add_argument("--seed", type=int, default=0, metavar="<u64>")
    p.add_argument("--out", required=True, metavar="<dir>")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scan", help="forensic scan of a medium image")
    p.add_argument("--image", required=True, metavar="<file>")
    p.add_argument("--manifest", required=True, metavar="<file>")
    p.add_argument("--window", type=int, default=16, metavar="<bytes>")
    p.add_argument("--out", metavar="<file>")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("report", help="re-emit one or more run reports")
    p.add_argument("--in", dest="inputs", action="append", required=True, metavar="<dir>")
    p.add_argument("--format", default="json", help="json or csv")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
