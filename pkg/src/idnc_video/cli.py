"""Command-line entry point: ``simulate`` for one configuration, ``sweep`` for a grid."""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError, OracleUnavailable
from .sim import SCHEDULERS, MonteCarloReport, SimConfig, monte_carlo

log = logging.getLogger("idnc_video")

EXIT_CONFIG = 2
EXIT_ORACLE = 3

# config-file tables and the SimConfig field each key maps to
SECTIONS = {
    "": {"scheduler": "scheduler", "lambda": "lam", "runs": "runs", "seed": "seed"},
    "channel": {"receivers": "receivers", "erasure_mean": "erasure_mean", "erasure_spread": "erasure_spread"},
    "deadline": {"theta": "theta", "bitrate": "bitrate"},
    "gop": {"layer_sizes": "layer_sizes", "sampler": "gop_sampler", "layer_means": "layer_means"},
    "selection": {"selector": "selector", "max_vertices": "max_vertices", "policy_budget": "policy_budget"},
}
TUPLE_FIELDS = {"layer_sizes", "layer_means"}


def load_config(path: str | Path | None) -> SimConfig:
    if path is None:
        return SimConfig()
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_mapping(doc)


def config_from_mapping(doc: dict) -> SimConfig:
    values = {}
    for key, value in doc.items():
        if isinstance(value, dict):
            if key not in SECTIONS or not key:
                raise ConfigError(f"unknown config table [{key}]")
            table = SECTIONS[key]
            for sub, v in value.items():
                if sub not in table:
                    raise ConfigError(f"unknown key {sub!r} in [{key}]")
                values[table[sub]] = v
        elif key in SECTIONS[""]:
            values[SECTIONS[""][key]] = value
        else:
            raise ConfigError(f"unknown top-level config key {key!r}")
    if "bitrate" in values and "theta" not in values:
        values["theta"] = None
    for name in TUPLE_FIELDS & values.keys():
        values[name] = tuple(values[name])
    try:
        return SimConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _overrides(args: argparse.Namespace) -> dict:
    out = {}
    for flag, name in [("scheduler", "scheduler"), ("lam", "lam"), ("receivers", "receivers"),
                       ("erasure", "erasure_mean"), ("runs", "runs"), ("seed", "seed")]:
        value = getattr(args, flag, None)
        if value is not None:
            out[name] = value
    if getattr(args, "theta", None) is not None:
        out.update(theta=args.theta, bitrate=None)
    if getattr(args, "bitrate", None) is not None:
        out.update(theta=None, bitrate=args.bitrate)
    return out


def write_reports(reports: Sequence[MonteCarloReport], out: str | None, json_path: str | None) -> None:
    rows = [r.row() for r in reports]
    header = list(rows[0])
    for row in rows[1:]:
        header += [k for k in row if k not in header]
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=header, restval="")
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if out:
            fh.close()
    if json_path:
        doc = [
            {
                "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(r.config).items()},
                "summary": row,
                "runs": [
                    {"min_pct": float(a), "mean_pct": float(b), "transmissions": int(t)}
                    for a, b, t in zip(r.min_pct, r.mean_pct, r.transmissions)
                ],
                "histogram_counts": r.histogram.tolist(),
            }
            for r, row in zip(reports, rows)
        ]
        Path(json_path).write_text(json.dumps(doc, indent=2))


def _add_common(p: argparse.ArgumentParser, many: bool) -> None:
    nargs = "+" if many else None
    p.add_argument("--config", help="TOML file with simulation settings")
    p.add_argument("--scheduler", choices=SCHEDULERS, nargs=nargs)
    p.add_argument("--lambda", dest="lam", type=float, nargs=nargs, help="expansion threshold")
    deadline = p.add_mutually_exclusive_group()
    deadline.add_argument("--theta", type=int, nargs=nargs, help="transmissions per GOP")
    deadline.add_argument("--bitrate", type=float, help="derive the deadline from a bit rate in bit/s")
    p.add_argument("--receivers", type=int, nargs=nargs)
    p.add_argument("--erasure", type=float, nargs=nargs, help="mean erasure probability")
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1, help="worker processes for the Monte Carlo runs")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--json", help="also write a JSON file with per-run detail")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="idnc-video", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("simulate", help="Monte Carlo report for one configuration"), many=False)
    _add_common(sub.add_parser("sweep", help="one report row per parameter combination"), many=True)
    return parser


def _sweep_configs(base: SimConfig, args: argparse.Namespace) -> list[SimConfig]:
    schedulers = args.scheduler or [base.scheduler]
    lams = args.lam or [base.lam]
    thetas = args.theta or [None]
    receivers = args.receivers or [base.receivers]
    erasures = args.erasure or [base.erasure_mean]
    configs = []
    for name, lam, theta, M, e in itertools.product(schedulers, lams, thetas, receivers, erasures):
        # threshold-free schedulers get one row per remaining combination, not one per lambda
        if name not in ("ew-idnc", "ew-rlnc") and lam != lams[0]:
            continue
        c = replace(base, scheduler=name, lam=lam, receivers=M, erasure_mean=e)
        configs.append(c if theta is None else replace(c, theta=theta, bitrate=None))
    return configs


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(message)s")
    try:
        base = load_config(args.config)
        if args.command == "simulate":
            configs = [replace(base, **_overrides(args))]
        else:
            single = {k: getattr(args, k) for k in ("runs", "seed") if getattr(args, k) is not None}
            if args.bitrate is not None:
                single.update(theta=None, bitrate=args.bitrate)
            configs = _sweep_configs(replace(base, **single), args)
        reports = []
        for config in configs:
            log.info("running %s", config)
            reports.append(monte_carlo(config, workers=args.workers))
        write_reports(reports, args.out, args.json)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleUnavailable as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    return 0


if __name__ == "__main__":
    sys.exit(main())
