"""Command-line entry point: coverage curves, AP counts, MC validation, sensitivity grids.

Every subcommand writes CSV files (plus JSON mirrors) and a
``manifest.json`` into ``--output``.  Exit codes: 0 success,
1 configuration/IO/validation error, 2 validation failure in strict mode.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .config import ConfigError, SystemConfig, default_config, load_config
from .coverage import (
    METHODS,
    aps_feedback,
    aps_forward,
    coverage_curve,
    coverage_feedback_closed,
    coverage_feedback_exact,
    coverage_forward,
    prop1_coefficients,
)
from .montecarlo import mc_connectable_aps, mc_coverage, required_trials, z_score
from .sensitivity import run_sensitivity

log = logging.getLogger("feedback_coverage")

EXIT_OK, EXIT_ERROR, EXIT_STRICT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    config_hash: str
    seed: int | None = None
    outputs: list[str] = field(default_factory=list)
    timestamp: str = ""

    def stable_dict(self) -> dict:
        """Run identity without timestamp or paths, safe to embed in reproducible outputs."""
        return {"command": self.command, "config_hash": self.config_hash, "seed": self.seed}


def parse_grid(spec: str) -> list[float]:
    """``start:stop:step`` (inclusive stop), a comma list, or a single value."""
    spec = spec.strip()
    try:
        if ":" in spec:
            parts = [float(p) for p in spec.split(":")]
            if len(parts) != 3:
                raise UsageError(f"grid spec {spec!r} must be start:stop:step")
            start, stop, step = parts
            if not step > 0:
                raise UsageError(f"grid step must be positive in {spec!r}")
            if stop < start:
                raise UsageError(f"grid {spec!r} must ascend (stop < start)")
            n = int(math.floor((stop - start) / step + 1e-9))
            values = [start + i * step for i in range(n + 1)]
        else:
            values = [float(p) for p in spec.split(",") if p.strip()]
    except ValueError as exc:
        raise UsageError(f"cannot parse grid spec {spec!r}: {exc}") from None
    if not values:
        raise UsageError(f"grid spec {spec!r} is empty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise UsageError(f"grid {spec!r} must be strictly ascending")
    return values


def _distance_grid(spec: str, cfg: SystemConfig) -> list[float]:
    values = parse_grid(spec)
    below = [v for v in values if v < cfg.min_distance]
    if below:
        raise UsageError(
            f"distance {below[0]} m is below the far-field guard "
            f"(min_distance = {cfg.min_distance} m)")
    return values


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


class _Writer:
    def __init__(self, outdir: Path, manifest: RunManifest):
        self.outdir = outdir
        self.manifest = manifest
        outdir.mkdir(parents=True, exist_ok=True)

    def text(self, name: str, content: str) -> None:
        path = self.outdir / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(content)
        self.manifest.outputs.append(str(path))

    def json(self, name: str, payload: dict) -> None:
        payload = dict(payload)
        payload["manifest"] = self.manifest.stable_dict()
        self.text(name, json.dumps(payload, indent=2, sort_keys=True) + "\n")

    def finish(self) -> None:
        self.manifest.timestamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        path = self.outdir / "manifest.json"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(dataclasses.asdict(self.manifest), indent=2) + "\n")


def _load(args) -> SystemConfig:
    return load_config(args.config) if args.config else default_config()


def cmd_coverage(args) -> int:
    cfg = _load(args)
    grid = _distance_grid(args.grid, cfg)
    methods = list(METHODS) if args.method == "all" else [_method_name(args.method)]
    w = _Writer(Path(args.output), RunManifest("coverage", cfg.config_hash))
    for method in methods:
        curve = coverage_curve(method, grid, cfg)
        w.text(f"coverage_{method}.csv", curve.to_csv())
        w.json(f"coverage_{method}.json", curve.to_dict())
    w.finish()
    return EXIT_OK


def _method_name(flag: str) -> str:
    return "forward-closed" if flag == "forward" else flag


def cmd_aps(args) -> int:
    cfg = _load(args)
    grid = _distance_grid(args.grid, cfg)
    mode = args.mode
    coeffs = prop1_coefficients(cfg) if mode in ("feedback", "both") else None
    header = ["distance_m"]
    if mode in ("forward", "both"):
        header.append("m_forward")
    if mode in ("feedback", "both"):
        header.append("m_feedback")
    if mode == "both":
        header.append("ratio")
    rows = []
    for d in grid:
        row = [d]
        mc = aps_forward(d, cfg) if mode in ("forward", "both") else None
        mf = aps_feedback(d, coeffs, cfg) if coeffs is not None else None
        if mc is not None:
            row.append(mc)
        if mf is not None:
            row.append(mf)
        if mode == "both":
            row.append(mf / mc if mc > 0 else math.inf)
        rows.append(row)
    w = _Writer(Path(args.output), RunManifest("aps", cfg.config_hash))
    w.text("aps.csv", _csv(header, rows))
    w.json("aps.json", {"mode": mode, "columns": header,
                        "rows": [dict(zip(header, map(float, r))) for r in rows]})
    w.finish()
    return EXIT_OK


VALIDATE_HEADER = ["quantity", "method", "distance_m", "analytical", "mc_mean", "std_error",
                   "ci_low", "ci_high", "z_score", "n", "budget_ok"]


def cmd_validate(args) -> int:
    cfg = _load(args)
    if args.trials < 100:
        raise UsageError(f"--trials must be >= 100, got {args.trials}")
    grid = _distance_grid(args.grid, cfg)
    modes = ["forward", "feedback"] if args.mode == "both" else [args.mode]
    rows = []
    budget_warnings = []
    coeffs = prop1_coefficients(cfg) if "feedback" in modes else None
    for r in grid:
        for mode in modes:
            est = mc_coverage(r, mode, cfg, args.trials, args.seed, workers=args.workers)
            if mode == "forward":
                refs = [("forward-closed", coverage_forward(r, cfg))]
            else:
                refs = [("feedback-exact", coverage_feedback_exact(r, cfg)),
                        ("feedback-closed", coverage_feedback_closed(r, coeffs, cfg))]
            for method, value in refs:
                need = required_trials(value)
                ok = args.trials >= need
                if not ok:
                    budget_warnings.append(
                        f"{method} at R={r} m: p={value:.3g} needs ~{need:.3g} trials, "
                        f"got {args.trials}")
                rows.append(["coverage", method, r, value, est.mean, est.std_error,
                             est.ci95[0], est.ci95[1], z_score(est, value), est.n_trials, ok])
    if args.aps_grid:
        for d in _distance_grid(args.aps_grid, cfg):
            for mode in modes:
                est = mc_connectable_aps(d, mode, cfg, args.realizations, args.seed,
                                         workers=args.workers)
                if mode == "forward":
                    method, value = "forward-closed", aps_forward(d, cfg)
                else:
                    method, value = "feedback-closed", aps_feedback(d, coeffs, cfg)
                rows.append(["aps", method, d, value, est.mean, est.std_error,
                             est.ci95[0], est.ci95[1], z_score(est, value), est.n_trials,
                             True])
    within = sum(1 for row in rows if abs(row[8]) <= 3.0)
    passed = within >= 0.95 * len(rows)
    for msg in budget_warnings:
        log.warning("trial budget too small: %s", msg)

    w = _Writer(Path(args.output), RunManifest("validate", cfg.config_hash, seed=args.seed))
    w.text("validate.csv", _csv(VALIDATE_HEADER, rows))
    summary = {"points": len(rows), "within_3_sigma": within, "pass": passed,
               "budget_warnings": budget_warnings, "trials": args.trials,
               "realizations": args.realizations}
    w.json("validate.json", {"summary": summary,
                             "rows": [dict(zip(VALIDATE_HEADER, r)) for r in rows]})
    w.finish()
    print(f"validate: {within}/{len(rows)} points within 3 sigma -> "
          f"{'PASS' if passed else 'FAIL'}")
    if args.strict and (budget_warnings or not passed):
        return EXIT_STRICT_FAIL
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    cfg = _load(args)
    a_values = [int(round(a)) for a in parse_grid(args.a_grid)]
    r_values = _distance_grid(args.grid, cfg)
    pu_values = [p * 1e-3 for p in parse_grid(args.pu_grid)]
    report = run_sensitivity(cfg, a_values, r_values, pu_values)
    w = _Writer(Path(args.output), RunManifest("sensitivity", cfg.config_hash))
    for step, table in report.steps.items():
        w.text(f"step{step}_error.csv", table.to_csv())
    w.text("mf_error.csv", report.grid.to_csv())
    w.json("mf_error.json", report.grid.to_dict())
    w.json("verdicts.json", report.summary())
    w.finish()
    for name, verdict in report.verdicts.items():
        print(f"{name}: {verdict['status']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feedback-coverage",
        description="Uplink coverage of feedback-aided IoT links: analysis and simulation.")
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="JSON scenario file (default: shipped scenario)")
    common.add_argument("--output", metavar="DIR", default="out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coverage", parents=[common], help="coverage probability curves")
    p.add_argument("--method", default="all",
                   choices=["forward", "feedback-exact", "feedback-gl", "feedback-closed", "all"])
    p.add_argument("--grid", default="25:300:25", metavar="SPEC", help="distances [m]")
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("aps", parents=[common], help="expected connectable-AP counts")
    p.add_argument("--mode", default="both", choices=["forward", "feedback", "both"])
    p.add_argument("--grid", default="25:300:25", metavar="SPEC", help="disk radii [m]")
    p.set_defaults(func=cmd_aps)

    p = sub.add_parser("validate", parents=[common], help="analytical vs Monte Carlo")
    p.add_argument("--mode", default="both", choices=["forward", "feedback", "both"])
    p.add_argument("--grid", default="50:200:50", metavar="SPEC", help="distances [m]")
    p.add_argument("--aps-grid", default=None, metavar="SPEC",
                   help="disk radii [m] for AP-count checks (off by default)")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--realizations", type=int, default=1000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--strict", action="store_true",
                   help="exit 2 on a failed check or an unresolvable trial budget")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sensitivity", parents=[common], help="approximation-error grids")
    p.add_argument("--a-grid", default="1:8:1", metavar="SPEC", help="feedback ratios")
    p.add_argument("--grid", default="25:300:25", metavar="SPEC",
                   help="distances R and radii D [m]")
    p.add_argument("--pu-grid", default="0.5,1,2", metavar="SPEC",
                   help="uplink powers [mW]")
    p.set_defaults(func=cmd_sensitivity)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError, OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
