"""Command line entry point: ``relayqkd {run,sweep,search,check}``.

Exit codes: 0 success, 1 theorem violation or failed check, 2 usage or
configuration error.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import csv
import datetime
import hashlib
import io
import itertools
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import yaml

from . import __version__
from .protocol import theorem_certificate
from .scenario import ConfigError, normalize, parse, resolve, set_path, spec_hash
from .search import SearchDims, search_positive_delta
from .selfcheck import CheckCounts, self_check
from .tensorspace import DimensionError, LayoutError, NumericConfig, numerics, use_numerics

REPORT_SCHEMA = "relayqkd.rate_report"
SEARCH_SCHEMA = "relayqkd.search_result"
CHECK_SCHEMA = "relayqkd.self_check"
SCHEMA_VERSION = "1.0"

SWEEP_COLUMNS = (
    "R", "R_prime", "R_star", "Delta", "gamma",
    "coherent_conditional", "identity_residual", "theorem_ok",
)

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    """Provenance of one invocation; ``timing`` is the only field allowed to vary between reruns."""

    command: str
    config_path: str | None
    config_sha256: str | None
    seed: int | None
    tolerance_overrides: dict
    outputs: list
    started: float = 0.0

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config_path": self.config_path,
            "config_sha256": self.config_sha256,
            "seed": self.seed,
            "tolerance_overrides": self.tolerance_overrides,
            "outputs": self.outputs,
            "version": __version__,
            "timing": {
                "started_utc": datetime.datetime.fromtimestamp(self.started, datetime.timezone.utc).isoformat(),
                "elapsed_seconds": round(time.time() - self.started, 6),
            },
        }


def _numeric_config(args) -> NumericConfig:
    cfg = numerics().scaled(args.tol_scale)
    if args.dmax is not None:
        if args.dmax < 1:
            raise UsageError("--dmax must be positive")
        cfg = NumericConfig(**{**cfg.as_dict(), "dmax": args.dmax})
    return cfg


def _overrides(args) -> dict:
    return {"tol_scale": args.tol_scale, "dmax": args.dmax}


def _read_config(path: str, seed: int | None) -> tuple[dict, str]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    data = p.read_bytes()
    raw = parse(data.decode(), str(p))
    if seed is not None:
        raw["metadata"] = dict(raw.get("metadata") or {}, seed=seed)
    return normalize(raw), hashlib.sha256(data).hexdigest()


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


def build_report(spec: dict, numeric: NumericConfig) -> dict:
    """Report object for one scenario; everything except the manifest is deterministic."""
    with use_numerics(numeric):
        report = theorem_certificate(resolve(spec))
    return {
        "schema": REPORT_SCHEMA,
        "schema_version": SCHEMA_VERSION,
        "scenario": spec["metadata"]["name"],
        "seed": spec["metadata"]["seed"],
        "config_hash": spec_hash(spec),
        "tolerances": numeric.as_dict(),
        **report.to_dict(),
    }


def cmd_run(args) -> int:
    numeric = _numeric_config(args)
    manifest = RunManifest("run", args.config, None, args.seed, _overrides(args),
                           [args.out] if args.out else [], time.time())
    spec, manifest.config_sha256 = _read_config(args.config, args.seed)
    manifest.seed = spec["metadata"]["seed"]
    report = build_report(spec, numeric)
    report["manifest"] = manifest.to_dict()
    _emit(_dumps(report), args.out)
    return EXIT_VIOLATION if report["theorem_ok"] is False else EXIT_OK


def parse_axis(text: str) -> tuple[tuple[str, ...], list]:
    """``path[+path...]=v1,v2,...``; linked paths take the same value at every point."""
    if "=" not in text:
        raise UsageError(f"axis {text!r} must look like path=v1,v2,...")
    paths, values = text.split("=", 1)
    keys = tuple(p.strip() for p in paths.split("+") if p.strip())
    try:
        vals = [yaml.safe_load(v) for v in values.split(",") if v.strip()]
    except yaml.YAMLError as exc:
        raise UsageError(f"axis {text!r}: unreadable value ({exc.__class__.__name__})") from exc
    if not keys or not vals:
        raise UsageError(f"axis {text!r} needs at least one path and one value")
    return keys, vals


def sweep_points(spec: dict, axes: list) -> list[tuple[list, dict]]:
    """Cartesian grid in row-major order of ``axes``; each point is (values, spec)."""
    points = []
    for combo in itertools.product(*(vals for _, vals in axes)):
        point = spec
        for (keys, _), value in zip(axes, combo):
            for key in keys:
                point = set_path(point, key, value)
        points.append((list(combo), normalize(point)))
    return points


def _sweep_row(spec: dict, numeric: NumericConfig) -> dict:
    with use_numerics(numeric):
        report = theorem_certificate(resolve(spec)).to_dict()
    return {k: report[k] for k in SWEEP_COLUMNS}


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def run_sweep(spec: dict, axes: list, numeric: NumericConfig, jobs: int = 1) -> tuple[str, list]:
    """CSV text plus the raw rows, in grid order regardless of worker completion order."""
    points = sweep_points(spec, axes)
    specs = [s for _, s in points]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_row, specs, [numeric] * len(specs)))
    else:
        rows = [_sweep_row(s, numeric) for s in specs]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", *("+".join(keys) for keys, _ in axes), *SWEEP_COLUMNS])
    for i, ((values, _), row) in enumerate(zip(points, rows)):
        writer.writerow([i, *(_cell(v) for v in values), *(_cell(row[k]) for k in SWEEP_COLUMNS)])
    return buf.getvalue(), rows


def cmd_sweep(args) -> int:
    started = time.time()
    numeric = _numeric_config(args)
    spec, sha = _read_config(args.config, args.seed)
    axes = [parse_axis(a) for a in args.axis]
    table, rows = run_sweep(spec, axes, numeric, args.jobs)
    _emit(table, args.out)
    if args.out:
        manifest = RunManifest("sweep", args.config, sha, spec["metadata"]["seed"], _overrides(args),
                               [args.out], started)
        Path(args.out + ".manifest.json").write_text(_dumps({
            "config_hash": spec_hash(spec),
            "tolerances": numeric.as_dict(),
            "axes": [{"paths": list(k), "values": v} for k, v in axes],
            "manifest": manifest.to_dict(),
        }))
    return EXIT_VIOLATION if any(r["theorem_ok"] is False for r in rows) else EXIT_OK


def cmd_search(args) -> int:
    numeric = _numeric_config(args)
    started = time.time()
    dims = SearchDims(e_max=args.e_max, max_labels=args.max_labels, max_outcomes=args.max_outcomes)
    seed = 0 if args.seed is None else args.seed
    with use_numerics(numeric):
        result = search_positive_delta(args.budget, dims, seed, args.coherence_tol, args.delta_threshold, args.jobs)
    manifest = RunManifest("search", None, None, seed, _overrides(args), [args.out] if args.out else [], started)
    out = {
        "schema": SEARCH_SCHEMA,
        "schema_version": SCHEMA_VERSION,
        "tolerances": numeric.as_dict(),
        **result.to_dict(),
        "manifest": manifest.to_dict(),
    }
    _emit(_dumps(out), args.out)
    return EXIT_OK


def cmd_check(args) -> int:
    numeric = _numeric_config(args)
    started = time.time()
    seed = 0 if args.seed is None else args.seed
    counts = CheckCounts(scenarios=args.scenarios)
    with use_numerics(numeric):
        report = self_check(seed, counts)
    for line in report.lines():
        print(line, file=sys.stderr if args.out is None else sys.stdout)
    if args.out:
        manifest = RunManifest("check", None, None, seed, _overrides(args), [args.out], started)
        _emit(_dumps({
            "schema": CHECK_SCHEMA,
            "schema_version": SCHEMA_VERSION,
            "tolerances": numeric.as_dict(),
            "passed": report.passed,
            "results": [
                {"name": r.name, "samples": r.samples, "max_violation": r.max_violation,
                 "tolerance": r.tolerance, "passed": r.passed}
                for r in report.results
            ],
            "manifest": manifest.to_dict(),
        }), args.out)
    return EXIT_OK if report.passed else EXIT_VIOLATION


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=d(None), help="master seed (overrides metadata.seed)")
    parser.add_argument("--tol-scale", type=float, default=d(1.0), help="multiply every numerical tolerance")
    parser.add_argument("--out", default=d(None), help="output file (default: stdout)")
    parser.add_argument("--jobs", type=int, default=d(1), help="worker processes for sweeps and searches")
    parser.add_argument("--dmax", type=int, default=d(None), help="largest allowed Hilbert-space dimension")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relayqkd", description="Key rates for relay-based QKD scenarios.")
    parser.add_argument("--version", action="version", version=__version__)
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="evaluate one scenario and write a JSON report")
    run.add_argument("config")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", parents=[common], help="evaluate a parameter grid and write CSV")
    sweep.add_argument("config")
    sweep.add_argument("--axis", action="append", required=True,
                       help="path[+path...]=v1,v2,... ; repeat for a multi-dimensional grid")
    sweep.set_defaults(func=cmd_sweep)

    search = sub.add_parser("search", parents=[common], help="random search for Delta > 0 at zero coherent information")
    search.add_argument("--budget", type=int, default=10)
    search.add_argument("--e-max", type=int, default=2)
    search.add_argument("--max-labels", type=int, default=4)
    search.add_argument("--max-outcomes", type=int, default=4)
    search.add_argument("--coherence-tol", type=float, default=1e-4)
    search.add_argument("--delta-threshold", type=float, default=1e-4)
    search.set_defaults(func=cmd_search)

    check = sub.add_parser("check", parents=[common], help="entropic inequality and protocol identity self-check")
    check.add_argument("--scenarios", type=int, default=50)
    check.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    if args.jobs < 1:
        print("relayqkd: error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    if args.tol_scale <= 0:
        print("relayqkd: error: --tol-scale must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (ConfigError, UsageError, DimensionError, LayoutError) as exc:
        print(f"relayqkd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
