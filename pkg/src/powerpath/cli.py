"""Command-line front end: JSON experiment configs, deterministic runs, artifacts.

Usage: ``powerpath --config experiment.json [--seed N] [--out DIR] [--threads K]``.
The config's ``command`` selects the operation; every run writes a manifest
echoing the fully resolved config (defaults included) next to its result
files.  Partial outputs go to a temp directory and are promoted on success.
Exit codes: 0 success, 2 config error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, PowerPathError
from .estimation import (EstimateRecord, TubeEstimatorConfig, cardinality_scaling,
                         convergence_experiment, default_anchor_pair, estimate_C,
                         gw_generation_mean, link_tail_frequency, record_filename,
                         records_to_csv, records_to_jsonl, subadditivity_check)
from .geometry import ConformalParams, density_from_spec, domain_from_spec
from .geodesic import dist_p
from .pathengine import EXACT, PRUNED, PathQuery, shortest_path
from .sampling import cloud_to_csv, sample_iid

COMMANDS = ("sample", "spp", "geodesic", "estimate-c", "converge", "diagnose")
DIAGNOSTICS = ("link-tail", "cardinality", "gw", "subadditivity")

_DEFAULTS = {
    "seed": 0,
    "threads": 0,
    "p": 2.0,
    "n": 1000,
    "trials": 50,
    "mode": PRUNED,
    "resolution": 256,
    "output_dir": "out",
    "density": {"kind": "uniform"},
}


def resolve_config(raw: dict) -> dict:
    """Validate a raw config dict and fill defaults; collects every problem."""
    problems = []
    cfg = dict(raw)
    command = cfg.get("command")
    if command not in COMMANDS:
        problems.append(f"command must be one of {COMMANDS}, got {command!r}")
    if "domain" not in cfg:
        problems.append("missing 'domain' block")
    for key, default in _DEFAULTS.items():
        cfg.setdefault(key, default)

    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0 or cfg["seed"] >= 2**64:
        problems.append(f"seed must be a 64-bit unsigned integer, got {cfg['seed']!r}")
    if not isinstance(cfg["threads"], int) or cfg["threads"] < 0:
        problems.append(f"threads must be a nonnegative integer, got {cfg['threads']!r}")
    try:
        if float(cfg["p"]) < 1:
            problems.append(f"p must be >= 1, got {cfg['p']}")
    except (TypeError, ValueError):
        problems.append(f"p must be numeric, got {cfg['p']!r}")
    if cfg["mode"] not in (EXACT, PRUNED):
        problems.append(f"mode must be 'exact' or 'pruned', got {cfg['mode']!r}")
    if not isinstance(cfg["n"], int) or cfg["n"] < 0:
        problems.append(f"n must be a nonnegative integer, got {cfg['n']!r}")
    if not isinstance(cfg["trials"], int) or cfg["trials"] < 2:
        problems.append(f"trials must be an integer >= 2, got {cfg['trials']!r}")

    domain = None
    if "domain" in cfg:
        try:
            domain = domain_from_spec(cfg["domain"])
        except PowerPathError as exc:
            problems.append(f"domain: {exc}")
    if domain is not None:
        try:
            density_from_spec(domain, cfg["density"])
        except PowerPathError as exc:
            problems.append(f"density: {exc}")

    if command == "estimate-c":
        cfg.setdefault("t_schedule", [10.0, 20.0, 40.0])
        cfg.setdefault("b_exponent", 0.5)
        cfg.setdefault("lambda", 1.0)
    if command == "converge":
        cfg.setdefault("n_schedule", [cfg["n"]])
        if "anchors" not in cfg and domain is not None:
            x, y = default_anchor_pair(domain)
            cfg["anchors"] = [[list(map(float, x)), list(map(float, y))]]
    if command in ("spp", "geodesic", "diagnose") and "anchors" not in cfg and domain is not None:
        x, y = default_anchor_pair(domain)
        cfg["anchors"] = [[list(map(float, x)), list(map(float, y))]]
    if command == "diagnose":
        if cfg.get("diagnostic") not in DIAGNOSTICS:
            problems.append(f"diagnose needs 'diagnostic' in {DIAGNOSTICS}, "
                            f"got {cfg.get('diagnostic')!r}")
        cfg.setdefault("threshold_factor", 1.0)
        cfg.setdefault("r0", 1.0)
        cfg.setdefault("lambda", 1.0)
        cfg.setdefault("generations", 3)
        cfg.setdefault("s", 20.0)
        cfg.setdefault("t", 20.0)
        cfg.setdefault("n_schedule", [cfg["n"]])

    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path: str | Path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"])
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config is not valid JSON: {exc}"])
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])
    return raw


def emit_plotdata(records: list[EstimateRecord], kind: str) -> str:
    """Whitespace-separated (x, y, yerr) rows for a homogeneous record list.

    The abscissa is the record's t or n parameter; rows are sorted by it.
    """
    if any(r.quantity != kind for r in records):
        raise ConfigError([f"mixed record kinds; expected only {kind!r}"])
    rows = []
    for r in records:
        x = r.params.get("t", r.params.get("n"))
        if x is None:
            raise ConfigError([f"record lacks a t or n parameter: {r.params}"])
        rows.append((float(x), r.value, r.stderr))
    rows.sort(key=lambda row: row[0])
    lines = ["# x y yerr"]
    for x, y, yerr in rows:
        lines.append(f"{x:.17g} {y:.17g} {yerr:.17g}")
    return "\n".join(lines) + "\n"


def _write_records(outdir: Path, records: list[EstimateRecord], quantity: str,
                   d: int, p: float, seed: int) -> None:
    (outdir / record_filename(quantity, d, p, seed, "csv")).write_text(
        records_to_csv(records))
    (outdir / record_filename(quantity, d, p, seed, "jsonl")).write_text(
        records_to_jsonl(records))


def _run_command(cfg: dict, outdir: Path) -> None:
    domain = domain_from_spec(cfg["domain"])
    density_spec = cfg["density"]
    f = density_from_spec(domain, density_spec)
    p = float(cfg["p"])
    seed = cfg["seed"]
    threads = cfg["threads"] or (os.cpu_count() or 1)
    params = ConformalParams(p=p, d=domain.dimension)
    command = cfg["command"]

    if command == "sample":
        cloud = sample_iid(f, domain, cfg["n"], seed)
        (outdir / f"cloud_{domain.dimension}_{seed}.csv").write_text(cloud_to_csv(cloud))

    elif command == "spp":
        (x, y), = [cfg["anchors"][0]]
        cloud = sample_iid(f, domain, cfg["n"], seed)
        res = shortest_path(PathQuery(np.asarray(x), np.asarray(y), p, cloud,
                                      mode=cfg["mode"]))
        (outdir / "path.json").write_text(
            json.dumps(res.to_json_dict(), sort_keys=True, indent=2) + "\n")

    elif command == "geodesic":
        results = []
        for x, y in cfg["anchors"]:
            est = dist_p(domain, f, params, np.asarray(x), np.asarray(y),
                         cfg["resolution"])
            results.append({"x": x, "y": y, "value": est.value,
                            "error_estimate": est.error_estimate,
                            "refinement_warning": est.refinement_warning,
                            "resolution": est.resolution})
        (outdir / "geodesic.json").write_text(
            json.dumps(results, sort_keys=True, indent=2) + "\n")

    elif command == "estimate-c":
        tube = TubeEstimatorConfig(domain.dimension, p, tuple(cfg["t_schedule"]),
                                   cfg["trials"], float(cfg["b_exponent"]),
                                   float(cfg["lambda"]))
        records = estimate_C(tube, seed, threads=threads)
        _write_records(outdir, records, "cdp", domain.dimension, p, seed)
        curve = [r for r in records if r.quantity == "mean_curve_point"]
        (outdir / "cdp_curve.dat").write_text(emit_plotdata(curve, "mean_curve_point"))

    elif command == "converge":
        anchors = [(np.asarray(a, float), np.asarray(b, float))
                   for a, b in cfg["anchors"]]
        records = convergence_experiment(domain, density_spec, params,
                                         cfg["n_schedule"], anchors, cfg["trials"],
                                         seed, resolution=cfg["resolution"],
                                         threads=threads)
        _write_records(outdir, records, "convergence_ratio", domain.dimension, p, seed)

    elif command == "diagnose":
        kind = cfg["diagnostic"]
        if kind == "link-tail":
            rec = link_tail_frequency(domain, density_spec, params, cfg["n"],
                                      float(cfg["threshold_factor"]), cfg["trials"],
                                      seed, threads=threads)
            _write_records(outdir, [rec], "tail_freq", domain.dimension, p, seed)
        elif kind == "cardinality":
            x, y = default_anchor_pair(domain)
            if cfg.get("anchors"):
                x, y = (np.asarray(v, float) for v in cfg["anchors"][0])
            rec = cardinality_scaling(domain, density_spec, params, cfg["n_schedule"],
                                      (x, y), cfg["trials"], seed, threads=threads)
            _write_records(outdir, [rec], "cardinality_slope", domain.dimension, p, seed)
        elif kind == "gw":
            recs = gw_generation_mean(float(cfg["lambda"]), float(cfg["r0"]), params,
                                      int(cfg["generations"]), cfg["trials"], seed)
            _write_records(outdir, recs, "gw_gen_mean", domain.dimension, p, seed)
        elif kind == "subadditivity":
            tube = TubeEstimatorConfig(domain.dimension, p,
                                       (float(cfg["s"]), float(cfg["s"]) + float(cfg["t"])),
                                       cfg["trials"])
            rec = subadditivity_check(tube, float(cfg["s"]), float(cfg["t"]),
                                      cfg["trials"], seed, threads=threads)
            _write_records(outdir, [rec], "subadditivity_gap", domain.dimension, p, seed)

    else:  # pragma: no cover - resolve_config rejects unknown commands
        raise ConfigError([f"unhandled command {command!r}"])


def run(cfg: dict) -> int:
    """Execute a resolved config; returns the process exit code."""
    out = Path(cfg["output_dir"])
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=out.name + ".tmp-", dir=out.parent))
    try:
        manifest = {"config": cfg, "version": __version__,
                    "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}
        (tmp / "manifest.json").write_text(json.dumps(manifest, sort_keys=True,
                                                      indent=2) + "\n")
        _run_command(cfg, tmp)
    except PowerPathError as exc:
        (tmp / "error.json").write_text(json.dumps(
            {"error": type(exc).__name__, "message": str(exc)}, indent=2) + "\n")
        _promote(tmp, out)
        print(f"error: {exc}", file=sys.stderr)
        return 3
    _promote(tmp, out)
    return 0


def _promote(tmp: Path, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for item in sorted(tmp.iterdir()):
        os.replace(item, out / item.name)
    tmp.rmdir()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="powerpath",
        description="Power-weighted shortest-path experiments")
    parser.add_argument("--config", required=True, help="JSON experiment config")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed (u64)")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker processes for trials (0 = auto)")
    args = parser.parse_args(argv)

    try:
        raw = load_config(args.config)
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.out is not None:
            raw["output_dir"] = args.out
        if args.threads is not None:
            raw["threads"] = args.threads
        cfg = resolve_config(raw)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
