"""Command-line entry point.

Exit codes: 0 success, 1 a check failed, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, experiments, lrp, sid
from ._accel import HAS_NUMBA
from .cart import RegressionTree, fit_cart
from .errors import CartlabError
from .model import (
    CsvFormatError,
    Dataset,
    NoiseSpec,
    component_from_dict,
    distribution_from_dict,
    fmt,
    signal_from_dict,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

OUTPUT_ENV = "CARTLAB_OUTPUT_DIR"
EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def load_mapping(path):
    """Read a TOML (``.toml``) or JSON file into a dict."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"file not found: {path}")
    try:
        if path.suffix == ".toml":
            with path.open("rb") as fh:
                return tomllib.load(fh)
        return json.loads(path.read_text())
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot parse {path}: {exc}") from exc


def output_dir(args):
    out = Path(args.out_dir or os.environ.get(OUTPUT_ENV) or "cartlab-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_manifest(out, command, config, outputs):
    manifest = {"command": command, "version": __version__, "numba": HAS_NUMBA,
                "config": config, "outputs": [str(p) for p in outputs]}
    path = out / f"{command}_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    return path


def _threads(args):
    return args.threads if args.threads else (os.cpu_count() or 1)


def read_points(path):
    """Feature rows from a CSV with header ``x1..xp`` (a trailing ``y`` is ignored)."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"file not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvFormatError("empty file", 1)
    header = [h.strip() for h in rows[0]]
    p = len(header) - (1 if header and header[-1] == "y" else 0)
    if p < 1 or header[:p] != [f"x{k + 1}" for k in range(p)]:
        raise CsvFormatError(f"header must be x1,...,xp[,y], got {','.join(header)}", 1)
    pts = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise CsvFormatError(f"expected {len(header)} fields, got {len(row)}", lineno)
        try:
            pts.append([float(c) for c in row[:p]])
        except ValueError:
            raise CsvFormatError("non-numeric field", lineno) from None
    if not pts:
        raise CsvFormatError("no data rows", 2)
    return np.array(pts)


# --- subcommands -----------------------------------------------------------


def cmd_fit(args):
    if args.depth < 0:
        raise UsageError("--depth must be >= 0")
    path = Path(args.data)
    if not path.is_file():
        raise UsageError(f"file not found: {path}")
    data = Dataset.from_csv(path)
    tree = fit_cart(data, args.depth)
    out = output_dir(args)
    tree_path = Path(args.out) if args.out else out / "tree.json"
    tree.to_json(tree_path)
    summary = {"n": data.n, "p": data.p, "depth": args.depth,
               "training_sse": tree.training_sse(data), "leaves": tree.n_leaves}
    summary_path = out / "fit_summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary))
    write_manifest(out, "fit", {"data": str(path), "depth": args.depth}, [tree_path, summary_path])
    return EXIT_OK


def cmd_predict(args):
    tree_path = Path(args.tree)
    if not tree_path.is_file():
        raise UsageError(f"file not found: {tree_path}")
    tree = RegressionTree.from_json(tree_path)
    U = read_points(args.data)
    if U.shape[1] != tree.p:
        raise UsageError(f"data has {U.shape[1]} features, tree expects {tree.p}")
    pred = tree.predict(U)
    out = output_dir(args)
    pred_path = Path(args.out) if args.out else out / "predictions.csv"
    with pred_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{k + 1}" for k in range(tree.p)] + ["prediction"])
        for row, v in zip(U, pred):
            w.writerow([fmt(x) for x in row] + [fmt(v)])
    write_manifest(out, "predict", {"tree": str(tree_path), "data": args.data}, [pred_path])
    return EXIT_OK


def _signal_and_distribution(spec):
    sig = spec.get("signal", spec)
    f = signal_from_dict(sig)
    dist = distribution_from_dict(spec.get("distribution"), f.dim)
    return f, dist


def cmd_sid_check(args):
    spec = load_mapping(args.spec)
    f, dist = _signal_and_distribution(spec)
    fam = dict(spec.get("family", {}))
    for key in ("kind", "k", "count", "seed", "depth"):
        val = getattr(args, "family" if key == "kind" else key)
        if val is not None:
            fam[key] = val
    base = sid.default_family(f.dim)
    if fam.get("kind", base.kind) == base.kind:
        fam = {**base.__dict__, **fam}
    family = sid.CellFamily.from_dict(fam)
    grid = args.grid or spec.get("grid_size", sid.DEFAULT_GRID)
    report = sid.estimate_sid_coefficient(f, dist, family, grid, refine=not args.no_refine,
                                          threads=_threads(args))
    out = output_dir(args)
    json_path, csv_path = out / "sid_report.json", out / "sid_cells.csv"
    report.to_json(json_path)
    report.to_csv(csv_path)
    print(f"lambda_hat={fmt(report.lambda_hat)} cells={report.cells_searched} "
          f"skipped={report.cells_skipped} family={report.family}")
    config = {"signal": f.to_dict(), "distribution": dist.to_dict(),
              "family": family.__dict__, "grid_size": grid, "refine": not args.no_refine}
    write_manifest(out, "sid-check", config, [json_path, csv_path])
    return EXIT_OK


def cmd_lrp_check(args):
    spec = load_mapping(args.spec)
    g = component_from_dict(spec.get("component", spec))
    fam = dict(spec.get("family", {}))
    for key in ("kind", "k", "count", "seed", "lower", "upper"):
        val = getattr(args, "family" if key == "kind" else key)
        if val is not None:
            fam[key] = val
    family = lrp.IntervalFamily.from_dict(fam)
    cert = lrp.certify_lrp(g, family)
    out = output_dir(args)
    path = out / "lrp_certificate.json"
    cert.to_json(path)
    tau = "unbounded" if cert.failed else fmt(cert.tau_measured)
    print(f"tau_measured={tau} tau_closed_form={cert.tau_closed_form} pass={cert.valid}")
    write_manifest(out, "lrp-check", {"component": g.to_dict(), "family": family.to_dict()}, [path])
    return EXIT_OK if cert.valid else EXIT_FAILED


def _section(spec, name):
    return dict(spec.get(name, spec))


def cmd_rate(args):
    cfg = _section(load_mapping(args.config), "rate")
    for key in ("replicates", "base_seed"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    config = experiments.ExperimentConfig.from_dict(cfg)
    result = experiments.run_rate_experiment(config, threads=_threads(args))
    out = output_dir(args)
    paths = experiments.write_rate_outputs(result, out)
    print(f"slope={result.slope} reference={result.reference_slope} {result.slope_note}".rstrip())
    write_manifest(out, "rate", config.to_dict(), paths)
    return EXIT_OK


XOR_DEFAULTS = {"n_grid": [100, 1000, 10000], "replicates": 50, "base_seed": 7,
                "noise": {"kind": "bounded-uniform", "m": 0.25}, "near": 0.1, "n_mc": 20000}


def cmd_xor(args):
    cfg = dict(XOR_DEFAULTS)
    cfg.update(_section(load_mapping(args.config), "xor"))
    for key in ("replicates", "base_seed"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    unknown = set(cfg) - set(XOR_DEFAULTS)
    if unknown:
        raise UsageError(f"unknown xor keys: {sorted(unknown)}")
    report = experiments.run_xor_demo(cfg["n_grid"], int(cfg["replicates"]), int(cfg["base_seed"]),
                                      noise=NoiseSpec.from_dict(cfg["noise"]), near=cfg["near"],
                                      n_mc=int(cfg["n_mc"]), threads=_threads(args))
    out = output_dir(args)
    paths = experiments.write_xor_outputs(report, out)
    print(json.dumps(report.to_dict()))
    write_manifest(out, "xor", cfg, paths)
    return EXIT_OK


VERIFY_DEFAULTS = {"signals": ["linear", "quadratic", "two-piece", "xor"], "cases": 20, "seed": 0,
                   "grid_size": 256, "tolerances": {}}


def cmd_verify(args):
    cfg = dict(VERIFY_DEFAULTS)
    cfg.update(_section(load_mapping(args.config), "verify"))
    # precedence: defaults < file "tolerance" < file [tolerances] < --tolerance
    tolerances = dict(experiments.DEFAULT_TOLERANCES)
    if "tolerance" in cfg:
        common = float(cfg.pop("tolerance"))
        tolerances = {k: common for k in tolerances}
    tolerances.update(cfg.get("tolerances", {}))
    if args.tolerance is not None:
        tolerances = {k: args.tolerance for k in tolerances}
    cfg["tolerances"] = tolerances
    unknown = set(cfg) - set(VERIFY_DEFAULTS)
    if unknown:
        raise UsageError(f"unknown verify keys: {sorted(unknown)}")
    report = experiments.run_verification_suite(cfg["signals"], cases=int(cfg["cases"]),
                                                seed=int(cfg["seed"]), tolerances=tolerances,
                                                grid_size=int(cfg["grid_size"]))
    out = output_dir(args)
    paths = experiments.write_verify_outputs(report, out)
    for c in report.checks:
        status = "PASS" if c.passed else "FAIL"
        note = " (expected failure)" if c.expected_failure else ""
        print(f"{status} {c.signal:10s} {c.check:20s} worst={c.worst:.3e} tol={c.tolerance:.1e}{note}")
    write_manifest(out, "verify", cfg, paths)
    return EXIT_OK if report.passed else EXIT_FAILED


# --- parser ----------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="cartlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"cartlab {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", help=f"output directory (default ${OUTPUT_ENV} or ./cartlab-out)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads for sweeps and replicates (default: all cores)")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("fit", parents=[common], help="fit a CART tree to a CSV dataset")
    p.add_argument("data", help="CSV with header x1,...,xp,y")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--out", help="tree JSON path (default OUT_DIR/tree.json)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", parents=[common], help="predict with a fitted tree")
    p.add_argument("tree", help="tree JSON written by fit")
    p.add_argument("data", help="CSV with header x1,...,xp (a y column is ignored)")
    p.add_argument("--out", help="predictions CSV path (default OUT_DIR/predictions.csv)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("sid-check", parents=[common], help="measure the SID coefficient of a signal")
    p.add_argument("spec", help="signal spec (JSON or TOML)")
    p.add_argument("--family", choices=["interval-grid", "random-cells", "dyadic"])
    p.add_argument("--k", type=int)
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--grid", type=int, help="thresholds per feature")
    p.add_argument("--no-refine", action="store_true", help="skip golden-section refinement")
    p.set_defaults(func=cmd_sid_check)

    p = sub.add_parser("lrp-check", parents=[common], help="certify the LRP constant of a component")
    p.add_argument("spec", help="component spec (JSON or TOML)")
    p.add_argument("--family", choices=["grid", "random"])
    p.add_argument("--k", type=int)
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lower", type=float)
    p.add_argument("--upper", type=float)
    p.set_defaults(func=cmd_lrp_check)

    for name, func, text in (("rate", cmd_rate, "error-versus-n rate experiment"),
                             ("xor", cmd_xor, "XOR root-split experiment")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("config", help="TOML or JSON config")
        p.add_argument("--replicates", type=int)
        p.add_argument("--base-seed", type=int)
        p.set_defaults(func=func)

    p = sub.add_parser("verify", parents=[common], help="run the identity and inequality checks")
    p.add_argument("config", help="TOML or JSON config")
    p.add_argument("--tolerance", type=float, help="override every tolerance")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None and args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except CsvFormatError as exc:
        print(f"cartlab {args.command}: malformed CSV, {exc}", file=sys.stderr)
    except (UsageError, CartlabError, ValueError, KeyError, OSError) as exc:
        print(f"cartlab {args.command}: {exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
