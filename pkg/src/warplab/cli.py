"""Command-line entry point.

Subcommands::

    warplab run <cfg> [--out DIR] [--threads K] [--tolerance NAME=VALUE ...]
    warplab model-tables <warping> -m DIM --grid A:B:N [--out DIR]
    warplab examples list
    warplab examples emit <name>

Exit codes: 0 success, 1 some verdict failed, 2 configuration error,
3 numeric failure in a pipeline stage.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
import time
from importlib import resources

import numpy as np

from . import __version__, kernels
from .config import apply_tolerance_overrides, config_to_text, load_config
from .errors import ConfigError, DomainError, NumericError
from .immersion import write_mesh_text
from .model_space import (
    ModelSpaceSpec,
    balance_report,
    fiber_curvature,
    isoperimetric_quotient,
    mean_curvature_eta,
    parse_warping,
    radial_curvature,
    vol_ball,
    vol_fiber,
)
from .pipeline import CURVE_COLUMNS, StageError, run_scenario

EXIT_OK, EXIT_VERDICT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
SCENARIOS = ("plane", "hyperbolic_plane", "catenoid", "higher_catenoid", "sphere")
MODEL_TABLE_COLUMNS = ("r", "w", "w1", "w2", "eta", "Kw", "Kfiber", "volS", "volB", "q", "q_eta")


def _num(x):
    """Shortest round-trip decimal; non-finite values as ``nan``/``inf``."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _json_clean(obj):
    if isinstance(obj, dict):
        return {k: _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def bundled_config_text(name: str) -> str:
    if name not in SCENARIOS:
        raise ConfigError(f"unknown example {name!r}; available: {', '.join(SCENARIOS)}")
    return resources.files("warplab").joinpath("scenarios", f"{name}.cfg").read_text(encoding="utf-8")


def curves_csv(result) -> str:
    G, E = result.growth, result.ends
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    for i, t in enumerate(G.radii.tolist()):
        w.writerow(
            [
                _num(t),
                _num(G.vol[i]),
                _num(G.area[i]),
                str(int(E.counts[i])),
                _num(G.f[i]),
                _num(G.g[i]),
                _num(G.isop_lhs[i]),
                _num(G.isop_rhs[i]),
                _num(result.eps_hat[i]),
            ]
        )
    return buf.getvalue()


def verdicts_document(result) -> dict:
    cfg, Mh, G, E = result.config, result.mesh, result.growth, result.ends
    I = Mh.immersion
    bal = result.balance
    doc = {
        "scenario": {
            "name": cfg.name,
            "description": cfg.description,
            "immersion": I.name,
            "immersion_params": {k: v for k, v in I.params.items()},
            "jacobian_mode": I.jacobian_mode,
            "param_dim": I.param_dim,
            "ambient_dim": I.ambient.dim,
            "minimal": I.minimal,
            "mesh": {
                "resolution": list(Mh.resolution),
                "vertices": Mh.num_vertices,
                "simplices": int(len(Mh.simplices)),
                "horizon": Mh.horizon if math.isfinite(Mh.horizon) else "inf",
                "r_range": list(Mh.r_range()),
                "contains_pole": Mh.contains_pole,
                "sup_sff": float(Mh.sff.max()),
                "rho_note": "rho is a shortest edge-path distance and overestimates the intrinsic distance",
            },
            "ends": {
                "stabilized_count": E.stabilized_count,
                "stabilization_window": list(E.stabilization_window) if E.stabilization_window else None,
                "horizon": E.horizon if math.isfinite(E.horizon) else "inf",
            },
        },
        "model": {
            "dim": cfg.model_dim,
            "warping": I.ambient.warping.spec,
            "balance": {
                "below_ok": bal.below_ok,
                "above_ok": bal.above_ok,
                "min_margin_below": bal.min_margin_below,
                "max_margin_above": bal.max_margin_above,
                "sufficient_condition_used": bal.sufficient_condition_used,
                "totally_balanced": bal.totally_balanced,
            },
        },
        "curves": {
            "t": G.radii.tolist(),
            "vol_Dt": G.vol.tolist(),
            "area_bdry": G.area.tolist(),
            "ends": E.counts.tolist(),
            "f": G.f.tolist(),
            "g": G.g.tolist(),
            "isop_lhs": G.isop_lhs.tolist(),
            "isop_rhs": G.isop_rhs.tolist(),
            "eps_hat": result.eps_hat.tolist(),
            "monotone_f": G.monotone_f,
            "max_monotone_violation": G.max_monotone_violation,
        },
        "hypotheses": [f.to_dict() for f in result.fits],
        "verdicts": [v.to_dict() for v in result.verdicts],
        "tolerances": dict(cfg.tolerances),
    }
    return _json_clean(doc)


def _resolve_out(args_out, cfg_dir):
    return args_out or cfg_dir or os.environ.get("WARPLAB_OUT") or "warplab_out"


def _threads(k):
    if k is None or k == 1:
        return 1
    if k == 0:
        return os.cpu_count() or 1
    if k < 0:
        raise ConfigError("--threads must be >= 0")
    return k


def cmd_run(args) -> int:
    t_start = time.perf_counter()
    cfg = load_config(args.config)
    apply_tolerance_overrides(cfg, args.tolerance)
    threads = _threads(args.threads)
    result = run_scenario(cfg, threads=threads)
    out_dir = _resolve_out(args.out, cfg.output_dir)
    os.makedirs(out_dir, exist_ok=True)
    outputs = {}
    t0 = time.perf_counter()
    if "csv" in cfg.formats:
        outputs["curves.csv"] = curves_csv(result).encode()
    if "json" in cfg.formats:
        outputs["verdicts.json"] = (json.dumps(verdicts_document(result), indent=2, sort_keys=False) + "\n").encode()
    if "mesh" in cfg.formats:
        buf = io.StringIO()
        write_mesh_text(result.mesh, buf)
        outputs["mesh.txt"] = buf.getvalue().encode()
    for name, data in outputs.items():
        with open(os.path.join(out_dir, name), "wb") as fh:
            fh.write(data)
    timings = dict(result.timings)
    timings["output"] = time.perf_counter() - t0
    timings["total"] = time.perf_counter() - t_start
    import scipy

    manifest = {
        "config": {"path": os.path.abspath(args.config), "text": cfg.text, "effective": config_to_text(cfg)},
        "versions": {
            "warplab": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "kernel_backend": kernels.BACKEND,
        },
        "threads": threads,
        "timings": timings,
        "outputs": sorted(outputs) + ["manifest.json"],
        "digests": {name: hashlib.sha256(data).hexdigest() for name, data in sorted(outputs.items())},
        "exit_code": EXIT_VERDICT if result.failed else EXIT_OK,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    for v in result.verdicts:
        status = "info" if v.kind == "advisory" else {True: "pass", False: "FAIL", None: "n/a"}[v.passed]
        margin = "" if v.margin is None else f" margin={v.margin:.4g}"
        print(f"{status:4s} {v.inequality} [{v.kind}]{margin}")
    print(f"wrote {', '.join(sorted(outputs))}, manifest.json to {out_dir}")
    return manifest["exit_code"]


def _parse_grid(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"--grid {text!r}: expected a:b:n")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"--grid {text!r}: expected numbers a:b and an integer n") from None
    if n < 1 or (n > 1 and not b > a) or a <= 0:
        raise ConfigError(f"--grid {text!r}: need 0 < a < b and n >= 1")
    return np.linspace(a, b, n)


def model_table_rows(spec: str, m: int, grid):
    try:
        w = parse_warping(spec)
    except (ValueError, DomainError) as exc:
        raise ConfigError(f"warping {spec!r}: {exc}") from None
    if m < 2:
        raise ConfigError(f"-m {m}: model dimension must be >= 2")
    M = ModelSpaceSpec(m, w)
    rows = []
    for r in np.asarray(grid, float).tolist():
        vs = float(vol_fiber(M, r))
        vb = vol_ball(M, r)
        q = isoperimetric_quotient(M, r)
        eta = float(mean_curvature_eta(w, r))
        rows.append(
            [r, w.eval(r, 0), w.eval(r, 1), w.eval(r, 2), eta, float(radial_curvature(w, r)), float(fiber_curvature(w, r)), vs, vb, q, q * eta]
        )
    return M, rows


def cmd_model_tables(args) -> int:
    grid = _parse_grid(args.grid)
    M, rows = model_table_rows(args.warping, args.m, grid)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(MODEL_TABLE_COLUMNS)
    for row in rows:
        wr.writerow([_num(x) for x in row])
    text = buf.getvalue()
    sys.stdout.write(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "model_tables.csv"), "w", encoding="utf-8") as fh:
            fh.write(text)
    if len(grid) >= 1:
        bal = balance_report(M, grid)
        print(
            f"balance: below_ok={bal.below_ok} above_ok={bal.above_ok} "
            f"min_margin_below={bal.min_margin_below!r} max_margin_above={bal.max_margin_above!r} "
            f"sufficient_condition={bal.sufficient_condition_used}",
            file=sys.stderr,
        )
    return EXIT_OK


def cmd_examples(args) -> int:
    if args.action == "list":
        for name in SCENARIOS:
            print(name)
        return EXIT_OK
    if not args.name:
        raise ConfigError("examples emit needs a scenario name")
    sys.stdout.write(bundled_config_text(args.name))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="warplab", description="Volume growth and ends of submanifolds in warped-product model spaces.")
    p.add_argument("--version", action="version", version=f"warplab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario config")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (default: [output] directory, then $WARPLAB_OUT, then ./warplab_out)")
    run.add_argument("--threads", type=int, default=1, help="worker threads, 0 = one per CPU")
    run.add_argument("--tolerance", action="append", default=[], metavar="NAME=VALUE", help="override a verdict tolerance")
    run.set_defaults(func=cmd_run)

    mt = sub.add_parser("model-tables", help="tabulate model-space quantities")
    mt.add_argument("warping", help="space_form:<b> or custom:<expression in r>")
    mt.add_argument("-m", type=int, required=True, help="model dimension")
    mt.add_argument("--grid", required=True, help="radii a:b:n")
    mt.add_argument("--out", help="also write model_tables.csv here")
    mt.set_defaults(func=cmd_model_tables)

    ex = sub.add_parser("examples", help="list or print bundled scenarios")
    ex.add_argument("action", choices=("list", "emit"))
    ex.add_argument("name", nargs="?")
    ex.set_defaults(func=cmd_examples)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors are configuration errors
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
