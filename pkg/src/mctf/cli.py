"""Command-line front end.

Exit codes: 0 success, 2 usage or input error, 3 numerical divergence.

The ``MCTF_NUM_THREADS`` environment variable sets how many grid cells
``mctf experiment`` runs concurrently. BLAS is pinned to one thread inside
every solve, so the value never changes the numbers.
"""

import argparse
import csv
import io as _io
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import io as tns
from .data import apply_mask, rank_heuristic, sample_uniform, synth_mctf
from .metrics import quality_report
from .solver import DivergenceError, SolverConfig, solve

logger = logging.getLogger("mctf")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3

VARIANTS = {"mctf": "convex", "ncmctf": "log"}
THREADS_ENV = "MCTF_NUM_THREADS"

TABLE_HEADER = [
    "input", "sr", "variant", "seed", "iterations", "converged",
    "rse", "psnr", "ssim", "ergas", "sam",
]


class UsageError(Exception):
    pass


def _ints(text, name):
    try:
        vals = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"{name} must be comma-separated integers, got {text!r}") from None
    if len(vals) != 3:
        raise UsageError(f"{name} needs three values, got {text!r}")
    return vals


def _num(x):
    """JSON-safe number: NaN and inf become None, ints pass through."""
    if x is None or isinstance(x, int):
        return x
    x = float(x)
    return x if math.isfinite(x) else None


def _fmt(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else ""
    return str(x)


def _write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _matrix_json(a):
    return {"shape": list(a.shape), "data": [float(v) for v in np.ravel(a, order="F")]}


def _num_threads():
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def _load_config(path):
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return cfg


def build_config(shape, variant, ranks=None, overrides=None):
    """SolverConfig from a CLI variant name, a rank spec and flat overrides.

    An explicit `ranks` wins over ``overrides["ranks"]``; with neither, or
    with ``"auto"``, the ranks come from :func:`mctf.data.rank_heuristic`.
    """
    if variant not in VARIANTS:
        raise UsageError(f"variant must be one of {sorted(VARIANTS)}, got {variant!r}")
    values = dict(overrides or {})
    values.pop("variant", None)
    file_ranks = values.pop("ranks", "auto")
    r = file_ranks if ranks is None else ranks
    if r is None or r == "auto":
        r = rank_heuristic(tuple(shape))
    elif isinstance(r, str):
        r = _ints(r, "ranks")
    try:
        return SolverConfig(ranks=tuple(r), variant=VARIANTS[variant], **values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid solver config: {exc}") from None


def run_completion(observed, mask, config, reference=None, peak=None):
    """Solve and collect the RunRecord fields. BLAS is held to one thread."""
    start = time.perf_counter()
    with threadpool_limits(limits=1, user_api="blas"):
        result = solve(observed, mask, config)
        report = None if reference is None else quality_report(reference, result.Y_hat, peak)
    wall = time.perf_counter() - start
    rse = None
    if reference is not None:
        rse = float(np.linalg.norm(result.Y_hat - reference) / np.linalg.norm(reference))
    return result, report, rse, wall


def make_record(config, variant, mask, result, report, rse, wall, **extra):
    rec = {
        "variant": variant,
        "config": config.to_dict(),
        "sr": mask.sr,
        "observed": len(mask),
        "shape": list(mask.shape),
        "iterations": result.iterations,
        "converged": bool(result.converged),
        "final_objective": _num(result.objective_trace[-1]),
        "final_rel_change": _num(result.rel_change_trace[-1]),
        "wall_time": wall,
        "rse": _num(rse),
        "quality": None,
    }
    if report is not None:
        rec["quality"] = {k: _num(v) for k, v in report.to_dict().items()}
    rec.update(extra)
    return rec


def write_trace(result, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "objective", "rel_change"])
        for k, (o, c) in enumerate(zip(result.objective_trace, result.rel_change_trace), 1):
            w.writerow([k, _fmt(float(o)), _fmt(float(c))])


def write_slices(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["slice", "psnr", "ssim", "fsim"])
        ps = report.per_slice
        for k in range(len(ps["psnr"])):
            w.writerow([k + 1, _fmt(float(ps["psnr"][k])), _fmt(float(ps["ssim"][k])), ""])


# ---------------------------------------------------------------- commands


def cmd_synth(args):
    shape = _ints(args.shape, "shape")
    ranks = _ints(args.ranks, "ranks")
    if args.noise < 0:
        raise UsageError("noise must be non-negative")
    try:
        Y, factors = synth_mctf(shape, ranks, args.seed, noise_sigma=args.noise)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    tns.save_tensor(Y, args.out)
    sidecar = {
        "shape": list(shape),
        "ranks": list(ranks),
        "seed": args.seed,
        "noise": args.noise,
        "alpha": list(factors.alpha),
        "X": [_matrix_json(x) for x in factors.X],
        "G": [_matrix_json(g) for g in factors.G],
    }
    _write_json(sidecar, str(args.out) + ".factors.json")
    return EXIT_OK


def cmd_mask(args):
    if args.input is not None:
        shape = tns.load_tensor(args.input).shape
    elif args.shape is not None:
        shape = _ints(args.shape, "shape")
    else:
        raise UsageError("mask needs --input or --shape")
    if not 0 <= args.sr <= 1:
        raise UsageError(f"--sr must lie in [0, 1], got {args.sr}")
    tns.save_mask(sample_uniform(shape, args.sr, args.seed), args.out)
    return EXIT_OK


def _overrides(args):
    values = _load_config(args.config)
    for key in ("lam", "tau", "C", "rho", "rho_growth", "mu_max", "log_eps", "stop_tol", "max_iter"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return values


def cmd_complete(args):
    observed = tns.load_tensor(args.input)
    mask = tns.load_mask(args.mask)
    if mask.shape != observed.shape:
        raise UsageError(f"mask shape {mask.shape} does not match input shape {observed.shape}")
    if len(mask) == 0:
        raise UsageError("mask has no observed entries")
    config = build_config(observed.shape, args.variant, args.ranks, _overrides(args))
    reference = tns.load_tensor(args.ref) if args.ref else None
    if reference is not None and reference.shape != observed.shape:
        raise UsageError("reference shape does not match input shape")
    result, report, rse, wall = run_completion(
        apply_mask(observed, mask), mask, config, reference, args.peak
    )
    tns.save_tensor(result.Y_hat, args.out)
    if args.trace_out:
        write_trace(result, args.trace_out)
    record = make_record(
        config, args.variant, mask, result, report, rse, wall,
        input_path=str(args.input), mask_path=str(args.mask), trace_path=args.trace_out,
        seed=None,
    )
    _write_json(record, args.record or str(args.out) + ".json")
    logger.info(
        "%s: %d iterations, converged=%s", args.variant, result.iterations, result.converged
    )
    return EXIT_OK


def cmd_metrics(args):
    ref = tns.load_tensor(args.ref)
    est = tns.load_tensor(args.est)
    if ref.shape != est.shape:
        raise UsageError(f"shape mismatch: {ref.shape} vs {est.shape}")
    report = quality_report(ref, est, args.peak, args.scale_ratio)
    text = json.dumps({k: _num(v) for k, v in report.to_dict().items()}, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    if args.slices_out:
        write_slices(report, args.slices_out)
    return EXIT_OK


def _experiment_cells(spec, base):
    inputs = spec.get("inputs")
    if not inputs:
        raise UsageError("experiment spec needs a non-empty 'inputs' list")
    for key in ("sr", "variants", "seeds"):
        if not isinstance(spec.get(key), list) or not spec[key]:
            raise UsageError(f"experiment spec needs a non-empty '{key}' list")
    for path in inputs:
        for sr in spec["sr"]:
            for variant in spec["variants"]:
                for seed in spec["seeds"]:
                    yield (base / path, path, float(sr), variant, int(seed))


def _run_cell(cell, tensors, spec):
    full, name, sr, variant, seed = cell
    truth = tensors[full]
    config = build_config(truth.shape, variant, spec.get("ranks"), spec.get("config"))
    mask = sample_uniform(truth.shape, sr, seed)
    if len(mask) == 0:
        raise UsageError(f"sampling ratio {sr} leaves no observed entries")
    result, report, rse, _ = run_completion(
        apply_mask(truth, mask), mask, config, truth, spec.get("peak")
    )
    row = [name, sr, variant, seed, result.iterations, bool(result.converged),
           rse, report.psnr, report.ssim, report.ergas, report.sam]
    return row, report


def cmd_experiment(args):
    spec_path = Path(args.spec)
    try:
        spec = json.loads(spec_path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"experiment spec: {exc}") from None
    base = spec_path.parent
    cells = list(_experiment_cells(spec, base))
    tensors = {}
    for cell in cells:
        if cell[0] not in tensors:
            tensors[cell[0]] = tns.load_tensor(cell[0])
    for variant in spec["variants"]:
        if variant not in VARIANTS:
            raise UsageError(f"unknown variant {variant!r}")

    # the BLAS limit is process-wide; hold it across the pool so per-cell
    # contexts never restore a multi-threaded setting mid-run
    with threadpool_limits(limits=1, user_api="blas"):
        with ThreadPoolExecutor(max_workers=_num_threads()) as pool:
            outcomes = list(pool.map(lambda c: _run_cell(c, tensors, spec), cells))

    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_HEADER)
    for row, _ in outcomes:
        w.writerow([_fmt(v) for v in row])
    out = Path(spec.get("out", "results.csv"))
    out = out if out.is_absolute() else base / out
    out.write_text(buf.getvalue())

    curves = spec.get("curves_dir")
    if curves:
        curves = Path(curves) if Path(curves).is_absolute() else base / curves
        curves.mkdir(parents=True, exist_ok=True)
        for (row, report), cell in zip(outcomes, cells):
            stem = f"{Path(cell[1]).stem}_sr{cell[2]}_{cell[3]}_seed{cell[4]}.csv"
            write_slices(report, curves / stem)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser():
    p = argparse.ArgumentParser(prog="mctf", description="MCTF / NC-MCTF tensor completion")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic low-rank tensor")
    s.add_argument("--shape", required=True, help="I1,I2,I3")
    s.add_argument("--ranks", required=True, help="r1,r2,r3")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise", type=float, default=0.0, help="Gaussian noise std")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("mask", help="sample a uniform observation mask")
    s.add_argument("--input", help="tensor whose shape the mask follows")
    s.add_argument("--shape", help="I1,I2,I3 (instead of --input)")
    s.add_argument("--sr", type=float, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_mask)

    s = sub.add_parser("complete", help="run MCTF / NC-MCTF completion")
    s.add_argument("--input", required=True)
    s.add_argument("--mask", required=True)
    s.add_argument("--variant", choices=sorted(VARIANTS), default="mctf")
    s.add_argument("--ranks", help="'auto' or r1,r2,r3 (default: config file, else auto)")
    s.add_argument("--config", help="JSON file with SolverConfig fields")
    s.add_argument("--out", required=True)
    s.add_argument("--trace-out")
    s.add_argument("--record", help="RunRecord JSON path (default OUT.json)")
    s.add_argument("--ref", help="ground truth for metrics in the record")
    s.add_argument("--peak", type=float)
    s.add_argument("--lam", type=float)
    s.add_argument("--tau", type=float)
    s.add_argument("--C", type=float)
    s.add_argument("--rho", type=float)
    s.add_argument("--rho-growth", dest="rho_growth", type=float)
    s.add_argument("--mu-max", dest="mu_max", type=float)
    s.add_argument("--log-eps", dest="log_eps", type=float)
    s.add_argument("--stop-tol", dest="stop_tol", type=float)
    s.add_argument("--max-iter", dest="max_iter", type=int)
    s.set_defaults(func=cmd_complete)

    s = sub.add_parser("metrics", help="PSNR / SSIM / ERGAS / SAM of an estimate")
    s.add_argument("--ref", required=True)
    s.add_argument("--est", required=True)
    s.add_argument("--peak", type=float)
    s.add_argument("--scale-ratio", dest="scale_ratio", type=float, default=1.0)
    s.add_argument("--out", help="JSON report path (default stdout)")
    s.add_argument("--slices-out", help="per-slice CSV path")
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("experiment", help="mask/complete/metrics over a grid")
    s.add_argument("--spec", required=True)
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"mctf: diverged in block {exc.block}: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ArithmeticError as exc:
        print(f"mctf: numerical failure: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (UsageError, ValueError, OSError) as exc:
        print(f"mctf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
