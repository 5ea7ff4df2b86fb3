"""Command line entry point.

Subcommands: synth, disconnect, reconnect, metrics, experiment (with
ablation and convergence harnesses).  Every subcommand is deterministic
given --seed.  Per-image failures are written to stderr as JSON lines
and flip the exit code to 1.
"""

import argparse
import json
import sys
from pathlib import Path

from .disconnect import DisconnectionSpec, generate_pair
from .experiments import (
    ExperimentPlan,
    ablation_to_csv,
    convergence_to_csv,
    run_ablation,
    run_convergence,
)
from .grids import load_grid, load_mask, save_mask
from .metrics import report, reports_to_csv, reports_to_json
from .reconnect import (
    DEFAULT_ANGLE_TOL,
    DEFAULT_D_MAX,
    DEFAULT_MAX_ITER,
    BridgeReconnector,
    IdentityReconnector,
    iterate,
    model_reconnector,
)
from .synthtree import TreeParams, generate_tree

_MASK_PATTERNS = ("*.pgm", "*.vmsk")


def _fail_line(path, exc):
    print(
        json.dumps(
            {"image": str(path), "error": type(exc).__name__, "message": str(exc)}
        ),
        file=sys.stderr,
    )


def _mask_ext(mask):
    return ".pgm" if mask.ndim == 2 else ".vmsk"


def _list_masks(directory):
    root = Path(directory)
    paths = []
    for pat in _MASK_PATTERNS:
        paths.extend(root.glob(pat))
    return sorted(paths)


def _sizes(text):
    return tuple(float(t) for t in text.split(",") if t)


# ---------------------------------------------------------------------------
# subcommand handlers


def cmd_synth(args):
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for k in range(args.count):
        params = TreeParams(
            dims=tuple(args.dims),
            root_radius=args.root_radius,
            depth=args.depth,
            branch_length=(args.length_min, args.length_max),
            branch_angle=(args.angle_min, args.angle_max),
            radius_decay=args.gamma,
            tortuosity=args.tortuosity,
            seed=args.seed + k,
        )
        mask = generate_tree(params)
        path = outdir / f"tree_{k:03d}.pgm"
        save_mask(mask, path)
        if not args.quiet:
            print(path)
    return 0


def cmd_disconnect(args):
    mask = load_mask(args.input)
    spec = DisconnectionSpec(
        size_mean=args.s,
        size_std=args.sigma,
        n_disconnections=args.n_disc,
        n_artifacts=args.n_art,
        seed=args.seed,
    )
    sample = generate_pair(mask, spec)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    ext = _mask_ext(mask)
    save_mask(sample.connected, outdir / f"connected{ext}")
    save_mask(sample.disconnected, outdir / f"disconnected{ext}")
    log = {
        "spec": {
            "s": spec.size_mean,
            "sigma": spec.size_std,
            "n_disconnections": spec.n_disconnections,
            "n_artifacts": spec.n_artifacts,
            "seed": spec.seed,
        },
        "dims": list(mask.shape),
        "axis_order": "yx" if mask.ndim == 2 else "zyx",
        "removed": [list(c) for c in sample.removed],
        "added": [list(c) for c in sample.added],
    }
    (outdir / "pair.json").write_text(json.dumps(log), encoding="utf-8")
    if not args.quiet:
        print(outdir / "pair.json")
    return 0


def _build_operator(args):
    if args.op == "baseline":
        return BridgeReconnector(d_max=args.d_max, angle_tol=args.angle_tol)
    if args.op == "identity":
        return IdentityReconnector()
    if args.model is None:
        raise SystemExit("--op model requires --model")
    return model_reconnector(
        args.model,
        patch=args.patch,
        overlap=args.overlap,
        threshold=args.threshold,
    )


def cmd_reconnect(args):
    mask = load_mask(args.input)
    op = _build_operator(args)
    reference = load_mask(args.ref) if args.ref else None
    final, trace = iterate(
        op, mask, max_iter=args.max_iter, tol=args.tol, reference=reference
    )
    save_mask(final, args.out)
    if args.trace:
        Path(args.trace).write_text(
            json.dumps(trace.as_dict(), indent=2), encoding="utf-8"
        )
    if not args.quiet:
        state = "converged" if trace.converged else "stopped"
        print(f"{state} after {trace.iterations} iterations, diffs={trace.diffs}")
    return 0


def cmd_metrics(args):
    seg = load_mask(args.seg)
    ref = load_mask(args.ref)
    prob = load_grid(args.prob) if args.prob else None
    rep = report(seg, ref, prob)
    csv_text = reports_to_csv([rep])
    Path(args.out).write_text(csv_text, encoding="utf-8")
    if args.json:
        Path(args.json).write_text(reports_to_json([rep]), encoding="utf-8")
    if not args.quiet:
        print(csv_text, end="")
    return 0


def _load_corpus(directory):
    paths = _list_masks(directory)
    masks, names, failures = [], [], 0
    for p in paths:
        try:
            masks.append(load_mask(p))
            names.append(p.name)
        except Exception as exc:
            _fail_line(p, exc)
            failures += 1
    return masks, names, failures


def cmd_experiment_ablation(args):
    masks, _, failures = _load_corpus(args.trees)
    if not masks:
        raise SystemExit(f"no readable masks in {args.trees}")
    plan = ExperimentPlan(
        train_sizes=_sizes(args.train_sizes),
        test_sizes=_sizes(args.test_sizes),
        size_std=args.sigma,
        n_disconnections=args.n_disc,
        n_artifacts=args.n_art,
        seed=args.seed,
    )
    # d_max tracks the train size: an operator tuned for size s bridges
    # gaps up to s voxels plus a margin for the size spread
    operators = {
        s: BridgeReconnector(d_max=s, angle_tol=args.angle_tol)
        for s in plan.train_sizes
    }
    results = run_ablation(plan, operators, masks, jobs=args.jobs)
    Path(args.out).write_text(ablation_to_csv(plan, results), encoding="utf-8")
    if not args.quiet:
        print(args.out)
    return 1 if failures else 0


def cmd_experiment_convergence(args):
    masks, names, failures = _load_corpus(args.trees)
    if not masks:
        raise SystemExit(f"no readable masks in {args.trees}")
    op = _build_operator(args)
    pairs = []
    for j, s_test in enumerate(_sizes(args.test_sizes)):
        for idx, (name, mask) in enumerate(zip(names, masks)):
            spec = DisconnectionSpec(
                size_mean=s_test,
                size_std=args.sigma,
                n_disconnections=args.n_disc,
                n_artifacts=args.n_art,
                seed=args.seed + 1_000_003 * (j + 1) + idx,
            )
            pairs.append((name, generate_pair(mask, spec).disconnected, mask, s_test))
    runs = run_convergence(op, pairs, max_iter=args.max_iter, tol=args.tol,
                           jobs=args.jobs)
    Path(args.out).write_text(convergence_to_csv(runs), encoding="utf-8")
    if not args.quiet:
        n_conv = sum(1 for r in runs if r.trace.converged)
        print(f"{n_conv}/{len(runs)} runs converged; table at {args.out}")
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# parser


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=0, help="RNG seed")
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallel workers for per-image work")
    parser.add_argument("--quiet", action="store_true",
                        help="suppress progress output")


def _add_operator_flags(parser):
    parser.add_argument("--op", choices=("baseline", "model", "identity"),
                        default="baseline")
    parser.add_argument("--model", help="ONNX model file for --op model")
    parser.add_argument("--d-max", type=float, default=DEFAULT_D_MAX,
                        help="max endpoint gap the baseline bridges")
    parser.add_argument("--angle-tol", type=float, default=DEFAULT_ANGLE_TOL,
                        help="baseline tangent alignment tolerance, degrees")
    parser.add_argument("--patch", type=int, default=None,
                        help="model inference patch extent")
    parser.add_argument("--overlap", type=int, default=None,
                        help="model inference patch overlap")
    parser.add_argument("--threshold", type=float, default=0.5,
                        help="binarization threshold on model output")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="vesselmend",
        description="generate, measure and repair disconnections in "
                    "binary vascular segmentations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic vascular trees")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--dims", type=int, nargs=2, default=(256, 256),
                   metavar=("H", "W"))
    p.add_argument("--root-radius", type=float, default=5.0)
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--length-min", type=float, default=28.0)
    p.add_argument("--length-max", type=float, default=44.0)
    p.add_argument("--angle-min", type=float, default=18.0)
    p.add_argument("--angle-max", type=float, default=42.0)
    p.add_argument("--gamma", type=float, default=3.0,
                   help="Murray radius decay exponent")
    p.add_argument("--tortuosity", type=float, default=2.0)
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("disconnect", help="make a (connected, disconnected) pair")
    p.add_argument("--in", dest="input", required=True, help="input mask")
    p.add_argument("--out", required=True, help="output pair directory")
    p.add_argument("--s", type=float, default=8.0, help="mean disconnection size")
    p.add_argument("--sigma", type=float, default=4.0, help="size std deviation")
    p.add_argument("--n-disc", type=int, default=15)
    p.add_argument("--n-art", type=int, default=5)
    _add_common(p)
    p.set_defaults(func=cmd_disconnect)

    p = sub.add_parser("reconnect", help="iterate a reconnection operator")
    p.add_argument("--in", dest="input", required=True, help="input mask")
    p.add_argument("--out", required=True, help="fixed-point mask path")
    p.add_argument("--trace", help="write iteration trace JSON here")
    p.add_argument("--ref", help="reference mask for per-step metrics")
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    p.add_argument("--tol", type=int, default=0,
                   help="stop when the step changes at most this many voxels")
    _add_operator_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_reconnect)

    p = sub.add_parser("metrics", help="score a segmentation against a reference")
    p.add_argument("--seg", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--prob", help="soft probability map (VMSF) for AUC")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--json", help="also write a JSON report here")
    _add_common(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("experiment", help="ablation / convergence harnesses")
    esub = p.add_subparsers(dest="experiment", required=True)

    e = esub.add_parser("ablation", help="train-size x test-size grid")
    e.add_argument("--trees", required=True, help="directory of connected masks")
    e.add_argument("--train-sizes", default="6,8,10,12")
    e.add_argument("--test-sizes", default="6,8,10,12")
    e.add_argument("--sigma", type=float, default=4.0)
    e.add_argument("--n-disc", type=int, default=15)
    e.add_argument("--n-art", type=int, default=0)
    e.add_argument("--angle-tol", type=float, default=DEFAULT_ANGLE_TOL)
    e.add_argument("--out", required=True, help="CSV output path")
    _add_common(e)
    e.set_defaults(func=cmd_experiment_ablation)

    e = esub.add_parser("convergence", help="iterate to the fixed point per image")
    e.add_argument("--trees", required=True, help="directory of connected masks")
    e.add_argument("--test-sizes", default="6,8,10,12")
    e.add_argument("--sigma", type=float, default=4.0)
    e.add_argument("--n-disc", type=int, default=15)
    e.add_argument("--n-art", type=int, default=0)
    e.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    e.add_argument("--tol", type=int, default=0)
    e.add_argument("--out", required=True, help="CSV output path")
    _add_operator_flags(e)
    _add_common(e)
    e.set_defaults(func=cmd_experiment_convergence)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except Exception as exc:
        _fail_line(getattr(args, "input", "-"), exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
