"""Command-line entry point.

Exit codes: 0 success, 1 usage or input error, 2 at least one run stopped at
the iteration limit (outputs are still written).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
import warnings
from pathlib import Path

from . import dataio, evaluation
from .engine import DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE, RunConfig, reflexive_similarity
from .matrix import NormKind, ZeroRowWarning
from .synthgen import diagonal_spec, unbalanced_spec

log = logging.getLogger("reflexsim")

OUTPUT_DIR_ENV = "REFLEXSIM_OUTPUT_DIR"
EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 1, 2


class UsageError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=0.5, help="common-neighbour weight in [0, 1]")
    p.add_argument("--norm", choices=[k.value for k in NormKind], default="linf")
    p.add_argument("--tol", type=float, default=DEFAULT_TOLERANCE)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITERATIONS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-diag-rescale", action="store_true",
                   help="keep the raw normalized matrices (no unit diagonal)")
    p.add_argument("--strict-convergence", action="store_true",
                   help="stop on the norm of the change rather than the change of the norm")
    p.add_argument("--output-dir", default=None,
                   help=f"defaults to ${OUTPUT_DIR_ENV} or ./results")


def _add_synth_flags(p: argparse.ArgumentParser, blocks: bool = True) -> None:
    p.add_argument("--rows", type=int, default=60)
    p.add_argument("--cols", type=int, default=80)
    if blocks:
        p.add_argument("--blocks", type=int, default=4, help="number of diagonal blocks")
    p.add_argument("--density", type=float, default=evaluation.DEFAULT_FILL_DENSITY,
                   help="fill probability inside blocks")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reflexsim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("similarity", help="row and column similarity of one matrix")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["csv", "coord", "edges"], default=None,
                   help="input format (default: from suffix); S and S' are written as csv")
    _add_run_flags(p)

    ev = sub.add_parser("eval", help="run an experiment")
    esub = ev.add_subparsers(dest="experiment", required=True)

    for name, text in (("perm", "noiseless permutation recovery"),
                       ("noise", "permutation recovery under Gaussian noise"),
                       ("unbalanced", "recovery on 3x5-block unbalanced structure")):
        e = esub.add_parser(name, help=text)
        _add_run_flags(e)
        _add_synth_flags(e, blocks=name != "unbalanced")
        e.add_argument("--reps", type=int, default=10)
        if name == "perm":
            # noiseless recovery: one alpha (from --alpha) per norm unless a grid is given
            e.add_argument("--alpha-grid", type=_float_list, default=None)
        else:
            e.add_argument("--alpha-grid", type=_float_list, default=list(evaluation.DEFAULT_ALPHA_GRID))
        if name != "perm":
            e.add_argument("--sigma-grid", type=_float_list, default=list(evaluation.DEFAULT_SIGMA_GRID))
        e.add_argument("--diag-rescale", action="store_true",
                       help="score unit-diagonal matrices instead of raw normalized ones")

    e = esub.add_parser("precision", help="precision at rank against row labels")
    _add_run_flags(e)
    e.add_argument("--input", required=True)
    e.add_argument("--labels", required=True)
    e.add_argument("--format", choices=["csv", "coord", "edges"], default=None)
    e.add_argument("--alpha-grid", type=_float_list, default=[0.0, 0.25, 0.5, 0.75, 1.0])
    e.add_argument("--null-reps", type=int, default=100)
    e.add_argument("--exclude-self", action="store_true")

    e = esub.add_parser("bench", help="iterations and time per iteration against n")
    _add_run_flags(e)
    e.add_argument("--n-grid", type=_int_list, default=[10, 50, 100, 200, 300, 400, 500])
    e.add_argument("--alpha-grid", type=_float_list, default=list(evaluation.DEFAULT_ALPHA_GRID))
    e.add_argument("--reps", type=int, default=10)
    e.add_argument("--blocks", type=int, default=4)
    e.add_argument("--density", type=float, default=evaluation.DEFAULT_FILL_DENSITY)
    return parser


def _config(args, **overrides) -> RunConfig:
    params = dict(
        alpha=args.alpha,
        norm_kind=args.norm,
        tolerance=args.tol,
        max_iterations=args.max_iter,
        seed=args.seed,
        diagonal_rescale=not args.no_diag_rescale,
        strict_convergence=args.strict_convergence,
    )
    params.update(overrides)
    try:
        return RunConfig(**params)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _output_dir(args) -> Path:
    out = Path(args.output_dir or os.environ.get(OUTPUT_DIR_ENV) or "results")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _check_grid(values, name, lo=None, hi=None):
    if not values:
        raise UsageError(f"{name} must not be empty")
    for v in values:
        if (lo is not None and v < lo) or (hi is not None and v > hi):
            raise UsageError(f"{name} value {v} outside [{lo}, {hi}]")


def cmd_similarity(args) -> int:
    cfg = _config(args)
    started = time.time()
    data = dataio.load_matrix(args.input, format=args.format, with_ids=True)
    with warnings.catch_warnings():
        warnings.simplefilter("always", ZeroRowWarning)
        result = reflexive_similarity(data.matrix, cfg)
    out = _output_dir(args)
    dataio.save_matrix(out / "S.csv", result.S)
    dataio.save_matrix(out / "S_prime.csv", result.S_prime)
    trace_rows = [dict(r, converged=result.trace.converged) for r in result.trace.to_rows()]
    dataio.save_table(out / "trace.csv", trace_rows)
    payload = dataio.make_payload(
        "similarity", cfg, {"seed": cfg.seed},
        tables={"trace": trace_rows},
        extra={"input": str(args.input), "shape": list(data.matrix.shape),
               "converged": result.trace.converged,
               "iterations": result.trace.iterations_used},
        started=started,
    )
    dataio.save_results(out / "result.json", payload)
    log.info("wrote %s (%d iterations, converged=%s)", out, result.trace.iterations_used,
             result.trace.converged)
    return EXIT_OK if result.trace.converged else EXIT_NONCONVERGED


def _sweep(args, spec, sigma_grid) -> int:
    if args.alpha_grid is None:
        args.alpha_grid = [args.alpha]
    _check_grid(args.alpha_grid, "--alpha-grid", 0.0, 1.0)
    _check_grid(sigma_grid, "--sigma-grid", 0.0)
    if args.reps < 1:
        raise UsageError("--reps must be >= 1")
    cfg = _config(args, diagonal_rescale=args.diag_rescale)
    started = time.time()
    result = evaluation.noise_sweep(spec, sigma_grid, args.alpha_grid, evaluation.ALL_NORMS,
                                    args.reps, seed=args.seed, cfg=cfg)
    out = _output_dir(args)
    name = args.experiment
    payload = dataio.make_payload(
        name, cfg, {"seed": args.seed, "repetitions": args.reps},
        curves=result.curves.values(), tables={"runs": result.records},
        extra={"sweep": result.meta}, started=started)
    dataio.save_results(out / f"{name}.json", payload)
    dataio.save_table(out / f"{name}_runs.csv", result.records)
    summary = [{"method": c.name, "sigma": float(x), "mean_mu": float(y), "spread": float(s)}
               for c in result.curves.values() for x, y, s in zip(c.x, c.y, c.spread)]
    dataio.save_table(out / f"{name}_summary.csv", summary)
    ok = all(r["converged"] for r in result.records)
    return EXIT_OK if ok else EXIT_NONCONVERGED


def cmd_perm(args) -> int:
    spec = diagonal_spec(args.rows, args.cols, args.blocks, args.density)
    return _sweep(args, spec, [0.0])


def cmd_noise(args) -> int:
    spec = diagonal_spec(args.rows, args.cols, args.blocks, args.density)
    return _sweep(args, spec, args.sigma_grid)


def cmd_unbalanced(args) -> int:
    spec = unbalanced_spec(args.rows, args.cols, args.density)
    return _sweep(args, spec, args.sigma_grid)


def cmd_precision(args) -> int:
    _check_grid(args.alpha_grid, "--alpha-grid", 0.0, 1.0)
    cfg = _config(args)
    started = time.time()
    ds = dataio.load_dataset(args.input, args.labels, format=args.format)
    include_self = not args.exclude_self
    curves, runs, ok = [], [], True
    for alpha in args.alpha_grid:
        run_cfg = cfg.replace(alpha=alpha)
        res = reflexive_similarity(ds.matrix, run_cfg)
        ok &= res.trace.converged
        name = evaluation.method_name("reflexive", run_cfg)
        curves.append(evaluation.precision_at_rank(res.S, ds.row_classes, include_self=include_self,
                                                   name=name))
        runs.append({"method": name, "iterations": res.trace.iterations_used,
                     "converged": res.trace.converged})
    for metric in evaluation.BASELINES:
        S = evaluation.compute_similarity(metric, ds.matrix, cfg).S
        curves.append(evaluation.precision_at_rank(S, ds.row_classes, include_self=include_self,
                                                   name=metric))
    n_classes = len(ds.class_names)
    curves.append(evaluation.null_model_curve(ds.row_classes, n_classes, args.null_reps, args.seed))
    out = _output_dir(args)
    payload = dataio.make_payload(
        "precision", cfg, {"seed": args.seed, "null_reps": args.null_reps},
        curves=curves, tables={"runs": runs},
        extra={"input": str(args.input), "labels": str(args.labels),
               "shape": list(ds.matrix.shape), "density": ds.density,
               "class_names": ds.class_names, "alpha_grid": args.alpha_grid,
               "same_class_fraction": evaluation.same_class_fraction(ds.row_classes, include_self)},
        started=started)
    dataio.save_results(out / "precision.json", payload)
    return EXIT_OK if ok else EXIT_NONCONVERGED


def cmd_bench(args) -> int:
    _check_grid(args.alpha_grid, "--alpha-grid", 0.0, 1.0)
    if any(b <= a for a, b in zip(args.n_grid, args.n_grid[1:])):
        raise UsageError("--n-grid must be strictly increasing")
    cfg = _config(args)
    started = time.time()
    res = evaluation.scaling_benchmark(args.n_grid, args.alpha_grid, cfg, args.reps, args.seed,
                                       n_blocks=args.blocks, fill_density=args.density)
    out = _output_dir(args)
    payload = dataio.make_payload("bench", cfg, {"seed": args.seed, "repetitions": args.reps},
                                  curves=res.curves.values(), tables={"runs": res.records},
                                  extra={"fits": res.fits, "bench": res.meta}, started=started)
    dataio.save_results(out / "bench.json", payload)
    dataio.save_table(out / "bench_runs.csv", res.records)
    return EXIT_OK if all(r["converged"] for r in res.records) else EXIT_NONCONVERGED


COMMANDS = {
    ("similarity", None): cmd_similarity,
    ("eval", "perm"): cmd_perm,
    ("eval", "noise"): cmd_noise,
    ("eval", "unbalanced"): cmd_unbalanced,
    ("eval", "precision"): cmd_precision,
    ("eval", "bench"): cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    handler = COMMANDS[(args.command, getattr(args, "experiment", None))]
    try:
        return handler(args)
    except (UsageError, ValueError, OSError) as exc:
        print(f"reflexsim: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
