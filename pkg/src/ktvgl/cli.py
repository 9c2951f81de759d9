"""Command-line entry point: ``ktvgl <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver failure or
(with ``--strict``) non-convergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .bench import best_cell, fit_flattened, grid_search
from .core import KtvglConfig, SolverError, fit_ktvgl, fit_static_kgl
from .export import render_snapshot
from .io import DataError, NetworkFile, read_network, read_series, write_network, write_series
from .metrics import METRICS, evaluate
from .prep import moving_average, normalize, read_long_csv, read_wide_csv
from .stream import run_stream
from .synthetic import gen_network_path, sample_series
from .tensor import KroneckerCapError, TensorSeries
from .tvgl import PENALTY_KINDS, PenaltySpec, TvglConfig

logger = logging.getLogger("ktvgl")

EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _per_mode(values, M, name):
    if len(values) == 1:
        return values * M
    if len(values) != M:
        raise UsageError(f"--{name} needs 1 or {M} values, got {len(values)}")
    return values


def _inner(args) -> TvglConfig:
    return TvglConfig(max_admm_iters=args.max_iters, eps_abs=args.eps_abs, eps_rel=args.eps_rel,
                      adaptive_step=args.adaptive_step)


def _solver_flags(p):
    p.add_argument("--lambda", dest="lam", type=_floats, required=True,
                   help="l1 weight, one value or one per mode")
    p.add_argument("--rho", type=_floats, required=True,
                   help="temporal weight, one value or one per mode")
    p.add_argument("--psi", choices=PENALTY_KINDS, default="laplacian")
    p.add_argument("--max-sweeps", type=int, default=10)
    p.add_argument("--outer-tol", type=float, default=1e-4)
    p.add_argument("--max-iters", type=int, default=2000, help="ADMM iterations per subproblem")
    p.add_argument("--eps-abs", type=float, default=1e-5)
    p.add_argument("--eps-rel", type=float, default=1e-4)
    p.add_argument("--adaptive-step", action="store_true",
                   help="residual-balancing ADMM step size (faster, same fixed point)")
    p.add_argument("--strict", action="store_true", help="exit 3 when any solver did not converge")


def _config(args, M) -> KtvglConfig:
    lams = _per_mode(args.lam, M, "lambda")
    rhos = _per_mode(args.rho, M, "rho")
    return KtvglConfig(lams=lams, penalties=[PenaltySpec(args.psi, r) for r in rhos],
                       inner=_inner(args), max_outer_sweeps=args.max_sweeps,
                       outer_tol=args.outer_tol)


def _echo(args, M):
    return {"lambda": _per_mode(args.lam, M, "lambda"), "rho": _per_mode(args.rho, M, "rho"),
            "psi": args.psi, "max_sweeps": args.max_sweeps, "outer_tol": args.outer_tol,
            "max_iters": args.max_iters, "eps_abs": args.eps_abs, "eps_rel": args.eps_rel,
            "adaptive_step": args.adaptive_step}


def _write_timing(out, payload):
    with open(f"{out}.timing.json", "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


# commands

def cmd_synth(args):
    if len(args.dims) != args.modes:
        raise UsageError(f"--dims has {len(args.dims)} entries but --modes is {args.modes}")
    if args.changes is None:
        changes = [()] * args.modes
    else:
        parts = args.changes.split(";")
        if len(parts) != args.modes:
            raise UsageError(f"--changes needs {args.modes} ';'-separated lists")
        try:
            changes = [tuple(_ints(p)) for p in parts]
        except argparse.ArgumentTypeError as exc:
            raise UsageError(str(exc))
    try:
        truth = gen_network_path(args.dims, T=args.T, change_points=changes,
                                 edge_prob=args.edge_prob, seed=[args.seed, 0],
                                 symmetrize=args.symmetrize)
    except ValueError as exc:
        raise UsageError(str(exc))
    x = sample_series(truth, args.n_per_step, seed=[args.seed, 1])
    os.makedirs(args.out, exist_ok=True)
    meta = {"seed": args.seed, "generator": "synthetic"}
    write_series(os.path.join(args.out, "series.txt"), x, meta=meta)
    write_network(os.path.join(args.out, "truth.txt"), NetworkFile(
        thetas=truth.thetas, kind="truth",
        header={"change_points": [list(c) for c in truth.change_points], "seed": args.seed,
                "edge_prob": args.edge_prob, "value_range": list(truth.value_range),
                "symmetrize": args.symmetrize}))
    fill = [float(np.mean(th[:, ~np.eye(th.shape[-1], dtype=bool)] != 0)) for th in truth.thetas]
    print(f"series shape T={x.T} dims={list(x.shape)} n_per_step={args.n_per_step}; "
          f"edge fill per mode {[round(f, 3) for f in fill]}; wrote {args.out}")
    return 0


def _load_series(path):
    x, header = read_series(path)
    return x, header.get("meta", {})


def _check_converged(args, ok, what):
    if not ok:
        logger.warning("%s did not converge", what)
        if args.strict:
            return EXIT_SOLVER
    return 0


def cmd_fit(args):
    if args.flatten and args.static:
        raise UsageError("--flatten and --static are mutually exclusive")
    x, meta = _load_series(args.input)
    header = {"config": _echo(args, 1 if args.flatten else x.M), "input_shape": [x.T, *x.shape],
              "labels": meta.get("labels")}
    start = time.perf_counter()
    if args.flatten:
        if len(args.lam) > 1 or len(args.rho) > 1:
            raise UsageError("--flatten takes a single --lambda and --rho")
        res = fit_flattened(x, args.lam[0], PenaltySpec(args.psi, args.rho[0]), _inner(args),
                            cap=args.cap)
        thetas, ok = [res.precision], res.converged
        header.update(flattened=True, iterations=res.iterations, converged=res.converged,
                      objective=res.objective, returned=res.returned)
    elif args.static:
        lams = _per_mode(args.lam, x.M, "lambda")
        thetas = [th[None] for th in fit_static_kgl(x, lams, _inner(args), args.max_sweeps,
                                                    args.outer_tol)]
        ok = True
        header.update(static=True)
    else:
        res = fit_ktvgl(x, _config(args, x.M))
        thetas, ok = res.thetas, res.converged and res.inner_converged
        header.update(sweeps=res.sweeps, objectives=res.objectives, converged=res.converged,
                      inner_converged=res.inner_converged, inner_iterations=res.inner_iterations,
                      objective_increased=res.objective_increased)
    elapsed = time.perf_counter() - start
    write_network(args.out, NetworkFile(thetas=thetas, kind="fit", header=header))
    _write_timing(args.out, {"wall_time": elapsed})
    print(f"wrote {args.out} ({elapsed:.2f} s)")
    return _check_converged(args, ok, "fit")


def cmd_stream(args):
    if args.window < 2:
        raise UsageError("--window must be >= 2")
    x, meta = _load_series(args.input)
    newest, pushes = run_stream(x, args.window, _config(args, x.M),
                                warm_start=not args.no_warm_start)
    header = {"config": _echo(args, x.M), "stream": True, "window": args.window,
              "warm_start": not args.no_warm_start, "input_shape": [x.T, *x.shape],
              "labels": meta.get("labels"),
              "push_sweeps": [p.sweeps for p in pushes],
              "push_inner_iterations": [p.inner_iterations for p in pushes]}
    write_network(args.out, NetworkFile(thetas=newest, kind="fit", header=header))
    times = [p.wall_time for p in pushes]
    _write_timing(args.out, {"push_wall_times": times, "mean_push_wall_time": float(np.mean(times))})
    print(f"wrote {args.out}; {len(pushes)} pushes, mean {np.mean(times) * 1e3:.1f} ms per push")
    return _check_converged(args, all(p.converged for p in pushes), "stream")


def cmd_eval(args):
    fit = read_network(args.fit)
    truth = read_network(args.truth)
    T = truth.T
    thetas = fit.thetas
    if fit.header.get("static") and fit.T == 1:
        thetas = [np.repeat(th, T, axis=0) for th in thetas]
    if thetas[0].shape[0] != T:
        raise DataError(f"fit has T={thetas[0].shape[0]}, truth has T={T}")
    flat = bool(fit.header.get("flattened"))
    scope = "flattened" if flat else "per-mode"
    if not flat and [th.shape[-1] for th in thetas] != truth.dims:
        raise DataError(f"fit dims {[th.shape[-1] for th in thetas]} do not match truth {truth.dims}")
    cps = truth.header.get("change_points")
    if "tdr" in args.metrics and not (cps and any(cps)):
        raise UsageError("tdr needs change points in the truth file")
    try:
        rep = evaluate(thetas[0] if flat else thetas, truth.thetas, cps, metrics=args.metrics,
                       scope=scope, pooling=args.pooling)
    except KroneckerCapError:
        raise
    except ValueError as exc:
        raise DataError(str(exc))
    text = json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    sys.stdout.write(text)
    return 0


def cmd_grid(args):
    x, _ = _load_series(args.input)
    truth = read_network(args.truth)
    if not args.lambda_grid or not args.rho_grid:
        raise UsageError("grids must be non-empty")
    if not args.flatten and truth.dims != list(x.shape):
        raise DataError("truth dims do not match the series")
    cps = truth.header.get("change_points")
    metrics = [m for m in METRICS if m != "tdr" or (cps and any(cps))]
    cells = grid_search(x, truth.thetas, args.lambda_grid, args.rho_grid, kind=args.psi,
                        change_points=cps, flatten=args.flatten, solver_scale=args.solver_scale,
                        inner=_inner(args), max_outer_sweeps=args.max_sweeps,
                        metrics=metrics, jobs=args.jobs)
    lines = ["\t".join(["lambda", "rho", *metrics, "converged"])]
    for c in cells:
        vals = ["" if c.metrics[m] is None else f"{c.metrics[m]:.6f}" for m in metrics]
        lines.append("\t".join([repr(c.lam), repr(c.rho), *vals, str(c.converged).lower()]))
    best = best_cell(cells)
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    sys.stdout.write(text)
    print(f"best by aucroc: lambda={best.lam!r} rho={best.rho!r} "
          f"aucroc={best.metrics['aucroc']:.6f}")
    return 0


def cmd_prep(args):
    reader = read_long_csv if args.layout == "long" else read_wide_csv
    data, times, keys = reader(args.input)
    if data.shape[0] < 1:
        raise DataError("no time steps in input")
    if args.smooth < 1:
        raise UsageError("--smooth must be >= 1")
    data = normalize(moving_average(data, args.smooth), args.normalize)
    x = TensorSeries.single(data)
    meta = {"labels": keys, "times": [times[0], times[-1]], "smooth": args.smooth,
            "normalize": args.normalize, "source": os.path.basename(args.input)}
    write_series(args.out, x, meta=meta)
    print(f"wrote {args.out}: shape {list(data.shape)}")
    return 0


def cmd_export(args):
    fit = read_network(args.fit)
    if not 0 <= args.mode < len(fit.thetas):
        raise UsageError(f"--mode must be in [0, {len(fit.thetas) - 1}]")
    path = fit.thetas[args.mode]
    if not 0 <= args.t < path.shape[0]:
        raise UsageError(f"--t must be in [0, {path.shape[0] - 1}]")
    labels = fit.header.get("labels")
    labels = labels[args.mode] if labels and not fit.header.get("flattened") else None
    try:
        text = render_snapshot(path[args.t], args.t, args.mode, args.threshold, args.format,
                               labels)
    except ValueError as exc:
        raise DataError(str(exc))
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ktvgl", description="Mode-wise time-varying networks for tensor "
                     "time series.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic series with ground truth")
    p.add_argument("--modes", type=int, required=True)
    p.add_argument("--dims", type=_ints, required=True)
    p.add_argument("--T", type=int, default=300)
    p.add_argument("--edge-prob", type=float, default=0.25)
    p.add_argument("--changes", help="per-mode change points, e.g. '100,200;150,250'")
    p.add_argument("--n-per-step", type=int, default=1)
    p.add_argument("--symmetrize", choices=("upper", "either"), default="upper")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="batch fit")
    p.add_argument("--input", required=True)
    _solver_flags(p)
    p.add_argument("--flatten", action="store_true", help="unstructured TVGL on vec(X_t)")
    p.add_argument("--static", action="store_true", help="one network per mode for all t")
    p.add_argument("--cap", type=int, default=4096, help="largest flattened dimension")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("stream", help="sliding-window fit, newest estimate per arrival")
    p.add_argument("--input", required=True)
    p.add_argument("--window", type=int, required=True)
    _solver_flags(p)
    p.add_argument("--no-warm-start", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stream)

    p = sub.add_parser("eval", help="score a fit against ground truth")
    p.add_argument("--fit", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--metrics", type=lambda s: s.split(","), default=["aucroc", "aucpr", "bestf1"])
    p.add_argument("--pooling", choices=("pooled", "per-time"), default="pooled")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grid", help="grid search over lambda x rho")
    p.add_argument("--input", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--lambda-grid", type=_floats, default=[0.01, 0.03, 0.05])
    p.add_argument("--rho-grid", type=_floats, default=[1.0, 1.5, 2.0])
    p.add_argument("--psi", choices=PENALTY_KINDS, default="laplacian")
    p.add_argument("--flatten", action="store_true")
    p.add_argument("--solver-scale", action="store_true",
                   help="grid values are per-mode subproblem weights (multiplied by D/d_m)")
    p.add_argument("--max-sweeps", type=int, default=10)
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--eps-abs", type=float, default=1e-5)
    p.add_argument("--eps-rel", type=float, default=1e-4)
    p.add_argument("--adaptive-step", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="write the table as TSV")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("prep", help="CSV to series file with smoothing and normalization")
    p.add_argument("--input", required=True)
    p.add_argument("--layout", choices=("long", "wide"), default="long")
    p.add_argument("--smooth", type=int, default=4)
    p.add_argument("--normalize", choices=("z", "minmax", "none"), default="z")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prep)

    p = sub.add_parser("export", help="one network snapshot as DOT or JSON")
    p.add_argument("--fit", required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--mode", type=int, required=True)
    p.add_argument("--threshold", type=float, default=0.01,
                   help="minimum |partial correlation| for an edge")
    p.add_argument("--format", choices=("dot", "json"), default="dot")
    p.add_argument("--out")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ktvgl {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, KroneckerCapError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"ktvgl {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolverError as exc:
        print(f"ktvgl {args.command}: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        # invalid inputs caught by the library (non-PD data, bad shapes)
        print(f"ktvgl {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
