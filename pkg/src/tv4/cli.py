"""Command-line interface: ``tv4 {denoise,upscale,sweep,selfcheck,tv,synth}``.

Exit codes: 0 success, 1 verification failure, 2 usage or input error.
Metrics go to stdout as one JSON object (``sweep`` writes CSV).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
import warnings
from pathlib import Path

import numpy as np

from .grid import GridError
from .images import FIXTURES, ImageFormatError, add_gaussian_noise, read_image, synth_fixture, write_image
from .interp import VARIANTS
from .pdhg import SolverDivergence
from .prox import DownscaleOp
from .selfcheck import run_selfcheck
from .solver import (
    PUBLISHED_STEPS,
    PUBLISHED_ITERS,
    PUBLISHED_LAMBDAS,
    ProblemSpec,
    SolverConfig,
    default_config,
    default_lambda,
    lambda_sweep,
    solve,
)
from .tv import DUAL_MODELS, MODELS, evaluate_tv, tv_dual_eval

log = logging.getLogger("tv4")

EXIT_OK, EXIT_VERIFY, EXIT_USAGE = 0, 1, 2
FEASIBILITY_TOL = 1e-6


class UsageError(Exception):
    pass


def _fmt_steps(task):
    rows = []
    for model, p in PUBLISHED_STEPS[task].items():
        relax = f"rho={p['rho']:g}" if "rho" in p else f"mu={p['mu']:g}"
        rows.append(f"{model}: tau={p['tau']:.4g} sigma={p['sigma']:.4g} {relax}")
    return "; ".join(rows)


def _solver_flags(p: argparse.ArgumentParser, task: str):
    g = p.add_argument_group(
        "solver",
        f"step defaults per --tv (table values): {_fmt_steps(task)}. "
        "Models without table values (aniso, prn) get sigma = 1/(tau ||K||^2).",
    )
    g.add_argument("--tau", type=float, help="primal step (default: table value for --tv)")
    g.add_argument("--sigma", type=float, help="dual step (default: table value for --tv)")
    g.add_argument("--rho", type=float, help="relaxation of the composite solver (default: table value or 1)")
    g.add_argument("--mu", type=float, help="relaxation of the constrained solver (default: 1)")
    g.add_argument("--iters", type=int, default=PUBLISHED_ITERS[task],
                   help="iteration budget (default: %(default)s)")
    g.add_argument("--steps", choices=("published", "safe"), default="published",
                   help="'published' uses the table steps verbatim (some violate the step bound and "
                        "trigger a warning); 'safe' lowers sigma to 1/(tau ||K||^2) when needed "
                        "(default: %(default)s)")
    g.add_argument("--residual-tol", type=float, default=None,
                   help="stop early when the relative primal change falls below this")
    g.add_argument("--stencils", choices=VARIANTS, default="aligned",
                   help="interpolation stencils of the condat/new models (default: %(default)s)")


def _tv_flag(p, default):
    p.add_argument("--tv", choices=MODELS, default=default, help="regulariser (default: %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tv4", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    lam_help = ("regularisation weight (default: bike optimum of the model: "
                + ", ".join(f"{k} {v:g}" for k, v in PUBLISHED_LAMBDAS.items())
                + "; aniso 0.12, prn 0.075 borrowed)")

    d = sub.add_parser("denoise", help="TV denoising with a quadratic data term")
    d.add_argument("--in", dest="inp", required=True, help="input PGM/PNG")
    d.add_argument("--out", required=True, help="output PGM/PNG")
    _tv_flag(d, "new")
    d.add_argument("--lambda", dest="lam", type=float, help=lam_help)
    d.add_argument("--ref", help="clean reference image for error metrics")
    d.add_argument("--noise-sigma", type=float, default=None,
                   help="corrupt the input with Gaussian noise of this std first (e.g. 0.18); "
                        "the clean input then serves as reference if --ref is absent")
    d.add_argument("--seed", type=int, default=0, help="noise seed (default: %(default)s)")
    _solver_flags(d, "denoise")

    u = sub.add_parser("upscale", help="TV-minimal upscaling subject to A x = y")
    u.add_argument("--in", dest="inp", required=True, help="low-resolution PGM/PNG")
    u.add_argument("--out", required=True, help="output PGM/PNG")
    u.add_argument("--scale", type=int, default=4, help="integer factor m (default: %(default)s)")
    _tv_flag(u, "new")
    u.add_argument("--ref", help="high-resolution reference for the Frobenius error")
    _solver_flags(u, "upscale")

    s = sub.add_parser("sweep", help="denoise over a list of lambdas and report rel. error")
    s.add_argument("--in", dest="inp", required=True, help="noisy (or clean, with --noise-sigma) input")
    s.add_argument("--ref", required=True, help="clean reference image")
    _tv_flag(s, "new")
    grid = s.add_mutually_exclusive_group(required=True)
    grid.add_argument("--lambdas", help="comma-separated list, e.g. 0.05,0.1,0.2")
    grid.add_argument("--log-grid", nargs=3, metavar=("START", "STOP", "NUM"),
                      help="NUM log-spaced values from START to STOP")
    s.add_argument("--noise-sigma", type=float, default=None, help="corrupt the input first")
    s.add_argument("--seed", type=int, default=0, help="noise seed (default: %(default)s)")
    s.add_argument("--csv", help="write the CSV here instead of stdout")
    s.add_argument("--plot", help="also save a lambda-vs-error plot (needs matplotlib)")
    s.add_argument("--threads", type=int, default=None,
                   help="parallel solves (default: TV4_THREADS or 1)")
    _solver_flags(s, "denoise")

    c = sub.add_parser("selfcheck", help="verify adjoints and prox identities")
    c.add_argument("--seed", type=int, default=0, help="random seed (default: %(default)s)")

    t = sub.add_parser("tv", help="evaluate a TV model on an image")
    t.add_argument("--in", dest="inp", required=True, help="input PGM/PNG")
    t.add_argument("--model", choices=MODELS, required=True, help="TV model")
    t.add_argument("--tol", type=float, default=1e-6,
                   help="relative tolerance of the dual evaluation (default: %(default)s)")
    t.add_argument("--max-iter", type=int, default=5000,
                   help="iteration cap of the dual evaluation (default: %(default)s)")
    t.add_argument("--stencils", choices=VARIANTS, default="aligned",
                   help="interpolation stencils of the new model (default: %(default)s)")

    y = sub.add_parser("synth", help="write a synthetic test image")
    y.add_argument("--kind", choices=FIXTURES, required=True, help="fixture type")
    y.add_argument("--n", type=int, default=92, help="side length (default: %(default)s)")
    y.add_argument("--seed", type=int, default=0, help="seed (default: %(default)s)")
    y.add_argument("--out", required=True, help="output PGM/PNG")
    y.add_argument("--downscale", type=int, default=None,
                   help="also write the block-averaged image with this factor")
    y.add_argument("--low-out", help="path of the downscaled image (with --downscale)")
    return parser


# -- helpers ---------------------------------------------------------------

def _config(args, task: str, shape) -> SolverConfig:
    cfg = default_config(args.tv, task, steps=args.steps, iters=args.iters, shape=shape,
                         variant=args.stencils)
    over = {k: getattr(args, k) for k in ("tau", "sigma", "rho", "mu") if getattr(args, k) is not None}
    if args.residual_tol is not None:
        over["residual_tol"] = args.residual_tol
    if over:
        fields = {k: getattr(cfg, k) for k in ("tau", "sigma", "rho", "mu", "iters", "residual_tol")}
        fields.update(over)
        try:
            cfg = SolverConfig(**fields)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    return cfg


def _cfg_json(cfg: SolverConfig, model: str) -> dict:
    out = {"tau": cfg.tau, "sigma": cfg.sigma}
    if model in DUAL_MODELS:
        out["mu"] = cfg.mu
    else:
        out["rho"] = cfg.rho
    return out


def _residual(report, model) -> float:
    if model in DUAL_MODELS:
        return report.relative_residual
    return float(report.extras.get("last_step", float("nan")))


def _errors(x, ref) -> dict:
    diff = float(np.linalg.norm(x - ref))
    return {
        "abs_err": diff,
        "rel_err_clean_denom": diff / float(np.linalg.norm(ref)),
        "rel_err_denoised_denom": diff / max(float(np.linalg.norm(x)), 1e-300),
    }


def _load_ref(path, shape):
    ref = read_image(path)
    if ref.shape != shape:
        raise UsageError(f"reference {path} is {ref.shape[0]}x{ref.shape[1]}, expected {shape[0]}x{shape[1]}")
    return ref


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=False))


def _atomic_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _noisy_input(args):
    y = read_image(args.inp)
    clean = None
    if args.noise_sigma is not None:
        if args.noise_sigma < 0:
            raise UsageError("--noise-sigma must be non-negative")
        clean = y
        y = add_gaussian_noise(y, args.noise_sigma, args.seed)
    return y, clean


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"tv4: warning: {message}", file=sys.stderr)


# -- commands --------------------------------------------------------------

def cmd_denoise(args) -> int:
    y, clean = _noisy_input(args)
    lam = default_lambda(args.tv) if args.lam is None else args.lam
    if lam < 0:
        raise UsageError("--lambda must be non-negative")
    spec = ProblemSpec(args.tv, y, lam=lam, stencils=args.stencils)
    cfg = _config(args, "denoise", y.shape)
    report = solve(spec, cfg)
    write_image(report.x, args.out)
    metrics = {"command": "denoise", "tv": args.tv, "lambda": lam, **_cfg_json(cfg, args.tv),
               "iterations": report.iterations, "residual": _residual(report, args.tv),
               "runtime": report.wall_time}
    ref = _load_ref(args.ref, y.shape) if args.ref else clean
    if ref is not None:
        metrics.update(_errors(report.x, ref))
    _emit(metrics)
    return EXIT_OK


def cmd_upscale(args) -> int:
    y = read_image(args.inp)
    try:
        A = DownscaleOp.for_lowres(args.scale, y.shape)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    spec = ProblemSpec(args.tv, y, fidelity="upscale", scale=args.scale, stencils=args.stencils)
    cfg = _config(args, "upscale", spec.shape)
    report = solve(spec, cfg)
    feas = float(np.linalg.norm(A(report.x) - y))
    write_image(report.x, args.out)
    metrics = {"command": "upscale", "tv": args.tv, "scale": args.scale, **_cfg_json(cfg, args.tv),
               "iterations": report.iterations, "residual": _residual(report, args.tv),
               "feasibility": feas, "runtime": report.wall_time}
    if args.ref:
        metrics.update(_errors(report.x, _load_ref(args.ref, spec.shape)))
    _emit(metrics)
    if feas > FEASIBILITY_TOL:
        print(f"tv4: feasibility check failed: ||A x - y|| = {feas:.3e} > {FEASIBILITY_TOL:g}",
              file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def _parse_lambdas(args) -> np.ndarray:
    try:
        if args.lambdas is not None:
            lams = [float(t) for t in args.lambdas.split(",") if t.strip()]
        else:
            a, b, n = float(args.log_grid[0]), float(args.log_grid[1]), int(args.log_grid[2])
            if a <= 0 or b <= 0 or n < 1:
                raise ValueError("log grid needs positive bounds and NUM >= 1")
            lams = np.geomspace(a, b, n).tolist()
    except ValueError as exc:
        raise UsageError(f"bad lambda grid: {exc}") from None
    if not lams or min(lams) < 0:
        raise UsageError("lambdas must be a non-empty list of non-negative numbers")
    return np.asarray(lams)


def cmd_sweep(args) -> int:
    lams = _parse_lambdas(args)
    y, _ = _noisy_input(args)
    ref = _load_ref(args.ref, y.shape)
    spec = ProblemSpec(args.tv, y, lam=float(lams[0]), stencils=args.stencils)
    cfg = _config(args, "denoise", y.shape)
    res = lambda_sweep(spec, lams, ref, cfg, threads=args.threads)
    lines = ["lambda,rel_err"] + [f"{lam:.10g},{err:.10g}" for lam, err in res.rows()]
    csv_text = "\n".join(lines) + "\n"
    argmin = f"# argmin lambda={res.best_lambda:.10g} rel_err={res.rel_err[res.best_index]:.10g}"
    if args.csv:
        _atomic_text(args.csv, csv_text)
        print(argmin)
    else:
        sys.stdout.write(csv_text)
        print(argmin)
    if args.plot:
        try:
            import matplotlib

            matplotlib.use("Agg")
            import matplotlib.pyplot as plt
        except ImportError:
            raise UsageError("--plot needs matplotlib (pip install 'artifact[plot]')") from None
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.semilogx(res.lambdas, res.rel_err, "o-", label=args.tv)
        ax.set_xlabel("lambda")
        ax.set_ylabel("relative error")
        ax.legend()
        fig.tight_layout()
        fig.savefig(args.plot)
        plt.close(fig)
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    report = run_selfcheck(seed=args.seed)
    print(report.render())
    return EXIT_OK if report.ok else EXIT_VERIFY


def cmd_tv(args) -> int:
    x = read_image(args.inp)
    out = {"model": args.model}
    if args.model in DUAL_MODELS:
        if not args.tol > 0:
            raise UsageError("--tol must be positive")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            r = tv_dual_eval(args.model, x, tol=args.tol, max_iter=args.max_iter, variant=args.stencils)
        out.update(tv=r.value, gap=r.gap, infeasibility=r.infeasibility,
                   iterations=r.iterations, converged=r.converged)
    else:
        out["tv"] = evaluate_tv(args.model, x)
    _emit(out)
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.n < 2:
        raise UsageError("--n must be at least 2")
    x = synth_fixture(args.kind, args.n, args.seed)
    write_image(x, args.out)
    info = {"kind": args.kind, "n": args.n, "out": args.out}
    if args.downscale:
        if not args.low_out:
            raise UsageError("--downscale needs --low-out")
        try:
            A = DownscaleOp(args.downscale, x.shape)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        write_image(A(x), args.low_out)
        info["low_out"] = args.low_out
    _emit(info)
    return EXIT_OK


COMMANDS = {
    "denoise": cmd_denoise,
    "upscale": cmd_upscale,
    "sweep": cmd_sweep,
    "selfcheck": cmd_selfcheck,
    "tv": cmd_tv,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 0 for --help, 2 for bad flags
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    saved, warnings.showwarning = warnings.showwarning, _show_warning
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ImageFormatError, GridError, FileNotFoundError, IsADirectoryError,
            PermissionError) as exc:
        print(f"tv4 {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverDivergence as exc:
        print(f"tv4 {args.command}: solver diverged: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    finally:
        warnings.showwarning = saved


if __name__ == "__main__":
    sys.exit(main())
