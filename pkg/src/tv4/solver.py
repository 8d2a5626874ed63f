"""TV-regularised denoising and upscaling.

Two problem shapes are handled:

* ``solve_composite`` for TVs with a closed form (``iso``, ``aniso``,
  ``upwind``, ``prn``): ``min_x F(x) + lam * R(K x)`` with the dual of ``R``
  a per-pixel ball, box or non-negative ball.
* ``solve_constrained`` for the interpolation-constrained TVs (``condat``,
  ``new``): ``min F(x) + lam * sum_star |v_star|_{2,1}`` subject to
  ``C v + D x = 0``, where ``C = -bigL*`` and ``D x = (0, x)``. The
  multiplier of that constraint is the TV dual pair ``(u, s)``.

Both run the relaxed primal-dual iteration of :mod:`tv4.pdhg`. ``F`` is
either ``0.5 ||x - y||^2`` (denoising) or the indicator of
``{x : A x = y}`` with ``A`` block averaging (upscaling, ``lam = 1``).
"""

from __future__ import annotations

import logging
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .diffops import diff4_op, gradient_op, upwind_op
from .grid import GridError, as_image, pixel_norm
from .interp import VARIANTS, big_l_op
from .linop import power_norm
from .pdhg import SolverDivergence, primal_dual
from .prox import (
    DownscaleOp,
    group_soft_threshold,
    project_affine,
    project_box,
    project_nonneg_ball,
    project_unit_ball,
    prox_quadratic,
)
from .tv import DUAL_MODELS, MODELS, evaluate_tv

__all__ = [
    "SolverConfig",
    "ProblemSpec",
    "SolveReport",
    "SweepResult",
    "StepSizeWarning",
    "SolverDivergence",
    "COMPOSITE_MODELS",
    "PUBLISHED_STEPS",
    "default_config",
    "default_lambda",
    "operator_norm",
    "solve",
    "solve_composite",
    "solve_constrained",
    "lambda_sweep",
    "relative_error",
]

log = logging.getLogger(__name__)

COMPOSITE_MODELS = ("iso", "aniso", "upwind", "prn")


class StepSizeWarning(UserWarning):
    """tau * sigma * ||K||^2 exceeds 1; the iteration may not converge."""


@dataclass
class SolverConfig:
    """Step sizes and budget.

    ``rho`` relaxes the composite solver, ``mu`` the constrained one (1 means
    no relaxation). ``residual_tol`` enables early stopping on the relative
    primal change (and, for the constrained form, the constraint residual).
    """

    tau: float
    sigma: float
    rho: float = 1.0
    mu: float = 1.0
    iters: int = 1000
    residual_tol: float | None = None
    record_every: int = 10

    def __post_init__(self):
        if not (self.tau > 0 and self.sigma > 0):
            raise ValueError(f"step sizes must be positive (tau={self.tau}, sigma={self.sigma})")
        for name in ("rho", "mu"):
            r = getattr(self, name)
            if not 0 < r < 2:
                raise ValueError(f"{name} must lie in (0, 2), got {r}")
        if self.iters < 0:
            raise ValueError("iters must be non-negative")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass
class ProblemSpec:
    """What to solve: data ``y``, regulariser name, weight and fidelity.

    For ``fidelity="upscale"`` ``y`` is the low-resolution image, ``scale``
    the integer factor, and ``lam`` is forced to 1.
    """

    regularizer: str
    y: np.ndarray
    lam: float = 1.0
    fidelity: str = "denoise"
    scale: int = 4
    stencils: str = "aligned"

    def __post_init__(self):
        if self.regularizer not in MODELS:
            raise ValueError(f"unknown regularizer {self.regularizer!r}; choose from {MODELS}")
        if self.fidelity not in ("denoise", "upscale"):
            raise ValueError(f"fidelity must be 'denoise' or 'upscale', got {self.fidelity!r}")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.stencils not in VARIANTS:
            raise ValueError(f"stencils must be one of {VARIANTS}, got {self.stencils!r}")
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.fidelity == "upscale":
            self.lam = 1.0
            if self.y.ndim != 2 or not np.all(np.isfinite(self.y)):
                raise GridError("low-resolution image must be a finite 2-D array")
            DownscaleOp.for_lowres(self.scale, self.y.shape)
        else:
            self.y = as_image(self.y, "y")

    @property
    def shape(self) -> tuple[int, int]:
        if self.fidelity == "upscale":
            return (self.y.shape[0] * self.scale, self.y.shape[1] * self.scale)
        return self.y.shape

    @property
    def downscale(self) -> DownscaleOp | None:
        if self.fidelity != "upscale":
            return None
        return DownscaleOp.for_lowres(self.scale, self.y.shape)

    def initial_image(self) -> np.ndarray:
        """``y`` for denoising; block replication ``m^2 A* y`` for upscaling."""
        if self.fidelity == "denoise":
            return self.y.copy()
        A = self.downscale
        return A.m**2 * A.adjoint(self.y)

    def fidelity_value(self, x) -> float:
        if self.fidelity == "denoise":
            return 0.5 * float(np.sum((x - self.y) ** 2))
        return 0.0

    def prox_fidelity(self, z, tau):
        if self.fidelity == "denoise":
            return prox_quadratic(self.y, z, tau)
        return project_affine(self.downscale, self.y, z)


@dataclass
class SolveReport:
    """Result of one solve.

    ``objective[k]`` is sampled at iteration ``objective_iters[k]``
    (iteration 0 is the starting point). ``residual`` holds the constraint
    residual ``||C v + D x||`` of the constrained form at the same samples,
    and is empty for the composite form.
    """

    x: np.ndarray
    objective: np.ndarray
    objective_iters: np.ndarray
    residual: np.ndarray
    iterations: int
    wall_time: float
    step_product: float
    converged: bool = False
    extras: dict = field(default_factory=dict)

    @property
    def final_residual(self) -> float:
        return float(self.residual[-1]) if len(self.residual) else 0.0

    @property
    def relative_residual(self) -> float:
        """Final constraint residual divided by ``||x||``."""
        return self.final_residual / max(float(np.linalg.norm(self.x)), 1e-300)


# Table values: denoising (bike/watch) and upscaling (rhombus/goldhill).
# sigma = 1/(tau/16) and 1/(tau/8) are kept literally as 16/tau and 8/tau.
PUBLISHED_STEPS = {
    "denoise": {
        "upwind": dict(tau=1 / 100, sigma=1 / ((1 / 100) / 16), rho=1.9),
        "iso": dict(tau=1 / 100, sigma=1 / ((1 / 100) / 8), rho=1.9),
        "condat": dict(tau=0.99 / 8, sigma=0.99 / 3, mu=1.0),
        "new": dict(tau=0.99 / 10, sigma=0.99 / 10, mu=1.0),
    },
    "upscale": {
        "upwind": dict(tau=0.02, sigma=1 / (0.02 / 16), rho=1.9),
        "iso": dict(tau=1 / 8, sigma=0.1, rho=1.0),
        "condat": dict(tau=0.9 / 8, sigma=0.9 / 3, mu=1.0),
        "new": dict(tau=0.9 / 30, sigma=0.9 / 6, mu=1.0),
    },
}

PUBLISHED_LAMBDAS = {"upwind": 0.155, "iso": 0.12, "condat": 0.12, "new": 0.075}
PUBLISHED_LAMBDAS_WATCH = {"upwind": 0.095, "iso": 0.08, "condat": 0.075, "new": 0.045}
# no published values for these two; borrowed from the nearest published model
_FALLBACK_LAMBDAS = {"aniso": 0.12, "prn": 0.075}

PUBLISHED_ITERS = {"denoise": 1000, "upscale": 20000}
PUBLISHED_ITERS_GOLDHILL = 5000


def default_lambda(model: str) -> float:
    """Bike-denoising optimum of the matching model."""
    if model in PUBLISHED_LAMBDAS:
        return PUBLISHED_LAMBDAS[model]
    return _FALLBACK_LAMBDAS[model]


def _operator_shape_key(model, shape, variant):
    return (model, int(shape[0]), int(shape[1]), str(variant))


@lru_cache(maxsize=64)
def _norm_cached(model, n1, n2, variant):
    K = _constraint_matrix(model, n1, n2, variant) if model in DUAL_MODELS else _composite_op(model, n1, n2)
    if isinstance(K, sp.spmatrix | sp.sparray):
        Kt = K.T.tocsr()
        return power_norm(lambda z: K @ z, lambda w: Kt @ w, (K.shape[1],), iters=300, tol=1e-9)
    return K.norm(iters=300, tol=1e-9)


def operator_norm(model: str, shape, variant: str = "aligned") -> float:
    """Power-method estimate of the linear operator used by the solver for ``model``."""
    return _norm_cached(*_operator_shape_key(model, shape, variant))


def default_config(model: str, task: str = "denoise", steps: str = "published",
                   iters: int | None = None, shape=None, variant: str = "aligned") -> SolverConfig:
    """Step sizes for ``model``.

    ``steps="published"`` returns the published values where they exist.
    ``steps="safe"`` keeps ``tau`` but lowers ``sigma`` to ``1/(tau ||K||^2)``
    whenever the published pair violates the step bound (needs ``shape``;
    a 64x64 grid is used otherwise, the norm being nearly size-independent).
    Models without published values always get the safe rule.
    """
    if task not in PUBLISHED_STEPS:
        raise ValueError(f"task must be 'denoise' or 'upscale', got {task!r}")
    if steps not in ("published", "safe"):
        raise ValueError(f"steps must be 'published' or 'safe', got {steps!r}")
    if iters is None:
        iters = PUBLISHED_ITERS[task]
    params = dict(PUBLISHED_STEPS[task].get(model, {}))
    if not params:
        params = dict(tau=1 / 100, rho=1.9) if task == "denoise" else dict(tau=1 / 8, rho=1.0)
        params["sigma"] = None
    if params["sigma"] is None or steps == "safe":
        n1, n2 = shape if shape is not None else (64, 64)
        knorm2 = operator_norm(model, (n1, n2), variant) ** 2
        if params["sigma"] is None or params["tau"] * params["sigma"] * knorm2 > 1:
            params["sigma"] = 1.0 / (params["tau"] * knorm2)
    return SolverConfig(iters=iters, **params)


def relative_error(x, reference) -> float:
    reference = np.asarray(reference, dtype=np.float64)
    return float(np.linalg.norm(np.asarray(x) - reference) / np.linalg.norm(reference))


# -- composite form ----------------------------------------------------------

@lru_cache(maxsize=None)
def _composite_op(model, n1, n2):
    if model in ("iso", "aniso"):
        return gradient_op(n1, n2)
    if model == "upwind":
        return upwind_op(n1, n2)
    if model == "prn":
        return diff4_op(n1, n2)
    raise ValueError(f"{model!r} is not a composite model")


_DUAL_PROJECTIONS = {
    "iso": project_unit_ball,
    "prn": project_unit_ball,
    "aniso": project_box,
    # (.)_+ makes the upwind TV the support function of ball ∩ orthant
    "upwind": project_nonneg_ball,
}


def _check_steps(model, shape, variant, cfg):
    prod = cfg.tau * cfg.sigma * operator_norm(model, shape, variant) ** 2
    if prod > 1 + 1e-9:
        warnings.warn(
            f"{model}: tau*sigma*||K||^2 = {prod:.3g} > 1; convergence is not guaranteed",
            StepSizeWarning,
            stacklevel=3,
        )
    return prod


def solve_composite(spec: ProblemSpec, cfg: SolverConfig, x0=None) -> SolveReport:
    """Relaxed primal-dual for ``min F(x) + lam * R(K x)`` (closed-form TVs).

    Returns the sampled iterate with the lowest objective; the starting
    point counts as a sample, so denoising never ends worse than ``x0``.
    """
    model = spec.regularizer
    if model not in COMPOSITE_MODELS:
        raise ValueError(f"solve_composite handles {COMPOSITE_MODELS}, not {model!r}")
    shape = spec.shape
    K = _composite_op(model, *shape)
    x0 = spec.initial_image() if x0 is None else as_image(x0, "x0")
    if x0.shape != shape:
        raise GridError(f"x0 shape {x0.shape} does not match problem shape {shape}")
    prod = _check_steps(model, shape, spec.stencils, cfg)
    lam = spec.lam
    project = _DUAL_PROJECTIONS[model]
    upscale = spec.fidelity == "upscale"

    def objective(x):
        if upscale:
            return evaluate_tv(model, project_affine(spec.downscale, spec.y, x))
        return spec.fidelity_value(x) + lam * evaluate_tv(model, x)

    best_x = spec.prox_fidelity(x0, cfg.tau) if upscale else x0.copy()
    best_f = objective(best_x)
    samples, sample_iters = [best_f], [0]
    converged = False
    last_step = float("nan")

    def monitor(k, x, u, step):
        nonlocal best_x, best_f, converged, last_step
        last_step = step
        if k % cfg.record_every == 0 or k == cfg.iters:
            f = objective(x)
            samples.append(f)
            sample_iters.append(k)
            if f < best_f:
                best_f, best_x = f, x.copy()
        if cfg.residual_tol is not None and step <= cfg.residual_tol:
            converged = True
            return True
        return False

    t0 = time.perf_counter()
    x, _, done = primal_dual(
        spec.prox_fidelity,
        lambda w, s: project(w, lam),
        K, K.adjoint, x0, np.zeros(K.out_shape),
        tau=cfg.tau, sigma=cfg.sigma, rho=cfg.rho, iters=cfg.iters, callback=monitor,
    )
    if sample_iters[-1] != done:
        f = objective(x)
        samples.append(f)
        sample_iters.append(done)
        if f < best_f:
            best_f, best_x = f, x.copy()
    if upscale:
        best_x = project_affine(spec.downscale, spec.y, best_x)
    return SolveReport(
        x=best_x,
        objective=np.asarray(samples),
        objective_iters=np.asarray(sample_iters),
        residual=np.zeros(0),
        iterations=done,
        wall_time=time.perf_counter() - t0,
        step_product=prod,
        converged=converged,
        extras={"last_iterate": x, "last_step": last_step},
    )


# -- constrained form --------------------------------------------------------

@lru_cache(maxsize=16)
def _constraint_matrix(model, n1, n2, variant="aligned"):
    """Sparse ``[D | C]`` acting on the flat primal ``(x, v, alpha)``."""
    big = big_l_op(model, n1, n2, variant).matrix
    npx = n1 * n2
    ch = 4 if model == "new" else 2
    d = sp.vstack([sp.csr_matrix((ch * npx, npx)), sp.identity(npx, format="csr")])
    return sp.hstack([d, -big.T]).tocsr()


def solve_constrained(spec: ProblemSpec, cfg: SolverConfig, x0=None) -> SolveReport:
    """Primal-dual on ``min F(x) + lam * sum |v_star| s.t. C v + D x = 0``.

    The primal unknown is ``(x, v_star..., alpha)``; the multiplier is the
    dual pair ``(u, s)``. Returns the last ``x`` (projected onto ``A x = y``
    for upscaling) together with the constraint residual history.
    """
    model = spec.regularizer
    if model not in DUAL_MODELS:
        raise ValueError(f"solve_constrained handles {DUAL_MODELS}, not {model!r}")
    n1, n2 = shape = spec.shape
    npx = n1 * n2
    ch = 4 if model == "new" else 2
    nstar = 4 if model == "new" else 3
    Kmat = _constraint_matrix(model, n1, n2, spec.stencils)
    Kt = Kmat.T.tocsr()
    prod = _check_steps(model, shape, spec.stencils, cfg)
    lam = spec.lam
    x0 = spec.initial_image() if x0 is None else as_image(x0, "x0")
    if x0.shape != shape:
        raise GridError(f"x0 shape {x0.shape} does not match problem shape {shape}")

    nv = nstar * ch * npx

    def unpack(z):
        return z[:npx].reshape(shape), z[npx:npx + nv].reshape(nstar, ch, n1, n2), z[npx + nv:]

    def prox_g(z, tau):
        x, v, alpha = unpack(z)
        out = np.empty_like(z)
        out[:npx] = spec.prox_fidelity(x, tau).ravel()
        vv = np.empty_like(v)
        for k in range(nstar):
            vv[k] = group_soft_threshold(v[k], tau * lam)
        out[npx:npx + nv] = vv.ravel()
        out[npx + nv:] = alpha
        return out

    def objective(z):
        x, v, _ = unpack(z)
        reg = sum(float(pixel_norm(v[k]).sum()) for k in range(nstar))
        return spec.fidelity_value(x) + lam * reg

    z0 = np.zeros(Kmat.shape[1])
    z0[:npx] = x0.ravel()
    z0[npx + nv:] = -x0.ravel()
    samples, sample_iters, residuals = [objective(z0)], [0], [float(np.linalg.norm(Kmat @ z0))]
    converged = False
    last_step = float("nan")

    def monitor(k, z, w, step):
        nonlocal converged, last_step
        last_step = step
        sample = k % cfg.record_every == 0 or k == cfg.iters
        if sample or cfg.residual_tol is not None:
            r = float(np.linalg.norm(Kmat @ z))
            if sample:
                samples.append(objective(z))
                sample_iters.append(k)
                residuals.append(r)
            if cfg.residual_tol is not None:
                xn = max(float(np.linalg.norm(z[:npx])), 1e-300)
                if step <= cfg.residual_tol and r / xn <= cfg.residual_tol:
                    converged = True
                    return True
        return False

    t0 = time.perf_counter()
    z, w, done = primal_dual(
        prox_g, lambda w, s: w, lambda z: Kmat @ z, lambda w: Kt @ w,
        z0, np.zeros(Kmat.shape[0]),
        tau=cfg.tau, sigma=cfg.sigma, rho=cfg.mu, iters=cfg.iters, callback=monitor,
    )
    if sample_iters[-1] != done:
        samples.append(objective(z))
        sample_iters.append(done)
        residuals.append(float(np.linalg.norm(Kmat @ z)))
    x = z[:npx].reshape(shape).copy()
    if spec.fidelity == "upscale":
        x = project_affine(spec.downscale, spec.y, x)
    _, v, alpha = unpack(z)
    return SolveReport(
        x=x,
        objective=np.asarray(samples),
        objective_iters=np.asarray(sample_iters),
        residual=np.asarray(residuals),
        iterations=done,
        wall_time=time.perf_counter() - t0,
        step_product=prod,
        converged=converged,
        extras={"v": v.copy(), "alpha": alpha.reshape(shape).copy(),
                "multiplier": w.copy(), "last_step": last_step},
    )


def solve(spec: ProblemSpec, cfg: SolverConfig | None = None, x0=None) -> SolveReport:
    """Solve ``spec`` with the form matching its regulariser."""
    if cfg is None:
        cfg = default_config(spec.regularizer, spec.fidelity, shape=spec.shape, variant=spec.stencils)
    if spec.regularizer in DUAL_MODELS:
        return solve_constrained(spec, cfg, x0)
    return solve_composite(spec, cfg, x0)


# -- lambda sweeps -----------------------------------------------------------

@dataclass
class SweepResult:
    lambdas: np.ndarray
    rel_err: np.ndarray
    rel_err_denoised: np.ndarray
    reports: list = field(repr=False, default_factory=list)

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.rel_err))

    @property
    def best_lambda(self) -> float:
        return float(self.lambdas[self.best_index])

    def rows(self):
        return list(zip(self.lambdas.tolist(), self.rel_err.tolist()))

    def local_minima(self) -> int:
        """Number of strict interior-or-endpoint local minima of the error curve."""
        e = self.rel_err
        n = len(e)
        count = 0
        for i in range(n):
            left = i == 0 or e[i] < e[i - 1]
            right = i == n - 1 or e[i] < e[i + 1]
            if left and right:
                count += 1
        return count


def _thread_count(requested: int | None) -> int:
    if requested is not None:
        return max(1, requested)
    env = os.environ.get("TV4_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer TV4_THREADS=%r", env)
    return 1


def lambda_sweep(spec: ProblemSpec, lambdas, reference, cfg: SolverConfig | None = None,
                 threads: int | None = None, keep_reports: bool = False) -> SweepResult:
    """Solve ``spec`` once per ``lambda`` and score against ``reference``.

    ``rel_err`` uses the clean reference as denominator,
    ``rel_err_denoised`` the restored image. Points run concurrently on up
    to ``threads`` workers (default: ``TV4_THREADS`` or 1).
    """
    lambdas = np.asarray(list(lambdas), dtype=np.float64)
    if lambdas.size == 0:
        raise ValueError("need at least one lambda")
    reference = as_image(reference, "reference")
    if reference.shape != spec.shape:
        raise GridError(f"reference shape {reference.shape} does not match problem shape {spec.shape}")

    def run(lam):
        return solve(replace(spec, lam=float(lam)), cfg)

    n = _thread_count(threads)
    if n > 1 and len(lambdas) > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            reports = list(pool.map(run, lambdas))
    else:
        reports = [run(lam) for lam in lambdas]
    err = np.array([relative_error(r.x, reference) for r in reports])
    err_d = np.array([
        float(np.linalg.norm(r.x - reference) / max(np.linalg.norm(r.x), 1e-300)) for r in reports
    ])
    return SweepResult(lambdas, err, err_d, reports if keep_reports else [])
