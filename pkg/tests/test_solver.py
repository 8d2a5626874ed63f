import warnings

import numpy as np
import pytest

from tv4.grid import GridError
from tv4.images import add_gaussian_noise, synth_fixture
from tv4.pdhg import SolverDivergence
from tv4.prox import DownscaleOp
from tv4.solver import (
    PUBLISHED_STEPS,
    PUBLISHED_ITERS,
    PUBLISHED_LAMBDAS,
    PUBLISHED_LAMBDAS_WATCH,
    ProblemSpec,
    SolverConfig,
    StepSizeWarning,
    default_config,
    default_lambda,
    lambda_sweep,
    operator_norm,
    relative_error,
    solve,
)
from tv4.tv import MODELS, evaluate_tv

ALL = list(MODELS)


def safe(model, shape, iters, task="denoise"):
    return default_config(model, task, steps="safe", shape=shape, iters=iters)


# -- configuration -------------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(tau=0, sigma=1), dict(tau=1, sigma=-1), dict(tau=1, sigma=1, rho=2.0),
                                dict(tau=1, sigma=1, mu=0.0), dict(tau=1, sigma=1, iters=-1),
                                dict(tau=1, sigma=1, record_every=0)])
def test_config_rejects_bad_values(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


def test_spec_validation():
    y = np.zeros((4, 4))
    with pytest.raises(ValueError):
        ProblemSpec("tv5", y)
    with pytest.raises(ValueError):
        ProblemSpec("iso", y, fidelity="deblur")
    with pytest.raises(ValueError):
        ProblemSpec("iso", y, lam=-1)
    with pytest.raises(ValueError):
        ProblemSpec("new", y, stencils="rotated")
    with pytest.raises(GridError):
        ProblemSpec("iso", np.zeros(5))
    with pytest.raises(GridError):
        ProblemSpec("iso", np.full((3, 3), np.nan))


def test_upscale_forces_unit_lambda_and_shape():
    spec = ProblemSpec("iso", np.ones((3, 5)), lam=0.3, fidelity="upscale", scale=4)
    assert spec.lam == 1.0
    assert spec.shape == (12, 20)
    assert isinstance(spec.downscale, DownscaleOp)
    np.testing.assert_array_equal(spec.initial_image(), np.ones((12, 20)))


def test_downscale_rejects_non_divisible():
    with pytest.raises(GridError):
        DownscaleOp(4, (10, 12))


def test_default_config_rejects_unknown_task():
    with pytest.raises(ValueError):
        default_config("iso", "deblur")
    with pytest.raises(ValueError):
        default_config("iso", steps="fast")


# -- published defaults -------------------------------------------------------

def test_denoise_steps_match_table():
    d = PUBLISHED_STEPS["denoise"]
    assert d["upwind"] == pytest.approx(dict(tau=0.01, sigma=1600.0, rho=1.9))
    assert d["iso"] == pytest.approx(dict(tau=0.01, sigma=800.0, rho=1.9))
    assert d["condat"] == pytest.approx(dict(tau=0.99 / 8, sigma=0.99 / 3, mu=1.0))
    assert d["new"] == pytest.approx(dict(tau=0.099, sigma=0.099, mu=1.0))


def test_upscale_steps_match_table():
    d = PUBLISHED_STEPS["upscale"]
    assert d["upwind"] == pytest.approx(dict(tau=0.02, sigma=800.0, rho=1.9))
    assert d["iso"] == pytest.approx(dict(tau=0.125, sigma=0.1, rho=1.0))
    assert d["condat"] == pytest.approx(dict(tau=0.1125, sigma=0.3, mu=1.0))
    assert d["new"] == pytest.approx(dict(tau=0.03, sigma=0.15, mu=1.0))


def test_lambdas_match_table():
    assert PUBLISHED_LAMBDAS == {"upwind": 0.155, "iso": 0.12, "condat": 0.12, "new": 0.075}
    assert PUBLISHED_LAMBDAS_WATCH == {"upwind": 0.095, "iso": 0.08, "condat": 0.075, "new": 0.045}
    assert default_lambda("new") == 0.075
    assert PUBLISHED_ITERS == {"denoise": 1000, "upscale": 20000}
    for m in ALL:
        assert default_lambda(m) > 0


def test_published_config_is_verbatim():
    cfg = default_config("condat", "denoise")
    assert (cfg.tau, cfg.sigma, cfg.mu, cfg.iters) == (0.99 / 8, 0.99 / 3, 1.0, 1000)


# -- step sizes ------------------------------------------------------------------

def test_operator_norm_matches_dense_svd():
    from tv4.solver import _composite_op, _constraint_matrix

    n = 6
    for model in ("iso", "prn", "upwind"):
        K = _composite_op(model, n, n)
        dense = np.column_stack([K(e.reshape(n, n)).ravel() for e in np.eye(n * n)])
        assert operator_norm(model, (n, n)) == pytest.approx(np.linalg.norm(dense, 2), rel=1e-6)
    for model in ("condat", "new"):
        dense = _constraint_matrix(model, n, n).toarray()
        assert operator_norm(model, (n, n)) == pytest.approx(np.linalg.norm(dense, 2), rel=1e-6)


@pytest.mark.parametrize("model", ["iso", "upwind"])
def test_published_composite_steps_warn(model):
    y = np.random.default_rng(0).random((8, 8))
    cfg = default_config(model, "denoise", iters=2)
    with pytest.warns(StepSizeWarning):
        solve(ProblemSpec(model, y, lam=0.1), cfg)


@pytest.mark.parametrize("model", ALL)
@pytest.mark.parametrize("task", ["denoise", "upscale"])
def test_safe_steps_satisfy_bound(model, task):
    cfg = default_config(model, task, steps="safe", shape=(16, 16))
    assert cfg.tau * cfg.sigma * operator_norm(model, (16, 16)) ** 2 <= 1 + 1e-9


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported():
    y = np.random.default_rng(0).random((8, 8))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StepSizeWarning)
        with pytest.raises(SolverDivergence):
            solve(ProblemSpec("new", y, lam=0.1), SolverConfig(tau=50, sigma=50, mu=1.9, iters=3000))


# -- denoising examples ---------------------------------------------------------

@pytest.mark.parametrize("model", ALL)
def test_zero_lambda_returns_data(model, rng):
    y = rng.random((10, 10))
    r = solve(ProblemSpec(model, y, lam=0.0), safe(model, y.shape, 3000))
    np.testing.assert_allclose(r.x, y, atol=1e-6)


@pytest.mark.parametrize("model", ALL)
def test_constant_image_is_fixed_point(model):
    y = np.full((9, 11), 0.37)
    r = solve(ProblemSpec(model, y, lam=0.2), safe(model, y.shape, 200))
    np.testing.assert_allclose(r.x, y, atol=1e-10)


@pytest.mark.parametrize("model", ALL)
def test_huge_lambda_gives_mean(model, rng):
    # [DERIVED] the minimiser tends to the constant image at mean(y)
    y = rng.random((12, 12))
    r = solve(ProblemSpec(model, y, lam=1e6), safe(model, y.shape, 1000))
    assert np.abs(r.x - y.mean()).max() <= 1e-3


@pytest.mark.parametrize("model", ALL)
def test_stripes_stay_constant_along_stripes(model):
    y = synth_fixture("stripes", 24)
    r = solve(ProblemSpec(model, y, lam=0.1), safe(model, y.shape, 2000))
    assert r.x.var(axis=0).max() <= 1e-8


@pytest.mark.parametrize("model", ALL)
def test_objective_not_above_start(model, rng):
    y = rng.random((10, 10))
    lam = 0.2
    r = solve(ProblemSpec(model, y, lam=lam), safe(model, y.shape, 2000))

    def f(x):
        return 0.5 * np.sum((x - y) ** 2) + lam * evaluate_tv(model, x, tol=1e-9, max_iter=50000)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert f(r.x) <= f(y) + 1e-8


@pytest.mark.parametrize("model", ["condat", "new"])
def test_constraint_residual_small_on_fixture(model):
    clean = synth_fixture("piecewise", 32)
    y = add_gaussian_noise(clean, 0.18, seed=1)
    # the published pair for TV_new sits well inside the step bound, so the
    # residual needs ~2000 iterations (1.7e-4 at 1000, 6.7e-5 at 2000)
    r = solve(ProblemSpec(model, y, lam=default_lambda(model)), safe(model, y.shape, 2000))
    assert r.relative_residual <= 1e-4
    assert len(r.residual) == len(r.objective)
    assert r.objective_iters[0] == 0 and r.objective_iters[-1] == 2000


@pytest.mark.parametrize("model", ALL)
def test_deterministic(model, rng):
    y = rng.random((8, 8))
    cfg = safe(model, y.shape, 50)
    a = solve(ProblemSpec(model, y, lam=0.1), cfg)
    b = solve(ProblemSpec(model, y, lam=0.1), cfg)
    np.testing.assert_array_equal(a.x, b.x)


def test_early_stop_on_residual_tol(rng):
    y = rng.random((8, 8))
    cfg = safe("iso", y.shape, 5000)
    cfg.residual_tol = 1e-6
    r = solve(ProblemSpec("iso", y, lam=0.1), cfg)
    assert r.converged and r.iterations < 5000
    assert r.extras["last_step"] <= 1e-6


def test_x0_shape_checked():
    y = np.zeros((6, 6))
    with pytest.raises(GridError):
        solve(ProblemSpec("iso", y), safe("iso", y.shape, 5), x0=np.zeros((5, 6)))
    with pytest.raises(GridError):
        solve(ProblemSpec("new", y), safe("new", y.shape, 5), x0=np.zeros((5, 6)))


# -- upscaling ------------------------------------------------------------------

@pytest.mark.parametrize("model", ALL)
def test_upscale_is_feasible(model, rng):
    low = rng.random((4, 4))
    spec = ProblemSpec(model, low, fidelity="upscale", scale=4)
    r = solve(spec, safe(model, spec.shape, 200, "upscale"))
    assert r.x.shape == (16, 16)
    assert np.linalg.norm(spec.downscale(r.x) - low) <= 1e-6


@pytest.mark.parametrize("model", ALL)
def test_upscale_constant(model):
    low = np.full((3, 3), 0.6)
    spec = ProblemSpec(model, low, fidelity="upscale", scale=4)
    r = solve(spec, safe(model, spec.shape, 100, "upscale"))
    np.testing.assert_allclose(r.x, 0.6, atol=1e-9)


# -- sweeps ---------------------------------------------------------------------

def test_relative_error():
    assert relative_error(np.array([[3.0, 4.0]]), np.array([[0.0, 0.0]]) + 1) == pytest.approx(
        np.sqrt(13) / np.sqrt(2))


def _noisy(n=24):
    clean = synth_fixture("piecewise", n)
    return clean, add_gaussian_noise(clean, 0.18, seed=3)


def test_sweep_length_one():
    clean, y = _noisy()
    res = lambda_sweep(ProblemSpec("iso", y), [0.1], clean, safe("iso", y.shape, 200))
    assert res.rows() == [(0.1, pytest.approx(res.rel_err[0]))]
    assert res.best_lambda == 0.1
    assert res.local_minima() == 1


def test_sweep_prefers_sensible_lambda():
    clean, y = _noisy()
    res = lambda_sweep(ProblemSpec("iso", y), [0.1, 1.0], clean, safe("iso", y.shape, 300))
    assert res.best_lambda == 0.1
    assert res.rel_err[0] < res.rel_err[1]
    # both denominators are reported
    assert np.all(res.rel_err_denoised > 0)


def test_sweep_threads_match_serial():
    clean, y = _noisy(16)
    cfg = safe("new", y.shape, 100)
    lams = [0.03, 0.1, 0.3]
    a = lambda_sweep(ProblemSpec("new", y), lams, clean, cfg, threads=1)
    b = lambda_sweep(ProblemSpec("new", y), lams, clean, cfg, threads=3)
    np.testing.assert_array_equal(a.rel_err, b.rel_err)


def test_sweep_env_threads(monkeypatch):
    from tv4.solver import _thread_count

    monkeypatch.setenv("TV4_THREADS", "3")
    assert _thread_count(None) == 3
    monkeypatch.setenv("TV4_THREADS", "many")
    assert _thread_count(None) == 1
    assert _thread_count(0) == 1


def test_sweep_validation():
    clean, y = _noisy(8)
    with pytest.raises(ValueError):
        lambda_sweep(ProblemSpec("iso", y), [], clean)
    with pytest.raises(GridError):
        lambda_sweep(ProblemSpec("iso", y), [0.1], clean[:4])


def test_local_minima_counts_troughs():
    from tv4.solver import SweepResult

    r = SweepResult(np.arange(5.0), np.array([3, 1, 2, 0.5, 4.0]), np.zeros(5))
    assert r.local_minima() == 2
    r = SweepResult(np.arange(4.0), np.array([4, 3, 2, 1.0]), np.zeros(4))
    assert r.local_minima() == 1
