import math

import numpy as np
import pytest
from scipy.optimize import brentq

from hjdenoise.admm_solvers import (
    AdmmConfig,
    MeyerBallPrior,
    ModelName,
    SolveReport,
    admm_generic,
    denoise,
    hamiltonian_for_model,
    mult_invtv_closed_form,
    mult_invtv_denoise,
    mult_log_newton,
    mult_logtv_denoise,
    nonadditive_objective,
    poisson_log_newton,
    poisson_logtv_denoise,
    poisson_tv_closed_form,
    poisson_tv_denoise,
    solve_v_update,
)
from hjdenoise.convex_core import Hamiltonian, HamiltonianKind
from hjdenoise.errors import DimensionError, InputError, SolverError
from hjdenoise.tv_ops import tv_eval

P, B = HamiltonianKind.POISSON_EXP, HamiltonianKind.BURG_NEGLOG


def cfg(t=1.0, alpha=0.3, tol=1e-9, **extra):
    return AdmmConfig(t=t, alpha=alpha, primal_tol=tol, dual_tol=tol, max_iter=50000, tv_tol=1e-12, **extra)


def grid_argmin(objective, hi=6.0):
    """Minimize objective(v1, v2) over (0, hi]² on a coarse grid, then refine at 1e-4."""
    coarse = np.arange(0.01, hi + 1e-9, 0.01)
    v1, v2 = np.meshgrid(coarse, coarse, indexing="ij")
    i, j = np.unravel_index(np.argmin(objective(v1, v2)), v1.shape)
    f1 = np.arange(max(coarse[i] - 0.02, 1e-4), coarse[i] + 0.02, 1e-4)
    f2 = np.arange(max(coarse[j] - 0.02, 1e-4), coarse[j] + 0.02, 1e-4)
    v1, v2 = np.meshgrid(f1, f2, indexing="ij")
    i, j = np.unravel_index(np.argmin(objective(v1, v2)), v1.shape)
    return np.array([[f1[i], f2[j]]])


# inner solvers -------------------------------------------------------------

def test_poisson_newton_known_values():
    assert poisson_log_newton([[1.0]], 1.0, 1.0)[0, 0] == pytest.approx(1.0, abs=1e-12)
    oracle = brentq(lambda v: v + math.log(v), 1e-6, 1.0, xtol=1e-15)
    assert poisson_log_newton([[0.0]], 1.0, 1.0)[0, 0] == pytest.approx(oracle, abs=1e-10)
    assert oracle == pytest.approx(0.567143, abs=1e-6)


def test_poisson_newton_matches_bisection():
    rng = np.random.default_rng(0)
    for _ in range(30):
        t, lam, rhs = rng.uniform(0.2, 5), rng.uniform(0.1, 10), rng.uniform(-2, 40)
        oracle = brentq(lambda v: t * math.log(v) + lam * t * t * v - rhs, 1e-300, 1e6, xtol=1e-15, rtol=1e-15)
        assert poisson_log_newton([[rhs]], t, lam)[0, 0] == pytest.approx(oracle, rel=1e-10, abs=1e-12)


def test_mult_log_newton_matches_bisection():
    # t = λ = x = 1 with w − y = 0 gives 1 + u − e^{−u} = 0, root u = 0
    assert mult_log_newton([[1.0]], 1.0, 1.0, [[0.0]])[0, 0] == pytest.approx(0.0, abs=1e-12)
    rng = np.random.default_rng(1)
    for _ in range(30):
        x, t, lam, c = rng.uniform(0.1, 10), rng.uniform(0.2, 5), rng.uniform(0.1, 10), rng.uniform(-3, 3)
        oracle = brentq(lambda u: t + lam * (u - c) - x * math.exp(-u), -60.0, 60.0, xtol=1e-15)
        assert mult_log_newton([[x]], t, lam, [[c]])[0, 0] == pytest.approx(oracle, abs=1e-10)


def test_mult_log_newton_rejects_nonpositive_data():
    with pytest.raises(InputError):
        mult_log_newton([[0.0]], 1.0, 1.0, [[0.0]])


def test_poisson_tv_closed_form():
    v = poisson_tv_closed_form([[2.0]], 1.0, 2.0, [[1.0]])[0, 0]
    assert v == pytest.approx(0.25 + math.sqrt(1.0625), abs=1e-12)
    assert 1.0 - 2.0 / v + 2.0 * (v - 1.0) == pytest.approx(0.0, abs=1e-12)
    # x = 0: v = max(2s, 0)
    assert poisson_tv_closed_form([[0.0]], 1.0, 2.0, [[0.5 + 2.0]])[0, 0] == pytest.approx(2.0)
    assert poisson_tv_closed_form([[0.0]], 1.0, 2.0, [[-3.0]])[0, 0] == 0.0


def test_closed_forms_satisfy_stationarity():
    rng = np.random.default_rng(2)
    x = rng.uniform(0.1, 10, size=(4, 4))
    c = rng.uniform(-5, 5, size=(4, 4))
    for t, lam in ((0.5, 1.0), (2.0, 0.3), (30.0, 5.0)):
        v = poisson_tv_closed_form(x, t, lam, c)
        np.testing.assert_allclose(t - x / v + lam * (v - c), 0.0, atol=1e-12 * (1 + np.abs(x / v)).max())
        v = mult_invtv_closed_form(x, t, lam, c)
        np.testing.assert_allclose(-1.0 / v + lam * (t * v - x + c), 0.0,
                                   atol=1e-12 * (1 + np.abs(1.0 / v)).max())


def test_mult_invtv_closed_form_known_value():
    assert mult_invtv_closed_form([[0.7]], 1.0, 1.0, [[0.7]])[0, 0] == pytest.approx(1.0)


def test_quadratic_v_update():
    ham = Hamiltonian(kind=HamiltonianKind.QUADRATIC, dimension=1)
    v = solve_v_update(ham, 2.0, 0.5, np.array([[3.0]]), None, cfg(t=2.0))
    assert v[0, 0] == pytest.approx(0.5 * 3.0 / 2.0)


# solvers -------------------------------------------------------------------

@pytest.mark.parametrize("model", list(ModelName))
def test_constant_image_is_a_fixed_point(model):
    c = np.full((3, 3), 1.7)
    report = denoise(model, 2.5 * c, cfg(t=2.5, alpha=0.8))
    assert report.converged
    np.testing.assert_allclose(report.v_bar, c, atol=1e-6)
    assert report.model == ModelName(model).value


def test_single_pixel_images():
    np.testing.assert_allclose(poisson_logtv_denoise([[3.0]], cfg()).v_bar, [[3.0]], atol=1e-6)
    np.testing.assert_allclose(mult_invtv_denoise([[5.0]], cfg()).v_bar, [[5.0]], atol=1e-6)


def test_generic_admm_two_pixel_poisson():
    x = np.array([[1.0, 4.0]])
    report = admm_generic(x, Hamiltonian.for_image(P, x), cfg(alpha=0.3))
    oracle = grid_argmin(lambda v1, v2: (v1 + v2) - np.log(v1) - 4 * np.log(v2)
                         + 0.3 * np.abs(np.log(v2) - np.log(v1)))
    np.testing.assert_allclose(report.v_bar, oracle, atol=1e-3)
    np.testing.assert_allclose(report.v_bar, [[1.3, 3.7]], atol=1e-6)


def test_poisson_logtv_two_pixel_matches_grid_search():
    x, t, alpha = np.array([[2.0, 8.0]]), 2.0, 0.5
    report = poisson_logtv_denoise(x, cfg(t=t, alpha=alpha))
    oracle = grid_argmin(lambda v1, v2: t * (v1 + v2) - 2 * np.log(v1) - 8 * np.log(v2)
                         + alpha * np.abs(np.log(v2) - np.log(v1)))
    np.testing.assert_allclose(report.v_bar, oracle, atol=1e-3)
    np.testing.assert_allclose(report.v_bar, [[1.25, 3.75]], atol=1e-6)


def test_poisson_tv_two_pixel_matches_grid_search():
    report = poisson_tv_denoise([[1.0, 4.0]], cfg(alpha=0.3))
    oracle = grid_argmin(lambda v1, v2: (v1 + v2) - np.log(v1) - 4 * np.log(v2) + 0.3 * np.abs(v2 - v1))
    np.testing.assert_allclose(report.v_bar, oracle, atol=1e-3)
    np.testing.assert_allclose(report.v_bar, [[1.0 / 0.7, 4.0 / 1.3]], atol=1e-6)


def test_mult_invtv_two_pixel_matches_grid_search():
    report = mult_invtv_denoise([[1.0, 3.0]], cfg(alpha=0.2))
    oracle = grid_argmin(lambda v1, v2: np.log(v1) + np.log(v2) + 1 / v1 + 3 / v2 + 0.2 * np.abs(1 / v1 - 1 / v2))
    np.testing.assert_allclose(report.v_bar, oracle, atol=1e-3)
    np.testing.assert_allclose(report.v_bar, [[1.2, 2.8]], atol=1e-6)


def test_mult_logtv_two_pixel_matches_grid_search():
    report = mult_logtv_denoise([[1.0, 3.0]], cfg(alpha=0.2))
    oracle = grid_argmin(lambda v1, v2: np.log(v1) + np.log(v2) + 1 / v1 + 3 / v2
                         + 0.2 * np.abs(np.log(v2) - np.log(v1)))
    np.testing.assert_allclose(report.v_bar, oracle, atol=1e-3)
    np.testing.assert_allclose(report.v_bar, [[1.25, 2.5]], atol=1e-6)


def poisson_logtv_objective(x, alpha):
    return lambda v1, v2: ((v1 + v2) - x[0, 0] * np.log(v1) - x[0, 1] * np.log(v2)
                           + alpha * np.abs(np.log(v2) - np.log(v1)))


def mult_invtv_objective(x, alpha):
    return lambda v1, v2: (np.log(v1) + np.log(v2) + x[0, 0] / v1 + x[0, 1] / v2
                           + alpha * np.abs(1 / v1 - 1 / v2))


@pytest.mark.parametrize("solver,objective,seed", [
    (poisson_logtv_denoise, poisson_logtv_objective, 3),
    (mult_invtv_denoise, mult_invtv_objective, 13),
])
def test_equivalent_models_on_random_pairs(solver, objective, seed):
    rng = np.random.default_rng(seed)
    for _ in range(20):
        x = rng.uniform(0.5, 5.0, size=(1, 2))
        alpha = float(rng.uniform(0.05, 0.8))
        report = solver(x, cfg(alpha=alpha))
        assert report.converged
        np.testing.assert_allclose(report.v_bar, grid_argmin(objective(x, alpha)), atol=1e-3)


@pytest.mark.parametrize("kind", [P, B])
def test_minimizer_is_locally_optimal(kind):
    rng = np.random.default_rng(4)
    x = rng.uniform(1.0, 6.0, size=(3, 3))
    config = cfg(t=1.5, alpha=0.4, tol=1e-10)
    ham = Hamiltonian.for_image(kind, x)
    report = admm_generic(x, ham, config)
    prior = MeyerBallPrior(0.4)
    base = nonadditive_objective(ham, x, 1.5, report.v_bar, prior)
    assert base == pytest.approx(report.obj_nonadditive, abs=1e-9)
    for _ in range(20):
        nearby = report.v_bar + 1e-3 * rng.uniform(-1, 1, size=x.shape)
        assert nonadditive_objective(ham, x, 1.5, nearby, prior) >= base - 1e-8


def test_meyer_ball_models_preserve_total_intensity():
    x = np.random.default_rng(5).uniform(1.0, 6.0, size=(4, 4))
    report = poisson_logtv_denoise(x, cfg(t=2.0, alpha=0.5))
    assert report.v_bar.sum() == pytest.approx(x.sum() / 2.0, abs=1e-6)


def test_poisson_tv_large_alpha_keeps_the_mean():
    x = np.random.default_rng(6).poisson(20.0, size=(6, 6)).astype(float)
    report = poisson_tv_denoise(x, AdmmConfig(t=2.0, alpha=50.0))
    assert report.v_bar.mean() == pytest.approx(x.mean() / 2.0, rel=0.02)
    assert tv_eval(report.v_bar) < 1e-2


def test_zero_counts_are_allowed():
    x = np.array([[0.0, 0.0, 5.0], [0.0, 3.0, 4.0]])
    for model in (ModelName.POISSON_LOGTV, ModelName.POISSON_TV):
        report = denoise(model, x, cfg(alpha=0.5, tol=1e-7))
        assert report.converged
        assert np.all(report.v_bar > 0)
        assert math.isfinite(report.obj_nonadditive)


def test_reports_are_deterministic():
    x = np.random.default_rng(7).uniform(0.5, 3.0, size=(4, 5))
    first = mult_invtv_denoise(x, cfg(alpha=0.3, tol=1e-7))
    second = mult_invtv_denoise(x, cfg(alpha=0.3, tol=1e-7))
    assert np.array_equal(first.v_bar, second.v_bar)
    assert first.primal_residuals == second.primal_residuals
    assert len(first.primal_residuals) == first.iterations == len(first.dual_residuals)


def test_infeasible_data_is_rejected():
    with pytest.raises(InputError):
        poisson_logtv_denoise([[1.0, -1.0]], cfg())
    with pytest.raises(InputError):
        poisson_logtv_denoise([[0.0, 0.0]], cfg())
    with pytest.raises(InputError):
        mult_invtv_denoise([[1.0, 0.0]], cfg())
    with pytest.raises(InputError):
        mult_logtv_denoise([[1.0, 0.0]], cfg())
    with pytest.raises(InputError):
        poisson_tv_denoise([[-2.0]], cfg())


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        admm_generic([[1.0, 2.0]], Hamiltonian(kind=P, dimension=3), cfg())


def test_inner_failure_carries_partial_report():
    with pytest.raises(SolverError) as info:
        poisson_logtv_denoise([[3.0, 7.0]], cfg(newton_max_iter=1))
    assert isinstance(info.value.state, SolveReport)
    assert info.value.state.iterations == 0


def test_max_iter_reports_non_convergence():
    report = mult_invtv_denoise(np.random.default_rng(8).uniform(1, 4, size=(4, 4)),
                                AdmmConfig(t=1.0, alpha=0.3, max_iter=3))
    assert not report.converged
    assert report.iterations == 3


def test_prior_gap_exposes_early_stops():
    # one step leaves x − t·v with nonzero mean, outside the Meyer ball
    early = poisson_logtv_denoise([[1.0, 4.0]], AdmmConfig(t=1.0, alpha=0.3, max_iter=1))
    assert not early.converged
    assert early.prior_gap > 0.1
    done = poisson_logtv_denoise([[1.0, 4.0]], cfg())
    assert done.converged
    assert done.prior_gap <= 1e-4
    assert poisson_tv_denoise([[1.0, 4.0]], cfg()).prior_gap == 0.0


def test_config_accepts_lambda_alias():
    assert AdmmConfig(**{"lambda": 2.0, "t": 1.0, "alpha": 1.0}).lam == 2.0
    with pytest.raises(ValueError):
        AdmmConfig(t=0.0, alpha=1.0)


def test_hamiltonian_for_model():
    assert hamiltonian_for_model("poisson-tv", np.ones((2, 3))).kind is P
    assert hamiltonian_for_model("mult-logtv", np.ones((2, 3))).dimension == 6
