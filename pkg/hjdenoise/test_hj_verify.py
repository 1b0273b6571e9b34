import math

import numpy as np
import pytest

from hjdenoise.admm_solvers import AdmmConfig, poisson_logtv_denoise
from hjdenoise.convex_core import Hamiltonian, HamiltonianKind
from hjdenoise.errors import DomainError
from hjdenoise.hj_verify import (
    HjConfig,
    _f_residual,
    asymptotic_check,
    asymptotic_limit_of_s_over_t,
    duality_check,
    eval_F,
    eval_S,
    fd_convergence_study,
    moreau_identity_check,
    pde_residual_F,
    pde_residual_S,
    recover_minimizer_from_F,
    recover_minimizer_from_S,
    s_midpoint_convexity_gap,
    sample_hj,
    specialized_f_pde_residual,
)

Q, P, B = HamiltonianKind.QUADRATIC, HamiltonianKind.POISSON_EXP, HamiltonianKind.BURG_NEGLOG
PAIR = np.array([[1.0, 4.0]])


def poisson_h_star(v):
    return float(np.sum(v * np.log(v) - v))


@pytest.fixture
def quadratic():
    return Hamiltonian(kind=Q, dimension=1), HjConfig(prior="quadratic")


@pytest.fixture
def poisson_pair():
    return Hamiltonian(kind=P, dimension=2), HjConfig(alpha=0.3)


# analytic quadratic case: S = x²/(2(1+t)), F = x²/(2t(1+t)), v̄ = x/(1+t)

def test_quadratic_values(quadratic):
    ham, cfg = quadratic
    x, t = 1.5, 1.0
    assert eval_S([[x]], t, ham, cfg) == pytest.approx(x * x / (2 * (1 + t)), abs=1e-10)
    assert eval_F([[x]], t, ham, cfg) == pytest.approx(x * x / (2 * t * (1 + t)), abs=1e-10)


def test_quadratic_pde_and_recovery(quadratic):
    ham, cfg = quadratic
    for x, t in ((1.5, 1.0), (-0.7, 2.0), (2.0, 0.5)):
        sample = sample_hj([[x]], t, ham, cfg)
        assert sample.pde_residual_S <= 1e-6
        assert sample.grad_x_S[0, 0] == pytest.approx(x / (1 + t), abs=1e-8)
        assert sample.dS_dt == pytest.approx(-x * x / (2 * (1 + t) ** 2), abs=1e-6)
        assert sample.v_from_S[0, 0] == pytest.approx(x / (1 + t), abs=1e-8)

        # F differenced from its own values; its t-derivatives are larger, hence the finer step
        fine = sample_hj([[x]], t, ham, cfg, fd_step=1e-4)
        assert fine.pde_residual_F <= 1e-6
        assert fine.grad_x_F[0, 0] == pytest.approx(x / (t * (1 + t)), abs=1e-7)
        assert fine.dF_dt == pytest.approx(-x * x * (1 + 2 * t) / (2 * t * t * (1 + t) ** 2), abs=1e-6)
        assert fine.v_from_F[0, 0] == pytest.approx(x / (1 + t), abs=1e-7)


# Poisson 1×2 pair: v̄ = ((x₁ + α)/t, (x₂ − α)/t) once x₂ − x₁ > 2α

def test_poisson_pair_values(poisson_pair):
    ham, cfg = poisson_pair
    v_bar = np.array([[1.3, 3.7]])
    s = eval_S(PAIR, 1.0, ham, cfg)
    assert s == pytest.approx(poisson_h_star(v_bar), abs=1e-8)
    assert eval_F(PAIR, 1.0, ham, cfg) == pytest.approx(poisson_h_star(PAIR) - s, abs=1e-8)


def test_constant_ray(poisson_pair):
    ham, cfg = poisson_pair
    c, t = np.array([[1.6, 1.6]]), 2.0
    sample = sample_hj(t * c, t, ham, cfg)
    assert sample.S == pytest.approx(t * poisson_h_star(c), abs=1e-8)
    assert sample.F == pytest.approx(0.0, abs=1e-8)
    np.testing.assert_allclose(sample.v_from_S, c, atol=1e-6)
    assert sample.pde_residual_S <= 1e-5


def test_minimizer_recovery(poisson_pair):
    ham, cfg = poisson_pair
    from_s = recover_minimizer_from_S(PAIR, 1.0, ham, cfg)
    from_f = recover_minimizer_from_F(PAIR, 1.0, ham, cfg)
    assert np.max(np.abs(from_s - [[1.3, 3.7]])) <= 1e-2
    assert np.max(np.abs(from_f - [[1.3, 3.7]])) <= 1e-2
    sample = sample_hj(PAIR, 1.0, ham, cfg)
    assert np.max(np.abs(sample.v_from_S - sample.v_from_F_via_S)) <= 1e-6


def test_minimizer_recovery_burg():
    ham, cfg = Hamiltonian(kind=B, dimension=2), HjConfig(alpha=0.2)
    sample = sample_hj([[1.0, 3.0]], 1.0, ham, cfg)
    np.testing.assert_allclose(sample.v_admm, [[1.2, 2.8]], atol=1e-6)
    assert np.max(np.abs(sample.v_from_S - sample.v_admm)) <= 1e-2
    assert np.max(np.abs(sample.v_from_F - sample.v_admm)) <= 1e-2
    assert np.max(np.abs(sample.v_from_S - sample.v_from_F_via_S)) <= 1e-6


def test_pde_residuals(poisson_pair):
    ham, cfg = poisson_pair
    assert pde_residual_S(PAIR, 1.0, ham, cfg, fd_step=1e-2) <= 1e-2
    assert pde_residual_S(PAIR, 1.0, ham, cfg) <= 1e-5
    assert pde_residual_F(PAIR, 1.0, ham, cfg) <= 1e-5


def test_f_pde_is_checked_against_f_values():
    ham, cfg = Hamiltonian(kind=B, dimension=2), HjConfig(alpha=0.2)
    sample = sample_hj([[1.0, 3.0]], 1.0, ham, cfg, fd_step=1e-2)
    # differencing F directly gives its own truncation error, not a copy of the S residual
    assert sample.pde_residual_F != sample.pde_residual_S
    assert sample.pde_residual_F <= 1e-4
    np.testing.assert_allclose(sample.v_from_F, [[1.2, 2.8]], atol=1e-3)


def test_fd_study_is_second_order(poisson_pair):
    ham, cfg = poisson_pair
    study = fd_convergence_study(PAIR, 1.0, ham, cfg)
    assert study.steps == [1e-2, 5e-3, 2.5e-3]
    assert all(3.0 <= r <= 5.0 for r in study.ratios)
    assert study.residuals[0] > study.residuals[-1]


def test_specialized_f_forms_agree(poisson_pair):
    ham, cfg = poisson_pair
    sample = sample_hj(PAIR, 1.0, ham, cfg)
    general = sample.pde_residual_F
    special = specialized_f_pde_residual(ham, PAIR, 1.0, sample.dF_dt, sample.grad_x_F)
    assert special == pytest.approx(general, abs=1e-9)


@pytest.mark.parametrize("kind", [P, B])
def test_specialized_f_forms_agree_on_arbitrary_inputs(kind):
    rng = np.random.default_rng(0)
    ham = Hamiltonian(kind=kind, dimension=3)
    for _ in range(20):
        x, t = rng.uniform(0.5, 3.0, size=(1, 3)), float(rng.uniform(0.5, 2.0))
        grad_f, df_dt = rng.uniform(-0.1, 0.1, size=(1, 3)), float(rng.normal())
        special = specialized_f_pde_residual(ham, x, t, df_dt, grad_f)
        assert special == pytest.approx(_f_residual(ham, x, t, df_dt, grad_f), abs=1e-9)


def test_moreau_identity(poisson_pair):
    ham, cfg = poisson_pair
    rng = np.random.default_rng(1)
    for _ in range(5):
        x, t = rng.uniform(0.5, 5.0, size=(1, 2)), float(rng.uniform(0.5, 3.0))
        assert moreau_identity_check(x, t, ham, cfg) <= 1e-5


def test_duality_holds_at_solver_minimizer():
    v_bar = poisson_logtv_denoise(PAIR, AdmmConfig(t=1.0, alpha=0.3, primal_tol=1e-10, dual_tol=1e-10,
                                                    max_iter=50000, tv_tol=1e-12)).v_bar
    recovery, support = duality_check(PAIR, 1.0, Hamiltonian(kind=P, dimension=2), v_bar, 0.3)
    assert recovery <= 1e-12
    assert support <= 1e-6


def test_s_is_midpoint_convex(poisson_pair):
    ham, cfg = poisson_pair
    rng = np.random.default_rng(2)
    for _ in range(3):
        z1 = (rng.uniform(0.5, 5.0, size=(1, 2)), float(rng.uniform(0.5, 3.0)))
        z2 = (rng.uniform(0.5, 5.0, size=(1, 2)), float(rng.uniform(0.5, 3.0)))
        assert s_midpoint_convexity_gap(z1, z2, ham, cfg) <= 1e-6


def test_asymptotic_minimizers_approach_v0(poisson_pair):
    ham, _ = poisson_pair
    cfg = HjConfig(alpha=0.3, solver_tol=1e-8, tv_tol=1e-11, max_iter=200000)
    errors = asymptotic_check([[1.0, 2.0]], [[0.3, -0.2]], (1.0, 10.0, 100.0), ham, cfg)
    assert errors[0] > errors[1] > errors[2]
    assert errors[2] / errors[0] <= 0.1
    limits = asymptotic_limit_of_s_over_t([[1.0, 2.0]], [[0.3, -0.2]], (1.0, 10.0, 100.0), ham, cfg)
    assert limits[-1] < limits[0]


def test_asymptotic_constant_image_is_exact(poisson_pair):
    ham, _ = poisson_pair
    cfg = HjConfig(alpha=0.3, solver_tol=1e-9, max_iter=200000)
    errors = asymptotic_check([[1.5, 1.5]], [[0.0, 0.0]], (1.0, 10.0), ham, cfg)
    assert max(errors) <= 1e-6


def test_domain_errors(poisson_pair):
    ham, cfg = poisson_pair
    with pytest.raises(DomainError):
        sample_hj(PAIR, 1e-4, ham, cfg)
    with pytest.raises(DomainError):
        sample_hj([[0.0, 4.0]], 1.0, ham, cfg)
    with pytest.raises(DomainError):
        asymptotic_check([[1.0, 2.0]], [[0.0, 0.0]], (10.0, 1.0), ham, cfg)
    with pytest.raises(DomainError):
        asymptotic_check([[0.0, 2.0]], [[0.0, 0.0]], (1.0, 10.0), ham, cfg)
    with pytest.raises(DomainError):
        eval_F([[0.0, 2.0]], 1.0, ham, cfg)


def test_config_rejects_unknown_prior():
    with pytest.raises(ValueError):
        HjConfig(prior="huber")
    assert math.isclose(HjConfig().fd_step, 1e-3)
