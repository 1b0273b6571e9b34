"""
Property batteries behind `hjdenoise verify`.

Each suite draws its instances from a seeded generator, checks one family
of identities and returns per-case residuals against tolerances.
"""

import csv
import logging
import math
from pathlib import Path
from typing import Callable, Dict, List

import numpy as np
from pydantic import BaseModel, Field

from .admm_solvers import AdmmConfig, admm_generic
from .convex_core import (
    Hamiltonian,
    HamiltonianKind,
    bregman_primal,
    bregman_primal_dual,
    bregman_scaling_check,
    grad_h_star,
    scaled_h_star,
)
from .errors import HjDenoiseError
from .hj_verify import (
    HjConfig,
    asymptotic_check,
    asymptotic_limit_of_s_over_t,
    duality_check,
    fd_convergence_study,
    moreau_identity_check,
    pde_residual_F,
    pde_residual_S,
    sample_hj,
    specialized_f_pde_residual,
)
from .phantoms import ramp_phantom, two_pixel_phantom

logger = logging.getLogger(__name__)

NOISE_KINDS = (HamiltonianKind.POISSON_EXP, HamiltonianKind.BURG_NEGLOG)
ALL_KINDS = (HamiltonianKind.QUADRATIC,) + NOISE_KINDS


class CaseResult(BaseModel):
    suite: str
    case: str
    residual: float
    tolerance: float
    passed: bool
    detail: str = ""


class SuiteResult(BaseModel):
    suite: str
    cases: List[CaseResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.cases) and all(case.passed for case in self.cases)

    @property
    def max_residual(self) -> float:
        finite = [c.residual for c in self.cases if math.isfinite(c.residual)]
        return max(finite) if len(finite) == len(self.cases) and finite else math.inf

    def add(self, case: str, residual: float, tolerance: float, detail: str = "") -> None:
        passed = math.isfinite(residual) and residual <= tolerance
        self.cases.append(CaseResult(suite=self.suite, case=case, residual=residual,
                                     tolerance=tolerance, passed=passed, detail=detail))
        if not passed:
            logger.warning("%s/%s failed: residual %.3e > %.3e %s", self.suite, case, residual, tolerance, detail)

    def fail(self, case: str, tolerance: float, exc: Exception) -> None:
        self.add(case, math.inf, tolerance, f"{type(exc).__name__}: {exc}")


def _interior_point(rng: np.random.Generator, kind: HamiltonianKind, n: int) -> np.ndarray:
    if kind is HamiltonianKind.QUADRATIC:
        return rng.uniform(-2.0, 2.0, size=(1, n))
    return rng.uniform(0.2, 4.0, size=(1, n))


def bregman_suite(seed: int = 0, count: int = 100) -> SuiteResult:
    """Two definitions of the Bregman distance agree; t·D_{H*}(x/t, u/t) = D_{(tH)*}(x, u)."""
    result = SuiteResult(suite="bregman")
    rng = np.random.default_rng(seed)
    for kind in ALL_KINDS:
        for i in range(count):
            n = int(rng.integers(1, 5))
            ham = Hamiltonian(kind=kind, dimension=n)
            a, u = _interior_point(rng, kind, n), _interior_point(rng, kind, n)
            t = float(rng.uniform(0.5, 5.0))
            name = f"{kind.value}-{i}"
            try:
                primal = bregman_primal(ham, a, u)
                mixed = bregman_primal_dual(ham, a, grad_h_star(ham, u))
                result.add(f"{name}-two-definitions", abs(primal - mixed), 1e-10 * (1.0 + abs(primal)))
                result.add(f"{name}-scaling", bregman_scaling_check(ham, t, t * a, t * u),
                           1e-10 * (1.0 + t * primal))
            except HjDenoiseError as exc:
                result.fail(name, 1e-10, exc)
    return result


def moreau_suite(seed: int = 0, count: int = 50) -> SuiteResult:
    """S + F = t·H*(x/t) on random feasible one- and two-pixel instances."""
    result = SuiteResult(suite="moreau")
    rng = np.random.default_rng(seed)
    for kind in ALL_KINDS:
        for i in range(count):
            n = int(rng.integers(1, 3))
            x = rng.uniform(0.5, 5.0, size=(1, n))
            t = float(rng.uniform(0.5, 3.0))
            cfg = HjConfig(alpha=float(rng.uniform(0.1, 1.0)), solver_tol=1e-10)
            ham = Hamiltonian(kind=kind, dimension=n)
            tolerance = 1e-5 * (1.0 + abs(scaled_h_star(ham, t, x).value))
            try:
                result.add(f"{kind.value}-{i}", moreau_identity_check(x, t, ham, cfg), tolerance)
            except HjDenoiseError as exc:
                result.fail(f"{kind.value}-{i}", tolerance, exc)
    return result


def duality_suite(seed: int = 0, count: int = 20) -> SuiteResult:
    """ū = x − t·v̄ and p̄ = ∇H*(v̄) satisfy x = ū + t∇H(p̄) and ⟨p̄, ū⟩ = α·TV(p̄)."""
    result = SuiteResult(suite="duality")
    rng = np.random.default_rng(seed)
    for kind in NOISE_KINDS:
        for i in range(count):
            x = rng.uniform(0.5, 5.0, size=(2, 2))
            t = float(rng.uniform(0.5, 3.0))
            alpha = float(rng.uniform(0.1, 1.0))
            cfg = AdmmConfig(t=t, alpha=alpha, primal_tol=1e-10, dual_tol=1e-10, tv_tol=1e-13, max_iter=20000)
            tolerance = 1e-6 * (1.0 + float(np.linalg.norm(x)))
            try:
                report = admm_generic(x, Hamiltonian.for_image(kind, x), cfg)
                recovery, support = duality_check(x, t, Hamiltonian.for_image(kind, x), report.v_bar, alpha)
                result.add(f"{kind.value}-{i}-recovery", recovery, tolerance)
                result.add(f"{kind.value}-{i}-support", support, tolerance)
            except HjDenoiseError as exc:
                result.fail(f"{kind.value}-{i}", tolerance, exc)
    return result


def _hj_point(rng: np.random.Generator, kind: HamiltonianKind, alpha: float) -> np.ndarray:
    # keep clear of x₂ − x₁ = 2α, where S loses smoothness
    left = float(rng.uniform(0.5, 2.0))
    if kind is HamiltonianKind.QUADRATIC:
        left = float(rng.uniform(-1.0, 1.0))
    return np.array([[left, left + 2.0 * alpha + float(rng.uniform(0.5, 2.0))]])


def hj_suite(seed: int = 0, points: int = 10) -> SuiteResult:
    """HJ PDE residuals, their second-order FD decay, and minimizer recovery from S and F."""
    result = SuiteResult(suite="hj")
    rng = np.random.default_rng(seed)
    cfg = HjConfig(alpha=0.3)

    for kind in ALL_KINDS:
        ham = Hamiltonian(kind=kind, dimension=2)
        for i in range(points):
            x = _hj_point(rng, kind, cfg.alpha)
            t = float(rng.uniform(1.0, 3.0))
            name = f"{kind.value}-{i}"
            try:
                study = fd_convergence_study(x, t, ham, cfg)
                for k, ratio in enumerate(study.ratios):
                    result.add(f"{name}-halving-{k}", abs(ratio - 4.0), 1.0,
                               f"residuals {study.residuals[k]:.3e} -> {study.residuals[k + 1]:.3e}")
                sample = sample_hj(x, t, ham, cfg)
                result.add(f"{name}-recover-S", float(np.max(np.abs(sample.v_from_S - sample.v_admm))), 1e-2)
                result.add(f"{name}-recover-F", float(np.max(np.abs(sample.v_from_F - sample.v_admm))), 1e-2)
                result.add(f"{name}-recover-S-vs-F",
                           float(np.max(np.abs(sample.v_from_S - sample.v_from_F_via_S))), 1e-6)
                result.add(f"{name}-f-pde", sample.pde_residual_F, 1e-4)
                forms = abs(specialized_f_pde_residual(ham, x, t, sample.dF_dt, sample.grad_x_F)
                            - sample.pde_residual_F)
                result.add(f"{name}-f-pde-forms", forms, 1e-9)
            except HjDenoiseError as exc:
                result.fail(name, 0.0, exc)

    quadratic = Hamiltonian(kind=HamiltonianKind.QUADRATIC, dimension=1)
    oracle_cfg = HjConfig(prior="quadratic")
    for x_value, t in ((1.0, 1.0), (2.0, 0.5), (-1.5, 2.0)):
        name = f"quadratic-oracle-x{x_value:g}-t{t:g}"
        try:
            result.add(name, pde_residual_S([[x_value]], t, quadratic, oracle_cfg), 1e-6)
            # F has larger third t-derivatives than S at small t
            result.add(f"{name}-F", pde_residual_F([[x_value]], t, quadratic, oracle_cfg, fd_step=1e-4), 1e-6)
        except HjDenoiseError as exc:
            result.fail(name, 1e-6, exc)
    return result


def asymptotic_suite(seed: int = 0) -> SuiteResult:
    """v̄ → v0 along x = t·v0 + d as t grows; S/t → H*(v0)."""
    result = SuiteResult(suite="asymptotic")
    cfg = HjConfig(alpha=0.3, solver_tol=1e-8, tv_tol=1e-11, max_iter=200000)
    schedule = (1.0, 10.0, 100.0)
    shapes = {"1x2": two_pixel_phantom(1.0, 2.0), "4x4": ramp_phantom(4, 4, 0.5, 2.0)}

    for kind in NOISE_KINDS:
        for label, v0 in shapes.items():
            ham = Hamiltonian.for_image(kind, v0)
            d = np.zeros_like(v0)
            name = f"{kind.value}-{label}"
            try:
                errors = asymptotic_check(v0, d, schedule, ham, cfg)
                tail_increase = max(0.0, errors[-1] - errors[-2])
                result.add(f"{name}-eventually-decreasing", tail_increase, 0.0,
                           " ".join(f"{e:.3e}" for e in errors))
                result.add(f"{name}-decay", errors[-1] / max(errors[0], 1e-300), 0.1)
                gaps = asymptotic_limit_of_s_over_t(v0, d, schedule, ham, cfg)
                result.add(f"{name}-s-over-t", max(0.0, gaps[-1] - gaps[0]), 1e-9,
                           " ".join(f"{g:.3e}" for g in gaps))
            except HjDenoiseError as exc:
                result.fail(name, 0.1, exc)
    return result


SUITES: Dict[str, Callable[[int], SuiteResult]] = {
    "bregman": bregman_suite,
    "moreau": moreau_suite,
    "duality": duality_suite,
    "hj": hj_suite,
    "asymptotic": asymptotic_suite,
}


def run_suite(name: str, seed: int = 0) -> SuiteResult:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    logger.info("running %s suite (seed %d)", name, seed)
    return SUITES[name](seed)


def write_csv(results: List[SuiteResult], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["suite", "case", "residual", "tolerance", "passed", "detail"])
        for suite in results:
            for case in suite.cases:
                writer.writerow([case.suite, case.case, f"{case.residual:.6e}", f"{case.tolerance:.6e}",
                                 int(case.passed), case.detail])
