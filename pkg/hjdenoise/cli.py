"""
Command line front end.

    python -m hjdenoise phantom  --shape piecewise --out clean.txt
    python -m hjdenoise noise    --in clean.txt --model poisson-logtv --t 20 --seed 7 --out obs.txt
    python -m hjdenoise denoise  --in obs.txt --model poisson-logtv --alpha 0.05 --out restored.txt
    python -m hjdenoise verify   --suite moreau --report residuals.csv
    python -m hjdenoise hj-eval  --in x.txt --t 1.5 --hamiltonian poisson_exp
    python -m hjdenoise hj-eval  --in x.txt --t 1.5 --model mult-invtv
    python -m hjdenoise compare  --in obs.txt --model-a poisson-logtv --alpha-a 0.05 --model-b poisson-tv

Exit status: 0 success, 1 usage error, 2 solver failure, 3 verification failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator

from . import config
from .admm_solvers import AdmmConfig, ModelName, SolveReport, denoise, hamiltonian_for_model
from .convex_core import Hamiltonian, HamiltonianKind
from .errors import (
    DimensionError,
    DomainError,
    HjDenoiseError,
    ImageFormatError,
    InputError,
    SolverError,
    VerificationError,
)
from .hj_verify import HjConfig, sample_hj
from .image_io import image_read, image_write
from .noise_sim import NoiseKind, NoiseSpec, corrupt
from .phantoms import piecewise_constant_phantom, ramp_phantom, two_pixel_phantom
from .protocol import matched_comparison, residual_norm, t_sweep
from .verify_suites import SUITES, run_suite, write_csv

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(HjDenoiseError):
    """Bad command-line arguments."""


class RunManifest(BaseModel):
    command: str = Field(pattern="^(noise|denoise|verify|hj-eval|phantom|compare)$")
    model: Optional[ModelName] = None
    input: Optional[Path] = None
    output: Optional[Path] = None
    t: Optional[float] = Field(default=None, gt=0)
    alpha: Optional[float] = Field(default=None, gt=0)
    lam: float = Field(default=config.DEFAULT_LAMBDA, gt=0)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    report: Optional[Path] = None

    @model_validator(mode="after")
    def _model_required(self):
        if self.command == "denoise" and self.model is None:
            raise ValueError("denoise needs --model")
        return self


def noise_kind_for(model) -> NoiseKind:
    model = ModelName(model)
    if model in (ModelName.POISSON_LOGTV, ModelName.POISSON_TV):
        return NoiseKind.POISSON
    return NoiseKind.GAMMA_MULTIPLICATIVE


# sidecar -----------------------------------------------------------------

def sidecar_path(observed: Path) -> Path:
    return observed.with_name(observed.name + ".meta")


def write_sidecar(observed: Path, meta: Dict[str, str]) -> None:
    lines = [f"{key}={value}" for key, value in meta.items()]
    sidecar_path(observed).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_sidecar(observed: Path) -> Optional[Dict[str, str]]:
    path = sidecar_path(observed)
    if not path.exists():
        return None
    meta = {}
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        if "=" not in line:
            raise InputError(f"{path}:{number}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        meta[key.strip()] = value.strip()
    return meta


def load_observation(observed_path: Path, t: Optional[float]):
    """(x, t, observed image): exact counts from the sidecar when present, else x = t·observed."""
    observed_path = Path(observed_path)
    observed = image_read(observed_path)
    meta = read_sidecar(observed_path)
    if meta is not None:
        if "t" not in meta:
            raise InputError(f"sidecar of {observed_path} has no t entry")
        meta_t = float(meta["t"])
        if t is not None and t != meta_t:
            logger.warning("--t %g overrides sidecar t=%g", t, meta_t)
        t = t if t is not None else meta_t
        counts = meta.get("counts")
        if counts and t == meta_t:
            x = image_read(observed_path.parent / counts)
            if x.shape != observed.shape:
                raise InputError(f"counts file {counts} does not match the observed image shape")
            return x, t, x / t
    if t is None:
        raise UsageError(f"no sidecar for {observed_path}; pass --t")
    return t * observed, t, observed


# reports -----------------------------------------------------------------

def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(path: Optional[Path], payload: Dict) -> None:
    if path is None:
        return
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(_jsonable(payload), handle, indent=2, allow_nan=True)
    print(f"📊 Report written to {path}")


def solve_summary(report: SolveReport) -> Dict:
    return {
        "model": report.model,
        "iterations": report.iterations,
        "converged": report.converged,
        "obj_nonadditive": report.obj_nonadditive,
        "obj_additive": report.obj_additive,
        "prior_gap": report.prior_gap,
        "final_primal_residual": report.primal_residuals[-1] if report.primal_residuals else None,
        "final_dual_residual": report.dual_residuals[-1] if report.dual_residuals else None,
    }


def residual_display(observed: np.ndarray, v_bar: np.ndarray) -> np.ndarray:
    """x/t − v̄ shifted by 0.5 and clamped to [0, 1]."""
    return np.clip(observed - v_bar + 0.5, 0.0, 1.0)


# commands ----------------------------------------------------------------

def cmd_phantom(args) -> int:
    shapes = {
        "piecewise": lambda: piecewise_constant_phantom(args.rows, args.cols),
        "ramp": lambda: ramp_phantom(args.rows, args.cols),
        "two-pixel": two_pixel_phantom,
    }
    image = shapes[args.shape]()
    image_write(args.out, image)
    print(f"✅ {args.shape} phantom {image.shape[0]}x{image.shape[1]} written to {args.out}")
    return EXIT_OK


def cmd_noise(args) -> int:
    manifest = RunManifest(command="noise", model=args.model, input=args.input, output=args.out,
                           t=args.t, seed=args.seed)
    if args.kind:
        kind = NoiseKind(args.kind)
    elif manifest.model is not None:
        kind = noise_kind_for(manifest.model)
    else:
        raise UsageError("noise needs --kind or --model")
    if manifest.t is None:
        raise UsageError("noise needs --t")

    clean = image_read(manifest.input)
    spec = NoiseSpec(kind=kind, t=manifest.t, seed=manifest.seed)
    x = corrupt(clean, spec)

    out = Path(manifest.output)
    counts = out.with_name(out.name + ".counts")
    image_write(out, x / spec.t)
    image_write(counts, x)
    write_sidecar(out, {"kind": kind.value, "t": repr(spec.t), "seed": str(spec.seed),
                        "rows": str(x.shape[0]), "cols": str(x.shape[1]), "counts": counts.name})
    print(f"✅ {kind.value} noise (t={spec.t:g}, seed={spec.seed}) written to {out}")
    return EXIT_OK


def _admm_config(args, t: float, alpha: float) -> AdmmConfig:
    options = {"lam": args.lam, "t": t, "alpha": alpha}
    if args.max_iter is not None:
        options["max_iter"] = args.max_iter
    if args.tol is not None:
        options["primal_tol"] = options["dual_tol"] = args.tol
    return AdmmConfig(**options)


def cmd_denoise(args) -> int:
    manifest = RunManifest(command="denoise", model=args.model, input=args.input, output=args.out,
                           t=args.t, alpha=args.alpha, lam=args.lam, report=args.report)
    if manifest.alpha is None:
        raise UsageError("denoise needs --alpha")
    x, t, observed = load_observation(manifest.input, manifest.t)
    cfg = _admm_config(args, t, manifest.alpha)

    summary = {"command": "denoise", "model": manifest.model.value, "input": manifest.input,
               "t": t, "alpha": manifest.alpha, "lambda": manifest.lam}
    try:
        report = denoise(manifest.model, x, cfg)
    except SolverError as exc:
        if isinstance(exc.state, SolveReport):
            summary.update(solve_summary(exc.state))
        summary["error"] = str(exc)
        write_json(manifest.report, summary)
        raise

    out = Path(manifest.output)
    image_write(out, report.v_bar)
    residual_out = Path(args.residual_out) if args.residual_out else out.with_name(out.stem + ".residual.pgm")
    image_write(residual_out, residual_display(observed, report.v_bar), scale=255.0)

    summary.update(solve_summary(report))
    summary["residual_norm"] = residual_norm(observed, report.v_bar)
    summary["output"] = out
    summary["residual_image"] = residual_out
    write_json(manifest.report, summary)

    if not report.converged:
        print(f"❌ {report.model} stopped at max_iter={cfg.max_iter} without meeting the tolerances")
        return EXIT_SOLVER
    print(f"✅ {report.model}: {report.iterations} iterations, residual norm {summary['residual_norm']:.6g}")
    return EXIT_OK


def cmd_verify(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    results = []
    for name in names:
        print(f"🧪 Running {name} suite...")
        result = run_suite(name, args.seed)
        results.append(result)
        failed = [c for c in result.cases if not c.passed]
        status = "✅ PASS" if result.passed else f"❌ FAIL ({len(failed)} of {len(result.cases)} cases)"
        print(f"{name}: {status}, max residual {result.max_residual:.3e}")
        for case in failed[:10]:
            print(f"   ❌ {case.case}: {case.residual:.3e} > {case.tolerance:.3e} {case.detail}")

    if args.report:
        write_csv(results, args.report)
        print(f"📊 Residuals written to {args.report}")
    if not all(r.passed for r in results):
        raise VerificationError(f"{sum(not r.passed for r in results)} suite(s) failed")
    return EXIT_OK


def cmd_hj_eval(args) -> int:
    x = image_read(args.input)
    if args.t is None:
        raise UsageError("hj-eval needs --t")
    # --model picks the Hamiltonian behind that model's data fidelity
    if args.model:
        ham = hamiltonian_for_model(args.model, x)
    else:
        ham = Hamiltonian.for_image(HamiltonianKind(args.hamiltonian), x)
    cfg = HjConfig(alpha=args.alpha or HjConfig().alpha, fd_step=args.fd_step or config.DEFAULT_FD_STEP)
    sample = sample_hj(x, args.t, ham, cfg)
    payload = {"command": "hj-eval", "hamiltonian": ham.kind.value, "model": args.model, **sample.model_dump()}
    write_json(args.report, payload)
    print(f"✅ S={sample.S:.10g} F={sample.F:.10g} "
          f"S-PDE residual {sample.pde_residual_S:.3e}, F-PDE residual {sample.pde_residual_F:.3e}")
    return EXIT_OK


def cmd_compare(args) -> int:
    x, t, observed = load_observation(args.input, args.t)
    cfg = _admm_config(args, t, args.alpha_a)
    if ModelName(args.model_a) == ModelName(args.model_b):
        raise UsageError("compare needs two different models")

    result = matched_comparison(x, args.model_a, args.alpha_a, args.model_b, cfg)
    print(f"📊 {result.model_a} (alpha={result.alpha_a:g}) norm {result.norm_a:.6g} vs "
          f"{result.model_b} (alpha={result.alpha_b:.5g}) norm {result.norm_b:.6g}")
    sweep = t_sweep(observed, args.ts, args.model_a, args.alpha_a, cfg) if args.ts else []
    for point in sweep:
        print(f"   t={point.t:g}: ‖v̄ − x/t‖ = {point.distance:.6g}")
    write_json(args.report, {"command": "compare", "comparison": result.model_dump(),
                             "t_sweep": [p.model_dump() for p in sweep]})
    return EXIT_OK


# parser ------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--lambda", dest="lam", type=float, default=config.DEFAULT_LAMBDA, help="ADMM penalty")
    parser.add_argument("--max-iter", type=int, default=None)
    parser.add_argument("--tol", type=float, default=None, help="primal and dual residual tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hjdenoise", description="Poisson and multiplicative noise denoising")
    parser.add_argument("--verbose", "-v", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    models = [m.value for m in ModelName]

    p = sub.add_parser("phantom", help="write a synthetic test image")
    p.add_argument("--shape", choices=["piecewise", "ramp", "two-pixel"], default="piecewise")
    p.add_argument("--rows", type=int, default=128)
    p.add_argument("--cols", type=int, default=128)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_phantom)

    p = sub.add_parser("noise", help="corrupt a clean image")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", choices=models)
    p.add_argument("--kind", choices=[k.value for k in NoiseKind])
    p.add_argument("--t", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_noise)

    p = sub.add_parser("denoise", help="restore an observed image")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", choices=models, required=True)
    p.add_argument("--t", type=float, help="overrides the sidecar")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--residual-out")
    p.add_argument("--report")
    _solver_flags(p)
    p.set_defaults(handler=cmd_denoise)

    p = sub.add_parser("verify", help="run a property battery")
    p.add_argument("--suite", choices=list(SUITES) + ["all"], required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", help="CSV of per-case residuals")
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("hj-eval", help="evaluate S, F and their PDE residuals at one point")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--t", type=float)
    p.add_argument("--hamiltonian", choices=[k.value for k in HamiltonianKind], default="poisson_exp")
    p.add_argument("--model", choices=models, help="use the Hamiltonian of this model instead")
    p.add_argument("--alpha", type=float)
    p.add_argument("--fd-step", type=float)
    p.add_argument("--report")
    p.set_defaults(handler=cmd_hj_eval)

    p = sub.add_parser("compare", help="matched residual-norm comparison and t sweep")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--t", type=float)
    p.add_argument("--model-a", choices=models, required=True)
    p.add_argument("--alpha-a", type=float, required=True)
    p.add_argument("--model-b", choices=models, required=True)
    p.add_argument("--ts", type=float, nargs="*", default=[])
    p.add_argument("--report")
    _solver_flags(p)
    p.set_defaults(handler=cmd_compare)
    return parser


def configure_logging(verbose: int) -> None:
    level = logging.DEBUG if verbose > 1 else logging.INFO if verbose == 1 else config.LOG_LEVEL
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return args.handler(args)
    except (UsageError, ValidationError, ImageFormatError, InputError, DomainError, DimensionError,
            OSError) as exc:
        print(f"❌ {exc}", file=sys.stderr)
        return EXIT_USAGE
    except VerificationError as exc:
        print(f"❌ Verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except HjDenoiseError as exc:
        print(f"❌ Solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
