"""
Runtime defaults.

Values come from the environment (optionally a `.env` file) with hard
fallbacks, so solver settings can be changed without touching code.
"""

import os

from dotenv import load_dotenv

load_dotenv()


def _env_float(name: str, fallback: float) -> float:
    return float(os.getenv(name, fallback))


def _env_int(name: str, fallback: int) -> int:
    return int(os.getenv(name, fallback))


# ADMM
DEFAULT_LAMBDA = _env_float("HJDENOISE_LAMBDA", 1.0)
DEFAULT_MAX_ITER = _env_int("HJDENOISE_MAX_ITER", 5000)
DEFAULT_PRIMAL_TOL = _env_float("HJDENOISE_PRIMAL_TOL", 1e-6)
DEFAULT_DUAL_TOL = _env_float("HJDENOISE_DUAL_TOL", 1e-6)
DEFAULT_NEWTON_TOL = _env_float("HJDENOISE_NEWTON_TOL", 1e-12)
DEFAULT_NEWTON_MAX_ITER = _env_int("HJDENOISE_NEWTON_MAX_ITER", 50)
INIT_FLOOR = 1e-8

# TV proximal map
DEFAULT_TV_TOL = _env_float("HJDENOISE_TV_TOL", 1e-8)
DEFAULT_TV_MAX_ITER = _env_int("HJDENOISE_TV_MAX_ITER", 20000)
DEFAULT_TV_STEP = 0.25

# Hamilton-Jacobi checks
DEFAULT_FD_STEP = _env_float("HJDENOISE_FD_STEP", 1e-3)

# Interior test for open domains
EPS_DOM = 1e-12

LOG_LEVEL = os.getenv("HJDENOISE_LOG_LEVEL", "WARNING")
