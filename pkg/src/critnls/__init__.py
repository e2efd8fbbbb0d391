"""Numerical laboratory for the L2-critical Schrodinger minimization problem
with a decaying |x|^-b nonlinearity and a homogeneous trap."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    CritNLSError,
    DomainError,
    NonConvergenceError,
    NumericalError,
    UsageError,
    VerificationError,
)
from .grid import Profile, RadialGrid, build_grid, integrate  # noqa: E402
from .params import Params, PotentialSpec  # noqa: E402
from .limit_profile import QSolution, solve_q  # noqa: E402
from .energy import energy, gn_ratio  # noqa: E402
from .minimizer import FlowConfig, MinimizeResult, continuation_sweep, minimize  # noqa: E402

__all__ = [
    "__version__",
    "ConfigError", "CritNLSError", "DomainError", "NonConvergenceError",
    "NumericalError", "UsageError", "VerificationError",
    "Profile", "RadialGrid", "build_grid", "integrate",
    "Params", "PotentialSpec", "QSolution", "solve_q",
    "energy", "gn_ratio",
    "FlowConfig", "MinimizeResult", "continuation_sweep", "minimize",
]
