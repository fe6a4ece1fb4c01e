"""Reduced-augmentation implicit low-rank time integration for matrix ODEs.

The state ``U = Vx S Vy^T`` of ``dU/dt = Fx U + U Fy^T + Ex(t, U) + Phi(t)``
is advanced with stiffly accurate DIRK or IMEX Runge-Kutta methods, solving
small Sylvester equations per stage instead of the full N^2 system.
"""

from .exceptions import (
    ArgumentError,
    ConfigError,
    NumericError,
    OutputError,
    RailError,
    SingularPencilError,
)
from .integrator import (
    ProblemOperators,
    RailStepper,
    TruncationPolicy,
    backward_euler_step,
    dirk_step,
    imex_step,
)
from .lowrank import (
    Factored,
    LowRankState,
    WeightFunction,
    conservative_truncate,
    l1_error,
    mass,
    reduced_augmentation,
    reduced_augmentation_pair,
    truncate_svd,
)
from .problems import make_benchmark
from .runner import RunConfig, emit_csv, run_convergence_study, run_simulation
from .spectral import Grid1D, Grid2D, fourier_diff, make_grid
from .sylvester import ShiftedSylvesterSolver, solve_sylvester
from .tableaus import get_scheme

__version__ = "0.1.0"

__all__ = [
    "ArgumentError",
    "ConfigError",
    "NumericError",
    "OutputError",
    "RailError",
    "SingularPencilError",
    "ProblemOperators",
    "RailStepper",
    "TruncationPolicy",
    "backward_euler_step",
    "dirk_step",
    "imex_step",
    "Factored",
    "LowRankState",
    "WeightFunction",
    "conservative_truncate",
    "l1_error",
    "mass",
    "reduced_augmentation",
    "reduced_augmentation_pair",
    "truncate_svd",
    "make_benchmark",
    "RunConfig",
    "emit_csv",
    "run_convergence_study",
    "run_simulation",
    "Grid1D",
    "Grid2D",
    "fourier_diff",
    "make_grid",
    "ShiftedSylvesterSolver",
    "solve_sylvester",
    "get_scheme",
]
