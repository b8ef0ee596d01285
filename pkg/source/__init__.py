"""
fracreg
Numerical laboratory for boundary regularity of the degenerate fractional
p-Laplacian Dirichlet problem.

Version: 1.0.0
"""

from source.errors import (
    ConfigError,
    ConstructionError,
    ContractError,
    DivergenceError,
    FitError,
    FracregError,
    GeometryError,
    NonConvergenceError,
    NumericError,
    PreconditionError,
    ResolutionError,
)
from source.geometry import Domain, normal_ball, opened_region
from source.grid import Field, Grid
from source.operator import energy, merged, pointwise_flap, residual, series_S, superpose, tail
from source.solver import (
    Obstacles,
    SolverConfig,
    solve_dirichlet,
    solve_double_obstacle,
    solve_torsion,
)
from source.barriers import BarrierSpec, build_superposed, build_upper_barrier, verify_barrier_bound
from source.diagnostics import excess, holder_fit, oscillation, quotient, theorem_main_report

__version__ = '1.0.0'

__all__ = [
    'BarrierSpec',
    'ConfigError',
    'ConstructionError',
    'ContractError',
    'DivergenceError',
    'Domain',
    'Field',
    'FitError',
    'FracregError',
    'GeometryError',
    'Grid',
    'NonConvergenceError',
    'NumericError',
    'Obstacles',
    'PreconditionError',
    'ResolutionError',
    'SolverConfig',
    'build_superposed',
    'build_upper_barrier',
    'energy',
    'excess',
    'holder_fit',
    'merged',
    'normal_ball',
    'opened_region',
    'oscillation',
    'pointwise_flap',
    'quotient',
    'residual',
    'series_S',
    'solve_dirichlet',
    'solve_double_obstacle',
    'solve_torsion',
    'superpose',
    'tail',
    'theorem_main_report',
    'verify_barrier_bound',
]
