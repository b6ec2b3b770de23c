"""Numerical laboratory for the repulsive-weight space of Dyson Brownian motion.

Modules
-------
core      geometry of the weight prod |x_i-x_j|^beta and singular quadrature
ricci     Bakry-Emery N-Ricci form of the weight and its spectral checks
capacity  log-log cutoffs, Sobolev-norm upper bounds, 1-D point capacity
bochner   weak-Bochner counterexample fields, scaling fits, finite differences
sde       Dyson SDE simulator, collision statistics, Bessel gap oracle
heat      n=2 reduction: weighted 1-D Dirichlet form and gradient estimates
cli       command-line frontend emitting CSV tables and JSON verdicts
"""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    Configuration,
    ModelParams,
    QuadratureRule,
    SingularChart,
    SingularSetError,
    gauss_jacobi_rule,
    grad_log_weight,
    integrate_graded,
    sector_of,
    singular_chart,
    singular_distance,
    weight,
)
