"""Stochastic Galerkin solvers for parameter-dependent symmetric eigenproblems.

The gPC coefficients of eigenpairs of ``A(xi) = sum_l A_l psi_l(xi)`` are
computed by inexact stochastic inverse subspace iteration
(:func:`sgeig.sisi.run_sisi`) or an inexact line-search Newton iteration
(:func:`sgeig.newton.run_newton`), with Monte Carlo and sparse-grid
collocation baselines in :mod:`sgeig.sampling`.
"""

__version__ = "0.1.0"

from .gpc import GpcBasis, TripleProductTensor, triple_product_tensor
from .newton import NewtonConfig, run_newton
from .problems import ProblemSpec, build_problem
from .quadrature import SparseGrid, smolyak
from .sampling import SampleRun, collocation_run, monte_carlo_run
from .sg_operator import GalerkinOperator
from .sisi import SisiConfig, run_sisi

__all__ = [
    "GalerkinOperator",
    "GpcBasis",
    "NewtonConfig",
    "ProblemSpec",
    "SampleRun",
    "SisiConfig",
    "SparseGrid",
    "TripleProductTensor",
    "build_problem",
    "collocation_run",
    "monte_carlo_run",
    "run_newton",
    "run_sisi",
    "smolyak",
    "triple_product_tensor",
]
