"""Benchmark problem construction.

``lognormal_diffusion`` and ``uniform_diffusion`` assemble the stochastic
diffusion eigenproblem on ``[-1, 1]^2`` with bilinear elements;
``synthetic`` draws a small random symmetric operator set for quick
experiments.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import fem
from .gpc import HERMITE, LEGENDRE, GpcBasis, triple_product_tensor
from .quadrature import SparseGrid, smolyak
from .random_field import (
    CovarianceSpec,
    calibrate_lognormal,
    kl_expand,
    linear_coefficients,
    lognormal_coefficients,
    truncated_mean_shift,
)
from .sg_operator import GalerkinOperator

# Smolyak level w that gives the 69-point Hermite grid for three variables
DEFAULT_GRID_LEVEL = 3


@dataclass(frozen=True)
class ProblemSpec:
    kind: str = "lognormal-diffusion"
    n_el: int = 16
    m_xi: int = 3
    p: int = 3
    cov: float = 0.1
    Lx: float = 2.0
    Ly: float = 2.0
    mean_a: float = 1.0
    g0_mode: str = "truncated"  # "truncated" or "pointwise"
    grid_level: int = DEFAULT_GRID_LEVEL
    n_x: int = 6  # synthetic only
    seed: int = 0  # synthetic only

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class Problem:
    spec: ProblemSpec
    basis: GpcBasis
    basis_a: GpcBasis
    grid: SparseGrid
    op: GalerkinOperator
    info: dict = field(default_factory=dict)

    @property
    def A(self) -> np.ndarray:
        return self.op.A


def _diffusion_operators(mesh, fields) -> np.ndarray:
    M = fem.assemble_mass(mesh)
    K = np.array([fem.assemble_stiffness(mesh, f) for f in fields])
    return fem.to_standard_form(K, M).A


def lognormal_diffusion(spec: ProblemSpec) -> Problem:
    mesh = fem.structured_mesh(spec.n_el)
    weights = fem.lumped_weights(mesh)
    g0, sigma = calibrate_lognormal(spec.cov, spec.mean_a)
    kl = kl_expand(CovarianceSpec(sigma, spec.Lx, spec.Ly), mesh.nodes, spec.m_xi, weights, g0)
    if spec.g0_mode == "truncated":
        kl = type(kl)(truncated_mean_shift(kl, spec.mean_a), kl.modes, kl.eigenvalues, kl.weights)
    elif spec.g0_mode != "pointwise":
        raise ValueError("g0_mode must be 'truncated' or 'pointwise'")
    basis = GpcBasis.create(HERMITE, spec.m_xi, spec.p)
    basis_a = GpcBasis.create(HERMITE, spec.m_xi, 2 * spec.p)
    coef = lognormal_coefficients(kl, basis_a)
    A = _diffusion_operators(mesh, coef.fields)
    tensor = triple_product_tensor(basis_a, basis)
    op = GalerkinOperator(A, tensor)
    grid = smolyak(HERMITE, spec.m_xi, spec.grid_level)
    info = {"g0": kl.g0, "sigma_g": sigma, "kl_eigenvalues": kl.eigenvalues.tolist(), "mesh": mesh}
    return Problem(spec, basis, basis_a, grid, op, info)


def uniform_diffusion(spec: ProblemSpec) -> Problem:
    mesh = fem.structured_mesh(spec.n_el)
    weights = fem.lumped_weights(mesh)
    sigma_u = spec.cov * spec.mean_a
    kl = kl_expand(CovarianceSpec(sigma_u / math.sqrt(3.0), spec.Lx, spec.Ly), mesh.nodes, spec.m_xi, weights)
    basis = GpcBasis.create(LEGENDRE, spec.m_xi, spec.p)
    basis_a = GpcBasis.create(LEGENDRE, spec.m_xi, 1)
    coef = linear_coefficients(kl, np.full(mesh.n_nodes, spec.mean_a), basis_a)
    A = _diffusion_operators(mesh, coef.fields)
    # slices up to degree p are needed for the eigenvalue coupling
    tensor = triple_product_tensor(basis, basis)
    op = GalerkinOperator(A, tensor)
    grid = smolyak(LEGENDRE, spec.m_xi, spec.grid_level)
    info = {"sigma_u": sigma_u, "kl_eigenvalues": kl.eigenvalues.tolist(), "mesh": mesh}
    return Problem(spec, basis, basis_a, grid, op, info)


def synthetic(spec: ProblemSpec) -> Problem:
    """Random symmetric operators with a well separated positive mean."""
    rng = np.random.default_rng(spec.seed)
    basis = GpcBasis.create(HERMITE, spec.m_xi, spec.p)
    basis_a = GpcBasis.create(HERMITE, spec.m_xi, 1)
    n = spec.n_x
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    A = np.empty((basis_a.size, n, n))
    A[0] = Q @ np.diag(np.arange(1.0, n + 1)) @ Q.T
    for ell in range(1, basis_a.size):
        B = rng.standard_normal((n, n))
        A[ell] = spec.cov * (B + B.T) / 2
    A = 0.5 * (A + A.transpose(0, 2, 1))
    tensor = triple_product_tensor(basis, basis)
    op = GalerkinOperator(A, tensor)
    grid = smolyak(HERMITE, spec.m_xi, spec.grid_level)
    return Problem(spec, basis, basis_a, grid, op, {})


BUILDERS = {
    "lognormal-diffusion": lognormal_diffusion,
    "uniform-diffusion": uniform_diffusion,
    "synthetic": synthetic,
}


def build_problem(spec: ProblemSpec) -> Problem:
    try:
        builder = BUILDERS[spec.kind]
    except KeyError:
        raise ValueError(f"unknown problem kind {spec.kind!r}") from None
    return builder(spec)
