"""Inexact stochastic inverse subspace iteration.

Each step solves ``(sum_l H_l (x) A_l) v = u`` with preconditioned CG for
every eigenpair, then normalizes (one eigenpair) or orthogonalizes with a
stochastic Gram-Schmidt process evaluated on a sparse grid. Eigenvalue
expansions follow from the stochastic Rayleigh quotient.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fem import MeanEigenpairs, mean_eigenpairs
from .gpc import GpcBasis
from .krylov import pcg
from .preconditioners import HGSPreconditioner, MBPreconditioner, MeanBlockSolver
from .quadrature import SparseGrid
from .sg_operator import GalerkinOperator, residual_indicators, unvec, vec


@dataclass
class SisiConfig:
    n_s: int = 1
    steps: int = 20
    tau: float = 1e-2
    preconditioner: str = "mb"  # "mb" or "hgs"
    p_t: int = 0
    shift: float | None = None  # None: shift only if the smallest mean eigenvalue is <= 0
    early_exit: bool = False
    maxit: int = 500

    def __post_init__(self):
        if self.steps < 1 or self.tau <= 0 or self.n_s < 1:
            raise ValueError("need steps >= 1, tau > 0 and n_s >= 1")
        if self.preconditioner not in ("mb", "hgs"):
            raise ValueError("preconditioner must be 'mb' or 'hgs'")


@dataclass
class EigenpairExpansion:
    """gPC expansion of one eigenpair with its convergence history."""

    s: int
    lam: np.ndarray
    U: np.ndarray
    eps1: list[float] = field(default_factory=list)
    eps_var: list[float] = field(default_factory=list)
    residual_norms: list[float] = field(default_factory=list)


@dataclass
class SisiResult:
    pairs: list[EigenpairExpansion]
    pcg_iterations: np.ndarray  # (steps, n_s)
    mean: MeanEigenpairs
    shift: float
    counters: dict


class _Projector:
    """Grid evaluation and discrete projection for one basis."""

    def __init__(self, basis: GpcBasis, grid: SparseGrid):
        self.psi = basis.eval(grid.points)  # (n_q, n_xi)
        self.wpsi = grid.weights[:, None] * self.psi

    def at_points(self, U: np.ndarray) -> np.ndarray:
        return U @ self.psi.T  # (n_x, n_q)

    def project(self, F: np.ndarray) -> np.ndarray:
        return F @ self.wpsi


def normalize(V, basis: GpcBasis, grid: SparseGrid) -> np.ndarray:
    """Coefficients of ``v(xi) / ||v(xi)||`` by discrete projection."""
    P = _Projector(basis, grid)
    return _normalize(P, np.asarray(V, dtype=float))


def _normalize(P: _Projector, V: np.ndarray) -> np.ndarray:
    Vq = P.at_points(V)
    norms = np.linalg.norm(Vq, axis=0)
    if np.any(norms <= 1e-300) or np.any(norms <= 1e-12 * norms.max()):
        raise ValueError("vector vanishes at a quadrature point")
    return P.project(Vq / norms)


def gram_schmidt(vs, basis: GpcBasis, grid: SparseGrid) -> list[np.ndarray]:
    """Stochastic Gram-Schmidt of coefficient blocks, pointwise on the grid."""
    P = _Projector(basis, grid)
    return _gram_schmidt(P, [np.asarray(v, dtype=float) for v in vs])


def _gram_schmidt(P: _Projector, vs: list[np.ndarray]) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    uq: list[np.ndarray] = []
    for v in vs:
        vq = P.at_points(v)
        u = v.copy()
        for t, ut in enumerate(out):
            coef = (vq * uq[t]).sum(axis=0) / (uq[t] * uq[t]).sum(axis=0)
            u -= P.project(coef * uq[t])
        rq = P.at_points(u)
        if np.linalg.norm(rq, axis=0).min() <= 1e-12 * max(np.linalg.norm(vq, axis=0).max(), 1e-300):
            raise ValueError("vectors are pointwise linearly dependent")
        u = _normalize(P, u)
        out.append(u)
        uq.append(P.at_points(u))
    return out


def rayleigh_quotient(op: GalerkinOperator, U) -> np.ndarray:
    """``lambda_k = sum_ij [H_k o (U^T V)]_ij`` with ``V = matvec(U)``."""
    U = np.asarray(U, dtype=float)
    G = U.T @ op.matvec(U)
    return np.einsum("kij,ij->k", op.H[: op.n_xi], G)


def _shifted(op: GalerkinOperator, rho: float) -> GalerkinOperator:
    if rho == 0.0:
        return op
    A = op.A.copy()
    A[0] = A[0] + rho * np.eye(op.n_x)
    shifted = GalerkinOperator(A, op.tensor)
    shifted.counters = op.counters
    return shifted


def run_sisi(op: GalerkinOperator, basis: GpcBasis, grid: SparseGrid, cfg: SisiConfig | None = None) -> SisiResult:
    cfg = cfg or SisiConfig()
    if basis.size != op.n_xi:
        raise ValueError("basis does not match the operator")
    mean = mean_eigenpairs(op.A[0], cfg.n_s)
    if cfg.shift is not None:
        rho = float(cfg.shift)
    else:
        rho = 0.0 if mean.values[0] > 0 else abs(mean.values[0]) + 1.0
    sop = _shifted(op, rho)
    solver = MeanBlockSolver(sop.A[0])
    if cfg.preconditioner == "mb":
        prec = MBPreconditioner(sop, solver)
    else:
        prec = HGSPreconditioner(sop, basis, cfg.p_t, solver)
    proj = _Projector(basis, grid)
    n_x, n_xi = sop.shape

    def apply(x):
        return vec(sop.matvec(unvec(x, n_x, n_xi)))

    def precond(x):
        return vec(prec.apply(unvec(x, n_x, n_xi)))

    Us = []
    for s in range(cfg.n_s):
        U = np.zeros((n_x, n_xi))
        U[:, 0] = mean.vectors[:, s]
        Us.append(U)
    pairs = [EigenpairExpansion(s + 1, np.zeros(n_xi), U) for s, U in enumerate(Us)]

    def record(U_list):
        for pair, U in zip(pairs, U_list):
            lam = rayleigh_quotient(sop, U)
            R = sop.apply_shifted(U, lam)
            e1, ev = residual_indicators(R)
            pair.U, pair.lam = U, lam
            pair.eps1.append(e1)
            pair.eps_var.append(ev)
            pair.residual_norms.append(float(np.linalg.norm(R)))

    record(Us)
    iters = []
    for n in range(cfg.steps):
        Vs, its = [], []
        for pair in pairs:
            # relative PCG tolerance against the residual of the previous step
            prev = pair.residual_norms[max(len(pair.residual_norms) - 2, 0)]
            x, stats = pcg(apply, vec(pair.U), precond, tol=cfg.tau * prev, maxit=cfg.maxit)
            if stats.breakdown:
                raise RuntimeError(f"PCG breakdown for eigenpair {pair.s} at step {n}")
            if not np.all(np.isfinite(x)):
                raise FloatingPointError("non-finite iterate in subspace iteration")
            Vs.append(unvec(x, n_x, n_xi))
            its.append(stats.iterations)
        iters.append(its)
        Us = [_normalize(proj, Vs[0])] if cfg.n_s == 1 else _gram_schmidt(proj, Vs)
        record(Us)
        if cfg.early_exit and n >= 3 and all(_stagnated(p) for p in pairs):
            break
    for pair in pairs:
        pair.lam = pair.lam.copy()
        pair.lam[0] -= rho
    return SisiResult(pairs, np.array(iters, dtype=int), mean, rho, op.counters.snapshot())


def _stagnated(pair: EigenpairExpansion, window: int = 3, rel: float = 1e-3) -> bool:
    for hist in (pair.eps1, pair.eps_var):
        h = np.array(hist[-(window + 1) :])
        if len(h) < window + 1:
            return False
        if np.any(np.abs(np.diff(h)) > rel * np.maximum(np.abs(h[:-1]), 1e-300)):
            return False
    return True
