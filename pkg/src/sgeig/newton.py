"""Inexact line-search Newton iteration for one stochastic eigenpair.

The unknowns are the eigenvector block ``U`` (``n_x x n_xi``) and the
eigenvalue coefficients ``lam`` (``n_xi``). The residual is

    F = sum_l A_l U H_l^T - sum_i lam_i U H_i^T,
    G_i = trace(U^T U H_i) - delta_{1i},

and each step solves the symmetrized Jacobian system ``J p = (-F, G/2)``
with a preconditioned Krylov method.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .gpc import GpcBasis, n_terms
from .krylov import SolverError, gmres, minres
from .preconditioners import CHGSPreconditioner, CMBPreconditioner, NMBPreconditioner
from .sg_operator import GalerkinOperator, unvec, vec
from .sisi import EigenpairExpansion

PRECONDITIONERS = ("nmb", "cmb", "chgs", "none")


@dataclass
class NewtonConfig:
    rho: float = 0.9
    c: float = 0.05
    max_backtracks: int = 25
    tol: float = 1e-10
    tau: float = 1e-1
    solver: str = "gmres"
    side: str = "left"  # GMRES preconditioning side
    preconditioner: str = "chgs"
    mode: str = "updated"  # anchor of the mean-based preconditioners
    p_t: int = 2
    eps_M: float | None = None
    max_steps: int = 50
    maxit: int = 500
    # re-solve with a tighter Krylov tolerance when backtracking is exhausted
    safeguard: bool = True
    max_resolves: int = 4

    def __post_init__(self):
        if not (0 < self.rho < 1 and 0 < self.c < 1):
            raise ValueError("need 0 < rho < 1 and 0 < c < 1")
        if self.solver not in ("gmres", "minres"):
            raise ValueError("solver must be 'gmres' or 'minres'")
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError(f"preconditioner must be one of {PRECONDITIONERS}")
        if self.solver == "minres" and self.preconditioner not in ("nmb", "none"):
            raise ValueError("MINRES needs a positive definite preconditioner (nmb)")


@dataclass
class NewtonState:
    U: np.ndarray
    lam: np.ndarray
    F: np.ndarray
    G: np.ndarray
    step: int = 0

    @property
    def r(self) -> np.ndarray:
        return np.concatenate([vec(self.F), self.G])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.r))

    @property
    def merit(self) -> float:
        return 0.5 * float(self.r @ self.r)


@dataclass
class NewtonResult:
    expansion: EigenpairExpansion
    residual_norms: list[float]
    krylov_iterations: list[int]
    step_lengths: list[float]
    backtracks: list[int]
    converged: bool
    warnings: list[str] = field(default_factory=list)
    counters: dict = field(default_factory=dict)


def residual(op: GalerkinOperator, U, lam) -> tuple[np.ndarray, np.ndarray]:
    """``(F, G)`` of the stochastic Galerkin eigen-system."""
    U = np.asarray(U, dtype=float)
    lam = np.asarray(lam, dtype=float)
    F = op.apply_shifted(U, lam)
    G = np.einsum("kij,ij->k", op.H[: op.n_xi], U.T @ U)
    G[0] -= 1.0
    return F, G


def jacobian_matvec(op: GalerkinOperator, U, lam, dU, dlam) -> tuple[np.ndarray, np.ndarray]:
    """Product with the symmetrized Jacobian at ``(U, lam)``."""
    U = np.asarray(U, dtype=float)
    dU = np.asarray(dU, dtype=float)
    dlam = np.asarray(dlam, dtype=float)
    top = op.apply_shifted(dU, lam) - U @ op.eig_coupling(dlam)
    bottom = -np.einsum("kij,ij->k", op.H[: op.n_xi], U.T @ dU)
    return top, bottom


def explicit_jacobian(op: GalerkinOperator, U, lam) -> np.ndarray:
    """Dense symmetrized Jacobian (tests and small problems only)."""
    n_x, n_xi = op.shape
    H = op.H[:n_xi]
    top_left = op.assemble() - np.kron(op.eig_coupling(lam), np.eye(n_x))
    # column i: -vec(U H_i^T)
    top_right = -np.column_stack([vec(U @ H[i].T) for i in range(n_xi)])
    J = np.zeros((n_x * n_xi + n_xi,) * 2)
    J[: n_x * n_xi, : n_x * n_xi] = top_left
    J[: n_x * n_xi, n_x * n_xi :] = top_right
    J[n_x * n_xi :, : n_x * n_xi] = top_right.T
    return J


def _split(x: np.ndarray, n_x: int, n_xi: int):
    return unvec(x[: n_x * n_xi], n_x, n_xi), x[n_x * n_xi :]


def _join(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.concatenate([vec(a), b])


def _line_search(op, cfg, state, Uc, lc, dU, dl, f0, slope):
    """Armijo backtracking from ``alpha = 1``; ``ok`` is False when exhausted."""
    alpha, nb = 1.0, 0
    while True:
        U_new, lam_new = Uc + alpha * dU, lc + alpha * dl
        trial = NewtonState(U_new, lam_new, *residual(op, U_new, lam_new), state.step + 1)
        if trial.merit <= f0 + cfg.c * alpha * slope:
            return trial, alpha, nb, True
        if nb == cfg.max_backtracks:
            return trial, alpha, nb, False
        alpha *= cfg.rho
        nb += 1


def make_preconditioner(op, basis: GpcBasis, cfg: NewtonConfig, mu: float, w: np.ndarray):
    name = cfg.preconditioner
    if name == "none":
        return None
    if name == "nmb":
        eps = 0.95 if cfg.eps_M is None else cfg.eps_M
        return NMBPreconditioner(op, mu, w, eps, cfg.mode)
    if name == "cmb":
        return CMBPreconditioner(op, mu, w, cfg.eps_M, cfg.mode)
    eps = 1.0 if cfg.eps_M is None else cfg.eps_M
    return CHGSPreconditioner(op, basis, cfg.p_t, mu, w, eps)


def run_newton(
    op: GalerkinOperator, basis: GpcBasis, mu: float, w, cfg: NewtonConfig | None = None, s: int = 1
) -> NewtonResult:
    """Newton iteration started from the mean eigenpair ``(mu, w)`` padded by zeros."""
    cfg = cfg or NewtonConfig()
    if basis.size != op.n_xi:
        raise ValueError("basis does not match the operator")
    if cfg.preconditioner == "chgs" and cfg.p_t > basis.degree:
        raise ValueError("p_t cannot exceed the solution degree")
    n_x, n_xi = op.shape
    U = np.zeros((n_x, n_xi))
    U[:, 0] = w
    lam = np.zeros(n_xi)
    lam[0] = mu
    state = NewtonState(U, lam, *residual(op, U, lam))
    prec = make_preconditioner(op, basis, cfg, mu, np.asarray(w, dtype=float))
    if cfg.solver == "minres" and isinstance(prec, NMBPreconditioner) and not prec.is_spd():
        raise SolverError("NMB preconditioner is indefinite for this eigenpair; MINRES is not applicable")

    norms = [state.norm]
    krylov_its, alphas, backtracks, notes = [], [], [], []
    prev_norm = state.norm
    while state.norm >= cfg.tol and state.step < cfg.max_steps:
        Uc, lc = state.U, state.lam
        if prec is not None:
            prec.update(Uc, lc)

        def apply(x, Uc=Uc, lc=lc):
            return _join(*jacobian_matvec(op, Uc, lc, *_split(x, n_x, n_xi)))

        precond = None
        if prec is not None:

            def precond(x):
                return _join(*prec.apply(*_split(x, n_x, n_xi)))

        rhs = _join(-state.F, 0.5 * state.G)
        # gradient of f = |(F, G)|^2 / 2 through the symmetrized Jacobian
        grad = apply(_join(state.F, -2.0 * state.G))
        f0 = state.merit
        tol = cfg.tau * prev_norm
        its = 0
        for attempt in range(cfg.max_resolves + 1):
            if cfg.solver == "gmres":
                p, stats = gmres(apply, rhs, precond, tol=tol, maxit=cfg.maxit, side=cfg.side)
            else:
                p, stats = minres(apply, rhs, precond, tol=tol, maxit=cfg.maxit)
            if not np.all(np.isfinite(p)):
                raise FloatingPointError("non-finite Newton direction")
            its += stats.iterations
            if not stats.converged:
                notes.append(f"step {state.step}: Krylov solver stopped at maxit with relres {stats.final_relres:.3e}")
            dU, dl = _split(p, n_x, n_xi)
            trial, alpha, nb, ok = _line_search(op, cfg, state, Uc, lc, dU, dl, f0, float(grad @ p))
            if ok or not cfg.safeguard or attempt == cfg.max_resolves or not stats.converged:
                break
            tol *= 0.1
            notes.append(f"step {state.step}: backtracking exhausted, re-solving with tolerance {tol:.1e}")
        if not ok:
            notes.append(f"step {state.step}: backtracking exhausted, step accepted")
            warnings.warn("line search exhausted its backtracks", RuntimeWarning, stacklevel=2)
        krylov_its.append(its)
        alphas.append(alpha)
        backtracks.append(nb)
        prev_norm = state.norm
        state = trial
        norms.append(state.norm)

    expansion = EigenpairExpansion(s, state.lam, state.U, residual_norms=norms)
    return NewtonResult(
        expansion, norms, krylov_its, alphas, backtracks, state.norm < cfg.tol, notes, op.counters.snapshot()
    )


def cost_report(
    op: GalerkinOperator, result: NewtonResult, basis: GpcBasis, preconditioner: str, p_t: int = 0
) -> dict:
    """Operation counts and the block-cost estimate of one Newton run.

    Unit costs are multiply-add counts: ``c_x = n_x^2 n_xi`` for one
    ``A_l U`` product, ``c_xi = n_x n_xi^2`` for one ``U H_l^T`` product,
    and ``c_M = (n_x + 1)^2 n_xi`` for a constraint mean-block solve.
    """
    n_x, n_xi, n_a = op.n_x, op.n_xi, op.n_a
    c_x, c_xi = n_x**2 * n_xi, n_x * n_xi**2
    c_m = (n_x + 1) ** 2 * n_xi
    n_t = n_terms(basis.m_xi, p_t) if preconditioner == "chgs" else 0
    c_mvp = n_a * (c_x + c_xi)
    if preconditioner == "chgs":
        c_prec = 2 * n_t * (c_x + c_xi) + 2 * basis.degree * c_m
    elif preconditioner in ("cmb", "nmb"):
        c_prec = c_m
    else:
        c_prec = 0
    n_iter = int(sum(result.krylov_iterations))
    counters = result.counters
    return {
        "n_x": n_x,
        "n_xi": n_xi,
        "n_a": n_a,
        "n_t": n_t,
        "preconditioner": preconditioner,
        "newton_steps": len(result.krylov_iterations),
        "n_iter": n_iter,
        "matvecs": counters.get("matvecs", 0),
        "precond_applications": counters.get("precond_applications", 0),
        "c_mvp": c_mvp,
        "c_prec": c_prec,
        "cost_per_iteration": c_mvp + c_prec,
        "estimated_cost": n_iter * (c_mvp + c_prec),
        "log10_estimated_cost": math.log10(max(n_iter * (c_mvp + c_prec), 1)),
    }
