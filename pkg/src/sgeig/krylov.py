"""Matrix-free CG, MINRES and full GMRES on flat vectors.

Operators and preconditioners are callables ``x -> y``. All solvers start
from the zero vector and stop on a relative residual: the true residual
for CG, the preconditioned residual for GMRES (left preconditioning) and
the preconditioner-norm residual for MINRES.
"""
from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

Apply = Callable[[np.ndarray], np.ndarray]

DEFAULT_MAXIT = 500


@dataclass
class SolveStats:
    iterations: int = 0
    final_relres: float = 0.0
    converged: bool = False
    breakdown: bool = False
    history: list[float] = field(default_factory=list)


class SolverError(RuntimeError):
    """Raised when a solver contract is violated (for example an indefinite preconditioner)."""


def _identity(x: np.ndarray) -> np.ndarray:
    return x


def pcg(apply: Apply, rhs, precond: Apply | None = None, tol: float = 1e-8, maxit: int = DEFAULT_MAXIT):
    """Preconditioned conjugate gradients.

    Stops when ``||b - A x|| / ||b|| <= tol``. A non-positive curvature
    ``p^T A p`` sets the breakdown flag and returns the current iterate.
    """
    M = precond or _identity
    b = np.asarray(rhs, dtype=float)
    x = np.zeros_like(b)
    stats = SolveStats()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        stats.converged = True
        stats.history.append(0.0)
        return x, stats
    r = b.copy()
    z = M(r)
    p = z.copy()
    rz = r @ z
    stats.history.append(1.0)
    for it in range(1, maxit + 1):
        Ap = apply(p)
        curv = p @ Ap
        if curv <= 0.0:
            stats.breakdown = True
            break
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        relres = np.linalg.norm(r) / bnorm
        stats.iterations = it
        stats.history.append(relres)
        if relres <= tol:
            stats.converged = True
            break
        z = M(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    stats.final_relres = stats.history[-1]
    return x, stats


def gmres(
    apply: Apply,
    rhs,
    precond: Apply | None = None,
    tol: float = 1e-8,
    maxit: int = DEFAULT_MAXIT,
    side: str = "left",
):
    """Full (non-restarted) preconditioned GMRES with modified Gram-Schmidt.

    With ``side="left"`` the iteration runs on ``P A x = P b`` and stops
    when ``||P (b - A x)|| / ||P b|| <= tol``. With ``side="right"`` it runs
    on ``A P y = b``, ``x = P y``, and the test uses the true residual.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    M = precond or _identity
    b = np.asarray(rhs, dtype=float)
    n = b.size
    stats = SolveStats()
    r0 = M(b) if side == "left" else b.copy()
    beta = np.linalg.norm(r0)
    if beta == 0.0:
        stats.converged = True
        stats.history.append(0.0)
        return np.zeros_like(b), stats
    maxit = min(maxit, n)
    V = np.zeros((maxit + 1, n))
    Hm = np.zeros((maxit + 1, maxit))
    cs, sn = np.zeros(maxit), np.zeros(maxit)
    g = np.zeros(maxit + 1)
    g[0] = beta
    V[0] = r0 / beta
    stats.history.append(1.0)
    k = 0
    for k in range(maxit):
        # copy: operators may hand back their input, which aliases V[k]
        w = np.array(M(apply(V[k])) if side == "left" else apply(M(V[k])), dtype=float)
        for i in range(k + 1):
            Hm[i, k] = w @ V[i]
            w -= Hm[i, k] * V[i]
        Hm[k + 1, k] = np.linalg.norm(w)
        happy = Hm[k + 1, k] <= 1e-14 * beta
        if not happy:
            V[k + 1] = w / Hm[k + 1, k]
        for i in range(k):
            t = cs[i] * Hm[i, k] + sn[i] * Hm[i + 1, k]
            Hm[i + 1, k] = -sn[i] * Hm[i, k] + cs[i] * Hm[i + 1, k]
            Hm[i, k] = t
        denom = np.hypot(Hm[k, k], Hm[k + 1, k])
        if denom == 0.0:
            stats.breakdown = True
            break
        cs[k], sn[k] = Hm[k, k] / denom, Hm[k + 1, k] / denom
        Hm[k, k] = denom
        Hm[k + 1, k] = 0.0
        g[k + 1] = -sn[k] * g[k]
        g[k] = cs[k] * g[k]
        relres = abs(g[k + 1]) / beta
        stats.iterations = k + 1
        stats.history.append(relres)
        if relres <= tol or happy:
            stats.converged = True
            break
    m = stats.iterations
    y = np.zeros(0)
    if m:
        y = np.linalg.solve(np.triu(Hm[:m, :m]), g[:m]) if not stats.breakdown else np.linalg.lstsq(
            np.triu(Hm[:m, :m]), g[:m], rcond=None
        )[0]
    x = V[:m].T @ y if m else np.zeros_like(b)
    if side == "right" and m:
        x = M(x)
    stats.final_relres = stats.history[-1]
    return x, stats


def minres(apply: Apply, rhs, precond: Apply | None = None, tol: float = 1e-8, maxit: int = DEFAULT_MAXIT):
    """Preconditioned MINRES for symmetric systems.

    The preconditioner must be symmetric positive definite; a negative
    ``<z, r>`` raises :class:`SolverError`. Stops when the residual in the
    inverse-preconditioner norm, relative to that of ``b``, is at most ``tol``.
    """
    M = precond or _identity
    b = np.asarray(rhs, dtype=float)
    x = np.zeros_like(b)
    stats = SolveStats()
    v = b.copy()
    z = M(v)
    g2 = v @ z
    if g2 < 0.0:
        raise SolverError("MINRES preconditioner is not positive definite")
    gamma = np.sqrt(g2)
    if gamma == 0.0:
        stats.converged = True
        stats.history.append(0.0)
        return x, stats
    gamma0 = gamma
    eta = gamma
    v_old = np.zeros_like(b)
    w, w_old = np.zeros_like(b), np.zeros_like(b)
    gamma_old = 1.0
    s, s_old, c, c_old = 0.0, 0.0, 1.0, 1.0
    stats.history.append(1.0)
    for it in range(1, maxit + 1):
        z = z / gamma
        Az = apply(z)
        delta = Az @ z
        v_new = Az - (delta / gamma) * v - (gamma / gamma_old) * v_old
        z_new = M(v_new)
        g2 = v_new @ z_new
        if g2 < -1e-14 * abs(delta) * gamma0:
            raise SolverError("MINRES preconditioner is not positive definite")
        gamma_new = np.sqrt(max(g2, 0.0))
        a0 = c * delta - c_old * s * gamma
        a1 = np.hypot(a0, gamma_new)
        a2 = s * delta + c_old * c * gamma
        a3 = s_old * gamma
        if a1 == 0.0:
            stats.breakdown = True
            break
        c_new, s_new = a0 / a1, gamma_new / a1
        w_new = (z - a3 * w_old - a2 * w) / a1
        x += c_new * eta * w_new
        eta = -s_new * eta
        relres = abs(eta) / gamma0
        stats.iterations = it
        stats.history.append(relres)
        if relres <= tol or gamma_new == 0.0:
            stats.converged = True
            break
        v_old, v = v, v_new
        z = z_new
        gamma_old, gamma = gamma, gamma_new
        w_old, w = w, w_new
        c_old, c = c, c_new
        s_old, s = s, s_new
    stats.final_relres = stats.history[-1]
    return x, stats
