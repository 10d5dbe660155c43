"""Preconditioners for the stochastic Galerkin eigen-systems.

``MB`` and ``HGS`` act on the symmetric positive definite systems of
inverse subspace iteration. ``NMB``, ``CMB`` and ``CHGS`` act on the
saddle-point Newton systems, where a right-hand side is the pair
``(R_u, r_lam)`` of an ``(n_x, n_xi)`` block and an ``n_xi`` vector.

The hierarchical variants sweep over total-degree blocks of the gPC
basis, forward then backward, with off-block couplings truncated to the
first ``n_t = C(m_xi + p_t, p_t)`` expansion terms.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .gpc import GpcBasis, n_terms
from .sg_operator import GalerkinOperator

PINV_RCOND = 1e-10
EPS_FIXED = 0.95
EPS_UPDATED = 1.0


class MeanBlockSolver:
    """Cholesky solves with the mean matrix ``A_1``."""

    def __init__(self, A1):
        A1 = np.asarray(A1, dtype=float)
        try:
            self._cho = sla.cho_factor(A1, lower=True)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError("mean matrix is not positive definite") from exc
        self.n_x = A1.shape[0]

    def solve(self, R) -> np.ndarray:
        return sla.cho_solve(self._cho, R)


def _truncation(basis: GpcBasis, p_t: int) -> int:
    if p_t < 0 or p_t > basis.degree:
        raise ValueError(f"truncation degree p_t={p_t} must lie in [0, {basis.degree}]")
    return n_terms(basis.m_xi, p_t)


def _sweep(blocks, n, solve, couple, rhs):
    """Symmetric degree-block Gauss-Seidel from a zero initial guess.

    ``couple(sol, rows, cols)`` returns the coupling of the current
    solution columns ``cols`` into block ``rows``; ``solve(rows, r)``
    applies the diagonal block; ``rhs(rows)`` extracts the right-hand side.
    """
    sol = None
    order = list(range(len(blocks))) + list(range(len(blocks) - 2, -1, -1))
    for step, d in enumerate(order):
        rows = blocks[d]
        r = rhs(rows)
        if d > 0:
            r = _minus(r, couple(sol, rows, slice(0, rows.start)))
        if step >= len(blocks) and rows.stop < n:
            r = _minus(r, couple(sol, rows, slice(rows.stop, n)))
        sol = solve(sol, rows, r)
    return sol


def _minus(a, b):
    if isinstance(a, tuple):
        return tuple(x - y for x, y in zip(a, b))
    return a - b


class MBPreconditioner:
    """Block-diagonal ``I (x) A_1`` preconditioner."""

    def __init__(self, op: GalerkinOperator, mean: MeanBlockSolver | None = None):
        self.op = op
        self.mean = mean or MeanBlockSolver(op.A[0])

    def apply(self, R) -> np.ndarray:
        R = np.asarray(R, dtype=float)
        cols = R.shape[1]
        self.op.counters.add(precond_applications=1, mean_solves=cols, mean_solve_flops=2 * self.op.n_x**2 * cols)
        return self.mean.solve(R)


class HGSPreconditioner:
    """Symmetric hierarchical Gauss-Seidel over degree blocks.

    With ``p_t = 0`` the off-block couplings vanish and the result equals
    the mean-based preconditioner.
    """

    def __init__(self, op: GalerkinOperator, basis: GpcBasis, p_t: int, mean: MeanBlockSolver | None = None):
        if basis.size != op.n_xi:
            raise ValueError("basis does not match the operator")
        self.op, self.basis, self.p_t = op, basis, p_t
        self.n_t = _truncation(basis, p_t)
        self.mean = mean or MeanBlockSolver(op.A[0])
        self.blocks = basis.block_ranges()

    def apply(self, R) -> np.ndarray:
        R = np.asarray(R, dtype=float)
        op, n = self.op, self.op.n_xi
        V = np.zeros_like(R)
        solves = [0]

        def rhs(rows):
            return R[:, rows]

        def couple(sol, rows, cols):
            return op.block_matvec(sol[:, cols], rows, cols, self.n_t)

        def solve(sol, rows, r):
            V[:, rows] = self.mean.solve(r)
            solves[0] += r.shape[1]
            return V

        _sweep(self.blocks, n, solve, couple, rhs)
        op.counters.add(
            precond_applications=1, mean_solves=solves[0], mean_solve_flops=2 * op.n_x**2 * solves[0]
        )
        return V


class _ShiftedMean:
    """Factorization of ``M_1^s = A_1 - eps_M mu I``."""

    def __init__(self, A1, mu: float, eps_M: float):
        A1 = np.asarray(A1, dtype=float)
        self.n_x = A1.shape[0]
        self.eps_M, self.mu = eps_M, mu
        self.matrix = A1 - eps_M * mu * np.eye(self.n_x)
        self._lu = None

    def solve(self, R) -> np.ndarray:
        if self._lu is None:
            self._lu = sla.lu_factor(self.matrix, check_finite=True)
            d = np.abs(np.diag(self._lu[0]))
            if d.min() <= 1e-14 * d.max():
                raise np.linalg.LinAlgError("shifted mean block is numerically singular; use the pseudoinverse")
        return sla.lu_solve(self._lu, R)


class SaddleMeanBlock:
    """The bordered block ``[[M_1^s, -w], [-w^T, 0]]`` for one gPC index.

    In elimination mode the solve uses the factorization of ``M_1^s``.
    In pseudoinverse mode (required when ``eps_M = 1`` makes ``M_1^s``
    singular) the bordered matrix is inverted through its SVD with rank
    cut ``PINV_RCOND * sigma_max``.
    """

    def __init__(self, A1, mu: float, w, eps_M: float, pseudo: bool):
        self.mean = _ShiftedMean(A1, mu, eps_M)
        self.pseudo = pseudo
        self.set_anchor(w)

    def set_anchor(self, w) -> None:
        w = np.asarray(w, dtype=float)
        self.w = w
        n = self.mean.n_x
        if self.pseudo:
            K = np.zeros((n + 1, n + 1))
            K[:n, :n] = self.mean.matrix
            K[:n, n] = K[n, :n] = -w
            self._kinv = np.linalg.pinv(K, rcond=PINV_RCOND, hermitian=True)
            if not np.all(np.isfinite(self._kinv)):
                raise np.linalg.LinAlgError("saddle block pseudoinverse failed")
        else:
            self._y = self.mean.solve(w)
            self._wy = float(w @ self._y)
            if abs(self._wy) <= 1e-14 * max(1.0, float(w @ w)):
                raise np.linalg.LinAlgError("saddle block is singular")

    def matrix(self) -> np.ndarray:
        n = self.mean.n_x
        K = np.zeros((n + 1, n + 1))
        K[:n, :n] = self.mean.matrix
        K[:n, n] = K[n, :n] = -self.w
        return K

    def solve(self, Ru, rl):
        Ru = np.asarray(Ru, dtype=float)
        rl = np.asarray(rl, dtype=float)
        if self.pseudo:
            Z = self._kinv @ np.vstack([Ru, rl[None, :]])
            return Z[:-1], Z[-1]
        X = self.mean.solve(Ru)
        lam = -(rl + self.w @ X) / self._wy
        return X + np.outer(self._y, lam), lam


class _NewtonPreconditioner:
    """Shared anchor handling for the Newton preconditioners.

    ``mode="fixed"`` anchors on the mean eigenvector; ``mode="updated"``
    re-anchors on the mean coefficient column of the current iterate in
    :meth:`update`, called once per Newton step.
    """

    def __init__(self, op: GalerkinOperator, mu: float, w, eps_M: float, mode: str):
        if mode not in ("fixed", "updated"):
            raise ValueError("mode must be 'fixed' or 'updated'")
        self.op, self.mu, self.eps_M, self.mode = op, float(mu), float(eps_M), mode
        self.w0 = np.asarray(w, dtype=float)

    def update(self, U, lam) -> None:  # pragma: no cover - overridden
        raise NotImplementedError

    def _count(self, cols: int) -> None:
        n = self.op.n_x
        self.op.counters.add(precond_applications=1, mean_solves=cols, mean_solve_flops=2 * (n + 1) ** 2 * cols)


class NMBPreconditioner(_NewtonPreconditioner):
    """Block-diagonal mean-based preconditioner for the Newton system."""

    def __init__(self, op, mu, w, eps_M: float = EPS_FIXED, mode: str = "fixed"):
        super().__init__(op, mu, w, eps_M, mode)
        self.mean = _ShiftedMean(op.A[0], self.mu, self.eps_M)
        self._set(self.w0)

    def _set(self, w) -> None:
        self.w = np.asarray(w, dtype=float)
        self.schur = float(self.w @ self.mean.solve(self.w))
        if abs(self.schur) <= 1e-14 * max(1.0, float(self.w @ self.w)):
            raise np.linalg.LinAlgError("w^T (M_1^s)^{-1} w vanishes")

    def update(self, U, lam) -> None:
        if self.mode == "updated":
            self._set(np.asarray(U)[:, 0])

    def is_spd(self) -> bool:
        return bool(np.linalg.eigvalsh(self.mean.matrix)[0] > 0 and self.schur > 0)

    def apply(self, Ru, rl):
        self._count(np.asarray(Ru).shape[1])
        return self.mean.solve(Ru), np.asarray(rl, dtype=float) / self.schur


class CMBPreconditioner(_NewtonPreconditioner):
    """Constraint mean-based preconditioner: one saddle block per gPC index."""

    def __init__(self, op, mu, w, eps_M: float | None = None, mode: str = "fixed", pseudo: bool | None = None):
        if eps_M is None:
            eps_M = EPS_FIXED if mode == "fixed" else EPS_UPDATED
        super().__init__(op, mu, w, eps_M, mode)
        pseudo = self.eps_M >= 1.0 if pseudo is None else pseudo
        self.block = SaddleMeanBlock(op.A[0], self.mu, self.w0, self.eps_M, pseudo)

    def update(self, U, lam) -> None:
        if self.mode == "updated":
            self.block.set_anchor(np.asarray(U)[:, 0])

    def apply(self, Ru, rl):
        self._count(np.asarray(Ru).shape[1])
        return self.block.solve(Ru, rl)


class CHGSPreconditioner(_NewtonPreconditioner):
    """Constraint hierarchical Gauss-Seidel for the Newton system.

    Diagonal blocks are the (updated) constraint mean blocks. Off-block
    couplings are the parts of the symmetrized Jacobian that involve the
    first ``n_t`` terms of the operator, eigenvalue and eigenvector
    expansions at the current Newton iterate.
    """

    def __init__(self, op, basis: GpcBasis, p_t: int, mu, w, eps_M: float = EPS_UPDATED, pseudo: bool | None = None):
        super().__init__(op, mu, w, eps_M, "updated")
        if basis.size != op.n_xi:
            raise ValueError("basis does not match the operator")
        self.basis, self.p_t = basis, p_t
        self.n_t = _truncation(basis, p_t)
        pseudo = self.eps_M >= 1.0 if pseudo is None else pseudo
        self.block = SaddleMeanBlock(op.A[0], self.mu, self.w0, self.eps_M, pseudo)
        self.blocks = basis.block_ranges()
        U0 = np.zeros((op.n_x, op.n_xi))
        U0[:, 0] = self.w0
        lam0 = np.zeros(op.n_xi)
        lam0[0] = self.mu
        self.update(U0, lam0)

    def update(self, U, lam) -> None:
        self.U = np.asarray(U, dtype=float)
        self.lam = np.asarray(lam, dtype=float)
        nt = self.n_t
        self.Lt = np.tensordot(self.lam[:nt], self.op.H[:nt], axes=1)
        self.block.set_anchor(self.U[:, 0])

    def _couple(self, sol, rows, cols):
        V, vl = sol
        op, nt = self.op, self.n_t
        Vc, lc = V[:, cols], vl[cols]
        Hc = op.H[:nt, cols, rows]
        top = op.block_matvec(Vc, rows, cols, nt) - Vc @ self.Lt[cols, rows]
        top -= self.U[:, :nt] @ np.einsum("c,tcr->tr", lc, Hc)
        bot = -np.einsum("tc,tcr->r", self.U[:, :nt].T @ Vc, Hc)
        return top, bot

    def apply(self, Ru, rl):
        Ru = np.asarray(Ru, dtype=float)
        rl = np.asarray(rl, dtype=float)
        V = np.zeros_like(Ru)
        vl = np.zeros_like(rl)
        state = (V, vl)

        def rhs(rows):
            return Ru[:, rows], rl[rows]

        def solve(sol, rows, r):
            V[:, rows], vl[rows] = self.block.solve(*r)
            return state

        _sweep(self.blocks, self.op.n_xi, solve, self._couple, rhs)
        solves = sum(b.stop - b.start for b in self.blocks) * 2 - (self.blocks[-1].stop - self.blocks[-1].start)
        self._count(solves)
        return V, vl
