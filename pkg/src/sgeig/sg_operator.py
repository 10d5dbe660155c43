"""Matricized stochastic Galerkin operator ``sum_l H_l (x) A_l``.

A coefficient vector is stored as an ``(n_x, n_xi)`` matrix ``U`` whose
column ``k`` multiplies ``psi_k``. The Kronecker matrix is never formed;
``matvec`` evaluates ``V = sum_l A_l U H_l^T``.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .gpc import TripleProductTensor


@dataclass
class Counters:
    """Operation tallies; updates are serialized so solves may share them.

    ``block_flops`` and ``mean_solve_flops`` are multiply-add counts; a
    full matvec costs ``n_a * (n_x^2 n_xi + n_x n_xi^2)`` in the same units.
    """

    matvecs: int = 0
    block_matvecs: int = 0
    block_flops: float = 0.0
    precond_applications: int = 0
    mean_solves: int = 0
    mean_solve_flops: float = 0.0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def add(self, **kw) -> None:
        with self._lock:
            for key, val in kw.items():
                setattr(self, key, getattr(self, key) + val)

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "matvecs": self.matvecs,
                "block_matvecs": self.block_matvecs,
                "block_flops": self.block_flops,
                "precond_applications": self.precond_applications,
                "mean_solves": self.mean_solves,
                "mean_solve_flops": self.mean_solve_flops,
            }

    def reset(self) -> None:
        with self._lock:
            self.matvecs = self.block_matvecs = self.precond_applications = self.mean_solves = 0
            self.block_flops = self.mean_solve_flops = 0.0


class GalerkinOperator:
    """Implicit operator built from matrices ``A`` of shape ``(n_a, n_x, n_x)``.

    The tensor may carry more slices than there are matrices; the extra
    slices serve the eigenvalue coupling ``sum_i lambda_i H_i`` when the
    coefficient expansion is shorter than the solution basis.
    """

    def __init__(self, A, tensor: TripleProductTensor):
        A = np.asarray(A, dtype=float)
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise ValueError("A must have shape (n_a, n_x, n_x)")
        if A.shape[0] > tensor.n_a:
            raise ValueError("tensor has fewer slices than operator terms")
        self.A = A
        self.tensor = tensor
        self.n_a, self.n_x = A.shape[0], A.shape[1]
        self.n_xi = tensor.n_xi
        self._A_stack = A.reshape(self.n_a * self.n_x, self.n_x)
        self._H_stack = tensor.stacked(self.n_a)
        self.H = tensor.dense
        self.counters = Counters()

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_x, self.n_xi

    def _check(self, U) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        if U.shape != self.shape:
            raise ValueError(f"expected coefficients of shape {self.shape}, got {U.shape}")
        return U

    def matvec(self, U) -> np.ndarray:
        """``sum_l A_l U H_l^T``."""
        U = self._check(U)
        AU = (self._A_stack @ U).reshape(self.n_a, self.n_x, self.n_xi)
        AU = AU.transpose(1, 0, 2).reshape(self.n_x, self.n_a * self.n_xi)
        self.counters.add(matvecs=1)
        return np.asarray(self._H_stack.T.dot(AU.T).T)

    def block_matvec(self, Uk, rows: slice, cols: slice, n_t: int) -> np.ndarray:
        """``sum_{t < n_t} A_t U_(cols) H_t[cols, rows]`` for a column block."""
        Uk = np.asarray(Uk, dtype=float)
        nr = len(range(*rows.indices(self.n_xi)))
        nc = len(range(*cols.indices(self.n_xi)))
        if nr == 0 or nc == 0:
            raise ValueError("empty index range")
        if Uk.shape != (self.n_x, nc):
            raise ValueError("column block has the wrong shape")
        n_t = min(n_t, self.n_a)
        AU = (self._A_stack[: n_t * self.n_x] @ Uk).reshape(n_t, self.n_x, nc)
        V = np.einsum("txc,tcr->xr", AU, self.H[:n_t, cols, rows])
        self.counters.add(block_matvecs=1, block_flops=n_t * self.n_x * nc * (self.n_x + nr))
        return V

    def eig_coupling(self, lam) -> np.ndarray:
        """``sum_i lambda_i H_i`` for eigenvalue coefficients ``lam``."""
        lam = np.asarray(lam, dtype=float)
        if lam.shape != (self.n_xi,):
            raise ValueError("eigenvalue coefficients must have length n_xi")
        return np.tensordot(lam, self.H[: self.n_xi], axes=1)

    def apply_shifted(self, U, lam) -> np.ndarray:
        """``matvec(U) - sum_i lambda_i U H_i^T``."""
        return self.matvec(U) - self._check(U) @ self.eig_coupling(lam)

    def assemble(self) -> np.ndarray:
        """Explicit ``sum_l H_l (x) A_l`` acting on column-stacked ``vec(U)``.

        Intended for tests and small problems only.
        """
        n = self.n_x * self.n_xi
        out = np.zeros((n, n))
        for ell in range(self.n_a):
            out += np.kron(self.H[ell], self.A[ell])
        return out


def vec(U: np.ndarray) -> np.ndarray:
    """Column-stacking ``vec`` matching the Kronecker layout."""
    return np.asarray(U).reshape(-1, order="F")


def unvec(x: np.ndarray, n_x: int, n_xi: int) -> np.ndarray:
    return np.asarray(x).reshape(n_x, n_xi, order="F")


def matvec(op: GalerkinOperator, U) -> np.ndarray:
    return op.matvec(U)


def block_matvec(op: GalerkinOperator, Uk, rows: slice, cols: slice, n_t: int) -> np.ndarray:
    return op.block_matvec(Uk, rows, cols, n_t)


def apply_shifted(op: GalerkinOperator, U, lam) -> np.ndarray:
    return op.apply_shifted(U, lam)


def residual_indicators(R) -> tuple[float, float]:
    """``(||r_1||, ||sum_{k>=2} r_k o r_k||)`` for a residual block ``R``."""
    R = np.asarray(R, dtype=float)
    eps1 = float(np.linalg.norm(R[:, 0]))
    eps_var = float(np.linalg.norm((R[:, 1:] ** 2).sum(axis=1)))
    return eps1, eps_var
