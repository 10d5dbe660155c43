"""Sampling baselines: stochastic collocation and Monte Carlo.

Both evaluate ``A(xi) = sum_l A_l psi_l(xi)`` at sample points and solve
the deterministic eigenproblem there. Collocation projects the sampled
eigenpairs onto the gPC basis with sparse-grid weights; Monte Carlo keeps
the raw samples and reports moments.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .gpc import HERMITE, GpcBasis
from .quadrature import SparseGrid

DEGENERACY_TOL = 1e-8


@dataclass
class SampleRun:
    method: str
    points: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)  # (n_points, n_s)
    lam_coeffs: np.ndarray | None = field(default=None, repr=False)  # (n_s, n_xi)
    u_coeffs: np.ndarray | None = field(default=None, repr=False)  # (n_s, n_x, n_xi)
    weights: np.ndarray | None = field(default=None, repr=False)

    @property
    def mean(self) -> np.ndarray:
        if self.weights is not None:
            return self.weights @ self.eigenvalues
        return self.eigenvalues.mean(axis=0)

    @property
    def variance(self) -> np.ndarray:
        if self.weights is not None:
            return self.weights @ (self.eigenvalues - self.mean) ** 2
        return self.eigenvalues.var(axis=0, ddof=1)

    @property
    def standard_error(self) -> np.ndarray:
        return np.sqrt(self.variance / self.eigenvalues.shape[0])


def sample_operator(A, basis_a: GpcBasis, xi) -> np.ndarray:
    """``sum_l A_l psi_l(xi)`` using the first ``len(A)`` basis functions."""
    A = np.asarray(A, dtype=float)
    psi = basis_a.eval(np.asarray(xi, dtype=float))[: A.shape[0]]
    out = np.tensordot(psi, A, axes=1)
    return 0.5 * (out + out.T)


def _clusters(mu: np.ndarray) -> list[list[int]]:
    groups: list[list[int]] = [[0]]
    scale = max(np.abs(mu).max(), 1.0)
    for s in range(1, mu.size):
        if mu[s] - mu[groups[-1][-1]] <= DEGENERACY_TOL * scale:
            groups[-1].append(s)
        else:
            groups.append([s])
    return groups


def _align(vecs: np.ndarray, W: np.ndarray, groups: list[list[int]]) -> np.ndarray:
    """Match sampled eigenvectors to the mean eigenvectors ``W``.

    Simple eigenvalues get a sign flip; clusters of repeated mean
    eigenvalues are rotated inside the sampled eigenspace by an orthogonal
    Procrustes fit to the matching columns of ``W``.
    """
    out = vecs.copy()
    for g in groups:
        if len(g) == 1:
            s = g[0]
            if out[:, s] @ W[:, s] < 0:
                out[:, s] = -out[:, s]
        else:
            X = vecs[:, g]
            Uo, _, Vt = np.linalg.svd(X.T @ W[:, g])
            out[:, g] = X @ (Uo @ Vt)
    return out


def _eig_at(A, basis_a, xi, n_s, vectors: bool):
    Axi = sample_operator(A, basis_a, xi)
    if vectors:
        return sla.eigh(Axi, subset_by_index=[0, n_s - 1])
    return sla.eigh(Axi, subset_by_index=[0, n_s - 1], eigvals_only=True), None


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def collocation_run(A, basis_a: GpcBasis, grid: SparseGrid, n_s: int, basis: GpcBasis, W=None, jobs: int = 1) -> SampleRun:
    """Sparse-grid collocation with gPC projection of the sampled eigenpairs.

    ``W`` holds the mean eigenvectors used for sign and subspace alignment;
    it defaults to the eigenvectors of ``A[0]``.
    """
    A = np.asarray(A, dtype=float)
    if W is None:
        mu, W = sla.eigh(A[0], subset_by_index=[0, n_s - 1])
    else:
        mu = np.diag(W.T @ A[0] @ W)
    groups = _clusters(np.asarray(mu))
    results = _map(lambda xi: _eig_at(A, basis_a, xi, n_s, True), list(grid.points), jobs)
    lam = np.array([r[0] for r in results])
    vecs = np.array([_align(r[1], W, groups) for r in results])  # (n_q, n_x, n_s)
    wpsi = grid.weights[:, None] * basis.eval(grid.points)  # (n_q, n_xi)
    lam_coeffs = lam.T @ wpsi
    u_coeffs = np.einsum("qxs,qk->sxk", vecs, wpsi)
    return SampleRun("sc", grid.points, lam, lam_coeffs, u_coeffs, grid.weights)


def draw_samples(family: str, n: int, m_xi: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if family == HERMITE:
        return rng.standard_normal((n, m_xi))
    return rng.uniform(-1.0, 1.0, (n, m_xi))


def monte_carlo_run(A, basis_a: GpcBasis, n_samples: int, seed: int, n_s: int, basis: GpcBasis | None = None, jobs: int = 1) -> SampleRun:
    """Monte Carlo eigenvalue samples; ``basis`` adds sample-mean gPC coefficients."""
    A = np.asarray(A, dtype=float)
    pts = draw_samples(basis_a.family, n_samples, basis_a.m_xi, seed)
    lam = np.array(_map(lambda xi: _eig_at(A, basis_a, xi, n_s, False)[0], list(pts), jobs))
    coeffs = None
    if basis is not None:
        coeffs = lam.T @ basis.eval(pts) / n_samples
    return SampleRun("mc", pts, lam, coeffs)
