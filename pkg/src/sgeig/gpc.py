"""Orthonormal polynomial chaos bases and their triple-product tensors.

Two families are supported: probabilists' Hermite polynomials (standard
Gaussian measure) and Legendre polynomials normalized under the uniform
measure on [-1, 1]. Multi-indices are graded by total degree; inside one
degree they are listed in descending lexicographic order, so the first
variable varies slowest. With this order the degree blocks used by the
hierarchical preconditioners are contiguous.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

HERMITE = "hermite"
LEGENDRE = "legendre"
FAMILIES = (HERMITE, LEGENDRE)

DROP_TOL = 1e-12


def _check_family(family: str) -> str:
    if family not in FAMILIES:
        raise ValueError(f"unknown polynomial family {family!r}")
    return family


def multi_indices(m_xi: int, p: int) -> list[tuple[int, ...]]:
    """Total-degree multi-indices in graded order.

    Returns ``C(m_xi + p, p)`` tuples; the zero index comes first and
    indices of equal degree are sorted in descending lexicographic order.
    """
    if m_xi < 1 or p < 0:
        raise ValueError("need m_xi >= 1 and p >= 0")
    out: list[tuple[int, ...]] = []
    for d in range(p + 1):
        level = [a for a in itertools.product(range(d + 1), repeat=m_xi) if sum(a) == d]
        out.extend(sorted(level, reverse=True))
    return out


def n_terms(m_xi: int, p: int) -> int:
    """Number of basis functions of total degree at most ``p``."""
    return math.comb(m_xi + p, p) if p >= 0 else 0


def eval_univariate(family: str, x, pmax: int) -> np.ndarray:
    """Normalized 1D polynomials of degree 0..pmax at ``x``.

    Returns an array of shape ``(pmax + 1,) + x.shape``.
    """
    _check_family(family)
    x = np.asarray(x, dtype=float)
    out = np.empty((pmax + 1,) + x.shape)
    out[0] = 1.0
    if pmax >= 1:
        out[1] = x
    # three-term recurrences for the monic (Hermite) / classical (Legendre) forms
    for n in range(1, pmax):
        if family == HERMITE:
            out[n + 1] = x * out[n] - n * out[n - 1]
        else:
            out[n + 1] = ((2 * n + 1) * x * out[n] - n * out[n - 1]) / (n + 1)
    for n in range(pmax + 1):
        if family == HERMITE:
            out[n] /= math.sqrt(math.factorial(n))
        else:
            out[n] *= math.sqrt(2 * n + 1)
    return out


@dataclass(frozen=True)
class GpcBasis:
    """Multivariate orthonormal basis of total degree ``degree``.

    Attributes
    ----------
    family : str
        ``"hermite"`` or ``"legendre"``.
    m_xi : int
        Number of random variables.
    degree : int
        Maximal total degree ``p``.
    indices : ndarray of shape (n_xi, m_xi)
        Multi-indices in graded order.
    """

    family: str
    m_xi: int
    degree: int
    indices: np.ndarray = field(repr=False)

    @classmethod
    def create(cls, family: str, m_xi: int, degree: int) -> "GpcBasis":
        _check_family(family)
        idx = np.array(multi_indices(m_xi, degree), dtype=int).reshape(-1, m_xi)
        idx.setflags(write=False)
        return cls(family, m_xi, degree, idx)

    @property
    def size(self) -> int:
        return self.indices.shape[0]

    @cached_property
    def total_degrees(self) -> np.ndarray:
        return self.indices.sum(axis=1)

    def block_ranges(self) -> list[slice]:
        """Contiguous index ranges of the degree blocks 0..degree."""
        return [slice(n_terms(self.m_xi, d - 1), n_terms(self.m_xi, d)) for d in range(self.degree + 1)]

    def eval(self, xi) -> np.ndarray:
        """Evaluate all basis functions.

        ``xi`` of shape ``(m_xi,)`` gives ``(n_xi,)``; shape ``(N, m_xi)``
        gives ``(N, n_xi)``.
        """
        xi = np.asarray(xi, dtype=float)
        single = xi.ndim == 1
        pts = np.atleast_2d(xi)
        if pts.shape[1] != self.m_xi:
            raise ValueError(f"expected points with {self.m_xi} components, got {pts.shape[1]}")
        if self.family == LEGENDRE and np.any(np.abs(pts) > 1 + 1e-12):
            raise ValueError("Legendre variables must lie in [-1, 1]")
        uni = eval_univariate(self.family, pts, self.degree)  # (p+1, N, m)
        vals = np.ones((pts.shape[0], self.size))
        for q in range(self.m_xi):
            vals *= uni[self.indices[:, q], :, q].T
        return vals[0] if single else vals


def eval_basis(basis: GpcBasis, xi) -> np.ndarray:
    """Functional alias of :meth:`GpcBasis.eval`."""
    return basis.eval(xi)


def _univariate_triples(family: str, pa: int, pb: int) -> np.ndarray:
    """Table ``T[a, b, c] = E[phi_a phi_b phi_c]`` for a <= pa, b, c <= pb."""
    from .quadrature import gauss_rule

    n = (pa + 2 * pb) // 2 + 1
    rule = gauss_rule(family, n)
    phi = eval_univariate(family, rule.nodes, max(pa, pb))
    return np.einsum("aq,bq,cq,q->abc", phi[: pa + 1], phi[: pb + 1], phi[: pb + 1], rule.weights)


@dataclass(frozen=True)
class TripleProductTensor:
    """Sparse tensor ``h[l, k, j] = E[psi_l psi_k psi_j]``.

    Entries are stored in coordinate form; both ``(k, j)`` and ``(j, k)``
    are kept. Indices are zero-based.
    """

    n_a: int
    n_xi: int
    ell: np.ndarray = field(repr=False)
    k: np.ndarray = field(repr=False)
    j: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    @property
    def nnz(self) -> int:
        return self.values.size

    @cached_property
    def dense(self) -> np.ndarray:
        """Dense array of shape ``(n_a, n_xi, n_xi)``."""
        out = np.zeros((self.n_a, self.n_xi, self.n_xi))
        out[self.ell, self.k, self.j] = self.values
        out.setflags(write=False)
        return out

    def slice(self, ell: int) -> np.ndarray:
        """The matrix ``H_ell`` (zero-based ``ell``)."""
        return self.dense[ell]

    def stacked(self, n_ops: int | None = None) -> sp.csr_matrix:
        """Sparse ``(n_ops * n_xi, n_xi)`` matrix with row ``l * n_xi + j`` and column ``k``.

        Used by the matricized matvec ``V = sum_l A_l U H_l^T``.
        """
        n_ops = self.n_a if n_ops is None else n_ops
        keep = self.ell < n_ops
        rows = self.ell[keep] * self.n_xi + self.j[keep]
        return sp.csr_matrix((self.values[keep], (rows, self.k[keep])), shape=(n_ops * self.n_xi, self.n_xi))


def triple_product_tensor(basis_a: GpcBasis, basis_sol: GpcBasis, drop_tol: float = DROP_TOL) -> TripleProductTensor:
    """Triple products of ``basis_a`` against pairs of ``basis_sol``.

    Computed from exact 1D Gauss quadrature tables and multiplied across
    variables; entries with magnitude at most ``drop_tol`` are dropped.
    """
    if basis_a.family != basis_sol.family:
        raise ValueError("bases must share the polynomial family")
    if basis_a.m_xi != basis_sol.m_xi:
        raise ValueError("bases must share the number of random variables")
    if basis_a.degree < basis_sol.degree:
        raise ValueError("basis_a must have degree >= basis_sol degree")
    table = _univariate_triples(basis_a.family, basis_a.degree, basis_sol.degree)
    ia, isol = basis_a.indices, basis_sol.indices
    dense = np.ones((ia.shape[0], isol.shape[0], isol.shape[0]))
    for q in range(basis_a.m_xi):
        dense *= table[np.ix_(ia[:, q], isol[:, q], isol[:, q])]
    # exact symmetry in (k, j) regardless of rounding in the product order
    dense = 0.5 * (dense + dense.transpose(0, 2, 1))
    ell, k, j = np.nonzero(np.abs(dense) > drop_tol)
    vals = dense[ell, k, j]
    for arr in (ell, k, j, vals):
        arr.setflags(write=False)
    return TripleProductTensor(ia.shape[0], isol.shape[0], ell, k, j, vals)


def hermite_triple_closed_form(i: int, j: int, k: int) -> float:
    """Closed-form ``E[He_i He_j He_k] / sqrt(i! j! k!)`` for normalized Hermite."""
    s2 = i + j + k
    if s2 % 2:
        return 0.0
    s = s2 // 2
    if s < max(i, j, k):
        return 0.0
    f = math.factorial
    return math.sqrt(f(i) * f(j) * f(k)) / (f(s - i) * f(s - j) * f(s - k))
