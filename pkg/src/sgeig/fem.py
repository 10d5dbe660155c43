"""Bilinear finite elements for the diffusion eigenproblem on a square.

The generalized problem ``K(xi) u = lambda M u`` is brought to standard
form with the Cholesky factor of the mass matrix, giving dense symmetric
matrices ``A_l = L^{-1} K_l L^{-T}`` for every coefficient field.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

# reference-element data for Q4 with 2x2 Gauss integration
_GAUSS = np.array([-1.0, 1.0]) / np.sqrt(3.0)
_CORNERS = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float)


def _reference_tables():
    shape, grad = [], []
    for r in _GAUSS:
        for s in _GAUSS:
            shape.append(0.25 * (1 + _CORNERS[:, 0] * r) * (1 + _CORNERS[:, 1] * s))
            dr = 0.25 * _CORNERS[:, 0] * (1 + _CORNERS[:, 1] * s)
            ds = 0.25 * _CORNERS[:, 1] * (1 + _CORNERS[:, 0] * r)
            grad.append(np.stack([dr, ds]))
    return np.array(shape), np.array(grad)  # (4 qp, 4 nodes), (4 qp, 2, 4 nodes)


_SHAPE, _GRAD = _reference_tables()


@dataclass(frozen=True)
class StructuredMesh:
    """Uniform mesh of square Q4 elements on ``[lo, hi]^2``."""

    n_el: int
    lo: float
    hi: float
    nodes: np.ndarray = field(repr=False)
    elements: np.ndarray = field(repr=False)
    interior: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / self.n_el

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_interior(self) -> int:
        return self.interior.size


def structured_mesh(n_el: int = 16, lo: float = -1.0, hi: float = 1.0) -> StructuredMesh:
    if n_el < 1:
        raise ValueError("need at least one element per side")
    xs = np.linspace(lo, hi, n_el + 1)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    nid = lambda i, j: i * (n_el + 1) + j  # noqa: E731
    elements = np.array(
        [[nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)] for i in range(n_el) for j in range(n_el)]
    )
    tol = 1e-12 * (hi - lo)
    inside = (np.abs(nodes - lo) > tol) & (np.abs(nodes - hi) > tol)
    interior = np.flatnonzero(inside.all(axis=1))
    return StructuredMesh(n_el, lo, hi, nodes, elements, interior)


def _assemble(mesh: StructuredMesh, local: np.ndarray) -> np.ndarray:
    rows = np.repeat(mesh.elements[:, :, None], 4, axis=2).ravel()
    cols = np.repeat(mesh.elements[:, None, :], 4, axis=1).ravel()
    n = mesh.n_nodes
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).toarray()


def assemble_stiffness(mesh: StructuredMesh, coefficient, eliminate: bool = True) -> np.ndarray:
    """Stiffness matrix of ``-div(a grad u)`` for a nodal coefficient field.

    The coefficient is interpolated bilinearly to the Gauss points. With
    ``eliminate`` the Dirichlet boundary rows and columns are removed.
    """
    a = np.asarray(coefficient, dtype=float)
    if a.shape != (mesh.n_nodes,):
        raise ValueError("coefficient must be given on all mesh nodes")
    aq = a[mesh.elements] @ _SHAPE.T  # (elements, qp)
    # square elements: the Jacobian scaling of gradients and of the area cancel
    bq = np.einsum("qia,qib->qab", _GRAD, _GRAD)
    local = np.einsum("eq,qab->eab", aq, bq)
    K = _assemble(mesh, local)
    if eliminate:
        K = K[np.ix_(mesh.interior, mesh.interior)]
    return 0.5 * (K + K.T)


def assemble_mass(mesh: StructuredMesh, eliminate: bool = True) -> np.ndarray:
    """Consistent Q4 mass matrix with 2x2 Gauss integration."""
    me = np.einsum("qa,qb->ab", _SHAPE, _SHAPE) * (mesh.h / 2) ** 2
    M = _assemble(mesh, np.broadcast_to(me, (mesh.elements.shape[0], 4, 4)))
    if eliminate:
        M = M[np.ix_(mesh.interior, mesh.interior)]
    return 0.5 * (M + M.T)


def lumped_weights(mesh: StructuredMesh) -> np.ndarray:
    """Row sums of the full mass matrix, one weight per mesh node."""
    return assemble_mass(mesh, eliminate=False).sum(axis=1)


@dataclass(frozen=True)
class OperatorSet:
    """Deterministic matrices ``A_l`` stacked as ``(n_a, n_x, n_x)``."""

    A: np.ndarray = field(repr=False)

    @property
    def n_a(self) -> int:
        return self.A.shape[0]

    @property
    def n_x(self) -> int:
        return self.A.shape[1]


def to_standard_form(K_set, M) -> OperatorSet:
    """``A_l = L^{-1} K_l L^{-T}`` with ``M = L L^T``."""
    K = np.asarray(K_set, dtype=float)
    if K.ndim == 2:
        K = K[None]
    try:
        L = sla.cholesky(np.asarray(M, dtype=float), lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("mass matrix is not positive definite") from exc
    A = np.empty_like(K)
    for ell, Kl in enumerate(K):
        X = sla.solve_triangular(L, Kl, lower=True)
        X = sla.solve_triangular(L, X.T, lower=True)
        A[ell] = 0.5 * (X + X.T)
    A.setflags(write=False)
    return OperatorSet(A)


@dataclass(frozen=True)
class MeanEigenpairs:
    values: np.ndarray
    vectors: np.ndarray  # columns are unit eigenvectors
    degenerate: bool  # some requested eigenvalues coincide to 1e-8 relative


def fix_sign(v: np.ndarray) -> np.ndarray:
    """Flip ``v`` so its largest-magnitude entry is positive."""
    return v if v[np.argmax(np.abs(v))] >= 0 else -v


def mean_eigenpairs(A1, n_s: int) -> MeanEigenpairs:
    """The ``n_s`` smallest eigenpairs of the symmetric matrix ``A1``."""
    A1 = np.asarray(A1, dtype=float)
    vals, vecs = sla.eigh(A1, subset_by_index=[0, n_s - 1])
    vecs = np.column_stack([fix_sign(vecs[:, s]) for s in range(n_s)])
    scale = max(np.abs(vals).max(), 1.0)
    degenerate = bool(n_s > 1 and np.any(np.diff(vals) <= 1e-8 * scale))
    return MeanEigenpairs(vals, vecs, degenerate)
