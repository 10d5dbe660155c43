"""Karhunen-Loeve expansion and gPC expansions of random coefficient fields."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .gpc import HERMITE, LEGENDRE, GpcBasis


@dataclass(frozen=True)
class CovarianceSpec:
    """Separable exponential covariance ``s^2 exp(-|dx|/Lx - |dy|/Ly)``."""

    sigma_g: float
    Lx: float = 2.0
    Ly: float = 2.0

    def __post_init__(self):
        if self.sigma_g <= 0 or self.Lx <= 0 or self.Ly <= 0:
            raise ValueError("sigma_g and correlation lengths must be positive")

    def matrix(self, nodes: np.ndarray) -> np.ndarray:
        d = np.abs(nodes[:, None, :] - nodes[None, :, :])
        return self.sigma_g**2 * np.exp(-d[..., 0] / self.Lx - d[..., 1] / self.Ly)


@dataclass(frozen=True)
class KLExpansion:
    """Truncated field ``g0 + sum_j g_j(x) xi_j`` sampled at mesh nodes."""

    g0: float
    modes: np.ndarray = field(repr=False)  # (m_xi, n_nodes)
    eigenvalues: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def m_xi(self) -> int:
        return self.modes.shape[0]

    def sample(self, xi) -> np.ndarray:
        return self.g0 + np.asarray(xi) @ self.modes


def kl_expand(cov: CovarianceSpec, nodes, m_xi: int, weights=None, g0: float = 0.0) -> KLExpansion:
    """Discrete KL expansion with lumped nodal quadrature weights.

    The symmetrized matrix ``W^{1/2} C W^{1/2}`` is diagonalized and the
    ``m_xi`` dominant modes are returned as ``sqrt(lambda) v / sqrt(w)``.
    """
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    n = nodes.shape[0]
    if m_xi > n:
        raise ValueError("more KL modes requested than nodes")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    sw = np.sqrt(w)
    lam, V = sla.eigh(sw[:, None] * cov.matrix(nodes) * sw[None, :])
    if lam[0] < -1e-8 * lam[-1]:
        raise np.linalg.LinAlgError("covariance matrix is not positive semidefinite")
    order = np.argsort(lam)[::-1][:m_xi]
    lam = lam[order]
    modes = (V[:, order] / sw[:, None] * np.sqrt(np.maximum(lam, 0.0))).T
    for j in range(m_xi):
        total = modes[j].sum()
        if total < -1e-12 * np.abs(modes[j]).sum() or (
            abs(total) <= 1e-12 * np.abs(modes[j]).sum() and modes[j][np.flatnonzero(modes[j])[0]] < 0
        ):
            modes[j] = -modes[j]
    return KLExpansion(g0, modes, lam, w)


def calibrate_lognormal(cov_ratio: float, mean_a: float = 1.0) -> tuple[float, float]:
    """Pointwise moment matching ``(g0, sigma_g)`` for a lognormal field."""
    if cov_ratio <= 0 or mean_a <= 0:
        raise ValueError("CoV and mean must be positive")
    sigma_g = math.sqrt(math.log1p(cov_ratio**2))
    return math.log(mean_a) - 0.5 * sigma_g**2, sigma_g


def truncated_mean_shift(kl: KLExpansion, mean_a: float = 1.0) -> float:
    """``g0`` making the truncated lognormal mean field average ``mean_a``.

    The domain average uses the KL weights; the retained variance
    ``sum_j g_j(x)^2`` replaces the full ``sigma_g^2`` of pointwise matching.
    """
    var = (kl.modes**2).sum(axis=0)
    return math.log(mean_a) - 0.5 * float(kl.weights @ var) / float(kl.weights.sum())


@dataclass(frozen=True)
class CoefficientExpansion:
    """Coefficient fields ``(n_a, n_nodes)`` with respect to the normalized basis."""

    fields: np.ndarray = field(repr=False)
    basis: GpcBasis

    @property
    def n_a(self) -> int:
        return self.fields.shape[0]


def lognormal_coefficients(kl: KLExpansion, basis_a: GpcBasis) -> CoefficientExpansion:
    """Hermite chaos coefficients of ``exp(g0 + sum_j g_j xi_j)``.

    The coefficient of the normalized multi-index ``alpha`` is
    ``exp(g0 + |g|^2/2) prod_j g_j^alpha_j / sqrt(alpha_j!)``.
    """
    if basis_a.family != HERMITE:
        raise ValueError("lognormal expansion requires the Hermite family")
    if basis_a.m_xi != kl.m_xi:
        raise ValueError("basis and KL expansion disagree on m_xi")
    g = kl.modes
    mean = np.exp(kl.g0 + 0.5 * (g**2).sum(axis=0))
    fac = np.array([math.sqrt(math.factorial(a)) for a in range(basis_a.degree + 1)])
    fields = np.empty((basis_a.size, g.shape[1]))
    for ell, alpha in enumerate(basis_a.indices):
        term = mean.copy()
        for j, a in enumerate(alpha):
            if a:
                term *= g[j] ** a / fac[a]
        fields[ell] = term
    return CoefficientExpansion(fields, basis_a)


def linear_coefficients(kl: KLExpansion, mean_field, basis_a: GpcBasis | None = None) -> CoefficientExpansion:
    """Fields ``E_1 = mean``, ``E_{l+1} = g_l`` of ``E_1 + sum_l E_{l+1} xi_l``.

    The returned fields are rescaled to the degree-1 normalized Legendre
    basis (``xi = psi / sqrt(3)``), so they can be used as operator
    coefficients directly.
    """
    mean_field = np.asarray(mean_field, dtype=float)
    m = kl.m_xi
    if basis_a is None:
        basis_a = GpcBasis.create(LEGENDRE, max(m, 1), 1 if m else 0)
    if basis_a.family != LEGENDRE:
        raise ValueError("linear expansion is paired with the Legendre family")
    fields = np.zeros((m + 1, mean_field.size))
    fields[0] = mean_field
    if m:
        fields[1 : m + 1] = kl.modes / math.sqrt(3.0)
    return CoefficientExpansion(fields, basis_a)


def raw_linear_fields(expansion: CoefficientExpansion) -> np.ndarray:
    """Undo the Legendre normalization: fields ``E_l`` against raw ``xi``."""
    out = expansion.fields.copy()
    out[1:] *= math.sqrt(3.0)
    return out
