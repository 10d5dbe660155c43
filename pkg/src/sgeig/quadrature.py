"""Gauss rules and Smolyak sparse grids on probability measures.

Weights are normalized to sum to one, so ``integrate`` returns
expectations directly.
"""
from __future__ import annotations

import itertools
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss

from .gpc import FAMILIES, HERMITE, LEGENDRE


@dataclass(frozen=True)
class Rule1D:
    nodes: np.ndarray
    weights: np.ndarray


def _symmetrized(x: np.ndarray, w: np.ndarray) -> Rule1D:
    # both families have symmetric rules; enforce it so the centre node is exactly 0
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return Rule1D(x, w / w.sum())


def gauss_hermite(n: int) -> Rule1D:
    """``n``-point Gauss rule for the standard Gaussian measure."""
    if n < 1:
        raise ValueError("need at least one node")
    x, w = hermegauss(n)
    return _symmetrized(x, w)


def gauss_legendre(n: int) -> Rule1D:
    """``n``-point Gauss rule for the uniform measure on [-1, 1]."""
    if n < 1:
        raise ValueError("need at least one node")
    x, w = leggauss(n)
    return _symmetrized(x, w)


def gauss_rule(family: str, n: int) -> Rule1D:
    if family == HERMITE:
        return gauss_hermite(n)
    if family == LEGENDRE:
        return gauss_legendre(n)
    raise ValueError(f"unsupported family {family!r}")


@dataclass(frozen=True)
class SparseGrid:
    """Quadrature points ``(n_q, m_xi)`` with weights that may be negative."""

    points: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    level: int
    family: str

    @property
    def size(self) -> int:
        return self.weights.size


def tensor_grid(family: str, m_xi: int, n: int) -> SparseGrid:
    """Full tensor-product Gauss grid with ``n`` nodes per variable."""
    rule = gauss_rule(family, n)
    pts = np.array(list(itertools.product(rule.nodes, repeat=m_xi))).reshape(-1, m_xi)
    wts = np.prod(np.array(list(itertools.product(rule.weights, repeat=m_xi))).reshape(-1, m_xi), axis=1)
    return SparseGrid(pts, wts, n, family)


def smolyak(family: str, m_xi: int, level: int, tol: float = 1e-12) -> SparseGrid:
    """Smolyak combination of Gauss rules with ``i`` nodes at 1D level ``i``.

    Multi-indices satisfy ``d <= |i| <= d + level`` with ``d = m_xi``.
    Coincident points are merged by summing their weights.
    """
    if family not in FAMILIES:
        raise ValueError(f"unsupported family {family!r}")
    if m_xi < 1 or level < 0:
        raise ValueError("need m_xi >= 1 and level >= 0")
    d, w = m_xi, level
    rules = {i: gauss_rule(family, i) for i in range(1, w + 2)}
    acc: dict[tuple, list] = {}
    for idx in itertools.product(range(1, w + 2), repeat=d):
        s = sum(idx)
        if not d <= s <= d + w:
            continue
        coef = (-1) ** (d + w - s) * math.comb(d - 1, d + w - s)
        for combo in itertools.product(*(range(i) for i in idx)):
            pt = tuple(rules[i].nodes[c] for i, c in zip(idx, combo))
            wt = coef * math.prod(rules[i].weights[c] for i, c in zip(idx, combo))
            key = tuple(round(v / tol) for v in pt)
            if key in acc:
                acc[key][1] += wt
            else:
                acc[key] = [pt, wt]
    items = sorted(acc.values(), key=lambda e: e[0])
    pts = np.array([e[0] for e in items], dtype=float).reshape(-1, m_xi)
    wts = np.array([e[1] for e in items], dtype=float)
    return SparseGrid(pts, wts, level, family)


def integrate(grid: SparseGrid, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """``sum_q f(xi_q) w_q`` for a pointwise function ``f``."""
    vals = np.array([np.asarray(f(x), dtype=float) for x in grid.points])
    return np.tensordot(grid.weights, vals, axes=1)
