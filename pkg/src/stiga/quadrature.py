"""Gauss-Legendre quadrature per knot span and tensor-product grids."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .splines import KnotVector

__all__ = ["QuadratureRule1D", "gauss_legendre", "element_rule"]

MAX_POINTS = 12


def gauss_legendre(npts: int):
    """Nodes and weights of the ``npts``-point Gauss rule on [-1, 1].

    Exact for polynomials of degree up to ``2 * npts - 1``; weights sum to 2.
    """
    if not 1 <= npts <= MAX_POINTS:
        raise ValueError(f"point count {npts} outside [1, {MAX_POINTS}]")
    return np.polynomial.legendre.leggauss(npts)


@dataclass(frozen=True, eq=False)
class QuadratureRule1D:
    """Per-span Gauss rule on a knot vector's nonempty spans.

    ``points`` and ``weights`` have shape ``(num_spans, npts)``; ``spans``
    holds the (left, right) endpoints of each span.
    """

    points: np.ndarray
    weights: np.ndarray
    spans: np.ndarray

    @property
    def npts(self) -> int:
        return self.points.shape[1]

    @property
    def flat_points(self) -> np.ndarray:
        return self.points.ravel()

    @property
    def flat_weights(self) -> np.ndarray:
        return self.weights.ravel()


def element_rule(kv: KnotVector, npts: int) -> QuadratureRule1D:
    """Affine image of the reference Gauss rule on every nonempty span."""
    nodes, weights = gauss_legendre(npts)
    spans = kv.spans
    mid = 0.5 * (spans[:, 0] + spans[:, 1])
    half = 0.5 * (spans[:, 1] - spans[:, 0])
    pts = mid[:, None] + half[:, None] * nodes[None, :]
    wts = half[:, None] * weights[None, :]
    return QuadratureRule1D(points=pts, weights=wts, spans=spans)
