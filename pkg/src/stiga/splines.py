"""Univariate B-spline bases on open knot vectors.

Bases are evaluated with the Cox-de Boor recursion (values and first
derivatives).  Restricted variants strip the degrees of freedom that carry
the homogeneous boundary condition (both interval ends, for the spatial
factors) or the zero initial condition (left end only, for the temporal
factor).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "KnotVector",
    "Basis1D",
    "make_open_uniform",
    "right_endpoint_trace",
]


class KnotVectorError(ValueError):
    """Raised for knot vectors violating the open/quasi-uniform contract."""


@dataclass(frozen=True, eq=False)
class KnotVector:
    """Open, quasi-uniform knot vector on [0, 1] with simple interior knots.

    Parameters
    ----------
    knots : array_like
        Non-decreasing knot sequence in [0, 1]; the first and last knot must
        repeat ``degree + 1`` times.
    degree : int
        Polynomial degree of the associated B-spline basis.
    alpha : float, optional
        Quasi-uniformity ratio: every nonempty span must be at least
        ``alpha`` times as long as the largest one.
    """

    knots: np.ndarray
    degree: int
    alpha: float = 0.5

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        self._validate()

    def _validate(self):
        q, knots = self.degree, self.knots
        if q < 0:
            raise KnotVectorError("degree must be non-negative")
        if not 0.0 < self.alpha < 1.0:
            raise KnotVectorError("quasi-uniformity ratio must lie in (0, 1)")
        if knots.ndim != 1 or len(knots) < q + 2:
            raise KnotVectorError("need at least degree + 2 knots")
        if np.any(np.diff(knots) < 0):
            raise KnotVectorError("knots must be non-decreasing")
        if knots[0] != 0.0 or knots[-1] != 1.0:
            raise KnotVectorError("knot vector must span [0, 1]")
        if np.any(knots[: q + 1] != 0.0) or np.any(knots[-(q + 1):] != 1.0):
            raise KnotVectorError(
                "not an open knot vector: end knots must repeat degree + 1 times"
            )
        interior = knots[(knots > 0.0) & (knots < 1.0)]
        if interior.size and np.unique(interior).size != interior.size:
            raise KnotVectorError("interior knots must be simple (maximum regularity)")
        lengths = self.span_lengths
        if lengths.size and lengths.min() < self.alpha * lengths.max() - 1e-12:
            raise KnotVectorError(
                f"knot spans violate quasi-uniformity with ratio {self.alpha}"
            )

    @property
    def n(self) -> int:
        """Number of basis functions."""
        return len(self.knots) - self.degree - 1

    @property
    def breakpoints(self) -> np.ndarray:
        return np.unique(self.knots)

    @property
    def spans(self) -> np.ndarray:
        """Nonempty spans as an array of (left, right) rows."""
        bp = self.breakpoints
        return np.column_stack([bp[:-1], bp[1:]])

    @property
    def num_spans(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def span_lengths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def h(self) -> float:
        """Mesh size (largest span length)."""
        return float(self.span_lengths.max())


def make_open_uniform(degree: int, elements: int, alpha: float = 0.5) -> KnotVector:
    """Open knot vector with ``elements`` uniform spans on [0, 1]."""
    if degree < 1:
        raise KnotVectorError("degree must be at least 1")
    if elements < 1:
        raise KnotVectorError("need at least one element")
    interior = np.arange(1, elements) / elements
    knots = np.concatenate([
        np.zeros(degree + 1),
        interior,
        np.ones(degree + 1),
    ])
    return KnotVector(knots, degree, alpha=alpha)


RESTRICTIONS = ("none", "zero_ends", "zero_start")


@dataclass(frozen=True, eq=False)
class Basis1D:
    """B-spline basis, optionally with constrained end functions removed.

    ``restriction`` is one of ``"none"``, ``"zero_ends"`` (both end functions
    dropped; spatial factor spaces) or ``"zero_start"`` (first function
    dropped; temporal factor space).
    """

    knot_vector: KnotVector
    restriction: str = "none"

    def __post_init__(self):
        if self.restriction not in RESTRICTIONS:
            raise ValueError(f"unknown restriction {self.restriction!r}")
        if self.active_count < 1:
            raise ValueError("restriction leaves no active basis functions")

    @property
    def degree(self) -> int:
        return self.knot_vector.degree

    @property
    def active_count(self) -> int:
        """Dimension of the restricted space."""
        n = self.knot_vector.n
        if self.restriction == "zero_ends":
            return n - 2
        if self.restriction == "zero_start":
            return n - 1
        return n

    @property
    def active_start(self) -> int:
        """Index of the first unconstrained basis function."""
        return 0 if self.restriction == "none" else 1

    def evaluate(self, z: float):
        """Values and first derivatives of the nonzero functions at ``z``.

        Returns ``(first, values, derivs)`` where ``first`` is the global
        (unrestricted) index of the first of the ``degree + 1`` possibly
        nonzero functions.
        """
        kv = self.knot_vector
        if not 0.0 <= z <= 1.0:
            raise ValueError(f"evaluation point {z} outside [0, 1]")
        span = _find_span(kv.knots, kv.degree, z)
        values, derivs = _values_and_derivs(kv.knots, kv.degree, z, span)
        return span - kv.degree, values, derivs

    def evaluate_many(self, zs: np.ndarray):
        """Vectorised :meth:`evaluate`; returns stacked arrays."""
        zs = np.asarray(zs, dtype=float)
        q = self.degree
        first = np.empty(zs.shape, dtype=int)
        values = np.empty(zs.shape + (q + 1,))
        derivs = np.empty_like(values)
        for idx, z in np.ndenumerate(zs):
            first[idx], values[idx], derivs[idx] = self.evaluate(float(z))
        return first, values, derivs

    def tabulate(self, zs: np.ndarray, restricted: bool = True):
        """Dense tables of basis values/derivatives at the points ``zs``.

        Returns ``(V, D)`` of shape ``(len(zs), N)`` where ``N`` is the
        restricted dimension (or the full one with ``restricted=False``).
        """
        zs = np.asarray(zs, dtype=float).ravel()
        n = self.knot_vector.n
        first, vals, ders = self.evaluate_many(zs)
        V = np.zeros((len(zs), n))
        D = np.zeros((len(zs), n))
        cols = first[:, None] + np.arange(self.degree + 1)[None, :]
        rows = np.repeat(np.arange(len(zs)), self.degree + 1)
        V[rows, cols.ravel()] = vals.ravel()
        D[rows, cols.ravel()] = ders.ravel()
        if restricted:
            lo = self.active_start
            return V[:, lo:lo + self.active_count], D[:, lo:lo + self.active_count]
        return V, D


def right_endpoint_trace(basis: Basis1D) -> np.ndarray:
    """Values of all unrestricted functions at the right interval end.

    For an open knot vector this is the last canonical unit vector, which the
    time-pencil factorization relies on.
    """
    kv = basis.knot_vector
    first, values, _ = basis.evaluate(1.0)
    trace = np.zeros(kv.n)
    trace[first:first + kv.degree + 1] = values
    return trace


def _find_span(knots: np.ndarray, q: int, z: float) -> int:
    """Index i with knots[i] <= z < knots[i+1], right-closed at z == 1."""
    n = len(knots) - q - 1
    if z >= knots[n]:
        return n - 1
    if z <= knots[q]:
        return q
    lo, hi = q, n
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if z < knots[mid]:
            hi = mid
        else:
            lo = mid
    return lo


def _values_and_derivs(knots: np.ndarray, q: int, z: float, span: int):
    """Cox-de Boor triangle; returns the q+1 nonzero values and derivatives."""
    values = np.ones(q + 1)
    # Degree-(q-1) values feeding the derivative formula: for q == 1 they are
    # the single degree-0 indicator; for q >= 2 they are captured at stage q-1.
    lower = np.ones(max(q, 1))
    left = np.empty(q)
    right = np.empty(q)
    for j in range(1, q + 1):
        left[j - 1] = z - knots[span + 1 - j]
        right[j - 1] = knots[span + j] - z
        saved = 0.0
        for r in range(j):
            denom = right[r] + left[j - 1 - r]
            temp = values[r] / denom if denom != 0.0 else 0.0  # 0/0 := 0
            values[r] = saved + right[r] * temp
            saved = left[j - 1 - r] * temp
        values[j] = saved
        if j == q - 1:
            lower = values[:q].copy()

    derivs = np.zeros(q + 1)
    if q >= 1:
        for j in range(q + 1):
            g = span - q + j  # global index of this function
            acc = 0.0
            if j >= 1:
                den = knots[g + q] - knots[g]
                if den != 0.0:
                    acc += lower[j - 1] / den
            if j <= q - 1:
                den = knots[g + q + 1] - knots[g + 1]
                if den != 0.0:
                    acc -= lower[j] / den
            derivs[j] = q * acc
    return values, derivs
