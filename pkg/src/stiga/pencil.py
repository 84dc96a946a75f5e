"""Stable factorizations of the time pencil and the spatial 1D pencils.

The temporal derivative/mass pair ``(W, M)`` is reduced to a complex basis
that makes the mass matrix the identity and the derivative matrix an
arrowhead (nonzeros only on the diagonal, last row and last column).  The
construction splits off the rank-one boundary term of ``W``, reduces the
remaining skew-symmetric leading block with a Cholesky congruence and a
Hermitian eigensolve, and completes the basis with one mass-orthogonal
Gram-Schmidt step for the final degree of freedom.

The parametric spatial pencils are symmetric-definite and handled by plain
generalized eigendecompositions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "PencilFactorization",
    "SpatialEigen",
    "FactorizationError",
    "SingularShiftError",
    "factorize_time_pencil",
    "spatial_eigendecomposition",
    "arrowhead_shifted_solve",
    "arrowhead_shifted_solve_many",
    "arrowhead_matmul",
]


class FactorizationError(RuntimeError):
    """Raised when a factorization identity fails beyond tolerance."""


class SingularShiftError(RuntimeError):
    """Raised when a shifted arrowhead system is numerically singular."""


@dataclass(frozen=True, eq=False)
class PencilFactorization:
    """Complex basis and arrowhead form of the time pencil.

    ``transform`` holds the basis columns U with ``U* M U = I`` and
    ``U* W U = arrow``; ``arrow`` stores exact zeros off its pattern.
    """

    transform: np.ndarray
    arrow: np.ndarray
    mass: np.ndarray

    @property
    def n(self) -> int:
        return self.transform.shape[0]

    def inverse_apply(self, X: np.ndarray) -> np.ndarray:
        """Action of U^-1, computed as U* M (never by explicit inversion)."""
        return self.transform.conj().T @ (self.mass @ X)


@dataclass(frozen=True, eq=False)
class SpatialEigen:
    """Per-direction generalized eigendecompositions and the combined spectrum.

    ``combined`` lists the Kronecker-sum eigenvalues in colexicographic order
    (direction 1 fastest), matching the global dof ordering.
    """

    vectors: list
    values: list
    combined: np.ndarray


def factorize_time_pencil(W: np.ndarray, M: np.ndarray,
                          rtol: float = 1e-10) -> PencilFactorization:
    """Simultaneous reduction of the temporal pencil to identity/arrowhead."""
    W = np.asarray(W, dtype=float)
    M = np.asarray(M, dtype=float)
    n = W.shape[0]
    if W.shape != (n, n) or M.shape != (n, n):
        raise ValueError("pencil matrices must be square and of equal size")

    # Open-knot trace identity: W + W^T equals the last-dof rank-one term.
    res = W + W.T
    res[-1, -1] -= 1.0
    if np.linalg.norm(res) > 1e-12 * max(1.0, np.linalg.norm(W)):
        raise FactorizationError(
            "W + W^T does not match the endpoint rank-one structure"
        )

    skew = W.copy()
    skew[-1, -1] -= 0.5
    skew = 0.5 * (skew - skew.T)

    U = np.zeros((n, n), dtype=complex)
    diag = np.zeros(n, dtype=complex)
    if n > 1:
        try:
            L = np.linalg.cholesky(M[:-1, :-1])
        except np.linalg.LinAlgError as exc:
            raise FactorizationError("time mass matrix is not SPD") from exc
        S = scipy.linalg.solve_triangular(L, skew[:-1, :-1], lower=True)
        S = scipy.linalg.solve_triangular(L, S.T, lower=True).T
        H = 1j * S
        H = 0.5 * (H + H.conj().T)
        mu, V = np.linalg.eigh(H)
        U[:-1, :-1] = scipy.linalg.solve_triangular(L, V, lower=True, trans="T")
        diag[:-1] = -1j * mu

    # Complete with the unit vector of the last dof, M-orthogonalized against
    # the leading columns (twice, for orthogonality at working precision).
    w = np.zeros(n, dtype=complex)
    w[-1] = 1.0
    for _ in range(2):
        coeffs = U[:, :-1].conj().T @ (M @ w)
        w = w - U[:, :-1] @ coeffs
    norm2 = np.real(w.conj() @ (M @ w))
    if norm2 <= 0.0:
        raise FactorizationError("mass-orthogonal completion degenerated")
    U[:, -1] = w / np.sqrt(norm2)

    full = U.conj().T @ (W @ U)
    arrow = np.zeros_like(full)
    np.fill_diagonal(arrow, np.diagonal(full))
    arrow[-1, :] = full[-1, :]
    arrow[:, -1] = full[:, -1]
    if n > 1:
        idx = np.arange(n - 1)
        arrow[idx, idx] = diag[:-1]  # purely imaginary by construction

    mass_res = U.conj().T @ (M @ U) - np.eye(n)
    if np.linalg.norm(mass_res) > rtol * np.linalg.norm(M):
        raise FactorizationError("mass orthonormality lost beyond tolerance")
    if np.linalg.norm(full - arrow) > rtol * max(1e-300, np.linalg.norm(W)):
        raise FactorizationError("arrowhead reduction lost beyond tolerance")

    return PencilFactorization(transform=U, arrow=arrow, mass=M.copy())


def spatial_eigendecomposition(mass_1d, stiff_1d, rtol: float = 1e-11) -> SpatialEigen:
    """Generalized eigendecompositions of the per-direction spatial pencils."""
    vectors, values = [], []
    for Mh, Kh in zip(mass_1d, stiff_1d):
        try:
            lam, vec = scipy.linalg.eigh(Kh, Mh)
        except scipy.linalg.LinAlgError as exc:
            raise FactorizationError("spatial eigendecomposition failed") from exc
        ortho = vec.T @ Mh @ vec - np.eye(len(lam))
        if np.linalg.norm(ortho) > rtol * max(1.0, len(lam)):
            raise FactorizationError("spatial eigenvectors lost M-orthonormality")
        vectors.append(vec)
        values.append(lam)
    grids = np.meshgrid(*values[::-1], indexing="ij")
    combined = np.zeros(1) if not grids else sum(grids).ravel()
    return SpatialEigen(vectors=vectors, values=values, combined=combined)


def _arrow_parts(arrow: np.ndarray):
    d = np.diagonal(arrow)[:-1]
    return d, arrow[-1, :-1], arrow[:-1, -1], arrow[-1, -1]


def arrowhead_shifted_solve(arrow: np.ndarray, lam: float,
                            r: np.ndarray) -> np.ndarray:
    """Solve ``(arrow + lam I) s = r`` in linear time."""
    return arrowhead_shifted_solve_many(arrow, np.array([lam]),
                                        np.asarray(r)[None, :])[0]


def arrowhead_shifted_solve_many(arrow: np.ndarray, lams: np.ndarray,
                                 R: np.ndarray) -> np.ndarray:
    """Batched shifted arrowhead solves, one shift per row of ``R``.

    Eliminates the leading diagonal block, solves the scalar Schur complement
    for the last unknown, and back-substitutes; O(len(lams) * n) total.
    """
    n = arrow.shape[0]
    lams = np.asarray(lams)
    R = np.asarray(R, dtype=complex)
    if R.shape != (len(lams), n):
        raise ValueError("shift/right-hand-side shapes do not match")
    scale = np.abs(arrow).max() + np.abs(lams).max() + 1e-300
    if n == 1:
        piv = arrow[0, 0] + lams
        _check_pivots(piv, scale)
        return R / piv[:, None]

    d, row, col, corner = _arrow_parts(arrow)
    D = d[None, :] + lams[:, None]
    _check_pivots(D, scale)
    T = R[:, :-1] / D
    schur = corner + lams - ((row * col)[None, :] / D).sum(axis=1)
    _check_pivots(schur, scale)
    s_last = (R[:, -1] - T @ row) / schur
    S = np.empty_like(R)
    S[:, :-1] = T - (col[None, :] / D) * s_last[:, None]
    S[:, -1] = s_last
    return S


def _check_pivots(piv: np.ndarray, scale: float):
    if np.any(np.abs(piv) <= 1e-14 * scale):
        raise SingularShiftError("near-singular shifted arrowhead pivot")


def arrowhead_matmul(arrow: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Product ``arrow @ X`` exploiting the arrowhead pattern, O(n * cols)."""
    n = arrow.shape[0]
    if n == 1:
        return arrow[0, 0] * X
    d, row, col, _ = _arrow_parts(arrow)
    out = np.empty(X.shape, dtype=np.result_type(arrow, X))
    out[:-1] = d[:, None] * X[:-1] + col[:, None] * X[-1][None, :]
    out[-1] = arrow[-1, :] @ X
    return out
