"""Preconditioned GMRES and the fast-diagonalization linear step.

Each linearized step first changes basis in time with the pencil
factorization, leaving a system whose time factor is an arrowhead; GMRES then
runs on that transformed system, preconditioned by the same operator built
from the parametric-domain spatial matrices, whose inverse action reduces to
per-eigenvalue shifted arrowhead solves between spatial eigenvector
transforms.  Right preconditioning is used throughout so the stopping test
controls the true residual of the transformed system.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import SystemOperator, _sparse_matmat, apply_operator
from .pencil import (PencilFactorization, SpatialEigen, arrowhead_matmul,
                     arrowhead_shifted_solve_many)

__all__ = [
    "Preconditioner",
    "KrylovReport",
    "build_preconditioner",
    "geometry_scaling",
    "dense_preconditioner_matrix",
    "precond_apply",
    "gmres",
    "solve_linear_step",
]


@dataclass
class KrylovReport:
    """Iteration count, relative-residual history and convergence status."""

    iterations: int
    residuals: list
    converged: bool
    true_residual: float | None = None


@dataclass(frozen=True, eq=False)
class Preconditioner:
    """Kronecker fast-diagonalization preconditioner for the transformed system.

    Applies the inverse of ``arrow x Mhat_s + I x Khat_s`` (optionally
    symmetrically rescaled by a spatial diagonal that absorbs geometry
    variation) through per-direction eigenvector transforms and batched
    shifted arrowhead solves.
    """

    arrow: np.ndarray
    spatial: SpatialEigen
    n_time: int
    dims: tuple          # active dofs per spatial direction (1, 2, ..., d)
    inv_scale: np.ndarray | None = None   # D^(-1/2), flat over space

    @property
    def n_space(self) -> int:
        return int(np.prod(self.dims))

    def apply(self, r: np.ndarray) -> np.ndarray:
        return precond_apply(self, r)


def build_preconditioner(fact: PencilFactorization, spatial: SpatialEigen,
                         dims, scale: np.ndarray | None = None) -> Preconditioner:
    inv_scale = None
    if scale is not None:
        if np.any(scale <= 0):
            raise ValueError("diagonal scaling must be strictly positive")
        inv_scale = 1.0 / np.sqrt(scale)
    return Preconditioner(arrow=fact.arrow, spatial=spatial, n_time=fact.n,
                          dims=tuple(dims), inv_scale=inv_scale)


def geometry_scaling(space_mass, space_stiffness, param_mass_1d, param_stiff_1d,
                     mode: str = "stiffness") -> np.ndarray | None:
    """Spatial diagonal relating the mapped matrices to the parametric ones.

    ``mode`` selects the ratio used: the stiffness diagonals, the mass
    diagonals, or their geometric mean; ``"none"`` disables scaling.
    """
    if mode == "none":
        return None
    mass_diag = kron_diag = None
    param_mass_diags = [np.diagonal(m).copy() for m in param_mass_1d]
    param_stiff_diags = [np.diagonal(k).copy() for k in param_stiff_1d]
    ref_mass = _kron_vec(param_mass_diags)
    ref_stiff = None
    for i in range(len(param_mass_1d)):
        parts = [param_stiff_diags[a] if a == i else param_mass_diags[a]
                 for a in range(len(param_mass_1d))]
        term = _kron_vec(parts)
        ref_stiff = term if ref_stiff is None else ref_stiff + term
    ratio_k = space_stiffness.diagonal() / ref_stiff
    if mode == "stiffness":
        return ratio_k
    ratio_m = space_mass.diagonal() / ref_mass
    if mode == "mass":
        return ratio_m
    if mode == "geometric":
        return np.sqrt(ratio_k * ratio_m)
    raise ValueError(f"unknown scaling mode {mode!r}")


def _kron_vec(parts):
    out = parts[0]
    for p in parts[1:]:
        out = np.kron(p, out)
    return out


def dense_preconditioner_matrix(arrow: np.ndarray, param_mass_1d, param_stiff_1d,
                                scale: np.ndarray | None = None) -> np.ndarray:
    """Explicitly formed preconditioner matrix, for small oracle checks only."""
    mass = param_mass_1d[0]
    for m in param_mass_1d[1:]:
        mass = np.kron(m, mass)
    stiff = None
    d = len(param_mass_1d)
    for i in range(d):
        parts = [param_stiff_1d[a] if a == i else param_mass_1d[a]
                 for a in range(d)]
        term = parts[0]
        for p in parts[1:]:
            term = np.kron(p, term)
        stiff = term if stiff is None else stiff + term
    n_t = arrow.shape[0]
    P = np.kron(arrow, mass) + np.kron(np.eye(n_t), stiff)
    if scale is not None:
        s = np.kron(np.ones(n_t), np.sqrt(scale))
        P = P * s[:, None] * s[None, :]
    return P


def _apply_along(T: np.ndarray, M: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(T, axis, -1)
    return np.moveaxis(moved @ M, -1, axis)


def precond_apply(P: Preconditioner, r: np.ndarray) -> np.ndarray:
    """Inverse action of the preconditioner on a transformed-system vector."""
    d = len(P.dims)
    shape = (P.n_time,) + tuple(P.dims[::-1])
    R = np.asarray(r, dtype=complex).reshape(shape)
    if P.inv_scale is not None:
        R = R * P.inv_scale.reshape((1,) + shape[1:])
    for i, U in enumerate(P.spatial.vectors):
        R = _apply_along(R, U, axis=d - i)
    flat = R.reshape(P.n_time, P.n_space).T          # rows: one spatial mode
    flat = arrowhead_shifted_solve_many(P.arrow, P.spatial.combined, flat)
    R = flat.T.reshape(shape)
    for i, U in enumerate(P.spatial.vectors):
        R = _apply_along(R, U.T, axis=d - i)
    if P.inv_scale is not None:
        R = R * P.inv_scale.reshape((1,) + shape[1:])
    return R.ravel()


def gmres(apply_A, b: np.ndarray, precond=None, tol: float = 1e-12,
          maxit: int = 200):
    """Right-preconditioned full GMRES (no restarts).

    Returns ``(x, KrylovReport)``.  Convergence is declared when the
    recursively updated residual norm drops below ``tol * ||b||``; with right
    preconditioning this is the residual of the original system.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    b = np.asarray(b)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), KrylovReport(0, [0.0], True, 0.0)

    dtype = np.result_type(b.dtype, np.float64)
    basis = [np.asarray(b, dtype=dtype) / bnorm]
    H = np.zeros((maxit + 1, maxit), dtype=dtype)
    cs = np.zeros(maxit, dtype=dtype)
    sn = np.zeros(maxit, dtype=dtype)
    g = np.zeros(maxit + 1, dtype=dtype)
    g[0] = bnorm
    residuals = [1.0]
    converged = False
    k = 0

    for k in range(maxit):
        z = precond(basis[k]) if precond is not None else basis[k]
        w = np.asarray(apply_A(z), dtype=dtype)
        for i in range(k + 1):
            hik = np.vdot(basis[i], w)
            H[i, k] = hik
            w -= hik * basis[i]
        hnext = np.linalg.norm(w)
        H[k + 1, k] = hnext

        for i in range(k):
            t = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
            H[i + 1, k] = -np.conj(sn[i]) * H[i, k] + np.conj(cs[i]) * H[i + 1, k]
            H[i, k] = t
        denom = np.sqrt(np.abs(H[k, k]) ** 2 + np.abs(hnext) ** 2)
        if denom == 0.0:
            cs[k], sn[k] = 1.0, 0.0
        else:
            cs[k] = np.conj(H[k, k]) / denom
            sn[k] = np.conj(H[k + 1, k]) / denom
        H[k, k] = cs[k] * H[k, k] + sn[k] * H[k + 1, k]
        H[k + 1, k] = 0.0
        g[k + 1] = -np.conj(sn[k]) * g[k]
        g[k] = cs[k] * g[k]

        rel = float(np.abs(g[k + 1]) / bnorm)
        residuals.append(rel)
        if rel <= tol:
            converged = True
            k += 1
            break
        if hnext <= 1e-300:
            # Exact breakdown: the Krylov space is invariant.
            converged = rel <= tol
            k += 1
            break
        basis.append(w / hnext)
    else:
        k = maxit

    y = np.zeros(k, dtype=dtype)
    for i in range(k - 1, -1, -1):
        y[i] = (g[i] - H[i, i + 1:k] @ y[i + 1:k]) / H[i, i]
    xk = basis[0] * y[0]
    for i in range(1, k):
        xk += basis[i] * y[i]
    x = precond(xk) if precond is not None else xk
    if not np.iscomplexobj(b):
        x = np.real(x)
    return x, KrylovReport(iterations=k, residuals=residuals, converged=converged)


def solve_linear_step(op: SystemOperator, fact: PencilFactorization,
                      P: Preconditioner, f: np.ndarray, tol: float,
                      maxit: int = 200):
    """One linearized solve by time-pencil change of basis plus GMRES.

    Transforms the right-hand side into the pencil basis, iterates on the
    arrowhead-in-time system with the fast-diagonalization preconditioner,
    transforms the iterate back, and verifies the true residual.
    """
    n_t, n_s = op.n_time, op.n_space
    F = np.asarray(f, dtype=float).reshape(n_t, n_s)
    fnorm = np.linalg.norm(f)
    if fnorm == 0.0:
        return np.zeros(op.n_dof), KrylovReport(0, [0.0], True, 0.0)

    f_hat = (fact.transform.conj().T @ F).ravel()

    def apply_transformed(v):
        V = v.reshape(n_t, n_s)
        mass_part = _sparse_matmat(op.space_mass, V.T).T
        stiff_part = _sparse_matmat(op.space_stiffness, V.T).T
        return (arrowhead_matmul(fact.arrow, mass_part) + stiff_part).ravel()

    u_hat, report = gmres(apply_transformed, f_hat, precond=P.apply,
                          tol=tol, maxit=maxit)
    u = np.real(fact.transform @ u_hat.reshape(n_t, n_s)).ravel()
    report.true_residual = float(
        np.linalg.norm(apply_operator(op, u) - f) / fnorm)
    return u, report
