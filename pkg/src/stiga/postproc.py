"""Error norms against exact solutions and empirical convergence orders.

Errors are measured in L2(0,T; L2) and in the L2(0,T; H1_0) seminorm by
tensor Gauss quadrature with ``degree + 2`` points per span per direction
(oversampled relative to assembly, so superconvergence effects cannot hide
quadrature error).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from . import assembly
from .discretize import Discretization
from .quadrature import element_rule

__all__ = ["ErrorRecord", "error_norms", "function_norms", "observed_order",
           "project_l2"]


@dataclass
class ErrorRecord:
    """One row of a study table."""

    problem: str
    degree: int
    inv_h: int
    n_dof: int
    error_l2l2: float | None = None
    error_l2h1: float | None = None
    picard: int | None = None
    gmres_max: int | None = None
    seconds: float | None = None

    @property
    def h(self) -> float:
        return 1.0 / self.inv_h


def _error_grid(disc: Discretization, npts: int):
    """Tensor quadrature grid over the parametric box, direction 1 fastest."""
    rules = [element_rule(b.knot_vector, npts) for b in disc.space_bases]
    pts_1d = [r.flat_points for r in rules]
    wts_1d = [r.flat_weights for r in rules]
    grids_w = np.meshgrid(*wts_1d[::-1], indexing="ij")
    w = np.ones_like(grids_w[0])
    for g in grids_w:
        w = w * g
    grids_p = np.meshgrid(*pts_1d[::-1], indexing="ij")
    zeta = np.column_stack([g.ravel() for g in grids_p[::-1]])
    return pts_1d, zeta, w.ravel()


def error_norms(u: np.ndarray, disc: Discretization, npts: int | None = None):
    """L2(0,T;L2) and L2(0,T;H1_0) errors of a coefficient vector.

    Requires a manufactured problem; returns ``(e_l2l2, e_l2h1)``.
    """
    spec = disc.problem
    if not spec.has_exact:
        raise ValueError(f"problem {spec.name!r} has no exact solution")
    return _space_time_norms(u, disc, npts, spec.exact)


def function_norms(u: np.ndarray, disc: Discretization, npts: int | None = None):
    """Norms of the discrete function itself (exact solution taken as zero)."""
    return _space_time_norms(u, disc, npts, None)


def _space_time_norms(u, disc: Discretization, npts, exact):
    npts = npts if npts is not None else disc.degree + 2
    T = disc.final_time
    pts_1d, zeta, w_space = _error_grid(disc, npts)
    x, _, det, inv_t = disc.geometry.evaluate(zeta)
    w_space = w_space * det

    value_mat = assembly.spatial_value_matrix(disc.space_bases, pts_1d)
    grad_mats = assembly.spatial_gradient_matrices(disc.space_bases, pts_1d)

    rule_t = element_rule(disc.time_basis.knot_vector, npts)
    taus = rule_t.flat_points
    w_time = T * rule_t.flat_weights
    tvals, _ = disc.time_basis.tabulate(taus, restricted=True)

    U = np.asarray(u, dtype=float).reshape(disc.n_time, disc.n_space)
    coef_by_time = U.T @ tvals.T        # (N_s, n time quad points)

    vals_grid = value_mat @ coef_by_time            # (nqx, nqt)
    grads_grid = [g @ coef_by_time for g in grad_mats]

    d = disc.geometry.dim
    e_l2 = 0.0
    e_h1 = 0.0
    for m, tau in enumerate(taus):
        t = float(T * tau)
        diff = vals_grid[:, m]
        if exact is not None:
            diff = diff - exact.value(x, t)
        e_l2 += w_time[m] * np.sum(w_space * diff ** 2)
        gref = [grads_grid[k][:, m] for k in range(d)]
        gphys = [sum(inv_t[:, i, k] * gref[k] for k in range(d)) for i in range(d)]
        if exact is not None:
            gex = exact.gradient(x, t)
            gphys = [gphys[i] - gex[:, i] for i in range(d)]
        e_h1 += w_time[m] * np.sum(w_space * sum(gp ** 2 for gp in gphys))
    return float(np.sqrt(e_l2)), float(np.sqrt(e_h1))


def observed_order(e_coarse: float, e_fine: float) -> float:
    """Empirical order between errors on meshes refined by a factor of 2."""
    if e_coarse <= 0.0 or e_fine <= 0.0:
        raise ValueError("orders are defined for positive errors only")
    return float(np.log2(e_coarse / e_fine))


def project_l2(disc: Discretization, value_fn) -> np.ndarray:
    """Space-time L2 projection of a function onto the discrete space.

    Used as the quasi-best approximation reference; exact for functions that
    already lie in the space.
    """
    rhs = assembly.assemble_rhs_pointwise(
        lambda X, t: value_fn(X, t), disc.space_bases, disc.time_basis,
        disc.geometry, disc.space_rules, disc.time_rule, disc.final_time)
    time_mass = assembly.assemble_time(
        disc.time_basis, np.ones_like(disc.time_rule.flat_points),
        disc.time_rule, disc.final_time).mass
    B = rhs.reshape(disc.n_time, disc.n_space)
    lu = spla.splu(disc.space_mass.tocsc())
    C = np.linalg.solve(time_mass, B)       # temporal factor
    C = lu.solve(C.T).T                      # spatial factor
    return C.ravel()
