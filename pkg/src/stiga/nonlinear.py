"""Fixed-point (Picard) driver for the nonlocal problem.

Each pass freezes the diffusion coefficient at the previous iterate, rebuilds
the weighted temporal mass matrix, the time-pencil factorization and the
preconditioner, solves the linearized system, and stops once the sup-norm
increment between consecutive iterates drops below the tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .discretize import Discretization
from .linsolve import build_preconditioner, geometry_scaling, solve_linear_step
from .pencil import factorize_time_pencil, spatial_eigendecomposition

__all__ = ["PicardConfig", "SolveReport", "picard_solve"]


@dataclass(frozen=True)
class PicardConfig:
    """Stopping and solver parameters for the fixed-point iteration."""

    increment_tol: float = 1e-10
    max_iterations: int = 50
    linear_tol: float = 1e-12
    linear_maxit: int = 200
    initial_guess: str = "zero"
    scaling: str = "mass"        # geometry-aware diagonal scaling mode

    def __post_init__(self):
        if self.increment_tol <= 0:
            raise ValueError("increment tolerance must be positive")
        if not self.linear_tol < self.increment_tol:
            raise ValueError("linear tolerance must be below the increment tolerance")
        if self.initial_guess != "zero":
            raise ValueError("only the zero initial guess is supported")


@dataclass
class SolveReport:
    """Outcome of one fixed-point solve."""

    coefficients: np.ndarray
    picard_iterations: int
    gmres_iterations: list
    increments: list
    converged: bool
    final_residual: float

    @property
    def gmres_max(self) -> int:
        return max(self.gmres_iterations) if self.gmres_iterations else 0


def picard_solve(disc: Discretization, config: PicardConfig | None = None) -> SolveReport:
    """Run the fixed-point iteration on an assembled discretization."""
    config = config or PicardConfig()
    scale = geometry_scaling(disc.space_mass, disc.space_stiffness,
                             disc.param_mass_1d, disc.param_stiff_1d,
                             mode=config.scaling)

    u = np.zeros(disc.n_dof)
    gmres_counts: list = []
    increments: list = []
    converged = False
    residual = np.inf

    for _ in range(config.max_iterations):
        weight = disc.weight_samples(u)
        time_mats = disc.time_matrices(weight)
        op = disc.operator(time_mats)
        fact = factorize_time_pencil(time_mats.deriv, time_mats.mass)
        spatial = spatial_eigendecomposition(disc.param_mass_1d,
                                             disc.param_stiff_1d)
        precond = build_preconditioner(fact, spatial, disc.space_dims,
                                       scale=scale)
        u_next, krylov = solve_linear_step(op, fact, precond, disc.rhs,
                                           tol=config.linear_tol,
                                           maxit=config.linear_maxit)
        gmres_counts.append(krylov.iterations)
        residual = krylov.true_residual
        increment = float(np.max(np.abs(u_next - u))) if disc.n_dof else 0.0
        increments.append(increment)
        u = u_next
        if not krylov.converged:
            break
        if increment <= config.increment_tol:
            converged = True
            break

    return SolveReport(
        coefficients=u,
        picard_iterations=len(gmres_counts),
        gmres_iterations=gmres_counts,
        increments=increments,
        converged=converged,
        final_residual=float(residual),
    )
