"""Binding of a problem to a concrete mesh/degree configuration.

A :class:`Discretization` owns everything the nonlinear driver needs per
configuration: bases, quadrature rules, the mapped spatial matrices, the
parametric per-direction matrices backing the preconditioner, and the load
vector.  Only the weighted temporal mass matrix changes between fixed-point
iterations and is rebuilt on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import assembly
from .geometry import Parametrization, builtin_domain
from .problems import ProblemSpec
from .quadrature import QuadratureRule1D, element_rule
from .splines import Basis1D, make_open_uniform

__all__ = ["Discretization", "discretize"]


@dataclass(eq=False)
class Discretization:
    problem: ProblemSpec
    geometry: Parametrization
    space_bases: list
    time_basis: Basis1D
    space_rules: list
    time_rule: QuadratureRule1D
    space_mass: sp.csr_matrix
    space_stiffness: sp.csr_matrix
    volume_load: np.ndarray
    param_mass_1d: list
    param_stiff_1d: list
    rhs: np.ndarray
    degree: int
    inv_h: int

    @property
    def final_time(self) -> float:
        return self.geometry.final_time

    @property
    def n_space(self) -> int:
        return self.space_mass.shape[0]

    @property
    def n_time(self) -> int:
        return self.time_basis.active_count

    @property
    def n_dof(self) -> int:
        return self.n_space * self.n_time

    @property
    def space_dims(self) -> tuple:
        return tuple(b.active_count for b in self.space_bases)

    def weight_samples(self, u: np.ndarray) -> np.ndarray:
        """Diffusion coefficient along l(u) at the time quadrature points."""
        times = self.final_time * self.time_rule.flat_points
        traj = assembly.nonlocal_trajectory(
            u, self.volume_load, self.time_basis, times, self.final_time)
        return np.asarray(self.problem.diffusion(traj), dtype=float)

    def time_matrices(self, weight_values: np.ndarray) -> assembly.TimeMatrices:
        """Temporal matrices for precomputed weight samples."""
        return assembly.assemble_time(
            self.time_basis, weight_values, self.time_rule, self.final_time)

    def operator(self, time_mats: assembly.TimeMatrices) -> assembly.SystemOperator:
        return assembly.SystemOperator(
            time_deriv=time_mats.deriv,
            time_mass=time_mats.mass,
            space_mass=self.space_mass,
            space_stiffness=self.space_stiffness,
        )


def discretize(problem: ProblemSpec, degree: int, inv_h: int,
               final_time: float = 1.0, quad_pts: int | None = None,
               geometry: Parametrization | None = None) -> Discretization:
    """Assemble all mesh-level data for one (degree, mesh size) cell.

    Space and time share the element count ``inv_h`` and the degree; the
    quadrature uses ``degree + 1`` Gauss points per span per direction unless
    overridden.
    """
    if degree < 1:
        raise ValueError("degree must be at least 1")
    if inv_h < 1:
        raise ValueError("mesh resolution must be at least 1")
    if geometry is None:
        geo = builtin_domain(problem.domain, final_time=final_time)
    else:
        geo = geometry.with_final_time(final_time)
    npts = quad_pts if quad_pts is not None else degree + 1

    kv = make_open_uniform(degree, inv_h)
    space_bases = [Basis1D(kv, "zero_ends") for _ in range(geo.dim)]
    time_basis = Basis1D(kv, "zero_start")
    space_rules = [element_rule(kv, npts) for _ in range(geo.dim)]
    time_rule = element_rule(kv, npts)

    mass, stiffness, volume_load = assembly.assemble_spatial(
        space_bases, geo, space_rules)
    param = [assembly.parametric_matrices_1d(b, r)
             for b, r in zip(space_bases, space_rules)]
    rhs = assembly.assemble_rhs(
        problem.forcing_terms, space_bases, time_basis, geo,
        space_rules, time_rule, geo.final_time)

    return Discretization(
        problem=problem,
        geometry=geo,
        space_bases=space_bases,
        time_basis=time_basis,
        space_rules=space_rules,
        time_rule=time_rule,
        space_mass=mass,
        space_stiffness=stiffness,
        volume_load=volume_load,
        param_mass_1d=[m for m, _ in param],
        param_stiff_1d=[k for _, k in param],
        rhs=rhs,
        degree=degree,
        inv_h=inv_h,
    )
