"""Benchmark problem definitions.

Each problem bundles the nonlocal diffusion coefficient with its bounds, the
forcing (as a sum of space/time-separable terms), and, for the manufactured
cases, the exact solution with hand-coded derivatives and the closed-form
time profile of the mean functional.

Both manufactured solutions factor as (spatial profile) * sin(t), so the mean
functional is c * sin(t) where c is the spatial profile integrated over the
domain; c is computed once per problem by high-order quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .geometry import Parametrization, builtin_domain
from .quadrature import element_rule
from .splines import make_open_uniform

__all__ = ["ProblemSpec", "ExactSolution", "builtin_problem", "eval_forcing",
           "PROBLEM_NAMES"]

PROBLEM_NAMES = ("annulus2d", "thickring3d", "igloo_f1")


@dataclass(frozen=True)
class ExactSolution:
    """Closed-form solution with analytic derivatives.

    All evaluators take points of shape ``(m, d)`` and a scalar time.
    """

    value: Callable[[np.ndarray, float], np.ndarray]
    gradient: Callable[[np.ndarray, float], np.ndarray]
    laplacian: Callable[[np.ndarray, float], np.ndarray]
    time_derivative: Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class ProblemSpec:
    """Full description of one benchmark configuration."""

    name: str
    domain: str
    diffusion: Callable[[np.ndarray], np.ndarray]
    diffusion_bounds: tuple
    forcing_terms: tuple
    exact: ExactSolution | None = None
    mean_coefficient: float | None = None   # l(u)(t) = mean_coefficient * sin(t)

    @property
    def has_exact(self) -> bool:
        return self.exact is not None

    def mean_exact(self, t):
        """Closed-form trajectory of the mean functional l(u)(t)."""
        if self.mean_coefficient is None:
            raise ValueError(f"problem {self.name!r} has no manufactured solution")
        return self.mean_coefficient * np.sin(t)

    def forcing(self, points: np.ndarray, t: float) -> np.ndarray:
        """Pointwise forcing assembled from the separable terms."""
        points = np.atleast_2d(points)
        out = np.zeros(len(points))
        for g, s in self.forcing_terms:
            gv = g(points) if callable(g) else float(g)
            sv = s(np.asarray(t)) if callable(s) else float(s)
            out = out + gv * sv
        return out


def eval_forcing(spec: ProblemSpec, points: np.ndarray, t: float) -> np.ndarray:
    """Forcing recovered from the governing equation and the exact solution.

    Only defined for manufactured problems; serves as an independent check of
    the stored separable forcing terms.
    """
    if not spec.has_exact:
        raise ValueError(
            f"problem {spec.name!r} has no exact solution to differentiate")
    points = np.atleast_2d(points)
    a_val = float(spec.diffusion(np.asarray(spec.mean_exact(t))))
    return (spec.exact.time_derivative(points, t)
            - a_val * spec.exact.laplacian(points, t))


def _integrate_over_domain(g, geo: Parametrization, elements: int = 16,
                           npts: int = 8) -> float:
    """High-order tensor Gauss quadrature of g over the physical domain."""
    kv = make_open_uniform(1, elements)
    rule = element_rule(kv, npts)
    pts, wts = rule.flat_points, rule.flat_weights
    grids = np.meshgrid(*([pts] * geo.dim), indexing="ij")
    zeta = np.column_stack([a.ravel() for a in grids[::-1]])
    wgrid = np.meshgrid(*([wts] * geo.dim), indexing="ij")
    w = np.ones(len(zeta))
    for a in wgrid:
        w = w * a.ravel()
    x, _, det, _ = geo.evaluate(zeta)
    return float(np.sum(w * det * g(x)))


# --- quarter annulus, 2D ----------------------------------------------------
# Spatial profile (x^2+y^2-1)(x^2+y^2-4) x y; vanishes on both circles and on
# the coordinate axes bounding the quarter.

def _ann_radial(s):
    return (s - 1.0) * (s - 4.0)


def _ann_profile(p):
    x, y = p[:, 0], p[:, 1]
    s = x * x + y * y
    return _ann_radial(s) * x * y


def _ann_profile_grad(p):
    x, y = p[:, 0], p[:, 1]
    s = x * x + y * y
    P = _ann_radial(s)
    gx = 2.0 * x * x * y * (2.0 * s - 5.0) + P * y
    gy = 2.0 * x * y * y * (2.0 * s - 5.0) + P * x
    return np.column_stack([gx, gy])


def _ann_profile_lap(p):
    x, y = p[:, 0], p[:, 1]
    s = x * x + y * y
    return 4.0 * x * y * (8.0 * s - 15.0)


def _ann_diffusion(l):
    return 2.0 - 1.0 / (1.0 + np.asarray(l) ** 2)


# --- thick ring, 3D ---------------------------------------------------------
# Spatial profile -(x^2+y^2-1)(x^2+y^2-4) x y^2 sin(pi z); vanishes on the
# cylindrical walls, the two axial planes of the quarter, and both lids.

def _ring_planar(p):
    x, y = p[:, 0], p[:, 1]
    s = x * x + y * y
    return -_ann_radial(s) * x * y * y


def _ring_planar_grad(p):
    x, y = p[:, 0], p[:, 1]
    s = x * x + y * y
    P = _ann_radial(s)
    gx = -(2.0 * x * x * y * y * (2.0 * s - 5.0) + P * y * y)
    gy = -(2.0 * x * y ** 3 * (2.0 * s - 5.0) + 2.0 * P * x * y)
    return gx, gy


def _ring_planar_lap(p):
    x, y = p[:, 0], p[:, 1]
    s = x * x + y * y
    P = _ann_radial(s)
    return -2.0 * x * (20.0 * y * y * (s - 2.0) + P)


def _ring_profile(p):
    return _ring_planar(p) * np.sin(np.pi * p[:, 2])


def _ring_profile_grad(p):
    z = p[:, 2]
    sz, cz = np.sin(np.pi * z), np.cos(np.pi * z)
    gx, gy = _ring_planar_grad(p)
    return np.column_stack([gx * sz, gy * sz, _ring_planar(p) * np.pi * cz])


def _ring_profile_lap(p):
    z = p[:, 2]
    sz = np.sin(np.pi * z)
    return (_ring_planar_lap(p) - np.pi ** 2 * _ring_planar(p)) * sz


def _ring_diffusion(l):
    return 3.0 + np.sin(np.asarray(l))


def _separable_exact(profile, profile_grad, profile_lap) -> ExactSolution:
    return ExactSolution(
        value=lambda p, t: profile(np.atleast_2d(p)) * np.sin(t),
        gradient=lambda p, t: profile_grad(np.atleast_2d(p)) * np.sin(t),
        laplacian=lambda p, t: profile_lap(np.atleast_2d(p)) * np.sin(t),
        time_derivative=lambda p, t: profile(np.atleast_2d(p)) * np.cos(t),
    )


def _manufactured_terms(profile, profile_lap, diffusion, c):
    """Forcing du/dt - a(l) Lap(u) for u = profile * sin(t), l = c sin(t)."""
    def modulated(t):
        t = np.asarray(t, dtype=float)
        return diffusion(c * np.sin(t)) * np.sin(t)

    return (
        (profile, np.cos),
        (lambda p: -profile_lap(np.atleast_2d(p)), modulated),
    )


@lru_cache(maxsize=None)
def builtin_problem(name: str) -> ProblemSpec:
    """One of the named benchmark problems (see ``PROBLEM_NAMES``)."""
    if name == "annulus2d":
        geo = builtin_domain("quarter_annulus")
        c = _integrate_over_domain(_ann_profile, geo)
        return ProblemSpec(
            name=name,
            domain="quarter_annulus",
            diffusion=_ann_diffusion,
            diffusion_bounds=(1.0, 2.0),
            forcing_terms=_manufactured_terms(
                _ann_profile, _ann_profile_lap, _ann_diffusion, c),
            exact=_separable_exact(
                _ann_profile, _ann_profile_grad, _ann_profile_lap),
            mean_coefficient=c,
        )
    if name == "thickring3d":
        geo = builtin_domain("thick_ring")
        c = _integrate_over_domain(_ring_profile, geo)
        return ProblemSpec(
            name=name,
            domain="thick_ring",
            diffusion=_ring_diffusion,
            diffusion_bounds=(2.0, 4.0),
            forcing_terms=_manufactured_terms(
                _ring_profile, _ring_profile_lap, _ring_diffusion, c),
            exact=_separable_exact(
                _ring_profile, _ring_profile_grad, _ring_profile_lap),
            mean_coefficient=c,
        )
    if name == "igloo_f1":
        return ProblemSpec(
            name=name,
            domain="igloo_substitute",
            diffusion=_ring_diffusion,
            diffusion_bounds=(2.0, 4.0),
            forcing_terms=((1.0, 1.0),),
        )
    raise ValueError(f"unknown problem {name!r}; choose from {PROBLEM_NAMES}")
