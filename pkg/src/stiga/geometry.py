"""Analytic single-patch parametrizations of the benchmark domains.

The space-time cylinder is parameterized by a spatial map composed with the
affine time scaling ``t = T * tau``; only the spatial map is nontrivial and
is represented here by closed-form point and Jacobian evaluators.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

__all__ = ["Parametrization", "GeometryError", "builtin_domain", "eval_geometry"]

DOMAIN_NAMES = (
    "unit_interval",
    "unit_square",
    "unit_cube",
    "quarter_annulus",
    "thick_ring",
    "igloo_substitute",
)

# The substitute shell avoids the polar singularity by stopping the
# elevation sweep at 90% of the quarter turn.
_SHELL_CAP = 0.9


class GeometryError(RuntimeError):
    """Raised when a parametrization degenerates at an evaluation point."""


@dataclass(frozen=True)
class Parametrization:
    """Closed-form spatial map from the unit box to the physical domain."""

    name: str
    dim: int
    map_fn: Callable[[np.ndarray], np.ndarray]
    jac_fn: Callable[[np.ndarray], np.ndarray]
    final_time: float = 1.0

    def with_final_time(self, T: float) -> "Parametrization":
        if T <= 0:
            raise GeometryError("final time must be positive")
        return replace(self, final_time=T)

    def evaluate(self, zeta: np.ndarray):
        """Batch evaluation at parametric points of shape ``(m, dim)``.

        Returns ``(x, jac, det, inv_t)`` with the physical points, Jacobians,
        their determinants, and inverse-transpose Jacobians.
        """
        zeta = np.atleast_2d(np.asarray(zeta, dtype=float))
        if zeta.shape[1] != self.dim:
            raise GeometryError(
                f"expected points of dimension {self.dim}, got {zeta.shape[1]}"
            )
        x = self.map_fn(zeta)
        jac = self.jac_fn(zeta)
        det = np.linalg.det(jac)
        scale = np.abs(jac).sum(axis=(1, 2))
        if np.any(np.abs(det) <= 1e-14 * scale):
            raise GeometryError(f"singular Jacobian in domain {self.name!r}")
        if np.any(det <= 0.0):
            raise GeometryError(f"orientation-reversing Jacobian in {self.name!r}")
        inv_t = np.linalg.inv(jac).transpose(0, 2, 1)
        return x, jac, det, inv_t


def eval_geometry(p: Parametrization, zeta) -> tuple:
    """Single-point map evaluation: ``(x, J, det J, J^-T)``."""
    zeta = np.asarray(zeta, dtype=float).reshape(1, -1)
    if np.any(zeta < 0.0) or np.any(zeta > 1.0):
        raise GeometryError("parametric point outside the closed unit box")
    x, jac, det, inv_t = p.evaluate(zeta)
    return x[0], jac[0], float(det[0]), inv_t[0]


def builtin_domain(name: str, final_time: float = 1.0) -> Parametrization:
    """One of the benchmark domains by name (see ``DOMAIN_NAMES``)."""
    try:
        dim, map_fn, jac_fn = _BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown domain {name!r}; choose from {DOMAIN_NAMES}")
    p = Parametrization(name=name, dim=dim, map_fn=map_fn, jac_fn=jac_fn)
    return p.with_final_time(final_time)


def _identity_map(z):
    return np.array(z, copy=True)


def _identity_jac(z):
    m, d = z.shape
    return np.broadcast_to(np.eye(d), (m, d, d)).copy()


def _annulus_map(z):
    r = 1.0 + z[:, 0]
    th = 0.5 * np.pi * z[:, 1]
    return np.column_stack([r * np.cos(th), r * np.sin(th)])


def _annulus_jac(z):
    r = 1.0 + z[:, 0]
    th = 0.5 * np.pi * z[:, 1]
    c, s = np.cos(th), np.sin(th)
    jac = np.empty((len(z), 2, 2))
    jac[:, 0, 0] = c
    jac[:, 0, 1] = -0.5 * np.pi * r * s
    jac[:, 1, 0] = s
    jac[:, 1, 1] = 0.5 * np.pi * r * c
    return jac


def _thick_ring_map(z):
    xy = _annulus_map(z[:, :2])
    return np.column_stack([xy, z[:, 2]])


def _thick_ring_jac(z):
    jac = np.zeros((len(z), 3, 3))
    jac[:, :2, :2] = _annulus_jac(z[:, :2])
    jac[:, 2, 2] = 1.0
    return jac


def _shell_angles(z):
    r = 1.0 + z[:, 0]
    phi = 0.5 * np.pi * z[:, 1]
    theta = 0.5 * np.pi * _SHELL_CAP * z[:, 2]
    return r, phi, theta


def _shell_map(z):
    r, phi, theta = _shell_angles(z)
    ct = np.cos(theta)
    return np.column_stack([r * np.cos(phi) * ct, r * np.sin(phi) * ct, r * np.sin(theta)])


def _shell_jac(z):
    r, phi, theta = _shell_angles(z)
    cp, sp = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    dphi = 0.5 * np.pi
    dtheta = 0.5 * np.pi * _SHELL_CAP
    jac = np.empty((len(z), 3, 3))
    jac[:, 0, 0] = cp * ct
    jac[:, 1, 0] = sp * ct
    jac[:, 2, 0] = st
    jac[:, 0, 1] = -dphi * r * sp * ct
    jac[:, 1, 1] = dphi * r * cp * ct
    jac[:, 2, 1] = 0.0
    jac[:, 0, 2] = -dtheta * r * cp * st
    jac[:, 1, 2] = -dtheta * r * sp * st
    jac[:, 2, 2] = dtheta * r * ct
    return jac


_BUILDERS = {
    "unit_interval": (1, _identity_map, _identity_jac),
    "unit_square": (2, _identity_map, _identity_jac),
    "unit_cube": (3, _identity_map, _identity_jac),
    "quarter_annulus": (2, _annulus_map, _annulus_jac),
    "thick_ring": (3, _thick_ring_map, _thick_ring_jac),
    "igloo_substitute": (3, _shell_map, _shell_jac),
}
