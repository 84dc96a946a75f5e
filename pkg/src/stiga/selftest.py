"""Built-in verification suite behind the ``selftest`` CLI subcommand.

Runs the dense-oracle and factorization-identity checks on small
configurations and reports one pass/fail line per check.  Independent of
pytest so it can run from an installed package.
"""

from __future__ import annotations

import numpy as np

from . import assembly, linsolve, pencil, problems
from .discretize import discretize
from .geometry import builtin_domain
from .nonlinear import PicardConfig, picard_solve
from .quadrature import element_rule
from .splines import Basis1D, make_open_uniform

__all__ = ["run_selftest"]


def _check_pencil_identities():
    worst = 0.0
    for qt in (1, 2, 3, 4):
        for elements in (1, 3, 8):
            if elements + qt - 1 < 1:
                continue
            kv = make_open_uniform(qt, elements)
            basis = Basis1D(kv, "zero_start")
            rule = element_rule(kv, qt + 1)
            tm = assembly.assemble_time(
                basis, lambda t: 3.0 + np.sin(np.sin(t)), rule, 1.0)
            fact = pencil.factorize_time_pencil(tm.deriv, tm.mass)
            U = fact.transform
            r1 = np.linalg.norm(U.conj().T @ tm.mass @ U - np.eye(fact.n))
            r2 = np.linalg.norm(U.conj().T @ tm.deriv @ U - fact.arrow)
            scale1 = np.linalg.norm(tm.mass)
            scale2 = np.linalg.norm(tm.deriv)
            worst = max(worst, r1 / scale1, r2 / scale2)
    return worst <= 1e-10, f"worst relative identity residual {worst:.2e}"


def _check_operator_oracle():
    rng = np.random.default_rng(7)
    spec = problems.ProblemSpec(
        name="selftest", domain="unit_square",
        diffusion=lambda l: 1.0 + 0.5 * np.cos(np.asarray(l, dtype=float)),
        diffusion_bounds=(0.5, 1.5), forcing_terms=((1.0, 1.0),))
    disc = discretize(spec, 1, 3)
    tm = disc.time_matrices(disc.weight_samples(np.zeros(disc.n_dof)))
    op = disc.operator(tm)
    dense = op.dense()
    err = 0.0
    for _ in range(5):
        v = rng.standard_normal(op.n_dof)
        err = max(err, np.abs(op.apply(v) - dense @ v).max())
    return err <= 1e-14 * max(1.0, np.abs(dense).max()), f"max deviation {err:.2e}"


def _check_preconditioner_oracle():
    rng = np.random.default_rng(11)
    kv = make_open_uniform(2, 4)
    basis = Basis1D(kv, "zero_ends")
    rule = element_rule(kv, 3)
    Mh, Kh = assembly.parametric_matrices_1d(basis, rule)
    kvt = make_open_uniform(1, 3)
    bt = Basis1D(kvt, "zero_start")
    rt = element_rule(kvt, 2)
    tm = assembly.assemble_time(bt, lambda t: 2.0 + t, rt, 1.0)
    fact = pencil.factorize_time_pencil(tm.deriv, tm.mass)
    se = pencil.spatial_eigendecomposition([Mh], [Kh])
    P = linsolve.build_preconditioner(fact, se, (basis.active_count,))
    dense = linsolve.dense_preconditioner_matrix(fact.arrow, [Mh], [Kh])
    n = dense.shape[0]
    err = 0.0
    for _ in range(5):
        r = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        err = max(err, np.abs(P.apply(r) - np.linalg.solve(dense, r)).max())
    return err <= 1e-10, f"max deviation {err:.2e}"


def _check_fixed_point_oracle():
    spec = problems.ProblemSpec(
        name="selftest", domain="unit_interval",
        diffusion=lambda l: 2.0 + np.tanh(np.asarray(l, dtype=float)),
        diffusion_bounds=(1.0, 3.0), forcing_terms=((1.0, 1.0),))
    disc = discretize(spec, 1, 4)
    rep = picard_solve(disc, PicardConfig())
    u = np.zeros(disc.n_dof)
    for _ in range(50):
        tm = disc.time_matrices(disc.weight_samples(u))
        u_next = np.linalg.solve(disc.operator(tm).dense(), disc.rhs)
        inc = np.abs(u_next - u).max()
        u = u_next
        if inc <= 1e-10:
            break
    err = np.abs(u - rep.coefficients).max()
    return err <= 1e-9, f"sup-norm deviation from dense fixed point {err:.2e}"


def _check_identity_preconditioning():
    spec = problems.ProblemSpec(
        name="selftest", domain="unit_cube",
        diffusion=lambda l: np.ones_like(np.asarray(l, dtype=float)),
        diffusion_bounds=(1.0, 1.0), forcing_terms=((1.0, 1.0),))
    disc = discretize(spec, 1, 3)
    tm = disc.time_matrices(disc.weight_samples(np.zeros(disc.n_dof)))
    op = disc.operator(tm)
    fact = pencil.factorize_time_pencil(tm.deriv, tm.mass)
    se = pencil.spatial_eigendecomposition(disc.param_mass_1d, disc.param_stiff_1d)
    P = linsolve.build_preconditioner(fact, se, disc.space_dims)
    _, rep = linsolve.solve_linear_step(op, fact, P, disc.rhs, tol=1e-12)
    return rep.iterations <= 2 and rep.converged, f"{rep.iterations} iterations"


CHECKS = (
    ("time-pencil factorization identities", _check_pencil_identities),
    ("Kronecker operator dense oracle", _check_operator_oracle),
    ("fast-diagonalization dense oracle", _check_preconditioner_oracle),
    ("fixed-point dense oracle", _check_fixed_point_oracle),
    ("identity-geometry preconditioning exactness", _check_identity_preconditioning),
)


def run_selftest(stream=None) -> bool:
    """Run all checks, print one line each; returns overall success."""
    import sys

    stream = stream or sys.stdout
    all_ok = True
    for name, check in CHECKS:
        try:
            ok, detail = check()
        except Exception as exc:  # a crash is a failure, not an abort
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        all_ok &= ok
        status = "PASS" if ok else "FAIL"
        print(f"[{status}] {name}: {detail}", file=stream)
    print("selftest:", "all checks passed" if all_ok else "FAILURES present",
          file=stream)
    return all_ok
