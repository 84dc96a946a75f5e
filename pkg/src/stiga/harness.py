"""Study runners: single solves, convergence studies, robustness grids.

Each study cell is independent; failures (non-convergence, hypothesis
violations, or a refused memory budget) are recorded in-row and the study
continues.  A preflight estimate guards against cells whose Krylov basis and
matrices cannot fit in the available memory, so an oversized cell fails fast
instead of taking the process down.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
import psutil

from .discretize import discretize
from .nonlinear import PicardConfig, picard_solve
from .postproc import ErrorRecord, error_norms, observed_order
from .problems import ProblemSpec, builtin_problem
from .reporting import OrderRow, StudyTable

__all__ = [
    "RunConfig",
    "ResourceBudgetError",
    "run_single",
    "run_convergence_study",
    "run_robustness_study",
]

log = logging.getLogger(__name__)

ROBUSTNESS_DEGREES = (1, 2, 3, 4)
ROBUSTNESS_LEVELS = (8, 16, 32, 64)

# Krylov vectors assumed by the preflight memory estimate; covers the
# expected iteration counts of the benchmark studies with slack.
PREFLIGHT_BASIS_VECTORS = 40


class ResourceBudgetError(RuntimeError):
    """Raised when a study cell cannot fit in available memory."""


@dataclass(frozen=True)
class RunConfig:
    """Configuration shared by the CLI subcommands and the study runners."""

    problem: str
    degrees: tuple = (1,)
    levels: tuple = (8,)
    final_time: float = 1.0
    eps: float = 1e-10
    lintol: float = 1e-12
    quad: int | None = None
    out: str | None = None
    deterministic: bool = False
    threads: int | None = None
    figures: bool = True
    scaling: str = "mass"
    memory_guard: bool = True

    def __post_init__(self):
        if self.eps <= 0 or self.lintol <= 0:
            raise ValueError("tolerances must be positive")
        if any(l < 1 for l in self.levels):
            raise ValueError("mesh levels must be positive")
        if any(q < 1 for q in self.degrees):
            raise ValueError("degrees must be at least 1")

    def picard_config(self) -> PicardConfig:
        return PicardConfig(increment_tol=self.eps, linear_tol=self.lintol,
                            scaling=self.scaling)


def _estimate_cell_bytes(dim: int, degree: int, level: int) -> int:
    """Rough working-set size of one solve: matrices plus the Krylov basis."""
    n_space = (level + degree - 2) ** dim
    n_time = level + degree - 1
    n_dof = n_space * n_time
    nnz = n_space * (2 * degree + 1) ** dim
    matrices = 2 * nnz * 12            # two CSR matrices, data + indices
    basis = PREFLIGHT_BASIS_VECTORS * n_dof * 16
    workspace = 8 * n_dof * 16
    return matrices + basis + workspace


def _preflight(spec: ProblemSpec, degree: int, level: int, enabled: bool):
    if not enabled:
        return
    from .geometry import builtin_domain

    dim = builtin_domain(spec.domain).dim
    need = _estimate_cell_bytes(dim, degree, level)
    avail = psutil.virtual_memory().available
    if need > 0.85 * avail:
        raise ResourceBudgetError(
            f"cell (q={degree}, 1/h={level}) needs about {need / 2**30:.1f} GiB "
            f"but only {avail / 2**30:.1f} GiB is available")


def _solve_cell(spec: ProblemSpec, cfg: RunConfig, degree: int, level: int):
    _preflight(spec, degree, level, cfg.memory_guard)
    disc = discretize(spec, degree, level, final_time=cfg.final_time,
                      quad_pts=cfg.quad)
    report = picard_solve(disc, cfg.picard_config())
    return disc, report


def run_single(cfg: RunConfig) -> StudyTable:
    """One solve per (degree, level) pair; errors included when available."""
    spec = builtin_problem(cfg.problem)
    table = StudyTable()
    for q in cfg.degrees:
        for level in cfg.levels:
            record = ErrorRecord(problem=cfg.problem, degree=q, inv_h=level,
                                 n_dof=0)
            t0 = time.perf_counter()
            try:
                disc, report = _solve_cell(spec, cfg, q, level)
                record.n_dof = disc.n_dof
                record.picard = report.picard_iterations
                record.gmres_max = report.gmres_max
                if spec.has_exact:
                    record.error_l2l2, record.error_l2h1 = error_norms(
                        report.coefficients, disc)
                if not report.converged:
                    log.warning("cell (q=%d, 1/h=%d) did not converge", q, level)
            except (ResourceBudgetError, MemoryError, RuntimeError,
                    ValueError) as exc:
                log.warning("cell (q=%d, 1/h=%d) failed: %s", q, level, exc)
                record.n_dof = None
            record.seconds = 0.0 if cfg.deterministic else (
                time.perf_counter() - t0)
            table.records.append(record)
    return table


def run_convergence_study(cfg: RunConfig) -> StudyTable:
    """Solve over the level list and extract orders between refinements."""
    spec = builtin_problem(cfg.problem)
    if not spec.has_exact:
        raise ValueError(
            f"problem {cfg.problem!r} has no exact solution for a convergence study")
    table = run_single(cfg)
    for q in cfg.degrees:
        rows = sorted((r for r in table.records
                       if r.degree == q and r.error_l2l2 is not None),
                      key=lambda r: r.inv_h)
        for coarse, fine in zip(rows, rows[1:]):
            if fine.inv_h != 2 * coarse.inv_h:
                continue
            table.orders.append(OrderRow(
                problem=cfg.problem, degree=q, inv_h=fine.inv_h,
                order_l2l2=observed_order(coarse.error_l2l2, fine.error_l2l2),
                order_l2h1=observed_order(coarse.error_l2h1, fine.error_l2h1)))
    return table


def run_robustness_study(cfg: RunConfig | None = None, **overrides) -> StudyTable:
    """Iteration-count grid of the preconditioner study."""
    if cfg is None:
        cfg = RunConfig(problem="igloo_f1", degrees=ROBUSTNESS_DEGREES,
                        levels=ROBUSTNESS_LEVELS, **overrides)
    return run_single(cfg)
