"""Assembly of the discrete space-time operators.

Spatial mass/stiffness matrices are assembled as genuinely d-dimensional
sparse matrices over the zero-boundary spline space (the geometry map breaks
spatial separability); the temporal matrices are small and dense.  The global
operator is never formed: its action splits into time-direction and
space-direction factors applied by reshape-multiply-reshape.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .geometry import Parametrization
from .quadrature import QuadratureRule1D
from .splines import Basis1D

__all__ = [
    "TimeMatrices",
    "SystemOperator",
    "HypothesisError",
    "assemble_spatial",
    "assemble_spatial_load",
    "assemble_time",
    "assemble_rhs",
    "assemble_rhs_pointwise",
    "nonlocal_value",
    "nonlocal_trajectory",
    "apply_operator",
    "parametric_matrices_1d",
    "spatial_value_matrix",
    "spatial_gradient_matrices",
]

# Upper bound on the per-chunk scratch tensors used by the element loops.
CHUNK_BYTE_BUDGET = 192 * 2**20


class HypothesisError(ValueError):
    """Raised when the coefficient bound hypothesis (positivity) fails."""


@dataclass(frozen=True, eq=False)
class TimeMatrices:
    """Temporal derivative and weighted mass matrices over the active dofs."""

    deriv: np.ndarray        # [j, k] = int b'_k b_j dt
    mass: np.ndarray         # [j, k] = int w(t) b_k b_j dt
    weight: np.ndarray       # coefficient samples at the time quadrature points


@dataclass(frozen=True, eq=False)
class SystemOperator:
    """Kronecker-form operator: time_deriv x space_mass + time_mass x space_stiffness."""

    time_deriv: np.ndarray
    time_mass: np.ndarray
    space_mass: sp.csr_matrix
    space_stiffness: sp.csr_matrix

    @property
    def n_time(self) -> int:
        return self.time_deriv.shape[0]

    @property
    def n_space(self) -> int:
        return self.space_mass.shape[0]

    @property
    def n_dof(self) -> int:
        return self.n_time * self.n_space

    def apply(self, v: np.ndarray) -> np.ndarray:
        return apply_operator(self, v)

    def dense(self) -> np.ndarray:
        """Explicit Kronecker matrix; for small oracle checks only."""
        return (np.kron(self.time_deriv, self.space_mass.toarray())
                + np.kron(self.time_mass, self.space_stiffness.toarray()))


def apply_operator(op: SystemOperator, v: np.ndarray) -> np.ndarray:
    """Matrix-free action of the space-time operator on a coefficient vector.

    The ordering is colexicographic with space fastest: entry ``jt * N_s + js``
    holds the coefficient of spatial function ``js`` at time function ``jt``.
    """
    v = np.asarray(v)
    if v.shape != (op.n_dof,):
        raise ValueError(f"expected vector of length {op.n_dof}, got {v.shape}")
    V = v.reshape(op.n_time, op.n_space)
    U1 = _sparse_matmat(op.space_mass, V.T)        # columns: M_s v_k
    U2 = _sparse_matmat(op.space_stiffness, V.T)
    Y = U1 @ op.time_deriv.T + U2 @ op.time_mass.T
    return Y.T.ravel()


def _sparse_matmat(A: sp.csr_matrix, X: np.ndarray) -> np.ndarray:
    """A @ X for real sparse A; complex X handled by one stacked real product."""
    if not np.iscomplexobj(X):
        return A @ X
    stacked = np.concatenate([X.real, X.imag], axis=1)
    Y = A @ stacked
    k = X.shape[1]
    return Y[:, :k] + 1j * Y[:, k:]


# ---------------------------------------------------------------------------
# spatial assembly
# ---------------------------------------------------------------------------

def _span_tables(basis: Basis1D, rule: QuadratureRule1D):
    """Per-span basis tables: first active function, values, derivatives."""
    q = basis.degree
    nspans, npts = rule.points.shape
    first = np.empty(nspans, dtype=int)
    vals = np.empty((nspans, npts, q + 1))
    ders = np.empty((nspans, npts, q + 1))
    for e in range(nspans):
        f, v, d = basis.evaluate_many(rule.points[e])
        if np.any(f != f[0]):
            raise RuntimeError("quadrature points leaked across spans")
        first[e] = f[0]
        vals[e] = v
        ders[e] = d
    return first, vals, ders


def _element_multi_indices(shape: Sequence[int], start: int, stop: int) -> np.ndarray:
    """Element multi-indices for flat ids in [start, stop), direction 1 fastest."""
    flat = np.arange(start, stop)
    out = np.empty((len(flat), len(shape)), dtype=int)
    for axis, n in enumerate(shape):
        out[:, axis] = flat % n
        flat = flat // n
    return out


def _tensor_product_basis(slices: list[np.ndarray]) -> np.ndarray:
    """Batched tensor product of per-direction tables (ce, npts, q+1).

    Returns ``(ce, nloc, nq)`` with both the local-function axis and the
    quadrature axis ordered colexicographically (direction 1 fastest).
    """
    d = len(slices)
    if d == 1:
        return np.ascontiguousarray(slices[0].transpose(0, 2, 1))
    if d == 2:
        out = np.einsum("eyb,eza->ebayz", slices[1], slices[0])
    elif d == 3:
        out = np.einsum("exc,eyb,eza->ecbaxyz", slices[2], slices[1], slices[0])
    else:
        raise ValueError("only 1, 2 or 3 spatial dimensions are supported")
    ce = out.shape[0]
    nloc = int(np.prod(out.shape[1:d + 1]))
    nq = int(np.prod(out.shape[d + 1:]))
    return out.reshape(ce, nloc, nq)


@dataclass
class _Chunk:
    rows: np.ndarray       # (ce, nloc) restricted global row indices (may be invalid)
    valid: np.ndarray      # (ce, nloc) mask of rows inside the restricted space
    values: np.ndarray     # (ce, nloc, nq) tensor-product basis values
    grads: np.ndarray | None  # (d, ce, nloc, nq) reference gradient components
    wdet: np.ndarray       # (ce, nq) quadrature weight times |det J|
    points: np.ndarray     # (ce, nq, d) physical coordinates
    inv_t: np.ndarray | None  # (ce, nq, d, d) inverse-transpose Jacobians


def _iter_chunks(bases: Sequence[Basis1D], geo: Parametrization,
                 rules: Sequence[QuadratureRule1D], need_grads: bool,
                 byte_budget: int = CHUNK_BYTE_BUDGET) -> Iterable[_Chunk]:
    d = geo.dim
    if len(bases) != d or len(rules) != d:
        raise ValueError("one basis and one quadrature rule per spatial direction")
    tables = [_span_tables(b, r) for b, r in zip(bases, rules)]
    nspans = [r.points.shape[0] for r in rules]
    npts = [r.points.shape[1] for r in rules]
    nloc = int(np.prod([b.degree + 1 for b in bases]))
    nq = int(np.prod(npts))
    n_active = [b.active_count for b in bases]

    tensors = (1 + 2 * d) if need_grads else 1
    chunk = max(1, byte_budget // (8 * tensors * nloc * nq))
    total = int(np.prod(nspans))

    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        em = _element_multi_indices(nspans, start, stop)
        ce = stop - start

        val_slices, der_slices, pt_slices, wt_slices, first_slices = [], [], [], [], []
        for axis in range(d):
            first, vals, ders = tables[axis]
            idx = em[:, axis]
            first_slices.append(first[idx])
            val_slices.append(vals[idx])
            der_slices.append(ders[idx])
            pt_slices.append(rules[axis].points[idx])
            wt_slices.append(rules[axis].weights[idx])

        # Tensor quadrature grid and weights, direction 1 fastest.
        zeta = np.empty((ce, nq, d))
        wq = np.ones((ce, nq))
        for axis in range(d):
            shape = [ce] + [1] * d
            shape[d - axis] = npts[axis]
            block = pt_slices[axis].reshape(shape)
            zeta[:, :, axis] = np.broadcast_to(
                block, (ce,) + tuple(npts[::-1])).reshape(ce, nq)
            wq *= np.broadcast_to(
                wt_slices[axis].reshape(shape), (ce,) + tuple(npts[::-1])
            ).reshape(ce, nq)

        x, _, det, inv_t = geo.evaluate(zeta.reshape(-1, d))
        wdet = wq * det.reshape(ce, nq)

        values = _tensor_product_basis(val_slices)
        grads = None
        if need_grads:
            grads = np.empty((d,) + values.shape)
            for k in range(d):
                slices = [der_slices[a] if a == k else val_slices[a] for a in range(d)]
                grads[k] = _tensor_product_basis(slices)

        # Restricted row indices with a validity mask for dropped functions.
        act, ok = [], []
        for axis in range(d):
            glob = first_slices[axis][:, None] + np.arange(bases[axis].degree + 1)
            lo = bases[axis].active_start
            act.append(glob - lo)
            hi = lo + n_active[axis]
            ok.append((glob >= lo) & (glob < hi))
        rows = np.zeros((ce, 1), dtype=int)
        valid = np.ones((ce, 1), dtype=bool)
        stride = 1
        for axis in range(d):
            na = bases[axis].degree + 1
            rows = (rows[:, None, :] + stride * act[axis][:, :, None]).reshape(ce, -1)
            valid = (valid[:, None, :] & ok[axis][:, :, None]).reshape(ce, -1)
            stride *= n_active[axis]

        yield _Chunk(rows=rows, valid=valid, values=values, grads=grads,
                     wdet=wdet, points=x.reshape(ce, nq, d),
                     inv_t=inv_t.reshape(ce, nq, d, d) if need_grads else None)


def _merge_push(stack: list, mat: sp.csr_matrix):
    """Binary-counter merge to keep pairwise additions logarithmic."""
    level = 0
    while stack and stack[-1][0] == level:
        mat = mat + stack.pop()[1]
        level += 1
    stack.append((level, mat))


def _merge_finish(stack: list, n: int) -> sp.csr_matrix:
    if not stack:
        return sp.csr_matrix((n, n))
    total = stack[0][1]
    for _, mat in stack[1:]:
        total = total + mat
    return total.tocsr()


def _scatter_block(stack: list, chunk: _Chunk, local: np.ndarray, n: int):
    rows = chunk.rows
    mask = chunk.valid[:, :, None] & chunk.valid[:, None, :]
    I = np.broadcast_to(rows[:, :, None], local.shape)[mask]
    J = np.broadcast_to(rows[:, None, :], local.shape)[mask]
    _merge_push(stack, sp.coo_matrix((local[mask], (I, J)), shape=(n, n)).tocsr())


def assemble_spatial(bases: Sequence[Basis1D], geo: Parametrization,
                     rules: Sequence[QuadratureRule1D]):
    """Geometry-mapped spatial mass and stiffness matrices plus the volume load.

    Returns ``(mass, stiffness, volume_load)`` over the zero-boundary space:
    ``mass[j,k] = int B_j B_k``, ``stiffness[j,k] = int grad B_j . grad B_k``
    and ``volume_load[j] = int B_j``, all over the physical domain.
    """
    n = int(np.prod([b.active_count for b in bases]))
    mass_stack: list = []
    stiff_stack: list = []
    load = np.zeros(n)

    for chunk in _iter_chunks(bases, geo, rules, need_grads=True):
        B, wdet = chunk.values, chunk.wdet
        local_mass = np.matmul(B * wdet[:, None, :], B.transpose(0, 2, 1))
        _scatter_block(mass_stack, chunk, local_mass, n)

        gstack = chunk.grads                # (d, ce, nloc, nq)
        local_stiff = None
        for i in range(geo.dim):
            phys = np.einsum("eqk,keLq->eLq", chunk.inv_t[:, :, i, :], gstack)
            term = np.matmul(phys * wdet[:, None, :], phys.transpose(0, 2, 1))
            local_stiff = term if local_stiff is None else local_stiff + term
        _scatter_block(stiff_stack, chunk, local_stiff, n)

        local_load = np.einsum("eLq,eq->eL", B, wdet)
        np.add.at(load, chunk.rows[chunk.valid], local_load[chunk.valid])

    mass = _merge_finish(mass_stack, n)
    stiffness = _merge_finish(stiff_stack, n)
    # Enforce exact symmetry (the integrands are symmetric; rounding is not).
    mass = ((mass + mass.T) * 0.5).tocsr()
    stiffness = ((stiffness + stiffness.T) * 0.5).tocsr()
    return mass, stiffness, load


def assemble_spatial_load(g: Callable[[np.ndarray], np.ndarray],
                          bases: Sequence[Basis1D], geo: Parametrization,
                          rules: Sequence[QuadratureRule1D]) -> np.ndarray:
    """Load vector ``int g(x) B_j dx`` over the zero-boundary space."""
    n = int(np.prod([b.active_count for b in bases]))
    load = np.zeros(n)
    for chunk in _iter_chunks(bases, geo, rules, need_grads=False):
        gv = np.asarray(g(chunk.points.reshape(-1, geo.dim)), dtype=float)
        weighted = chunk.wdet * gv.reshape(chunk.wdet.shape)
        local = np.einsum("eLq,eq->eL", chunk.values, weighted)
        np.add.at(load, chunk.rows[chunk.valid], local[chunk.valid])
    return load


# ---------------------------------------------------------------------------
# temporal assembly
# ---------------------------------------------------------------------------

def assemble_time(basis_t: Basis1D, weight, rule: QuadratureRule1D,
                  T: float) -> TimeMatrices:
    """Temporal matrices over the active (zero-at-start) functions.

    ``weight`` is either a callable of physical time or an array of samples
    at the rule's quadrature points; it must stay strictly positive there
    (the lower coefficient bound of the problem class) or
    :class:`HypothesisError` is raised.
    """
    taus = rule.flat_points
    wq = rule.flat_weights
    vals, ders = basis_t.tabulate(taus, restricted=True)
    times = T * taus
    raw = weight(times) if callable(weight) else weight
    wt = np.broadcast_to(np.asarray(raw, dtype=float), times.shape)
    if np.any(wt <= 0.0):
        raise HypothesisError("coefficient is not positive at a time quadrature point")
    # d/dt of b(t / T) contributes 1/T, the measure dt contributes T.
    deriv = vals.T @ (ders * wq[:, None])
    mass = T * (vals.T @ (vals * (wq * wt)[:, None]))
    mass = 0.5 * (mass + mass.T)
    return TimeMatrices(deriv=deriv, mass=mass, weight=np.array(wt))


def nonlocal_value(u: np.ndarray, volume_load: np.ndarray, basis_t: Basis1D,
                   t: float, T: float) -> float:
    """Spatial mean functional of the discrete solution at time ``t``."""
    if not 0.0 <= t <= T:
        raise ValueError(f"time {t} outside [0, {T}]")
    return float(nonlocal_trajectory(u, volume_load, basis_t, np.array([t]), T)[0])


def nonlocal_trajectory(u: np.ndarray, volume_load: np.ndarray, basis_t: Basis1D,
                        times: np.ndarray, T: float) -> np.ndarray:
    """Vectorised spatial mean functional along a set of times."""
    n_space = len(volume_load)
    U = np.asarray(u).reshape(-1, n_space)
    per_time_dof = U @ volume_load                      # (N_t,)
    vals, _ = basis_t.tabulate(np.asarray(times, dtype=float) / T, restricted=True)
    return vals @ per_time_dof


# ---------------------------------------------------------------------------
# right-hand side
# ---------------------------------------------------------------------------

def _time_load(s: Callable[[np.ndarray], np.ndarray], basis_t: Basis1D,
               rule_t: QuadratureRule1D, T: float) -> np.ndarray:
    taus = rule_t.flat_points
    wq = rule_t.flat_weights
    vals, _ = basis_t.tabulate(taus, restricted=True)
    sv = np.broadcast_to(np.asarray(s(T * taus), dtype=float), taus.shape)
    return T * (vals.T @ (wq * sv))


def assemble_rhs(forcing_terms, bases: Sequence[Basis1D], basis_t: Basis1D,
                 geo: Parametrization, rules: Sequence[QuadratureRule1D],
                 rule_t: QuadratureRule1D, T: float) -> np.ndarray:
    """Load vector for a forcing given as a sum of separable terms.

    ``forcing_terms`` is an iterable of ``(g, s)`` pairs representing
    ``f(x, t) = sum_i g_i(x) s_i(t)``; each factor may also be a constant.
    """
    n_space = int(np.prod([b.active_count for b in bases]))
    n_time = basis_t.active_count
    rhs = np.zeros((n_time, n_space))
    for g, s in forcing_terms:
        gfun = g if callable(g) else (lambda X, c=float(g): np.full(len(X), c))
        sfun = s if callable(s) else (lambda t, c=float(s): np.full_like(t, c))
        space_part = assemble_spatial_load(gfun, bases, geo, rules)
        time_part = _time_load(sfun, basis_t, rule_t, T)
        rhs += np.outer(time_part, space_part)
    return rhs.ravel()


def assemble_rhs_pointwise(f: Callable[[np.ndarray, float], np.ndarray],
                           bases: Sequence[Basis1D], basis_t: Basis1D,
                           geo: Parametrization, rules: Sequence[QuadratureRule1D],
                           rule_t: QuadratureRule1D, T: float) -> np.ndarray:
    """Load vector for a general (non-separable) forcing ``f(x, t)``."""
    n_space = int(np.prod([b.active_count for b in bases]))
    taus = rule_t.flat_points
    wq_t = rule_t.flat_weights
    vals_t, _ = basis_t.tabulate(taus, restricted=True)

    space_by_time = np.zeros((n_space, len(taus)))
    for chunk in _iter_chunks(bases, geo, rules, need_grads=False):
        pts = chunk.points.reshape(-1, geo.dim)
        for m, tau in enumerate(taus):
            fv = np.asarray(f(pts, float(T * tau)), dtype=float)
            weighted = chunk.wdet * fv.reshape(chunk.wdet.shape)
            local = np.einsum("eLq,eq->eL", chunk.values, weighted)
            np.add.at(space_by_time[:, m], chunk.rows[chunk.valid],
                      local[chunk.valid])
    rhs = (space_by_time * (T * wq_t)) @ vals_t        # (N_s, N_t)
    return rhs.T.ravel()


# ---------------------------------------------------------------------------
# helper matrices for preconditioning and postprocessing
# ---------------------------------------------------------------------------

def parametric_matrices_1d(basis: Basis1D, rule: QuadratureRule1D):
    """Dense 1D mass/stiffness matrices on the parametric interval."""
    vals, ders = basis.tabulate(rule.flat_points, restricted=True)
    wq = rule.flat_weights
    mass = vals.T @ (vals * wq[:, None])
    stiff = ders.T @ (ders * wq[:, None])
    return 0.5 * (mass + mass.T), 0.5 * (stiff + stiff.T)


def spatial_value_matrix(bases: Sequence[Basis1D], points_1d: Sequence[np.ndarray]):
    """Sparse matrix of spatial basis values on a tensor grid of points.

    Row ordering follows the tensor grid with direction 1 fastest, matching
    the colexicographic dof ordering.
    """
    mats = []
    for basis, pts in zip(bases, points_1d):
        V, _ = basis.tabulate(pts, restricted=True)
        mats.append(sp.csr_matrix(V))
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(m, out, format="csr")
    return out


def spatial_gradient_matrices(bases: Sequence[Basis1D],
                              points_1d: Sequence[np.ndarray]):
    """Per-direction sparse matrices of reference-gradient components."""
    tabs = [basis.tabulate(pts, restricted=True)
            for basis, pts in zip(bases, points_1d)]
    out = []
    for k in range(len(bases)):
        mats = [sp.csr_matrix(tabs[a][1] if a == k else tabs[a][0])
                for a in range(len(bases))]
        m = mats[0]
        for factor in mats[1:]:
            m = sp.kron(factor, m, format="csr")
        out.append(m)
    return out
