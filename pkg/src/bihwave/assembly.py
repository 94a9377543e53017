"""Quadrature and Galerkin assembly of the 1D and tensorized operators.

Everything here integrates products of spline derivatives with per-span
Gauss-Legendre rules.  On the axis-aligned box geometries supported by this
package the integrands are piecewise polynomials, so the default rules are
exact: ``max(degree) + 1`` points for Gram matrices, ``degree + 2`` for load
vectors (the extra point controls data oscillation of non-polynomial
forcing).

All operations are pure functions of immutable inputs and safe to call
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from numpy.polynomial.legendre import leggauss, legval

from .splines import SplineSpace1D, eval_basis

__all__ = [
    "QuadratureRule",
    "Gram1D",
    "TemporalMatrices",
    "SpatialOperators",
    "ForcingTerm",
    "SeparableForcing",
    "STABILIZATION_MODES",
    "gauss_rule",
    "assemble_gram_1d",
    "projected_mass",
    "assemble_temporal",
    "assemble_spatial",
    "assemble_load",
    "write_coo",
]

#: Supported temporal stabilization modes.
STABILIZATION_MODES = ("none", "iga_penalty", "fem_projection")


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre rule on the reference interval [0, 1]."""

    nodes: np.ndarray
    weights: np.ndarray

    def mapped(self, x0, x1):
        """Nodes and weights mapped to the interval ``[x0, x1]``."""
        length = x1 - x0
        return x0 + self.nodes * length, self.weights * length


@lru_cache(maxsize=None)
def gauss_rule(n):
    """n-point Gauss-Legendre rule on [0, 1], exact for degree ``2n - 1``.

    Parameters
    ----------
    n : int
        Number of points, between 1 and 64.
    """
    if not 1 <= n <= 64:
        raise ValueError(f"quadrature point count must lie in [1, 64], got {n}")
    nodes, weights = leggauss(n)
    rule = QuadratureRule(nodes=(nodes + 1.0) / 2.0, weights=weights / 2.0)
    rule.nodes.setflags(write=False)
    rule.weights.setflags(write=False)
    return rule


@dataclass(frozen=True)
class Gram1D:
    """1D Gram matrix of spline derivatives, rows = test, cols = trial.

    ``entries[i, j]`` is the integral of
    ``D^deriv_row phi_test_i * D^deriv_col phi_trial_j`` over the parameter
    interval, exact to quadrature precision; entries vanish when the supports
    of the two functions are disjoint, so the matrix is banded.
    """

    rows: SplineSpace1D
    cols: SplineSpace1D
    deriv_row: int
    deriv_col: int
    entries: sp.csr_matrix

    def toarray(self):
        return self.entries.toarray()


def _check_same_breakpoints(test, trial):
    bt, br = test.breakpoints, trial.breakpoints
    if len(bt) != len(br) or not np.allclose(bt, br, rtol=0.0, atol=1e-14):
        raise ValueError("test and trial spaces must share the same knot breakpoints")


def assemble_gram_1d(test, trial, a, b, n_quad=None):
    """Assemble the Gram matrix of ``D^a`` test against ``D^b`` trial functions.

    Parameters
    ----------
    test, trial : SplineSpace1D
        Spaces over the same breakpoints (degrees and constraints may differ).
    a, b : int
        Derivative orders applied to test and trial functions.
    n_quad : int, optional
        Per-span Gauss points; default ``max(degree) + 1`` (exact).

    Returns
    -------
    Gram1D
    """
    _check_same_breakpoints(test, trial)
    if not 0 <= a <= test.degree:
        raise ValueError(f"test derivative order {a} outside [0, {test.degree}]")
    if not 0 <= b <= trial.degree:
        raise ValueError(f"trial derivative order {b} outside [0, {trial.degree}]")
    n = n_quad if n_quad is not None else max(test.degree, trial.degree) + 1
    rule = gauss_rule(n)

    breaks = test.breakpoints
    rows_idx, cols_idx, vals = [], [], []
    pt, pr = test.degree, trial.degree
    for x0, x1 in zip(breaks[:-1], breaks[1:]):
        xs, ws = rule.mapped(x0, x1)
        mid = 0.5 * (x0 + x1)
        first_t, _ = eval_basis(test.knot_vector, mid, 0)
        first_r, _ = eval_basis(trial.knot_vector, mid, 0)
        tvals = np.empty((len(xs), pt + 1))
        rvals = np.empty((len(xs), pr + 1))
        for q, x in enumerate(xs):
            _, tab = eval_basis(test.knot_vector, x, a)
            tvals[q] = tab[a]
            _, tab = eval_basis(trial.knot_vector, x, b)
            rvals[q] = tab[b]
        local = (tvals * ws[:, None]).T @ rvals
        ti = test.local_to_active(first_t)
        ri = trial.local_to_active(first_r)
        tkeep = ti >= 0
        rkeep = ri >= 0
        block = local[np.ix_(tkeep, rkeep)]
        ii, jj = np.meshgrid(ti[tkeep], ri[rkeep], indexing="ij")
        rows_idx.append(ii.ravel())
        cols_idx.append(jj.ravel())
        vals.append(block.ravel())

    entries = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows_idx), np.concatenate(cols_idx))),
        shape=(test.dim, trial.dim),
    ).tocsr()
    return Gram1D(rows=test, cols=trial, deriv_row=a, deriv_col=b, entries=entries)


def projected_mass(test, trial, proj_degree):
    """Mass matrix of elementwise L2-projections onto discontinuous polynomials.

    Computes ``M[i, j] = integral (Pi psi_trial_j)(Pi psi_test_i)`` where
    ``Pi`` is, on every knot span, the L2-orthogonal projection onto
    polynomials of degree ``proj_degree``.  Since ``Pi`` is self-adjoint and
    idempotent this equals ``integral psi_trial_j (Pi psi_test_i)``.

    Returns a dense array of shape ``(test.dim, trial.dim)``.
    """
    _check_same_breakpoints(test, trial)
    if proj_degree < 0:
        raise ValueError("projection degree must be >= 0")
    n = max(test.degree, trial.degree) + 1
    rule = gauss_rule(n)
    breaks = test.breakpoints
    out = np.zeros((test.dim, trial.dim))
    for x0, x1 in zip(breaks[:-1], breaks[1:]):
        xs, ws = rule.mapped(x0, x1)
        length = x1 - x0
        # orthonormal Legendre basis on the span
        ref = 2.0 * (xs - x0) / length - 1.0
        leg = np.empty((proj_degree + 1, len(xs)))
        for q in range(proj_degree + 1):
            coeff = np.zeros(q + 1)
            coeff[q] = 1.0
            leg[q] = legval(ref, coeff) * np.sqrt((2 * q + 1) / length)
        mid = 0.5 * (x0 + x1)
        first_t, _ = eval_basis(test.knot_vector, mid, 0)
        first_r, _ = eval_basis(trial.knot_vector, mid, 0)
        tvals = np.empty((len(xs), test.degree + 1))
        rvals = np.empty((len(xs), trial.degree + 1))
        for q, x in enumerate(xs):
            _, tab = eval_basis(test.knot_vector, x, 0)
            tvals[q] = tab[0]
            _, tab = eval_basis(trial.knot_vector, x, 0)
            rvals[q] = tab[0]
        # projection coefficients of every local basis function
        ct = (leg * ws) @ tvals  # (proj+1, p_test+1)
        cr = (leg * ws) @ rvals
        ti = test.local_to_active(first_t)
        ri = trial.local_to_active(first_r)
        tkeep = ti >= 0
        rkeep = ri >= 0
        out[np.ix_(ti[tkeep], ri[rkeep])] += ct[:, tkeep].T @ cr[:, rkeep]
    return out


@dataclass(frozen=True)
class TemporalMatrices:
    """Dense temporal Gram matrices driving the space-time operator.

    ``M_t`` is the mass matrix, ``K_t`` the first-derivative Gram matrix, and
    ``P_t`` the stabilization matrix (zero when unstabilized).  Rows index
    test functions (vanishing at the final time), columns index trial
    functions (vanishing at the initial time).
    """

    M_t: np.ndarray
    K_t: np.ndarray
    P_t: np.ndarray
    h_t: float
    degree: int
    mode: str
    delta: float

    @property
    def n_t(self):
        return self.M_t.shape[0]

    @property
    def stabilized_mass(self):
        """The matrix ``M_t - P_t`` that multiplies the spatial stiffness."""
        return self.M_t - self.P_t


def assemble_temporal(trial, test, delta=0.0, mode="none"):
    """Assemble the temporal mass, stiffness and stabilization matrices.

    Parameters
    ----------
    trial : SplineSpace1D
        Space with ``zero_start`` constraint (vanishing initial value).
    test : SplineSpace1D
        Space with ``zero_end`` constraint over the same knot vector.
    delta : float
        Penalty weight, ``>= 0``; only used by ``iga_penalty``.
    mode : str
        One of :data:`STABILIZATION_MODES`:

        - ``none``: ``P_t = 0``;
        - ``iga_penalty``: ``P_t = delta * h_t**(2 p) * Gram(p, p)`` with
          ``p`` the temporal degree;
        - ``fem_projection``: ``P_t = M_t - Mproj`` where ``Mproj`` is the
          :func:`projected_mass` onto discontinuous polynomials of degree
          ``p - 1``, so ``M_t - P_t`` is the projected mass matrix.

    Returns
    -------
    TemporalMatrices
    """
    if mode not in STABILIZATION_MODES:
        raise ValueError(
            f"unknown stabilization mode {mode!r}; expected one of {STABILIZATION_MODES}"
        )
    if delta < 0:
        raise ValueError(f"penalty weight must be >= 0, got {delta}")
    if trial.constraint != "zero_start":
        raise ValueError("temporal trial space must have the zero_start constraint")
    if test.constraint != "zero_end":
        raise ValueError("temporal test space must have the zero_end constraint")
    if trial.degree != test.degree:
        raise ValueError("temporal trial and test spaces must share their degree")

    p = trial.degree
    M_t = assemble_gram_1d(test, trial, 0, 0).toarray()
    K_t = assemble_gram_1d(test, trial, 1, 1).toarray()
    if mode == "iga_penalty":
        h_t = trial.mesh_size
        P_t = delta * h_t ** (2 * p) * assemble_gram_1d(test, trial, p, p).toarray()
    elif mode == "fem_projection":
        P_t = M_t - projected_mass(test, trial, p - 1)
    else:
        P_t = np.zeros_like(M_t)
    return TemporalMatrices(
        M_t=M_t,
        K_t=K_t,
        P_t=P_t,
        h_t=trial.mesh_size,
        degree=p,
        mode=mode,
        delta=float(delta),
    )


@dataclass(frozen=True)
class SpatialOperators:
    """Tensorized spatial mass and bi-Laplacian stiffness matrices.

    Both matrices are sparse, symmetric and positive definite on the clamped
    space.  For ``d = 2`` the row/column index runs fastest over the first
    coordinate direction.
    """

    d: int
    M_x: sp.csr_matrix
    K_x: sp.csr_matrix
    spaces: tuple

    @property
    def n_s(self):
        return self.M_x.shape[0]

    @property
    def h_s(self):
        """Largest per-direction mesh size."""
        return max(space.mesh_size for space in self.spaces)


def assemble_spatial(spaces):
    """Assemble mass and bi-Laplacian stiffness on a clamped box domain.

    Parameters
    ----------
    spaces : sequence of SplineSpace1D
        One clamped (``clamped_both``) space per coordinate direction;
        length 1 or 2.

    Returns
    -------
    SpatialOperators
    """
    spaces = tuple(spaces)
    d = len(spaces)
    if d not in (1, 2):
        raise ValueError(f"spatial dimension must be 1 or 2, got {d}")
    for space in spaces:
        if space.constraint != "clamped_both":
            raise ValueError(
                "spatial spaces must be clamped (value and normal derivative "
                "vanish on the boundary)"
            )
    grams = []
    for space in spaces:
        g = {
            (da, db): assemble_gram_1d(space, space, da, db).entries
            for da in (0, 2)
            for db in (0, 2)
        }
        grams.append(g)
    if d == 1:
        M_x = grams[0][(0, 0)].tocsr()
        K_x = grams[0][(2, 2)].tocsr()
    else:
        gx, gy = grams
        M_x = sp.kron(gy[(0, 0)], gx[(0, 0)], format="csr")
        # expansion of the integral of (u_xx + u_yy)(v_xx + v_yy)
        K_x = (
            sp.kron(gy[(0, 0)], gx[(2, 2)])
            + sp.kron(gy[(2, 0)], gx[(0, 2)])
            + sp.kron(gy[(0, 2)], gx[(2, 0)])
            + sp.kron(gy[(2, 2)], gx[(0, 0)])
        ).tocsr()
    return SpatialOperators(d=d, M_x=M_x, K_x=K_x, spaces=spaces)


@dataclass(frozen=True)
class ForcingTerm:
    """One separable term ``coefficient * g(t) * prod_l w_l(x_l)``."""

    coefficient: float
    time_factor: Callable[[np.ndarray], np.ndarray]
    space_factors: tuple


@dataclass(frozen=True)
class SeparableForcing:
    """Forcing given as a sum of space/time-separable terms."""

    terms: tuple

    def __call__(self, *coords_and_time):
        """Pointwise value; arguments are the space coordinates then time."""
        *coords, t = coords_and_time
        t = np.asarray(t, dtype=float)
        total = 0.0
        for term in self.terms:
            value = term.coefficient * term.time_factor(t)
            for factor, x in zip(term.space_factors, coords):
                value = value * factor(np.asarray(x, dtype=float))
            total = total + value
        return total


def _moment_vector(space, func, n_quad):
    """Per-span quadrature of ``integral func * phi_i`` for active functions."""
    rule = gauss_rule(n_quad)
    breaks = space.breakpoints
    out = np.zeros(space.dim)
    for x0, x1 in zip(breaks[:-1], breaks[1:]):
        xs, ws = rule.mapped(x0, x1)
        mid = 0.5 * (x0 + x1)
        first, _ = eval_basis(space.knot_vector, mid, 0)
        vals = np.empty((len(xs), space.degree + 1))
        for q, x in enumerate(xs):
            _, tab = eval_basis(space.knot_vector, x, 0)
            vals[q] = tab[0]
        idx = space.local_to_active(first)
        keep = idx >= 0
        out[idx[keep]] += (func(xs) * ws) @ vals[:, keep]
    return out


def assemble_load(spatial_spaces, temporal_test, forcing, n_quad_extra=2):
    """Space-time load vector of a separable forcing.

    The entry for spatial index ``i_s`` and temporal index ``i_t`` is the sum
    over terms of ``(integral g psi_test_{i_t} dt) * prod_l (integral w_l
    phi_{i_l} dx_l)``; each 1D integral uses per-span Gauss quadrature with
    ``degree + n_quad_extra`` points.  Entries are ordered space-fastest:
    global index ``i_s + n_s * i_t``.

    Parameters
    ----------
    spatial_spaces : sequence of SplineSpace1D
        Clamped spaces, one per direction.
    temporal_test : SplineSpace1D
        Temporal test space (``zero_end``).
    forcing : SeparableForcing

    Returns
    -------
    ndarray of length ``n_s * n_t``
    """
    spatial_spaces = tuple(spatial_spaces)
    n_s = int(np.prod([space.dim for space in spatial_spaces]))
    n_t = temporal_test.dim
    rhs = np.zeros(n_s * n_t)
    for term in forcing.terms:
        if len(term.space_factors) != len(spatial_spaces):
            raise ValueError(
                f"forcing term has {len(term.space_factors)} space factors for "
                f"{len(spatial_spaces)} spatial directions"
            )
        t_mom = _moment_vector(
            temporal_test, term.time_factor, temporal_test.degree + n_quad_extra
        )
        s_mom = None
        for space, factor in zip(spatial_spaces, term.space_factors):
            m = _moment_vector(space, factor, space.degree + n_quad_extra)
            s_mom = m if s_mom is None else np.kron(m, s_mom)
        rhs += term.coefficient * np.kron(t_mom, s_mom)
    return rhs


def write_coo(matrix, path):
    """Export a matrix as text in coordinate format: ``row col value`` per line.

    Indices are zero-based; dense inputs are written entry by entry including
    zeros, sparse inputs only at stored positions.
    """
    with open(path, "w") as fh:
        if sp.issparse(matrix):
            coo = matrix.tocoo()
            for i, j, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i} {j} {float(v)!r}\n")
        else:
            arr = np.asarray(matrix)
            for i in range(arr.shape[0]):
                for j in range(arr.shape[1]):
                    fh.write(f"{i} {j} {float(arr[i, j])!r}\n")
