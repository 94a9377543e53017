"""Shared test oracles: brute-force quadrature and interpolation helpers.

These deliberately avoid the package's assembly path so they can serve as
independent references for it.
"""

import numpy as np
import pytest

from bihwave.assembly import gauss_rule
from bihwave.splines import eval_basis


def dense_quadrature_points(space, n_extra=3):
    """Per-span Gauss points/weights over a space's interval (plain arrays)."""
    rule = gauss_rule(space.degree + n_extra)
    xs, ws = [], []
    breaks = space.breakpoints
    for x0, x1 in zip(breaks[:-1], breaks[1:]):
        x, w = rule.mapped(x0, x1)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def collocation(space, xs, derivative=0):
    """Dense matrix of derivative values of the active basis at points."""
    out = np.zeros((len(xs), space.dim))
    for q, x in enumerate(xs):
        first, table = eval_basis(space.knot_vector, x, derivative)
        cols = space.local_to_active(first)
        keep = cols >= 0
        out[q, cols[keep]] = table[derivative, keep]
    return out


def brute_force_operator_1d(spatial, trial, test, delta, mode):
    """Entrywise space-time quadrature of the 1D bilinear form.

    Integrates the full space-time integrand per dof pair on a tensor Gauss
    grid, without exploiting the Kronecker factorization.  Rows are test
    pairs (i_s, i_t), columns trial pairs (j_s, j_t), both space-fastest.
    """
    p_t = trial.degree
    xq, wx = dense_quadrature_points(spatial)
    tq, wt = dense_quadrature_points(trial)
    phi0 = collocation(spatial, xq, 0)
    phi2 = collocation(spatial, xq, 2)
    psi0_trial = collocation(trial, tq, 0)
    psi1_trial = collocation(trial, tq, 1)
    psi0_test = collocation(test, tq, 0)
    psi1_test = collocation(test, tq, 1)
    psip_trial = collocation(trial, tq, p_t)
    psip_test = collocation(test, tq, p_t)

    h_t = trial.mesh_size
    n_s, n_t = spatial.dim, trial.dim
    A = np.zeros((n_s * n_t, n_s * n_t))
    for it in range(n_t):
        for isp in range(n_s):
            I = isp + n_s * it
            for jt in range(n_t):
                for jsp in range(n_s):
                    J = jsp + n_s * jt
                    wave = -np.sum(
                        wt * psi1_trial[:, jt] * psi1_test[:, it]
                    ) * np.sum(wx * phi0[:, jsp] * phi0[:, isp])
                    stiff = np.sum(
                        wt * psi0_trial[:, jt] * psi0_test[:, it]
                    ) * np.sum(wx * phi2[:, jsp] * phi2[:, isp])
                    value = wave + stiff
                    if mode == "iga_penalty":
                        value -= (
                            delta
                            * h_t ** (2 * p_t)
                            * np.sum(wt * psip_trial[:, jt] * psip_test[:, it])
                            * np.sum(wx * phi2[:, jsp] * phi2[:, isp])
                        )
                    A[I, J] = value
    return A


def brute_force_load_1d(spatial, test, f, n_extra=4):
    """Entrywise space-time quadrature of the load against a pointwise f."""
    xq, wx = dense_quadrature_points(spatial, n_extra)
    tq, wt = dense_quadrature_points(test, n_extra)
    phi0 = collocation(spatial, xq, 0)
    psi0 = collocation(test, tq, 0)
    X, T = np.meshgrid(xq, tq, indexing="ij")
    F = f(X, T)
    n_s, n_t = spatial.dim, test.dim
    out = np.zeros(n_s * n_t)
    for it in range(n_t):
        for isp in range(n_s):
            out[isp + n_s * it] = np.einsum(
                "x,t,xt,x,t->", wx, wt, F, phi0[:, isp], psi0[:, it]
            )
    return out


def greville_points(space):
    """Greville abscissae of the active basis functions."""
    kv = space.knot_vector
    p = kv.degree
    pts = np.array(
        [kv.knots[j + 1 : j + p + 1].mean() for j in space.active_indices]
    )
    a, b = kv.interval
    return np.clip(pts, a, b)


def interpolate_spacetime(case, system):
    """Tensor collocation of the exact solution at Greville-style points."""
    spaces = list(system.spatial_spaces) + [system.temporal_trial]
    grids = [greville_points(space) for space in spaces]
    mesh = np.meshgrid(*grids, indexing="ij")
    values = case.u(*mesh)
    coeffs = values
    for axis, space in enumerate(spaces):
        B = collocation(space, grids[axis], 0)
        coeffs = np.moveaxis(
            np.linalg.solve(B, np.moveaxis(coeffs, axis, 0).reshape(B.shape[0], -1)).reshape(
                [space.dim] + [n for i, n in enumerate(coeffs.shape) if i != axis]
            ),
            0,
            axis,
        )
    return coeffs.ravel(order="F")
