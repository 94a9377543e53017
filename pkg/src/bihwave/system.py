"""The Kronecker-structured space-time operator and its stability diagnostic.

The discrete operator never needs to be materialized: its action is

    A x = ((M_t - P_t) (x) K_x) x - (K_t (x) M_x) x,

where ``(x)`` is the Kronecker product, applied matrix-free through the
reshape identity ``(B (x) C) vec(X) = vec(C X B^T)``.  Vectors are ordered
space-fastest (global index ``i_s + n_s * i_t``), so the reshape is a
contiguous ``n_s x n_t`` matrix view.

The module also holds the exact rational stability threshold and penalty
floor tables for temporal degrees 1 through 6, and the CFL diagnostic
``h_t < sqrt(rho / lambda_max)`` with ``lambda_max`` the largest generalized
eigenvalue of the spatial pencil ``(K_x, M_x)``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .assembly import (
    SeparableForcing,
    SpatialOperators,
    TemporalMatrices,
    assemble_load,
    assemble_spatial,
    assemble_temporal,
)
from .errors import NumericalError
from .splines import build_space, make_knot_vector

__all__ = [
    "DENSE_SIZE_CAP_ENV",
    "DiscretizationConfig",
    "SpaceTimeSystem",
    "CflReport",
    "rho_lookup",
    "delta_lookup",
    "build_system",
    "apply_operator",
    "assemble_dense",
    "dense_size_cap",
    "max_generalized_eigenvalue",
    "cfl_check",
]

#: Environment variable overriding the dense-expansion size cap.
DENSE_SIZE_CAP_ENV = "BIHW_MAX_DENSE"

_DEFAULT_DENSE_CAP = 20_000

# Stability thresholds rho and penalty floors delta for the temporal
# discretization with maximal-regularity splines of degree p, stored exactly.
_RHO = {
    1: Fraction(12),
    2: Fraction(10),
    3: Fraction(168, 17),
    4: Fraction(306, 31),
    5: Fraction(2349, 238),
    6: Fraction(7797, 790),
}

_DELTA = {
    1: Fraction(1, 12),
    2: Fraction(1, 120),
    3: Fraction(17, 20160),
    4: Fraction(5, 58529),
    5: Fraction(2, 231067),
    6: Fraction(1, 1140271),
}


def rho_lookup(p_t):
    """Exact stability threshold ``rho`` for temporal degree ``p_t`` in [1, 6].

    The unstabilized temporal scheme with maximal-regularity splines is
    stable for a mode of frequency ``mu`` iff ``h_t < sqrt(rho / mu)``.
    """
    if p_t not in _RHO:
        raise ValueError(f"temporal degree {p_t} outside the tabulated range [1, 6]")
    return _RHO[p_t]


def delta_lookup(p_t):
    """Exact minimal penalty weight ``delta`` for temporal degree ``p_t`` in [1, 6]."""
    if p_t not in _DELTA:
        raise ValueError(f"temporal degree {p_t} outside the tabulated range [1, 6]")
    return _DELTA[p_t]


def _normalize_mode(mode):
    aliases = {"iga": "iga_penalty", "fem": "fem_projection"}
    mode = aliases.get(mode, mode)
    if mode not in ("none", "iga_penalty", "fem_projection"):
        raise ValueError(f"unknown stabilization mode {mode!r}")
    return mode


@dataclass(frozen=True)
class DiscretizationConfig:
    """Parameters defining one space-time discretization.

    ``None`` regularities mean maximal (``degree - 1``); ``delta=None`` with
    ``iga_penalty`` resolves to ``10**-p_time``.  ``n_elements_space`` may be
    a single int (same count in every direction) or a per-direction tuple.
    """

    d: int = 1
    p_space: int = 2
    p_time: int = 2
    n_elements_space: tuple = 8
    n_elements_time: int = 8
    regularity_space: int | None = None
    regularity_time: int | None = None
    T: float = 1.0
    mode: str = "iga_penalty"
    delta: float | None = None
    forcing: SeparableForcing | None = None
    domain: tuple = None

    def resolved(self):
        """Copy with every default filled in and the mode canonicalized."""
        if self.d not in (1, 2):
            raise ValueError(f"spatial dimension must be 1 or 2, got {self.d}")
        n_el = self.n_elements_space
        if np.isscalar(n_el):
            n_el = (int(n_el),) * self.d
        else:
            n_el = tuple(int(n) for n in n_el)
            if len(n_el) != self.d:
                raise ValueError(
                    f"{len(n_el)} spatial element counts given for d={self.d}"
                )
        mode = _normalize_mode(self.mode)
        reg_s = self.p_space - 1 if self.regularity_space is None else self.regularity_space
        reg_t = self.p_time - 1 if self.regularity_time is None else self.regularity_time
        delta = self.delta
        if mode == "iga_penalty" and delta is None:
            delta = 10.0 ** (-self.p_time)
        if mode != "iga_penalty":
            delta = 0.0
        domain = self.domain
        if domain is None:
            domain = ((0.0, 1.0),) * self.d
        else:
            domain = tuple((float(lo), float(hi)) for lo, hi in domain)
            if len(domain) != self.d:
                raise ValueError(f"{len(domain)} domain intervals given for d={self.d}")
        return replace(
            self,
            n_elements_space=n_el,
            mode=mode,
            regularity_space=reg_s,
            regularity_time=reg_t,
            delta=delta,
            domain=domain,
        )


@dataclass(frozen=True)
class SpaceTimeSystem:
    """Assembled space-time system: temporal/spatial matrices plus load vector."""

    temporal: TemporalMatrices
    spatial: SpatialOperators
    rhs: np.ndarray
    temporal_trial: object
    temporal_test: object
    config: DiscretizationConfig

    @property
    def n_s(self):
        return self.spatial.n_s

    @property
    def n_t(self):
        return self.temporal.n_t

    @property
    def n_dof(self):
        return self.n_s * self.n_t

    @property
    def h_s(self):
        return self.spatial.h_s

    @property
    def h_t(self):
        return self.temporal.h_t

    @property
    def spatial_spaces(self):
        return self.spatial.spaces


def build_system(config):
    """Assemble the space-time system described by a :class:`DiscretizationConfig`.

    Returns
    -------
    SpaceTimeSystem
    """
    cfg = config.resolved()
    spaces = tuple(
        build_space(
            make_knot_vector(n, cfg.p_space, cfg.regularity_space, interval),
            "clamped_both",
        )
        for n, interval in zip(cfg.n_elements_space, cfg.domain)
    )
    kv_t = make_knot_vector(
        cfg.n_elements_time, cfg.p_time, cfg.regularity_time, (0.0, cfg.T)
    )
    trial = build_space(kv_t, "zero_start")
    test = build_space(kv_t, "zero_end")
    temporal = assemble_temporal(trial, test, delta=cfg.delta, mode=cfg.mode)
    spatial = assemble_spatial(spaces)
    if cfg.forcing is not None:
        rhs = assemble_load(spaces, test, cfg.forcing)
    else:
        rhs = np.zeros(spatial.n_s * temporal.n_t)
    return SpaceTimeSystem(
        temporal=temporal,
        spatial=spatial,
        rhs=rhs,
        temporal_trial=trial,
        temporal_test=test,
        config=cfg,
    )


def apply_operator(system, x):
    """Matrix-free action of the space-time operator on a coefficient vector.

    Computes ``((M_t - P_t) (x) K_x) x - (K_t (x) M_x) x`` through the
    reshape identity without materializing the Kronecker products.  The input
    may be real or complex; the dtype is preserved.
    """
    x = np.asarray(x)
    n_s, n_t = system.n_s, system.n_t
    if x.shape != (n_s * n_t,):
        raise ValueError(f"expected vector of length {n_s * n_t}, got shape {x.shape}")
    X = x.reshape((n_s, n_t), order="F")
    W = system.temporal.stabilized_mass
    out = (system.spatial.K_x @ X) @ W.T - (system.spatial.M_x @ X) @ system.temporal.K_t.T
    return np.asarray(out).ravel(order="F")


def dense_size_cap(override=None):
    """Effective size cap for dense expansions (env var beats the default)."""
    if override is not None:
        return int(override)
    env = os.environ.get(DENSE_SIZE_CAP_ENV)
    if env is not None:
        return int(env)
    return _DEFAULT_DENSE_CAP


def assemble_dense(system, max_dof=None):
    """Explicit dense expansion of the space-time operator (debug oracle).

    Refuses systems larger than the size cap (default 20000 unknowns,
    overridable via the ``BIHW_MAX_DENSE`` environment variable or the
    ``max_dof`` argument).
    """
    cap = dense_size_cap(max_dof)
    if system.n_dof > cap:
        raise ValueError(
            f"dense expansion of {system.n_dof} unknowns exceeds the cap {cap}"
        )
    K_x = system.spatial.K_x.toarray()
    M_x = system.spatial.M_x.toarray()
    return np.kron(system.temporal.stabilized_mass, K_x) - np.kron(
        system.temporal.K_t, M_x
    )


def max_generalized_eigenvalue(K, M, dense_cutoff=2000, tol=1e-8, max_iter=10_000):
    """Largest ``lambda`` with ``K v = lambda M v`` for SPD ``M``.

    Uses a dense symmetric generalized eigensolve up to ``dense_cutoff``
    unknowns, and beyond that a power iteration on ``M^{-1} K`` applied
    through a sparse factorization of ``M``, converged to relative tolerance
    ``tol`` on the Rayleigh quotient.

    Raises
    ------
    NumericalError
        If the power iteration does not converge within ``max_iter`` steps.
    """
    n = K.shape[0]
    if n <= dense_cutoff:
        vals = scipy.linalg.eigh(
            np.asarray(K.todense()) if scipy.sparse.issparse(K) else np.asarray(K),
            np.asarray(M.todense()) if scipy.sparse.issparse(M) else np.asarray(M),
            eigvals_only=True,
        )
        return float(vals[-1])
    lu = scipy.sparse.linalg.splu(scipy.sparse.csc_matrix(M))
    rng = np.random.default_rng(7)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam_prev = 0.0
    for iteration in range(1, max_iter + 1):
        w = lu.solve(K @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            raise NumericalError("power iteration collapsed to the zero vector")
        v = w / norm
        Kv = K @ v
        lam = float(v @ Kv) / float(v @ (M @ v))
        if abs(lam - lam_prev) <= tol * abs(lam):
            return lam
        lam_prev = lam
    raise NumericalError(
        f"generalized eigenvalue iteration did not converge within {max_iter} steps"
    )


@dataclass(frozen=True)
class CflReport:
    """Outcome of the CFL diagnostic for one spatial operator and time step.

    ``satisfied`` is ``h_t < h_t_max`` with
    ``h_t_max = sqrt(rho / lambda_max)``.  ``advisory`` flags that the
    tabulated threshold assumes maximal temporal regularity, which the
    caller's discretization does not have.
    """

    lambda_max: float
    rho: Fraction
    h_t_max: float
    h_t: float
    satisfied: bool
    advisory: bool = False


def cfl_check(spatial, p_t, h_t, time_regularity=None):
    """CFL diagnostic: is ``h_t`` below the stability bound of the spatial pencil?

    Parameters
    ----------
    spatial : SpatialOperators
    p_t : int
        Temporal spline degree (1 through 6).
    h_t : float
        Temporal mesh size to check.
    time_regularity : int, optional
        Actual temporal regularity; when below ``p_t - 1`` the report is
        flagged advisory since the threshold table assumes maximal
        regularity.

    Returns
    -------
    CflReport
    """
    rho = rho_lookup(p_t)
    lam = max_generalized_eigenvalue(spatial.K_x, spatial.M_x)
    h_t_max = float(np.sqrt(float(rho) / lam))
    return CflReport(
        lambda_max=lam,
        rho=rho,
        h_t_max=h_t_max,
        h_t=float(h_t),
        satisfied=bool(h_t < h_t_max),
        advisory=time_regularity is not None and time_regularity < p_t - 1,
    )
