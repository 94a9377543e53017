"""Manufactured solutions, error norms, and the experiment drivers.

Errors are measured against closed-form exact solutions on per-span
Gauss grids with ``degree + 3`` points per direction, in three space-time
norms:

- ``err_L2L2``: relative L2 norm over the space-time cylinder;
- ``err_H1mix``: relative norm of ``(|grad e|^2 + |d_t e|^2)^(1/2)``;
- ``err_X``: relative norm of ``(|d_t e|^2 + |lap e|^2)^(1/2)``.

The drivers cover the three standard experiments at desk scale: convergence
rates under uniform refinement, the stability classification matrix over the
stabilization modes and temporal regularities, and the wall-time scaling of
the fast solver under space-time refinement.  Independent study cells are
pure build-solve-measure pipelines and may run concurrently.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import ForcingTerm, SeparableForcing, gauss_rule
from .errors import NumericalError
from .solver import flops_model, factorize_temporal, solve, solve_system
from .system import DiscretizationConfig, build_system, cfl_check

__all__ = [
    "ManufacturedCase",
    "ConvergenceRow",
    "ConvergenceTable",
    "StabilityRow",
    "StabilityReport",
    "TimingRow",
    "CflBoundaryReport",
    "manufactured_case",
    "error_norms_spacetime",
    "error_norms_final_time",
    "final_time_slice",
    "classify_stability",
    "convergence_study",
    "stability_study",
    "timing_study",
    "cfl_boundary_study",
    "fixed_dof_meshes",
    "config_for_case",
    "feasible",
]

_BLOWUP_CAP = 1e3  # any error beyond this marks a configuration unstable
_GROWTH_FACTOR = 10.0  # finest-vs-coarsest error growth marking instability


# -- manufactured solutions --------------------------------------------------

_PI = math.pi
_8PI4 = 8.0 * _PI**4


def _ones(t):
    return np.ones_like(np.asarray(t, dtype=float))


def _t_squared(t):
    return np.asarray(t, dtype=float) ** 2


def _sin_sq(x):
    return np.sin(_PI * x) ** 2


def _cos_two_pi(x):
    return np.cos(2.0 * _PI * x)


@dataclass(frozen=True)
class ManufacturedCase:
    """Closed-form exact solution with the derivatives and forcing it induces.

    The callables take the space coordinates followed by time, e.g.
    ``u(x, t)`` for ``d = 1`` and ``u(x, y, t)`` for ``d = 2``; all accept
    numpy arrays.  The forcing satisfies ``f = d_tt u + lap^2 u`` and the
    solution meets homogeneous initial and clamped boundary conditions.
    """

    name: str
    d: int
    u: callable
    u_t: callable
    grad: tuple
    lap: callable
    forcing: SeparableForcing


def _line1d_case():
    def u(x, t):
        return t**2 * _sin_sq(x)

    def u_t(x, t):
        return 2.0 * t * _sin_sq(x)

    def u_x(x, t):
        return t**2 * _PI * np.sin(2.0 * _PI * x)

    def lap(x, t):
        return t**2 * 2.0 * _PI**2 * _cos_two_pi(x)

    forcing = SeparableForcing(
        terms=(
            ForcingTerm(2.0, _ones, (_sin_sq,)),
            ForcingTerm(-_8PI4, _t_squared, (_cos_two_pi,)),
        )
    )
    return ManufacturedCase(
        name="line1d", d=1, u=u, u_t=u_t, grad=(u_x,), lap=lap, forcing=forcing
    )


def _square2d_case():
    def u(x, y, t):
        return t**2 * _sin_sq(x) * _sin_sq(y)

    def u_t(x, y, t):
        return 2.0 * t * _sin_sq(x) * _sin_sq(y)

    def u_x(x, y, t):
        return t**2 * _PI * np.sin(2.0 * _PI * x) * _sin_sq(y)

    def u_y(x, y, t):
        return t**2 * _PI * _sin_sq(x) * np.sin(2.0 * _PI * y)

    def lap(x, y, t):
        return (
            t**2
            * 2.0
            * _PI**2
            * (_cos_two_pi(x) * _sin_sq(y) + _sin_sq(x) * _cos_two_pi(y))
        )

    forcing = SeparableForcing(
        terms=(
            ForcingTerm(2.0, _ones, (_sin_sq, _sin_sq)),
            ForcingTerm(_8PI4, _t_squared, (_cos_two_pi, _cos_two_pi)),
            ForcingTerm(-_8PI4, _t_squared, (_cos_two_pi, _sin_sq)),
            ForcingTerm(-_8PI4, _t_squared, (_sin_sq, _cos_two_pi)),
        )
    )
    return ManufacturedCase(
        name="square2d",
        d=2,
        u=u,
        u_t=u_t,
        grad=(u_x, u_y),
        lap=lap,
        forcing=forcing,
    )


_CASES = {"line1d": _line1d_case, "square2d": _square2d_case}


def manufactured_case(name):
    """Manufactured solution by name, ``"line1d"`` or ``"square2d"``."""
    try:
        return _CASES[name]()
    except KeyError:
        raise ValueError(
            f"unknown case {name!r}; expected one of {sorted(_CASES)}"
        ) from None


# -- quadrature grids and field evaluation ------------------------------------


def _quad_grid(space, n_extra=3):
    """Per-span Gauss points and weights over a space's parameter interval."""
    rule = gauss_rule(space.degree + n_extra)
    breaks = space.breakpoints
    xs, ws = [], []
    for x0, x1 in zip(breaks[:-1], breaks[1:]):
        x, w = rule.mapped(x0, x1)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def _coeff_tensor(coeffs, system):
    dims = [space.dim for space in system.spatial_spaces] + [system.n_t]
    return np.asarray(coeffs).reshape(dims, order="F")


def _spacetime_field(coeff_tensor, space_mats, time_mat):
    """Contract a coefficient tensor with per-direction collocation matrices."""
    out = np.tensordot(coeff_tensor, time_mat, axes=([coeff_tensor.ndim - 1], [1]))
    for axis, B in enumerate(space_mats):
        out = np.moveaxis(np.tensordot(B, out, axes=([1], [axis])), 0, axis)
    return out


def error_norms_spacetime(coeffs, system, case):
    """Relative space-time error norms of a coefficient vector.

    Parameters
    ----------
    coeffs : ndarray
        Solution coefficients of length ``n_dof`` from a solve on this
        system's discretization.
    system : SpaceTimeSystem
    case : ManufacturedCase

    Returns
    -------
    dict with keys ``err_L2L2``, ``err_H1mix``, ``err_X``.
    """
    if len(coeffs) != system.n_dof:
        raise ValueError(f"expected {system.n_dof} coefficients, got {len(coeffs)}")
    spaces = system.spatial_spaces
    d = len(spaces)
    grids = [_quad_grid(space) for space in spaces]
    t_grid, t_w = _quad_grid(system.temporal_trial)
    B0 = [space.basis_matrix(g[0], 0) for space, g in zip(spaces, grids)]
    B1 = [space.basis_matrix(g[0], 1) for space, g in zip(spaces, grids)]
    B2 = [space.basis_matrix(g[0], 2) for space, g in zip(spaces, grids)]
    C = _coeff_tensor(coeffs, system)

    w_space = grids[0][1]
    if d == 2:
        w_space = np.multiply.outer(grids[0][1], grids[1][1])

    num = np.zeros(4)  # e, e_t, |grad e|, lap e, squared accumulators
    den = np.zeros(4)
    mesh = np.meshgrid(*[g[0] for g in grids], indexing="ij")

    # chunk over temporal spans to bound memory
    n_per_span = system.temporal_trial.degree + 3
    Tt0 = system.temporal_trial.basis_matrix(t_grid, 0)
    Tt1 = system.temporal_trial.basis_matrix(t_grid, 1)
    for lo in range(0, len(t_grid), n_per_span):
        hi = lo + n_per_span
        ts = t_grid[lo:hi]
        wt = t_w[lo:hi]
        U = _spacetime_field(C, B0, Tt0[lo:hi])
        U_t = _spacetime_field(C, B0, Tt1[lo:hi])
        if d == 1:
            G = [_spacetime_field(C, [B1[0]], Tt0[lo:hi])]
            L = _spacetime_field(C, [B2[0]], Tt0[lo:hi])
        else:
            G = [
                _spacetime_field(C, [B1[0], B0[1]], Tt0[lo:hi]),
                _spacetime_field(C, [B0[0], B1[1]], Tt0[lo:hi]),
            ]
            L = _spacetime_field(C, [B2[0], B0[1]], Tt0[lo:hi]) + _spacetime_field(
                C, [B0[0], B2[1]], Tt0[lo:hi]
            )
        tt = np.broadcast_to(ts, U.shape[-1:])
        args = [m[..., None] for m in mesh]
        exact = case.u(*args, tt)
        exact_t = case.u_t(*args, tt)
        exact_g = [g(*args, tt) for g in case.grad]
        exact_l = case.lap(*args, tt)

        W = w_space[..., None] * wt
        num[0] += np.sum(W * (U - exact) ** 2)
        den[0] += np.sum(W * exact**2)
        num[1] += np.sum(W * (U_t - exact_t) ** 2)
        den[1] += np.sum(W * exact_t**2)
        for Gi, gi in zip(G, exact_g):
            num[2] += np.sum(W * (Gi - gi) ** 2)
            den[2] += np.sum(W * gi**2)
        num[3] += np.sum(W * (L - exact_l) ** 2)
        den[3] += np.sum(W * exact_l**2)

    return {
        "err_L2L2": float(np.sqrt(num[0] / den[0])),
        "err_H1mix": float(np.sqrt((num[2] + num[1]) / (den[2] + den[1]))),
        "err_X": float(np.sqrt((num[1] + num[3]) / (den[1] + den[3]))),
    }


def final_time_slice(coeffs, system):
    """Spatial coefficients of the solution's trace at the final time.

    Evaluates the temporal basis at ``t = T`` (left limit) and contracts; for
    an open knot vector this extracts the last temporal coefficient block.
    """
    C = _coeff_tensor(coeffs, system)
    row = system.temporal_trial.basis_matrix([system.config.T], 0)
    return np.tensordot(C, row[0], axes=([C.ndim - 1], [0]))


def error_norms_final_time(coeffs, system, case):
    """Relative spatial error norms of the trace at the final time.

    Returns
    -------
    dict with keys ``L2`` (values), ``H1`` (gradient), and ``H2``
    (Laplacian), each relative to the exact trace.
    """
    spaces = system.spatial_spaces
    d = len(spaces)
    T = system.config.T
    slice_coeffs = final_time_slice(coeffs, system)
    grids = [_quad_grid(space) for space in spaces]
    B0 = [space.basis_matrix(g[0], 0) for space, g in zip(spaces, grids)]
    B1 = [space.basis_matrix(g[0], 1) for space, g in zip(spaces, grids)]
    B2 = [space.basis_matrix(g[0], 2) for space, g in zip(spaces, grids)]

    def contract(mats):
        out = slice_coeffs
        for axis, B in enumerate(mats):
            out = np.moveaxis(np.tensordot(B, out, axes=([1], [axis])), 0, axis)
        return out

    mesh = np.meshgrid(*[g[0] for g in grids], indexing="ij")
    W = grids[0][1]
    if d == 2:
        W = np.multiply.outer(grids[0][1], grids[1][1])

    U = contract(B0)
    if d == 1:
        G = [contract([B1[0]])]
        L = contract([B2[0]])
    else:
        G = [contract([B1[0], B0[1]]), contract([B0[0], B1[1]])]
        L = contract([B2[0], B0[1]]) + contract([B0[0], B2[1]])

    exact = case.u(*mesh, T)
    exact_g = [g(*mesh, T) for g in case.grad]
    exact_l = case.lap(*mesh, T)

    num_l2 = np.sum(W * (U - exact) ** 2)
    den_l2 = np.sum(W * exact**2)
    num_h1 = sum(np.sum(W * (Gi - gi) ** 2) for Gi, gi in zip(G, exact_g))
    den_h1 = sum(np.sum(W * gi**2) for gi in exact_g)
    num_h2 = np.sum(W * (L - exact_l) ** 2)
    den_h2 = np.sum(W * exact_l**2)
    return {
        "L2": float(np.sqrt(num_l2 / den_l2)),
        "H1": float(np.sqrt(num_h1 / den_h1)),
        "H2": float(np.sqrt(num_h2 / den_h2)),
    }


# -- study drivers -------------------------------------------------------------


def config_for_case(case, p, h, mode="iga_penalty", regularity_time=None, delta=None,
                    p_time=None, regularity_space=None, T=1.0):
    """Discretization config for a manufactured case at mesh size ``h = h_s = h_t``."""
    n = int(round(1.0 / h))
    return DiscretizationConfig(
        d=case.d,
        p_space=p,
        p_time=p if p_time is None else p_time,
        n_elements_space=n,
        n_elements_time=int(round(T / h)),
        regularity_space=regularity_space,
        regularity_time=regularity_time,
        T=T,
        mode=mode,
        delta=delta,
        forcing=case.forcing,
    )


def feasible(config):
    """Whether the clamped spatial spaces of a config have positive dimension."""
    cfg = config.resolved()
    mult = cfg.p_space - cfg.regularity_space
    for n in cfg.n_elements_space:
        m = cfg.p_space + 1 + (n - 1) * mult
        if m - 4 < 1:
            return False
    return True


def _run_cells(fn, items, jobs):
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


@dataclass(frozen=True)
class ConvergenceRow:
    p: int
    h: float
    n_dof: int
    err_L2L2: float
    err_H1mix: float
    err_X: float
    rate_L2L2: float | None = None
    rate_H1mix: float | None = None
    rate_X: float | None = None
    wall_time: float = 0.0


@dataclass(frozen=True)
class ConvergenceTable:
    """Rows of a convergence study; rates relate consecutive uniform refinements."""

    case: str
    mode: str
    rows: tuple

    def rows_for(self, p):
        return [row for row in self.rows if row.p == p]

    def finest_rates(self, p):
        """Observed rates between the two finest meshes for degree ``p``."""
        rows = self.rows_for(p)
        if len(rows) < 2:
            raise ValueError(f"need at least two meshes for degree {p}")
        last = rows[-1]
        return {
            "rate_L2L2": last.rate_L2L2,
            "rate_H1mix": last.rate_H1mix,
            "rate_X": last.rate_X,
        }


def convergence_study(case, degrees, h_list, mode="iga_penalty",
                      regularity_time=None, delta=None, jobs=1):
    """Convergence rates under uniform ``h``-halving for each degree.

    Infeasible cells (clamped space would be empty) are skipped.  Rates are
    ``log2(e_h / e_{h/2})`` between consecutive rows of equal degree.

    Returns
    -------
    ConvergenceTable
    """
    cells = []
    for p in degrees:
        for h in sorted(h_list, reverse=True):
            cfg = config_for_case(
                case, p, h, mode=mode, regularity_time=regularity_time, delta=delta
            )
            if feasible(cfg):
                cells.append((p, h, cfg))

    def run(cell):
        p, h, cfg = cell
        t0 = time.perf_counter()
        system = build_system(cfg)
        report = solve_system(system)
        errs = error_norms_spacetime(report.solution, system, case)
        return ConvergenceRow(
            p=p,
            h=h,
            n_dof=system.n_dof,
            err_L2L2=errs["err_L2L2"],
            err_H1mix=errs["err_H1mix"],
            err_X=errs["err_X"],
            wall_time=time.perf_counter() - t0,
        )

    rows = _run_cells(run, cells, jobs)
    # attach observed rates between consecutive uniform refinements
    out = []
    for i, row in enumerate(rows):
        prev = rows[i - 1] if i > 0 else None
        if prev is not None and prev.p == row.p and abs(prev.h - 2 * row.h) < 1e-12:
            out.append(
                replace(
                    row,
                    rate_L2L2=math.log2(prev.err_L2L2 / row.err_L2L2),
                    rate_H1mix=math.log2(prev.err_H1mix / row.err_H1mix),
                    rate_X=math.log2(prev.err_X / row.err_X),
                )
            )
        else:
            out.append(row)
    return ConvergenceTable(case=case.name, mode=mode, rows=tuple(out))


def classify_stability(errors_by_h):
    """Classify an error sequence over an ``h``-sweep as stable or unstable.

    A configuration is unstable if the X-norm error at the finest mesh
    exceeds 10x the X-norm error at the coarsest, or if any error anywhere in
    the sweep exceeds 1e3 (non-finite values count as exceeding); otherwise
    it is stable.

    Parameters
    ----------
    errors_by_h : sequence of (h, dict)
        Mesh size and the error dict of :func:`error_norms_spacetime`.
    """
    if not errors_by_h:
        raise ValueError("cannot classify an empty sweep")

    def bad(value):
        return not np.isfinite(value) or value > _BLOWUP_CAP

    if any(bad(v) for _, errs in errors_by_h for v in errs.values()):
        return "unstable"
    h_sorted = sorted(errors_by_h, key=lambda item: item[0])
    finest = h_sorted[0][1]["err_X"]
    coarsest = h_sorted[-1][1]["err_X"]
    if finest > _GROWTH_FACTOR * coarsest:
        return "unstable"
    return "stable"


@dataclass(frozen=True)
class StabilityRow:
    mode: str
    regularity_space: int
    regularity_time: int
    classification: str
    errors: tuple  # (h, errs dict or None for failed solves)


@dataclass(frozen=True)
class StabilityReport:
    case: str
    p: int
    rows: tuple


def stability_study(case, p, h_list, configs, delta=None, jobs=1):
    """Stability classification over an ``h_s = h_t`` sweep for several setups.

    Parameters
    ----------
    case : ManufacturedCase
    p : int
        Spline degree in space and time.
    h_list : sequence of float
        Mesh sizes of the sweep.
    configs : sequence of (mode, regularity_time)
        Stabilization mode and temporal regularity per study row; spatial
        regularity is maximal.
    delta : float, optional
        Penalty override for ``iga_penalty`` rows.

    Returns
    -------
    StabilityReport
        Solver failures inside the sweep count as blow-up (infinite error).
    """
    inf_errors = {"err_L2L2": np.inf, "err_H1mix": np.inf, "err_X": np.inf}

    def run(entry):
        mode, reg_time = entry
        points = []
        for h in sorted(h_list, reverse=True):
            cfg = config_for_case(
                case, p, h, mode=mode, regularity_time=reg_time, delta=delta
            )
            if not feasible(cfg):
                continue
            try:
                system = build_system(cfg)
                report = solve_system(system)
                with np.errstate(over="ignore", invalid="ignore"):
                    errs = error_norms_spacetime(report.solution, system, case)
            except (NumericalError, FloatingPointError):
                errs = dict(inf_errors)
            points.append((h, errs))
        cfg0 = config_for_case(case, p, max(h_list), mode=mode, regularity_time=reg_time)
        resolved = cfg0.resolved()
        return StabilityRow(
            mode=resolved.mode,
            regularity_space=resolved.regularity_space,
            regularity_time=resolved.regularity_time,
            classification=classify_stability(points),
            errors=tuple(points),
        )

    rows = _run_cells(run, list(configs), jobs)
    return StabilityReport(case=case.name, p=p, rows=tuple(rows))


@dataclass(frozen=True)
class TimingRow:
    h: float
    n_dof: int
    wall_time: float
    growth_factor: float | None
    flops_predicted: float
    flops_growth: float | None


def timing_study(case, p, h_list, repeats=3, mode="iga_penalty"):
    """Wall time of the fast solve under uniform space-time refinement.

    Each level is timed ``repeats`` times (factorization plus solve) and the
    median is reported, together with growth factors between consecutive
    levels and the cost-model predictions.

    Returns
    -------
    list of TimingRow
    """
    if len(h_list) < 3:
        raise ValueError("timing study needs at least 3 refinement levels")
    rows = []
    prev_time = None
    prev_flops = None
    for h in sorted(h_list, reverse=True):
        cfg = config_for_case(case, p, h, mode=mode)
        if not feasible(cfg):
            raise ValueError(f"infeasible mesh h={h} for degree {p}")
        system = build_system(cfg)
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            fact = factorize_temporal(
                system.temporal.K_t, system.temporal.stabilized_mass
            )
            solve(system, fact)
            times.append(time.perf_counter() - t0)
        wall = float(np.median(times))
        flops = flops_model(system.n_s, system.n_t, p, case.d)
        rows.append(
            TimingRow(
                h=h,
                n_dof=system.n_dof,
                wall_time=wall,
                growth_factor=None if prev_time is None else wall / prev_time,
                flops_predicted=flops,
                flops_growth=None if prev_flops is None else flops / prev_flops,
            )
        )
        prev_time = wall
        prev_flops = flops
    return rows


@dataclass(frozen=True)
class CflBoundaryReport:
    """Empirical stability boundary of an ``h_t``-sweep at fixed ``h_s``.

    ``boundary`` is the geometric midpoint between the largest stable and the
    smallest unstable temporal mesh size observed; ``h_t_max`` is the
    eigenvalue-based prediction ``sqrt(rho / lambda_max)``.
    """

    h_s: float
    lambda_max: float
    h_t_max: float
    sweep: tuple  # (h_t, err_X, stable flag)
    boundary: float

    @property
    def boundary_ratio(self):
        return self.boundary / self.h_t_max


def cfl_boundary_study(case=None, p=2, h_s=0.125, factors=None, T=1.0):
    """Locate the empirical temporal stability boundary of the unstabilized scheme.

    At fixed spatial mesh ``h_s``, sweeps the temporal mesh size around the
    predicted bound and marks each point stable when its X-norm error stays
    within 10x of the sweep's error floor (and below 1e3).  The boundary is
    the geometric midpoint across the stable/unstable transition.

    Returns
    -------
    CflBoundaryReport
    """
    if case is None:
        case = manufactured_case("line1d")
    if factors is None:
        factors = np.geomspace(0.25, 4.0, 17)
    n_s_el = int(round(1.0 / h_s))
    probe_cfg = DiscretizationConfig(
        d=case.d,
        p_space=p,
        p_time=p,
        n_elements_space=n_s_el,
        n_elements_time=2,
        T=T,
        mode="none",
        forcing=case.forcing,
    )
    probe = build_system(probe_cfg)
    report = cfl_check(probe.spatial, p, h_t=1.0)
    h_t_max = report.h_t_max

    entries = []
    seen = set()
    for factor in sorted(factors):
        n_el = max(p + 1, int(round(T / (factor * h_t_max))))
        if n_el in seen:
            continue
        seen.add(n_el)
        cfg = DiscretizationConfig(
            d=case.d,
            p_space=p,
            p_time=p,
            n_elements_space=n_s_el,
            n_elements_time=n_el,
            T=T,
            mode="none",
            forcing=case.forcing,
        )
        system = build_system(cfg)
        try:
            solve_report = solve_system(system)
            with np.errstate(over="ignore", invalid="ignore"):
                errs = error_norms_spacetime(solve_report.solution, system, case)
            err = errs["err_X"]
        except NumericalError:
            err = np.inf
        entries.append((T / n_el, err))

    entries.sort(key=lambda item: item[0])
    finite = [err for _, err in entries if np.isfinite(err)]
    floor = min(finite) if finite else np.inf
    sweep = tuple(
        (h, err, bool(np.isfinite(err) and err <= max(10.0 * floor, 1e-12) and err <= _BLOWUP_CAP))
        for h, err in entries
    )
    boundary = sweep[-1][0]
    for i, (h, _, stable) in enumerate(sweep):
        if not stable:
            boundary = math.sqrt(h * sweep[i - 1][0]) if i > 0 else h
            break
    return CflBoundaryReport(
        h_s=1.0 / n_s_el,
        lambda_max=report.lambda_max,
        h_t_max=h_t_max,
        sweep=sweep,
        boundary=float(boundary),
    )


def fixed_dof_meshes(p, mode="iga_penalty", target=8400, max_elements=600):
    """Integer 1D mesh counts with ``N_dof`` nearest a target and ``h_t ~ h_s``.

    For the maximal-regularity discretization the unknown counts are
    ``n_s = n_x + p - 4`` and ``n_t = n_m + p - 1``; for ``fem_projection``
    the comparison discretization uses C^1 splines in space and C^0 in time,
    giving ``n_s = n_x (p - 1) - 2`` and ``n_t = n_m p``.  The search
    minimizes ``|n_s n_t - target|`` subject to ``0.5 <= h_s / h_t <= 2``,
    tie-broken toward equal mesh sizes.

    Returns
    -------
    (n_elements_space, n_elements_time, n_dof)
    """
    mode = {"iga": "iga_penalty", "fem": "fem_projection"}.get(mode, mode)
    if mode == "fem_projection":
        def dims(n_x, n_m):
            return n_x * (p - 1) - 2, n_m * p
    else:
        def dims(n_x, n_m):
            return n_x + p - 4, n_m + p - 1

    best = None
    for n_x in range(2, max_elements):
        n_s, _ = dims(n_x, 1)
        if n_s < 1:
            continue
        for n_m in range(max(2, n_x // 2), min(max_elements, 2 * n_x) + 1):
            n_s, n_t = dims(n_x, n_m)
            if n_t < 1:
                continue
            n_dof = n_s * n_t
            key = (abs(n_dof - target), abs(math.log(n_m / n_x)))
            if best is None or key < best[0]:
                best = (key, (n_x, n_m, n_dof))
    if best is None:
        raise ValueError(f"no feasible mesh pair for degree {p} and mode {mode}")
    return best[1]
