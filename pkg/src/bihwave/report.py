"""Study artifacts: delimited output, gnuplot-ready data files, and figures.

CSV files carry a versioned schema comment on the first line and use
``repr`` float formatting, so identical configurations produce byte-identical
files (wall-time columns excepted, since they measure the machine, not the
method).  Figures are rendered headlessly to PNG next to the delimited
output.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import final_time_slice

__all__ = [
    "CSV_SCHEMA_VERSION",
    "format_value",
    "write_csv",
    "write_dat",
    "convergence_figure",
    "stability_figure",
    "timing_figure",
    "solution_figure",
]

CSV_SCHEMA_VERSION = 1

_NORM_LABELS = {
    "err_L2L2": "L2(L2) error",
    "err_H1mix": "mixed H1 error",
    "err_X": "X-norm error",
}


def format_value(value):
    """Deterministic text form of a cell value."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    return str(value)


def write_csv(path, study, fieldnames, rows):
    """Write rows of dicts as CSV with a versioned schema comment line."""
    path = Path(path)
    lines = [f"# bihwave csv v{CSV_SCHEMA_VERSION} study={study}"]
    lines.append(",".join(fieldnames))
    for row in rows:
        lines.append(",".join(format_value(row.get(name)) for name in fieldnames))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_dat(path, xs, ys):
    """Two-column whitespace-separated data file (gnuplot-ready)."""
    path = Path(path)
    lines = [f"{format_value(float(x))} {format_value(float(y))}" for x, y in zip(xs, ys)]
    path.write_text("\n".join(lines) + "\n")
    return path


def _loglog_axes(ax, xlabel, ylabel):
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)


def convergence_figure(table, path):
    """Error-versus-h panels, one per norm, with per-degree curves."""
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
    degrees = sorted({row.p for row in table.rows})
    for ax, norm in zip(axes, _NORM_LABELS):
        for p in degrees:
            rows = table.rows_for(p)
            hs = [row.h for row in rows]
            errs = [getattr(row, norm) for row in rows]
            ax.plot(hs, errs, "o-", label=f"p={p}")
        _loglog_axes(ax, "h", _NORM_LABELS[norm])
        ax.legend(fontsize=8)
    fig.suptitle(f"convergence: {table.case}, {table.mode}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def stability_figure(report, path):
    """X-norm error growth curves per stabilization/regularity row."""
    fig, ax = plt.subplots(figsize=(5.2, 4))
    for row in report.rows:
        hs = [h for h, _ in row.errors]
        errs = [errs["err_X"] for _, errs in row.errors]
        errs = [min(e, 1e30) if np.isfinite(e) else 1e30 for e in errs]
        label = f"{row.mode}, C^{row.regularity_time} ({row.classification})"
        ax.plot(hs, errs, "o-", label=label)
    _loglog_axes(ax, "h", "X-norm error")
    ax.legend(fontsize=7)
    ax.set_title(f"stability: {report.case}, p={report.p}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def timing_figure(rows, path, p=None):
    """Solve time against problem size with the N^{4/3} reference slope."""
    fig, ax = plt.subplots(figsize=(5.2, 4))
    dofs = [row.n_dof for row in rows]
    times = [row.wall_time for row in rows]
    ax.plot(dofs, times, "o-", label="measured")
    anchor = times[0] / dofs[0] ** (4.0 / 3.0)
    ref = [anchor * n ** (4.0 / 3.0) for n in dofs]
    ax.plot(dofs, ref, "--", label="N^(4/3) reference")
    _loglog_axes(ax, "N_dof", "solve time [s]")
    ax.legend(fontsize=8)
    title = "solver scaling" if p is None else f"solver scaling, p={p}"
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def solution_figure(system, coeffs, case, path, n_plot=160):
    """Final-time snapshot of the computed solution (curve in 1D, map in 2D)."""
    spaces = system.spatial_spaces
    slice_coeffs = final_time_slice(coeffs, system)
    T = system.config.T
    fig, ax = plt.subplots(figsize=(5.2, 4))
    if len(spaces) == 1:
        a, b = spaces[0].interval
        xs = np.linspace(a, b, n_plot)
        values = spaces[0].basis_matrix(xs, 0) @ slice_coeffs
        ax.plot(xs, values, label="computed")
        ax.plot(xs, case.u(xs, T), "--", label="exact")
        ax.set_xlabel("x")
        ax.set_ylabel(f"u(x, T={format_value(float(T))})")
        ax.legend(fontsize=8)
    else:
        (ax0, bx0), (ay0, by0) = spaces[0].interval, spaces[1].interval
        xs = np.linspace(ax0, bx0, n_plot)
        ys = np.linspace(ay0, by0, n_plot)
        Bx = spaces[0].basis_matrix(xs, 0)
        By = spaces[1].basis_matrix(ys, 0)
        values = Bx @ slice_coeffs @ By.T
        mesh = ax.pcolormesh(xs, ys, values.T, shading="gouraud")
        fig.colorbar(mesh, ax=ax)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.set_title(f"u(x, y, T={format_value(float(T))})")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
