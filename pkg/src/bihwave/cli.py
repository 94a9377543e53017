"""Command-line front end for the solve, convergence, stability and timing studies.

Every study writes ``results.csv`` (versioned schema), ``summary.txt``, the
effective configuration (``effective.cfg``), gnuplot-ready ``*.dat`` files
for its sweeps, and PNG figures unless ``--no-figures`` is given.

Configuration files are flat ``key = value`` text with one section per study
kind, e.g.::

    [convergence]
    case = square2d
    p = 2,3
    h = 0.03125

Command-line flags override file values, which override the per-study
defaults.  Unknown keys in a config file are rejected.

Exit codes: 0 on success, 1 on numerical failure, 2 on configuration errors.
All errors are printed to stderr with an ``error:`` prefix.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import analysis, report
from .errors import NumericalError
from .solver import solve_system
from .system import build_system, cfl_check

__all__ = ["StudyConfig", "run", "main"]

STUDY_KINDS = ("solve", "convergence", "stability", "timing")

_MODE_CHOICES = ("none", "iga", "fem")


@dataclass(frozen=True)
class StudyConfig:
    """Effective settings of one study run; every field has a default."""

    kind: str
    case: str = "line1d"
    p: str = "2"
    h: float = 0.125
    h_start: float = 0.5
    mode: str = "iga"
    modes: str = "none,iga,fem"
    delta: float | None = None
    regularity_time: int | None = None
    repeats: int = 3
    jobs: int = 1
    out: str = "bihwave-out"
    crosscheck_dense: bool = False
    figures: bool = True

    def degrees(self):
        return [int(part) for part in str(self.p).split(",") if part.strip()]

    def h_sweep(self):
        """Halving sweep from ``h_start`` down to ``h`` inclusive."""
        if self.h > self.h_start:
            raise ValueError(
                f"finest mesh size h={self.h} exceeds the starting size {self.h_start}"
            )
        hs = []
        value = self.h_start
        while value > self.h * (1 + 1e-9):
            hs.append(value)
            value /= 2.0
        hs.append(self.h)
        return hs

    def mode_list(self):
        modes = [part.strip() for part in self.modes.split(",") if part.strip()]
        for mode in modes:
            if mode not in _MODE_CHOICES:
                raise ValueError(
                    f"unknown stabilization mode {mode!r}; expected one of {_MODE_CHOICES}"
                )
        return modes


_DEFAULTS = {
    "solve": StudyConfig(kind="solve", case="line1d", p="2", h=0.125),
    "convergence": StudyConfig(kind="convergence", case="square2d", p="2,3", h=0.0625),
    "stability": StudyConfig(kind="stability", case="square2d", p="3", h=0.0625),
    "timing": StudyConfig(
        kind="timing", case="square2d", p="2", h=0.03125, h_start=0.125
    ),
}

_FIELD_TYPES = {
    "case": str,
    "p": str,
    "h": float,
    "h_start": float,
    "mode": str,
    "modes": str,
    "delta": float,
    "regularity_time": int,
    "repeats": int,
    "jobs": int,
    "out": str,
    "crosscheck_dense": bool,
    "figures": bool,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(2)


def _build_parser():
    parser = _Parser(
        prog="bihwave",
        description=(
            "Space-time spline studies for the clamped biharmonic wave "
            "equation: single solves, convergence rates, stability "
            "classification, and solver scaling."
        ),
        epilog=(
            "Config files hold one [study] section of key = value pairs using "
            "the long flag names (underscores for dashes). Precedence: flags "
            "over file over defaults. The BIHW_MAX_DENSE environment variable "
            "overrides the dense-oracle size cap."
        ),
    )
    sub = parser.add_subparsers(dest="kind", metavar="|".join(STUDY_KINDS))
    for kind in STUDY_KINDS:
        p = sub.add_parser(kind, description=f"run the {kind} study")
        p.add_argument("--case", choices=("line1d", "square2d"), help="manufactured case")
        p.add_argument("--p", help="spline degree, or comma-separated degrees")
        p.add_argument("--h", type=float, help="(finest) mesh size, h_s = h_t")
        p.add_argument("--h-start", type=float, dest="h_start",
                       help="coarsest mesh size of a sweep")
        p.add_argument("--mode", choices=_MODE_CHOICES, help="stabilization mode")
        p.add_argument("--modes", help="comma-separated modes (stability study)")
        p.add_argument("--delta", type=float, help="penalty weight override")
        p.add_argument("--regularity-time", type=int, dest="regularity_time",
                       help="temporal spline regularity (default: maximal)")
        p.add_argument("--repeats", type=int, help="timing repetitions per level")
        p.add_argument("--jobs", type=int, help="worker threads for study cells")
        p.add_argument("--out", help="output directory")
        p.add_argument("--config", help="configuration file (key = value sections)")
        p.add_argument("--crosscheck-dense", action="store_true", default=None,
                       dest="crosscheck_dense",
                       help="also solve with the dense oracle and record the deviation")
        p.add_argument("--figures", action="store_true", default=None,
                       help="render figures (default)")
        p.add_argument("--no-figures", action="store_false", default=None,
                       dest="figures", help="skip figure rendering")
    return parser


def _parse_value(key, text):
    kind = _FIELD_TYPES[key]
    text = text.strip()
    if text == "":
        return None
    if kind is bool:
        lowered = text.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"cannot parse boolean value {text!r} for key {key!r}")
    return kind(text)


def _read_config_file(path, kind):
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ValueError(f"config file not found: {path}")
    if not parser.has_section(kind):
        raise ValueError(f"config file {path} has no [{kind}] section")
    values = {}
    for key, text in parser.items(kind):
        if key == "kind":
            continue
        if key not in _FIELD_TYPES:
            raise ValueError(f"unknown config key {key!r} in [{kind}]")
        values[key] = _parse_value(key, text)
    return values


def _effective_config(args):
    if args.kind is None:
        raise ValueError(f"missing study kind; expected one of {STUDY_KINDS}")
    cfg = _DEFAULTS[args.kind]
    if args.config:
        cfg = replace(cfg, **_read_config_file(args.config, args.kind))
    overrides = {
        name: getattr(args, name)
        for name in _FIELD_TYPES
        if getattr(args, name, None) is not None
    }
    return replace(cfg, **overrides)


def _write_effective_config(cfg, out_dir):
    parser = configparser.ConfigParser()
    values = {}
    for f in fields(cfg):
        if f.name == "kind":
            continue
        value = getattr(cfg, f.name)
        values[f.name] = "" if value is None else str(value)
    parser[cfg.kind] = values
    path = out_dir / "effective.cfg"
    with open(path, "w") as fh:
        parser.write(fh)
    return path


def _reg_time(cfg):
    return cfg.regularity_time


def _run_solve(cfg, out_dir):
    case = analysis.manufactured_case(cfg.case)
    p = cfg.degrees()[0]
    dcfg = analysis.config_for_case(
        case, p, cfg.h, mode=cfg.mode, regularity_time=_reg_time(cfg), delta=cfg.delta
    )
    system = build_system(dcfg)
    solve_report = solve_system(system, crosscheck_dense=cfg.crosscheck_dense)
    errs = analysis.error_norms_spacetime(solve_report.solution, system, case)
    final = analysis.error_norms_final_time(solve_report.solution, system, case)
    resolved = system.config
    cfl = cfl_check(
        system.spatial, resolved.p_time, system.h_t,
        time_regularity=resolved.regularity_time,
    )

    row = {
        "case": cfg.case,
        "p": p,
        "h": cfg.h,
        "mode": resolved.mode,
        "n_dof": system.n_dof,
        "err_L2L2": errs["err_L2L2"],
        "err_H1mix": errs["err_H1mix"],
        "err_X": errs["err_X"],
        "final_L2": final["L2"],
        "final_H1": final["H1"],
        "final_H2": final["H2"],
        "relative_residual": solve_report.relative_residual,
        "flops_estimate": solve_report.flops_estimate,
        "wall_time": solve_report.wall_time,
    }
    report.write_csv(out_dir / "results.csv", "solve", list(row), [row])

    lines = [
        "study = solve",
        f"case = {cfg.case}",
        f"p = {p}",
        f"h = {format(cfg.h, 'g')}",
        "",
        solve_report.summary(),
        "",
        f"err_L2L2 = {errs['err_L2L2']:.6e}",
        f"err_H1mix = {errs['err_H1mix']:.6e}",
        f"err_X = {errs['err_X']:.6e}",
        f"final_L2 = {final['L2']:.6e}",
        f"final_H1 = {final['H1']:.6e}",
        f"final_H2 = {final['H2']:.6e}",
        "",
        f"cfl_lambda_max = {cfl.lambda_max:.6e}",
        f"cfl_h_t_max = {cfl.h_t_max:.6e}",
        f"cfl_satisfied = {cfl.satisfied}",
        f"cfl_advisory = {cfl.advisory}",
        f"cfl_ht_max_over_hs2 = {cfl.h_t_max / system.h_s**2:.6e}",
    ]
    (out_dir / "summary.txt").write_text("\n".join(lines) + "\n")
    if cfg.figures:
        report.solution_figure(system, solve_report.solution, case, out_dir / "solution.png")


def _run_convergence(cfg, out_dir):
    case = analysis.manufactured_case(cfg.case)
    table = analysis.convergence_study(
        case,
        cfg.degrees(),
        cfg.h_sweep(),
        mode=cfg.mode,
        regularity_time=_reg_time(cfg),
        delta=cfg.delta,
        jobs=cfg.jobs,
    )
    fieldnames = [
        "case", "mode", "p", "h", "n_dof",
        "err_L2L2", "rate_L2L2", "err_H1mix", "rate_H1mix", "err_X", "rate_X",
        "wall_time",
    ]
    rows = []
    for r in table.rows:
        rows.append(
            {
                "case": table.case, "mode": table.mode, "p": r.p, "h": r.h,
                "n_dof": r.n_dof,
                "err_L2L2": r.err_L2L2, "rate_L2L2": r.rate_L2L2,
                "err_H1mix": r.err_H1mix, "rate_H1mix": r.rate_H1mix,
                "err_X": r.err_X, "rate_X": r.rate_X,
                "wall_time": r.wall_time,
            }
        )
    report.write_csv(out_dir / "results.csv", "convergence", fieldnames, rows)

    lines = ["study = convergence", f"case = {cfg.case}", f"mode = {table.mode}"]
    for p in sorted({r.p for r in table.rows}):
        prows = table.rows_for(p)
        for norm in ("err_L2L2", "err_H1mix", "err_X"):
            report.write_dat(
                out_dir / f"convergence_p{p}_{norm}.dat",
                [r.h for r in prows],
                [getattr(r, norm) for r in prows],
            )
        rates = table.finest_rates(p)
        lines.append(
            f"p={p}: rate_L2L2={rates['rate_L2L2']:.3f} "
            f"rate_H1mix={rates['rate_H1mix']:.3f} rate_X={rates['rate_X']:.3f}"
        )
    (out_dir / "summary.txt").write_text("\n".join(lines) + "\n")
    if cfg.figures:
        report.convergence_figure(table, out_dir / "convergence.png")


def _stability_configs(cfg, p):
    if cfg.regularity_time is not None:
        return [(mode, cfg.regularity_time) for mode in cfg.mode_list()]
    per_mode = {
        "none": [p - 1],
        "iga": [p - 1, p - 2, 0],
        "fem": [0, p - 1],
    }
    out = []
    for mode in cfg.mode_list():
        for reg in per_mode[mode]:
            entry = (mode, max(reg, 0))
            if entry not in out:
                out.append(entry)
    return out


def _run_stability(cfg, out_dir):
    case = analysis.manufactured_case(cfg.case)
    p = cfg.degrees()[0]
    study = analysis.stability_study(
        case, p, cfg.h_sweep(), _stability_configs(cfg, p), delta=cfg.delta,
        jobs=cfg.jobs,
    )
    fieldnames = [
        "case", "p", "mode", "regularity_space", "regularity_time", "h",
        "err_L2L2", "err_H1mix", "err_X", "classification",
    ]
    rows = []
    for r in study.rows:
        for h, errs in r.errors:
            rows.append(
                {
                    "case": study.case, "p": p, "mode": r.mode,
                    "regularity_space": r.regularity_space,
                    "regularity_time": r.regularity_time, "h": h,
                    "err_L2L2": errs["err_L2L2"],
                    "err_H1mix": errs["err_H1mix"],
                    "err_X": errs["err_X"],
                    "classification": r.classification,
                }
            )
        report.write_dat(
            out_dir / f"stability_{r.mode}_Ct{r.regularity_time}_err_X.dat",
            [h for h, _ in r.errors],
            [errs["err_X"] for _, errs in r.errors],
        )
    report.write_csv(out_dir / "results.csv", "stability", fieldnames, rows)
    lines = ["study = stability", f"case = {cfg.case}", f"p = {p}"]
    for r in study.rows:
        lines.append(
            f"mode={r.mode} C^{r.regularity_time} in time: {r.classification}"
        )
    (out_dir / "summary.txt").write_text("\n".join(lines) + "\n")
    if cfg.figures:
        report.stability_figure(study, out_dir / "stability.png")


def _run_timing(cfg, out_dir):
    case = analysis.manufactured_case(cfg.case)
    p = cfg.degrees()[0]
    rows = analysis.timing_study(
        case, p, cfg.h_sweep(), repeats=cfg.repeats, mode=cfg.mode
    )
    fieldnames = [
        "case", "p", "h", "n_dof", "wall_time", "growth_factor",
        "flops_predicted", "flops_growth",
    ]
    csv_rows = [
        {
            "case": cfg.case, "p": p, "h": r.h, "n_dof": r.n_dof,
            "wall_time": r.wall_time, "growth_factor": r.growth_factor,
            "flops_predicted": r.flops_predicted, "flops_growth": r.flops_growth,
        }
        for r in rows
    ]
    report.write_csv(out_dir / "results.csv", "timing", fieldnames, csv_rows)
    report.write_dat(
        out_dir / f"timing_p{p}.dat",
        [r.n_dof for r in rows],
        [r.wall_time for r in rows],
    )
    lines = ["study = timing", f"case = {cfg.case}", f"p = {p}"]
    for r in rows:
        growth = "-" if r.growth_factor is None else f"{r.growth_factor:.2f}"
        lines.append(
            f"h={format(r.h, 'g')} n_dof={r.n_dof} time={r.wall_time:.4f}s "
            f"growth={growth}"
        )
    (out_dir / "summary.txt").write_text("\n".join(lines) + "\n")
    if cfg.figures:
        report.timing_figure(rows, out_dir / "timing.png", p=p)


_RUNNERS = {
    "solve": _run_solve,
    "convergence": _run_convergence,
    "stability": _run_stability,
    "timing": _run_timing,
}


def run(argv):
    """Parse arguments, run the requested study, and return the exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else int(exc.code)
    try:
        cfg = _effective_config(args)
        out_dir = Path(cfg.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_effective_config(cfg, out_dir)
    except (ValueError, OSError, configparser.Error) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        _RUNNERS[cfg.kind](cfg, out_dir)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main(argv=None):
    """Console entry point."""
    return run(sys.argv[1:] if argv is None else list(argv))


if __name__ == "__main__":
    sys.exit(main())
