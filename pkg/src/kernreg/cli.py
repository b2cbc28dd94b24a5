"""Command-line front end: ``kernreg {analyze,mercer,thresholds,spde-heat,selftest}``.

Exit codes: 0 success, 1 configuration or numerical error, 2 when at least
one convergence verdict is inconclusive.
"""

from __future__ import annotations

import argparse
import contextlib
import datetime as _dt
import math
import os
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .analysis import (
    assess_thresholds,
    critical_exponent,
    galerkin_project,
    hs_curve,
    nystrom_mercer,
    predicted_thresholds,
    trace_curve,
)
from .config import ConfigError, RunConfig, config_from_dict, load_config
from .errors import BracketNotFoundError, SaturationError
from .geometry import gauss_legendre_panels
from .kernels import boundary_compliance
from .reports import write_curves_csv, write_heat_rate_csv, write_json, write_mercer_csv
from .spde import heat_covariance, mc_heat_solution, truncation_rate

EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2
DEFAULT_OUT = "kernreg_out"


def _output_dir(args, cfg: RunConfig) -> Path:
    if args.out:
        return Path(args.out)
    if cfg.output.directory:
        return Path(cfg.output.directory)
    return Path(os.environ.get("KERNREG_OUT", DEFAULT_OUT))


def _stamp(payload: dict, deterministic: bool) -> dict:
    if not deterministic:
        payload["generated_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return payload


@contextlib.contextmanager
def _thread_cap(jobs: int):
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        yield
        return
    with threadpool_limits(limits=jobs):
        yield


def _project(cfg: RunConfig, jobs: int):
    kernel, basis = cfg.build_kernel(), cfg.build_basis()
    rule = cfg.build_rule(basis)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        Q = galerkin_project(kernel, basis, rule, basis.J, diagonal_split=cfg.quadrature.diagonal_split, jobs=jobs)
    notes = sorted({str(w.message) for w in caught})
    for n in notes:
        print(f"warning: {n}", file=sys.stderr)
    return kernel, basis, Q, notes


# ---------------------------------------------------------------------------
# commands


def cmd_analyze(cfg: RunConfig, out: Path, jobs: int, deterministic: bool) -> int:
    kernel, basis, Q, notes = _project(cfg, jobs)
    domain, bc, diag = cfg.build_domain(), cfg.build_bc(), cfg.diagnostics
    trace_curves = [trace_curve(Q, basis, r, diag.truncations) for r in diag.r_grid]
    hs_curves = [hs_curve(Q, basis, r, s, diag.truncations) for r in diag.r_grid for s in diag.s_grid]
    observed, one_sided = None, None
    try:
        observed = critical_exponent(Q, basis, diag.kind, diag.r_grid, diag.truncations)
    except BracketNotFoundError as exc:
        one_sided = (exc.side, exc.bound)
    thresholds = assess_thresholds(
        kernel, bc, domain.dim, trace_curves, hs_curves, observed, one_sided, sharp_rstar=diag.sharp_rstar
    )
    compliance = boundary_compliance(kernel, domain, bc.kind)
    spectrum = Q.spectrum
    report = {
        "tool": "kernreg",
        "version": __version__,
        "command": "analyze",
        "config": cfg.to_dict(),
        "kernel": kernel.describe(),
        "boundary_compliance": {
            "bc": compliance.bc,
            "declared": kernel.dirichlet_compliant if bc.kind == "dirichlet" else kernel.neumann_compliant,
            "measured": compliance.compliant,
            "max_residual": compliance.max_residual,
            "scale": compliance.scale,
        },
        "galerkin": {
            "N": Q.N,
            "nodes": Q.rule.size,
            "diagonal_split": Q.diagonal_split,
            "trace": Q.trace(),
            "min_eigenvalue": float(spectrum[0]),
            "max_eigenvalue": float(spectrum[-1]),
            "warnings": notes,
        },
        "trace_curves": [c.to_dict() for c in trace_curves],
        "hs_curves": [c.to_dict() for c in hs_curves],
        "critical_exponent": None if observed is None else observed.to_dict(),
        "one_sided_bound": None if one_sided is None else {"side": one_sided[0], "bound": one_sided[1]},
        "applicable_cases": [f"{c.theorem}({c.case})" for c in thresholds.prediction.satisfied()],
        "consistent": thresholds.consistent,
    }
    inconclusive = any(c.verdict == "inconclusive" for c in trace_curves + hs_curves)
    report["exit_code"] = EXIT_INCONCLUSIVE if inconclusive else EXIT_OK
    formats = set(cfg.output.formats)
    if "json" in formats:
        write_json(out / "report.json", _stamp(report, deterministic))
        write_json(out / "thresholds.json", thresholds.to_dict())
    if "csv" in formats:
        write_curves_csv(out / "trace_curves.csv", trace_curves)
        write_curves_csv(out / "hs_curves.csv", hs_curves)
    rs = "none" if observed is None else f"{observed.rstar:.3f} +- {observed.uncertainty:.3f}"
    if one_sided:
        rs = f"{'>' if one_sided[0] == 'above' else '<'} {one_sided[1]:g}"
    print(f"{kernel.name} / {bc.kind}: r* = {rs}; consistent = {thresholds.consistent}; wrote {out}")
    return report["exit_code"]


def cmd_thresholds(cfg: RunConfig, out: Path, deterministic: bool) -> int:
    kernel, domain, bc = cfg.build_kernel(), cfg.build_domain(), cfg.build_bc()
    pred = predicted_thresholds(kernel, bc, domain.dim)
    payload = {
        "kernel": kernel.describe(),
        "bc": bc.kind,
        "d": domain.dim,
        "predicted": [c.to_dict() for c in pred.cases],
        "notes": list(pred.notes),
    }
    write_json(out / "thresholds.json", _stamp(payload, deterministic))
    for c in pred.cases:
        flag = "applies" if c.satisfied else "hypotheses not met"
        print(f"{c.theorem}({c.case}) {c.norm}: {c.describe()}  [{flag}]")
    for n in pred.notes:
        print(f"note: {n}")
    return EXIT_OK


def cmd_mercer(cfg: RunConfig, out: Path, deterministic: bool) -> int:
    kernel, domain = cfg.build_kernel(), cfg.build_domain()
    q = cfg.quadrature
    panels = q.panels if q.panels is not None else max(20, math.ceil(cfg.basis.J / q.order))
    rule = gauss_legendre_panels(domain, panels, q.order)
    M = min(cfg.basis.J, rule.size)
    spectrum = nystrom_mercer(kernel, rule, M)
    if "csv" in cfg.output.formats:
        write_mercer_csv(out / "mercer.csv", spectrum.mu)
    if "json" in cfg.output.formats:
        payload = {
            "kernel": kernel.describe(),
            "nodes": rule.size,
            "M": spectrum.M,
            "sum_mu": float(spectrum.mu.sum()),
            "trace_quadrature": rule.integrate(kernel.diagonal),
            "clipped_mass": spectrum.clipped_mass,
        }
        write_json(out / "mercer.json", _stamp(payload, deterministic))
    print(f"{kernel.name}: mu_1 = {spectrum.mu[0]:.6g}, sum mu = {spectrum.mu.sum():.6g} over {spectrum.M} modes; wrote {out}")
    return EXIT_OK


def cmd_spde_heat(cfg: RunConfig, out: Path, jobs: int, deterministic: bool) -> int:
    kernel, basis, Q, notes = _project(cfg, jobs)
    sp = cfg.spde
    C = heat_covariance(Q, basis, sp.T)
    J_list = sp.J_list or sorted(set(np.geomspace(10, max(11, Q.N // 8), 12).astype(int).tolist()))
    try:
        rate = truncation_rate(C, J_list)
    except SaturationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if "csv" in cfg.output.formats:
        write_heat_rate_csv(out / "heat_rate.csv", rate.J, rate.tail, rate.slope)
    payload = {
        "kernel": kernel.describe(),
        "T": sp.T,
        "N": Q.N,
        "trace": C.trace(),
        "slope": rate.slope,
        "J": list(rate.J),
        "tail": list(rate.tail),
        "tail_frobenius": list(rate.tail_frobenius),
        "warnings": notes,
        "monte_carlo": None,
    }
    if sp.M:
        mc = mc_heat_solution(Q, basis, sp.T, sp.steps, sp.J, sp.M, sp.seed)
        reference = float(np.trace(C.C[: sp.J, : sp.J]))
        payload["monte_carlo"] = {
            "J": sp.J,
            "steps": sp.steps,
            "M": sp.M,
            "seed": sp.seed,
            "mean": mc.mean,
            "stderr": mc.stderr,
            "reference": reference,
            "z_score": (mc.mean - reference) / mc.stderr if mc.stderr > 0 else None,
            "clipped_mass": mc.clipped_mass,
        }
    if "json" in cfg.output.formats:
        write_json(out / "heat.json", _stamp(payload, deterministic))
    print(f"{kernel.name}: tail-trace slope {rate.slope:.3f}; wrote {out}")
    return EXIT_OK


def cmd_selftest(out: Optional[Path] = None) -> int:
    from .acceptance import format_table, run_battery

    results = run_battery()
    print(format_table(results))
    if out is not None:
        write_json(out / "selftest.json", [r.to_dict() for r in results])
    return EXIT_OK if all(r.passed for r in results) else EXIT_ERROR


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--out", help="output directory (default: $KERNREG_OUT or ./kernreg_out)")
    common.add_argument("--seed", type=int, help="override spde.seed")
    common.add_argument("--jobs", type=int, default=None, help="worker threads (default 1)")
    common.add_argument("--deterministic", action="store_true", help="one thread, fixed summation order, no timestamps")

    p = argparse.ArgumentParser(prog="kernreg", description="Regularity of covariance operators in elliptic eigenbases.")
    p.add_argument("--version", action="version", version=f"kernreg {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="Galerkin matrix, diagnostic curves and thresholds")
    sub.add_parser("mercer", parents=[common], help="Nyström eigenvalues of the kernel")
    sub.add_parser("thresholds", parents=[common], help="predicted admissible exponents only")
    sub.add_parser("spde-heat", parents=[common], help="heat-equation covariance and truncation rate")
    sub.add_parser("selftest", parents=[common], help="run the acceptance battery")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    jobs = 1 if args.deterministic or args.jobs is None else max(1, args.jobs)
    try:
        cfg = load_config(args.config) if args.config else config_from_dict({})
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed", f"must be nonnegative, got {args.seed}")
            cfg.spde.seed = args.seed
        out = _output_dir(args, cfg)
        with _thread_cap(jobs):
            if args.command == "analyze":
                return cmd_analyze(cfg, out, jobs, args.deterministic)
            if args.command == "mercer":
                return cmd_mercer(cfg, out, args.deterministic)
            if args.command == "thresholds":
                return cmd_thresholds(cfg, out, args.deterministic)
            if args.command == "spde-heat":
                return cmd_spde_heat(cfg, out, jobs, args.deterministic)
            return cmd_selftest(Path(args.out) if args.out else None)
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, ArithmeticError, RuntimeError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
