"""Acceptance battery shared by ``kernreg selftest`` and the test suite.

Each check returns a ``CriterionResult`` with the measured quantities, so a
failing run reports what was observed rather than just that it failed.
"""

from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .analysis import (
    assess_thresholds,
    critical_exponent,
    galerkin_project,
    nystrom_mercer,
    psd_sqrt,
    schatten_norm,
    sobolev_embedding_curve,
    symmetry_check_matrix,
    trace_curve,
)
from .elliptic import BoundaryCondition, laplacian_basis
from .geometry import Domain, gauss_legendre_panels
from .kernels import builtin_kernel
from .rkhs import RkhsElement, pointwise_bound_check, rkhs_inner
from .spde import heat_covariance, mc_heat_solution, truncation_rate


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    seconds: float
    limit: Optional[float] = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "number": self.number,
            "title": self.title,
            "passed": self.passed,
            "seconds": round(self.seconds, 2),
            "limit": self.limit,
            "details": self.details,
        }

    def line(self) -> str:
        limit = f" (limit {self.limit:.0f} s)" if self.limit else ""
        info = ", ".join(f"{k}={_short(v)}" for k, v in self.details.items())
        return f"{'PASS' if self.passed else 'FAIL'}  [{self.number:2d}] {self.title}: {self.seconds:.1f} s{limit}; {info}"


def _short(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(str(_short(x)) for x in v) + "]"
    return str(v)


UNIT = Domain.interval(0.0, 1.0)
LOG_SLOPE_RANGE = np.arange(10, 61)


def _timed(number, title, limit, body: Callable[[dict], bool]) -> CriterionResult:
    details: dict = {}
    t0 = time.perf_counter()
    try:
        ok = bool(body(details))
    except Exception as exc:  # report, never crash the battery
        details["error"] = f"{type(exc).__name__}: {exc}"
        ok = False
    dt = time.perf_counter() - t0
    if limit is not None and dt > limit:
        details["over_time"] = True
        ok = False
    return CriterionResult(number, title, ok, dt, limit, details)


# ---------------------------------------------------------------------------


def criterion_1() -> CriterionResult:
    def body(out):
        basis = laplacian_basis(UNIT, BoundaryCondition.dirichlet(), 2000)
        kernel = builtin_kernel("brownian_bridge")
        Q = galerkin_project(kernel, basis, N=2000, diagonal_split=True)
        j = np.arange(1, 2001)
        diag_err = float(np.max(np.abs(np.diag(Q.entries) - (j * np.pi) ** -2.0)))
        off = float(np.max(np.abs(Q.entries - np.diag(np.diag(Q.entries)))))
        ce = critical_exponent(Q, basis, "trace", (0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0))
        curves = [trace_curve(Q, basis, r) for r in (0.0, 0.1, 0.2, 0.3, 0.4)]
        rep = assess_thresholds(kernel, "dirichlet", 1, curves, observed=ce, sharp_rstar=0.5)
        case = [c for c in rep.prediction.cases if c.theorem == "hoelder-trace-dirichlet" and c.case == "i"][0]
        out.update(diag_err=diag_err, offdiag=off, rstar=ce.rstar, uncertainty=ce.uncertainty, range_upper=case.upper)
        return (
            diag_err <= 1e-6
            and off <= 1e-6
            and abs(ce.rstar - 0.5) <= 0.05
            and ce.uncertainty <= 0.05
            and case.satisfied
            and abs(case.upper - 0.5) < 1e-12
            and rep.consistent
        )

    return _timed(1, "Brownian bridge sharp threshold, N=2000", 60.0, body)


def criterion_2() -> CriterionResult:
    def body(out):
        basis = laplacian_basis(UNIT, BoundaryCondition.dirichlet(), 2000)
        kernel = builtin_kernel("exponential")
        Q = galerkin_project(kernel, basis, N=2000, diagonal_split=True)
        v04 = trace_curve(Q, basis, 0.4).verdict
        v06 = trace_curve(Q, basis, 0.6).verdict
        ce = critical_exponent(Q, basis, "trace", (0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0))
        out.update(verdict_04=v04, verdict_06=v06, rstar=ce.rstar, uncertainty=ce.uncertainty, direct=ce.direct)
        return v04 == "converged" and v06 == "diverged" and abs(ce.rstar - 0.5) <= 0.1

    return _timed(2, "Exponential kernel trace threshold, N=2000", 300.0, body)


def criterion_3() -> CriterionResult:
    def body(out):
        rule = gauss_legendre_panels(UNIT, 40, 10)
        spectrum = nystrom_mercer(builtin_kernel("exponential"), rule)
        j = LOG_SLOPE_RANGE
        slope = float(np.polyfit(np.log(j), np.log(spectrum.mu[j - 1]), 1)[0])
        rng = np.random.default_rng(3)
        x, y = rng.uniform(-3, 3, 1000), rng.uniform(-3, 3, 1000)
        diff = float(np.max(np.abs(builtin_kernel("matern", nu=0.5)(x, y) - builtin_kernel("exponential")(x, y))))
        out.update(nodes=rule.size, slope=slope, matern_gap=diff)
        return abs(slope + 2.0) <= 0.1 and diff <= 1e-12

    return _timed(3, "Nyström slope of the exponential kernel", None, body)


def criterion_4() -> CriterionResult:
    def body(out):
        rule = gauss_legendre_panels(UNIT, 20, 10)
        ok = True
        for name in ("gaussian", "brownian_bridge"):
            k = builtin_kernel(name)
            spectrum = nystrom_mercer(k, rule)
            ref = rule.integrate(k.diagonal)
            rel = abs(spectrum.mu.sum() - ref) / ref
            out[f"{name}_rel"] = float(rel)
            ok &= rel <= 5e-3
        out["nodes"] = rule.size
        return ok

    return _timed(4, "Mercer trace identity", None, body)


RKHS_KERNELS = (
    ("exponential", {}),
    ("gaussian", {}),
    ("matern", {"nu": 1.5}),
    ("matern", {"nu": 2.5}),
    ("brownian_bridge", {}),
    ("brownian_motion", {}),
)


def criterion_5(configs: int = 100) -> CriterionResult:
    def body(out):
        rng = np.random.default_rng(5)
        worst = {"reproducing": 0.0, "difference": 0.0, "cauchy_schwarz": 0.0}
        for name, params in RKHS_KERNELS:
            k = builtin_kernel(name, **params)
            for _ in range(configs):
                n = int(rng.integers(1, 12))
                pts = rng.uniform(0.0, 1.0, n)
                f = RkhsElement(k, pts, rng.normal(size=n))
                y = rng.uniform(0.0, 1.0)
                rep = RkhsElement.representer(k, y)
                val = float(f(y)[0])
                scale = max(abs(val), f.norm() * math.sqrt(k(y, y)), 1e-300)
                worst["reproducing"] = max(worst["reproducing"], abs(val - rkhs_inner(f, rep)) / scale)
                x = rng.uniform(0.0, 1.0)
                fx = RkhsElement.representer(k, x)
                d = fx - rep
                lhs = rkhs_inner(d, d)
                rhs = float(k(x, x) - 2 * k(x, y) + k(y, y))
                dscale = max(float(k(x, x) + k(y, y)), 1e-300)
                worst["difference"] = max(worst["difference"], abs(lhs - rhs) / dscale)
                probes = rng.uniform(0.0, 1.0, 20)
                norm = f.norm()
                viol = pointwise_bound_check(f, probes)
                worst["cauchy_schwarz"] = max(worst["cauchy_schwarz"], viol / max(norm, 1e-300))
        out.update({k: float(v) for k, v in worst.items()}, kernels=len(RKHS_KERNELS), configs=configs)
        return max(worst.values()) <= 1e-10

    return _timed(5, "RKHS identities", None, body)


def criterion_6(fixtures: int = 100, n: int = 50) -> CriterionResult:
    def body(out):
        rng = np.random.default_rng(6)
        lam = (np.pi * np.arange(1, n + 1)) ** 2
        worst = {"left_right": 0.0, "holder_excess": -np.inf, "monotone_excess": -np.inf, "trace_identity": 0.0}
        for _ in range(fixtures):
            A = rng.normal(size=(n, n))
            A = 0.5 * (A + A.T)
            B = rng.normal(size=(n, n))
            B = 0.5 * (B + B.T)
            r = float(rng.uniform(0.0, 2.0))
            sym = symmetry_check_matrix(A, lam, r, float(rng.uniform()))
            worst["left_right"] = max(worst["left_right"], abs(sym.left - sym.right) / sym.left)
            p1 = schatten_norm(A @ B, 1)
            worst["holder_excess"] = max(worst["holder_excess"], p1 - schatten_norm(A, 2) * schatten_norm(B, 2))
            worst["monotone_excess"] = max(worst["monotone_excess"], schatten_norm(A, 2) - schatten_norm(A, 1))
            G = rng.normal(size=(n, n))
            Qm = G @ G.T / n * np.exp(-0.1 * np.arange(n))[None, :]
            Qm = 0.5 * (Qm + Qm.T)
            Qm = Qm @ Qm.T  # PSD
            d = lam ** (0.5 * r)
            diag_sum = float(np.sum(lam**r * np.diag(Qm)))
            root = psd_sqrt(Qm)
            hs2 = schatten_norm(d[:, None] * root, 2) ** 2
            worst["trace_identity"] = max(worst["trace_identity"], abs(diag_sum - hs2) / diag_sum)
        out.update({k: float(v) for k, v in worst.items()})
        return (
            worst["left_right"] <= 1e-10
            and worst["holder_excess"] <= 1e-9
            and worst["monotone_excess"] <= 1e-9
            and worst["trace_identity"] <= 1e-8
        )

    return _timed(6, "Schatten and matrix identities", None, body)


def criterion_7() -> CriterionResult:
    def body(out):
        runs = []
        for _ in range(2):
            runs.append(
                (
                    sobolev_embedding_curve(1, 0.6, 4000, "hs").verdict,
                    sobolev_embedding_curve(1, 0.4, 4000, "hs").verdict,
                    sobolev_embedding_curve(2, 1.5, 4000, "hs").verdict,
                    sobolev_embedding_curve(2, 1.5, 4000, "trace").verdict,
                )
            )
        out.update(verdicts=list(runs[0]))
        return runs[0] == runs[1] == ("converged", "diverged", "converged", "diverged")

    return _timed(7, "Sobolev embedding diagnostic", None, body)


def criterion_8() -> CriterionResult:
    def body(out):
        basis = laplacian_basis(UNIT, BoundaryCondition.dirichlet(), 2000)
        J_list = sorted(set(np.geomspace(20, 250, 12).astype(int).tolist()))
        slopes = {}
        for name in ("brownian_bridge", "exponential"):
            Q = galerkin_project(builtin_kernel(name), basis, N=2000, diagonal_split=True)
            slopes[name] = truncation_rate(heat_covariance(Q, basis, 1.0), J_list).slope
        small = laplacian_basis(UNIT, BoundaryCondition.dirichlet(), 100)
        Qs = galerkin_project(builtin_kernel("exponential"), small, N=100, diagonal_split=True)
        C = heat_covariance(Qs, small, 0.1)
        mc = mc_heat_solution(Qs, small, 0.1, 1, 100, 10_000, seed=2024)
        z = (mc.mean - C.trace()) / mc.stderr
        out.update(bridge_slope=slopes["brownian_bridge"], exponential_slope=slopes["exponential"], mc_z=float(z))
        return all(abs(s + 3.0) <= 0.3 for s in slopes.values()) and abs(z) <= 3.0

    return _timed(8, "Heat-equation truncation rates and Monte Carlo", 180.0, body)


DETERMINISM_CONFIG = """
[kernel]
name = "exponential"

[bc]
kind = "dirichlet"

[basis]
J = 300

[diagnostics]
r_grid = [0.0, 0.25, 0.4, 0.6, 0.75, 1.0]
s_grid = [0.0, 0.25]

[spde]
T = 0.5
steps = 4
J = 40
M = 2000
seed = 11
"""


def criterion_9() -> CriterionResult:
    from .cli import main

    def body(out):
        with tempfile.TemporaryDirectory() as tmp:
            tmp = Path(tmp)
            cfg = tmp / "run.toml"
            cfg.write_text(DETERMINISM_CONFIG)
            codes = []
            for run in ("a", "b"):
                for cmd in ("analyze", "spde-heat"):
                    codes.append(main([cmd, "--config", str(cfg), "--out", str(tmp / run), "--deterministic", "--seed", "11"]))
            files = sorted(p.name for p in (tmp / "a").iterdir())
            same = all((tmp / "a" / f).read_bytes() == (tmp / "b" / f).read_bytes() for f in files)
            out.update(files=files, exit_codes=codes, identical=same)
            return same and len(files) >= 6 and all(c in (0, 2) for c in codes)

    return _timed(9, "Deterministic CLI outputs", None, body)


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8, criterion_9)


def run_battery(verbose: bool = True) -> list[CriterionResult]:
    t0 = time.perf_counter()
    results = []
    for crit in CRITERIA:
        res = crit()
        if verbose:
            print(res.line(), flush=True)
        results.append(res)
    total = time.perf_counter() - t0
    results.append(
        CriterionResult(10, "Full battery under 10 minutes", all(r.passed for r in results) and total < 600, total, 600.0,
                        {"criteria_passed": sum(r.passed for r in results), "criteria": len(results)})
    )
    if verbose:
        print(results[-1].line(), flush=True)
    return results


def format_table(results) -> str:
    width = max(len(r.title) for r in results)
    lines = [f"{'#':>3}  {'criterion':<{width}}  {'result':<6}  {'seconds':>8}"]
    for r in results:
        lines.append(f"{r.number:>3}  {r.title:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.seconds:8.1f}")
    lines.append(f"{sum(r.passed for r in results)}/{len(results)} passed")
    return "\n".join(lines)
