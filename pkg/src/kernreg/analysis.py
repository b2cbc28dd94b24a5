"""Covariance operators in an elliptic eigenbasis and their regularity norms.

The central object is the Galerkin matrix ``Q[j, k] = <Q e_k, e_j>`` of the
integral operator with kernel q. Fractional trace and Hilbert-Schmidt norms
``||L^(r/2) Q L^(r/2)||_1`` and ``||L^(r/2) Q L^(s/2)||_2`` are evaluated as
partial sums over growing truncations, and convergence of the infinite sum
is judged from the power-law decay of the increments.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .elliptic import EigenBasis
from .errors import BracketNotFoundError, DataError, InvalidArgumentError, NumericalError
from .geometry import QuadratureRule, gauss_legendre_panels
from .kernels import KernelSpec, SMOOTH_ORDER

# smallest dead zone around the critical decay exponent 1
MIN_MARGIN = 0.05
# stderr multiplier for the dead zone
MARGIN_SIGMAS = 2.0
# terms below this fraction of the first term are treated as unresolved
RESOLUTION_FLOOR = 1e-12
# binned fits span this many octaves below the last resolved index
BINNED_OCTAVES = 4
BINS_PER_OCTAVE = 4


class UnderResolvedWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# Galerkin projection


@dataclass(frozen=True)
class GalerkinMatrix:
    entries: np.ndarray
    basis: EigenBasis
    rule: QuadratureRule
    diagonal_split: bool = False
    kernel_name: str = ""

    @property
    def N(self) -> int:
        return self.entries.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        """Elliptic eigenvalues matching the rows of ``entries``."""
        return self.basis.eigenvalues[: self.N]

    @cached_property
    def spectrum(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def trace(self) -> float:
        return float(np.trace(self.entries))

    def is_psd(self, rel_tol: float = 1e-8) -> bool:
        return bool(self.spectrum[0] >= -rel_tol * max(abs(self.trace()), np.finfo(float).tiny))


def auto_rule(basis: EigenBasis, N: Optional[int] = None, panels_per_period: float = 1.0, order: int = 10) -> QuadratureRule:
    """Composite Gauss rule with ``panels_per_period`` panels per period of e_N.

    One order-10 panel per period (ten nodes per wavelength) already gives
    round-off accuracy in 1D once the diagonal blocks are split. Finite
    element bases get panels on the mesh cells instead, so the integrand is
    smooth inside each panel.
    """
    if basis.source == "sturm_liouville":
        return gauss_legendre_panels(basis.domain, len(basis.matrices[2]) - 1, min(order, 4))
    osc = basis.oscillations(N)
    periods = osc / 2.0
    panels = np.maximum(4, np.ceil(panels_per_period * periods)).astype(int)
    return gauss_legendre_panels(basis.domain, panels, order)


def _nodes_per_wavelength(basis: EigenBasis, rule: QuadratureRule, N: int) -> float:
    osc = np.maximum(basis.oscillations(N), 1.0)
    per_axis = np.asarray([len(e) - 1 for e in rule.edges]) * rule.order
    return float(np.min(2.0 * per_axis / osc))


def _checked(vals: np.ndarray, rows: np.ndarray, cols: np.ndarray, name: str) -> np.ndarray:
    if not np.all(np.isfinite(vals)):
        i, j = np.argwhere(~np.isfinite(vals))[0]
        raise NumericalError(
            f"kernel {name!r} returned a non-finite value at x={rows[i]}, y={cols[j]}",
            point=(tuple(rows[i]), tuple(cols[j])),
        )
    return vals


def _triangle_part(kernel: KernelSpec, basis: EigenBasis, rule: QuadratureRule, N: int, chunk: int) -> np.ndarray:
    """Integral over the diagonal panel squares, split along x = y.

    Lower triangle {a <= y <= x <= b} uses collapsed Gauss coordinates
    x = a + h u, y = a + h u v (Jacobian h^2 u); the upper triangle is the
    transpose by symmetry of q.
    """
    xi, wi = np.polynomial.legendre.leggauss(rule.order)
    u, wu = 0.5 * (xi + 1.0), 0.5 * wi
    edges = rule.edges[0]
    a, h = edges[:-1], np.diff(edges)
    o = rule.order
    L = np.zeros((N, N))
    for start in range(0, len(a), chunk):
        sl = slice(start, start + chunk)
        ap, hp = a[sl, None], h[sl, None]
        X = ap + hp * u[None, :]  # (p, o)
        Y = ap[:, :, None] + (hp * u[None, :])[:, :, None] * u[None, None, :]  # (p, o, o)
        W = (hp**2 * (u * wu)[None, :])[:, :, None] * wu[None, None, :]
        qv = kernel(X[:, :, None, None], Y[..., None])
        Xf, Yf = X.reshape(-1, 1), Y.reshape(-1, 1)
        _checked(qv.reshape(Xf.shape[0], o), Xf, Yf, kernel.name)
        Ex = basis.values(Xf, N)
        Ey = basis.values(Yf, N).reshape(Xf.shape[0], o, N)
        g = np.einsum("al,alk->ak", (W * qv).reshape(-1, o), Ey)
        L += Ex.T @ g
    return L + L.T


def galerkin_project(
    kernel: KernelSpec,
    basis: EigenBasis,
    rule: Optional[QuadratureRule] = None,
    N: Optional[int] = None,
    diagonal_split: Optional[bool] = None,
    block_bytes: int = 2**28,
    jobs: int = 1,
) -> GalerkinMatrix:
    """Matrix of ``<Q e_k, e_j>`` for j, k < N by tensor quadrature.

    With ``diagonal_split`` (1D only) the diagonal panel blocks are integrated
    over the two triangles either side of x = y, which restores spectral
    accuracy for kernels with a kink on the diagonal. The default (None)
    splits in 1D and uses the plain tensor rule in 2D.

    Row blocks of the kernel matrix are independent and may run on ``jobs``
    threads; each block fills its own rows, so the result does not depend
    on the number of workers.
    """
    N = basis.J if N is None else int(N)
    if N > basis.J or N < 1:
        raise InvalidArgumentError(f"N must lie in [1, {basis.J}], got {N}")
    if rule is None:
        rule = auto_rule(basis, N)
    if basis.source == "analytic":
        npw = _nodes_per_wavelength(basis, rule, N)
        if npw < 8:
            warnings.warn(
                f"quadrature has {npw:.1f} nodes per wavelength of e_N (< 8)", UnderResolvedWarning, stacklevel=2
            )
    if diagonal_split is None:
        diagonal_split = rule.dim == 1
    split = diagonal_split and rule.dim == 1
    if diagonal_split and rule.dim != 1:
        warnings.warn("diagonal_split is only available in 1D; using the plain tensor rule", UnderResolvedWarning, stacklevel=2)

    x, w = rule.nodes, rule.weights
    n = x.shape[0]
    WE = basis.values(x, N) * w[:, None]
    G = np.empty((n, N))
    rows_per_block = max(1, block_bytes // (8 * n))
    panel = rule.panel_index() if split else None

    def fill(start):
        R = slice(start, start + rows_per_block)
        K = _checked(kernel.gram(x[R], x), x[R], x, kernel.name)
        if split:
            K[panel[R][:, None] == panel[None, :]] = 0.0
        G[R] = K @ WE

    starts = range(0, n, rows_per_block)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(fill, starts))
    else:
        for start in starts:
            fill(start)
    Q = WE.T @ G
    del G
    if split:
        Q += _triangle_part(kernel, basis, rule, N, chunk=max(1, (2**26) // (8 * rule.order**2 * N)))
    Q = 0.5 * (Q + Q.T)
    return GalerkinMatrix(Q, basis.truncate(N), rule, split, kernel.name)


# ---------------------------------------------------------------------------
# Mercer / Nyström


@dataclass(frozen=True)
class MercerSpectrum:
    mu: np.ndarray
    eigvecs: np.ndarray  # q_j at the rule nodes, column j
    rule: QuadratureRule
    clipped_mass: float

    @property
    def M(self) -> int:
        return self.mu.shape[0]

    def weighted_gram(self) -> np.ndarray:
        """Discrete inner products of the q_j; the identity up to round-off."""
        return self.eigvecs.T @ (self.rule.weights[:, None] * self.eigvecs)


def nystrom_mercer(kernel: KernelSpec, rule: QuadratureRule, M: Optional[int] = None) -> MercerSpectrum:
    """Eigenpairs of the quadrature-discretized integral operator.

    Diagonalizes ``D^(1/2) K D^(1/2)`` (D = weights), clips negative
    eigenvalues to zero and stores ``q_j = v_j / sqrt(w)`` at the nodes.
    """
    n = rule.size
    M = n if M is None else int(M)
    if not 1 <= M <= n:
        raise InvalidArgumentError(f"M must lie in [1, {n}], got {M}")
    K = _checked(kernel.gram(rule.nodes), rule.nodes, rule.nodes, kernel.name)
    sw = np.sqrt(rule.weights)
    A = sw[:, None] * K * sw[None, :]
    A = 0.5 * (A + A.T)
    try:
        mu, V = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Nyström eigendecomposition failed: {exc}") from exc
    mu, V = mu[::-1], V[:, ::-1]
    clipped = float(np.clip(-mu, 0.0, None).sum())
    mu = np.clip(mu, 0.0, None)
    return MercerSpectrum(mu[:M], V[:, :M] / sw[:, None], rule, clipped)


# ---------------------------------------------------------------------------
# Schatten norms


def schatten_norm(A, order: int) -> float:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidArgumentError("schatten_norm expects a square matrix")
    if order == 2:
        return float(np.sqrt(np.sum(A * A)))
    if order == 1:
        if np.allclose(A, A.T, rtol=0, atol=1e-14 * max(1.0, np.abs(A).max())):
            return float(np.abs(np.linalg.eigvalsh(0.5 * (A + A.T))).sum())
        return float(np.linalg.svd(A, compute_uv=False).sum())
    raise InvalidArgumentError(f"order must be 1 or 2, got {order}")


def operator_norm(A) -> float:
    return float(np.linalg.norm(np.asarray(A, dtype=float), 2))


def psd_sqrt(A) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


# ---------------------------------------------------------------------------
# Diagnostic curves


@dataclass(frozen=True)
class TailFit:
    gamma: float  # decay exponent of the increments, t_j ~ j^-gamma
    stderr: float
    margin: float
    verdict: str
    fit_range: tuple[int, int]
    resolved: int  # largest index with a resolved term


@dataclass(frozen=True)
class DiagnosticCurve:
    kind: str  # "trace" or "hs"
    r: float
    s: Optional[float]
    truncations: tuple[int, ...]
    partial_sums: tuple[float, ...]
    tail_slope: float
    slope_stderr: float
    verdict: str
    resolved_truncation: int

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "r": self.r,
            "s": self.s,
            "truncations": list(self.truncations),
            "partial_sums": list(self.partial_sums),
            "tail_slope": self.tail_slope if math.isfinite(self.tail_slope) else None,
            "slope_stderr": self.slope_stderr,
            "verdict": self.verdict,
            "resolved_truncation": self.resolved_truncation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DiagnosticCurve":
        return cls(
            kind=d["kind"],
            r=float(d["r"]),
            s=None if d.get("s") is None else float(d["s"]),
            truncations=tuple(int(v) for v in d["truncations"]),
            partial_sums=tuple(float(v) for v in d["partial_sums"]),
            tail_slope=math.inf if d["tail_slope"] is None else float(d["tail_slope"]),
            slope_stderr=float(d["slope_stderr"]),
            verdict=d["verdict"],
            resolved_truncation=int(d["resolved_truncation"]),
        )


def fit_tail(
    terms: np.ndarray, scale: Optional[np.ndarray] = None, floor: Optional[float] = None, binned: bool = False
) -> TailFit:
    """Decide convergence of ``sum_j terms[j-1]`` from its last resolved half.

    ``scale`` carries the raw magnitudes used for the resolution test (the
    Galerkin diagonal for trace curves); terms whose raw magnitude is below
    ``floor`` are numerically zero. The fit is ordinary least squares of
    ``log t_j`` against ``log j`` with an even/odd offset, which absorbs the
    alternation produced by reflection-symmetric domains.

    With ``binned`` the terms are first averaged over geometric bins of
    ``j`` across the last few octaves. Eigenvalue ordering on a
    multi-dimensional domain interleaves modes of very different size, so
    single terms scatter while bin averages follow the power law.
    """
    terms = np.asarray(terms, dtype=float)
    raw = np.abs(terms) if scale is None else np.abs(np.asarray(scale, dtype=float))
    if floor is None:
        floor = RESOLUTION_FLOOR * (raw.max() if raw.size else 0.0)
    j = np.arange(1, terms.size + 1)
    good = (raw > floor) & (terms > 0)
    if not good.any():
        return TailFit(math.inf, 0.0, MIN_MARGIN, "converged", (0, 0), 0)
    resolved = int(j[good][-1])
    lo = max(1, resolved >> BINNED_OCTAVES) if binned else max(1, resolved // 2)
    sel = good & (j >= lo) & (j <= resolved)
    if sel.sum() < 4:
        if resolved < terms.size // 2:
            # everything past a short resolved head is at round-off: finite sum
            return TailFit(math.inf, 0.0, MIN_MARGIN, "converged", (lo, resolved), resolved)
        return TailFit(math.nan, math.inf, math.inf, "inconclusive", (lo, resolved), resolved)
    if binned:
        x, y = _bin_averages(j, terms, sel, lo, resolved)
        cols = [np.ones_like(x), x]
    else:
        x = np.log(j[sel])
        y = np.log(terms[sel])
        parity = (j[sel] % 2).astype(float)
        cols = [np.ones_like(x), x]
        if 0 < parity.sum() < parity.size and sel.sum() >= 6:
            cols.append(parity)
    if x.size < 3:
        return TailFit(math.nan, math.inf, math.inf, "inconclusive", (lo, resolved), resolved)
    X = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = max(x.size - X.shape[1], 1)
    cov = np.linalg.pinv(X.T @ X) * (resid @ resid) / dof
    gamma = -float(coef[1])
    se = float(math.sqrt(max(cov[1, 1], 0.0)))
    margin = max(MIN_MARGIN, MARGIN_SIGMAS * se)
    if gamma > 1.0 + margin:
        verdict = "converged"
    elif gamma < 1.0 - margin:
        verdict = "diverged"
    else:
        verdict = "inconclusive"
    return TailFit(gamma, se, margin, verdict, (lo, resolved), resolved)


def _bin_averages(j, terms, sel, lo, hi):
    """Log of the mean resolved term in each geometric bin of ``[lo, hi]``, against log bin centre."""
    octaves = max(math.log2((hi + 1) / lo), 1e-12)
    edges = np.unique(np.round(np.geomspace(lo, hi + 1, int(math.ceil(BINS_PER_OCTAVE * octaves)) + 1)).astype(int))
    x, y = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        in_bin = sel & (j >= a) & (j < b)
        if in_bin.any():
            x.append(0.5 * (math.log(a) + math.log(b - 1)))
            y.append(math.log(terms[in_bin].mean()))
    return np.array(x), np.array(y)


def _truncations(truncations: Optional[Sequence[int]], N: int) -> tuple[int, ...]:
    if truncations is None:
        truncations = np.unique(np.geomspace(1, N, num=min(N, 40)).astype(int))
    t = tuple(int(v) for v in truncations)
    if any(b <= a for a, b in zip(t, t[1:])) or t[0] < 1:
        raise InvalidArgumentError("truncations must be positive and strictly increasing")
    if t[-1] > N:
        raise InvalidArgumentError(f"truncation {t[-1]} exceeds matrix size {N}")
    return t


def trace_terms(Q: GalerkinMatrix, r: float, J: Optional[int] = None) -> np.ndarray:
    """Increments of the truncated ``||L^(r/2) Q L^(r/2)||_1``."""
    J = Q.N if J is None else J
    lam = Q.eigenvalues[:J]
    diag = np.diag(Q.entries)[:J]
    tol = 1e-8 * max(abs(Q.trace()), np.finfo(float).tiny)
    if np.any(diag < -tol):
        j = int(np.argmin(diag))
        raise DataError(f"Galerkin diagonal entry {j} = {diag[j]:.3e} is negative beyond PSD tolerance")
    if Q.is_psd():
        return lam**r * np.clip(diag, 0.0, None)
    # indefinite from quadrature noise: use singular-value sums per truncation
    d = lam ** (0.5 * r)
    S = np.array([np.abs(np.linalg.eigvalsh(d[:k, None] * Q.entries[:k, :k] * d[None, :k])).sum() for k in range(1, J + 1)])
    return np.diff(np.concatenate([[0.0], S]))


def hs_terms(Q: GalerkinMatrix, r: float, s: float, J: Optional[int] = None) -> np.ndarray:
    """Increments of the truncated ``||L^(r/2) Q L^(s/2)||_2^2`` over square blocks."""
    J = Q.N if J is None else J
    lam = Q.eigenvalues[:J]
    A = Q.entries[:J, :J] ** 2
    P = (lam**r)[:, None] * (lam**s)[None, :]
    # P + P.T is unchanged bit for bit when r and s swap, so the sums are too
    W = A * (0.5 * (P + P.T))
    row_before = np.cumsum(W, axis=1)
    inc = np.diag(W).copy()
    inc[1:] += 2.0 * row_before[np.arange(1, J), np.arange(0, J - 1)]
    return inc


def _binned(Q: GalerkinMatrix) -> bool:
    return Q.basis.domain.dim >= 2


def _curve(kind, r, s, terms, scale, truncations, binned=False) -> DiagnosticCurve:
    fit = fit_tail(terms, scale=scale, binned=binned)
    S = np.cumsum(terms)
    return DiagnosticCurve(
        kind=kind,
        r=float(r),
        s=None if s is None else float(s),
        truncations=truncations,
        partial_sums=tuple(float(S[t - 1]) for t in truncations),
        tail_slope=fit.gamma,
        slope_stderr=fit.stderr,
        verdict=fit.verdict,
        resolved_truncation=fit.resolved,
    )


def _with_basis(Q: GalerkinMatrix, basis: Optional[EigenBasis]) -> GalerkinMatrix:
    if basis is None or basis is Q.basis:
        return Q
    if basis.J < Q.N:
        raise InvalidArgumentError(f"basis has {basis.J} functions, matrix needs {Q.N}")
    return GalerkinMatrix(Q.entries, basis.truncate(Q.N), Q.rule, Q.diagonal_split, Q.kernel_name)


def trace_curve(
    Q: GalerkinMatrix, basis: Optional[EigenBasis], r: float, truncations: Optional[Sequence[int]] = None
) -> DiagnosticCurve:
    """Partial sums of ``sum_j lambda_j^r Q_jj`` with a convergence verdict."""
    Q = _with_basis(Q, basis)
    t = _truncations(truncations, Q.N)
    terms = trace_terms(Q, r, t[-1])
    return _curve("trace", r, None, terms, np.diag(Q.entries)[: t[-1]], t, _binned(Q))


def hs_curve(
    Q: GalerkinMatrix, basis: Optional[EigenBasis], r: float, s: float, truncations: Optional[Sequence[int]] = None
) -> DiagnosticCurve:
    """Partial sums of ``sum_{j,k<=J} lambda_j^r lambda_k^s Q_jk^2`` over square blocks."""
    Q = _with_basis(Q, basis)
    t = _truncations(truncations, Q.N)
    terms = hs_terms(Q, r, s, t[-1])
    scale = hs_terms(Q, 0.0, 0.0, t[-1])
    return _curve("hs", r, s, terms, scale, t, _binned(Q))


# ---------------------------------------------------------------------------
# Critical exponent


@dataclass(frozen=True)
class CriticalExponent:
    kind: str
    rstar: float
    uncertainty: float
    bracket: tuple[float, float]
    grid: tuple[float, ...]
    verdicts: tuple[str, ...]
    direct: Optional[float] = None
    direct_stderr: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "rstar": self.rstar,
            "uncertainty": self.uncertainty,
            "bracket": list(self.bracket),
            "grid": list(self.grid),
            "verdicts": list(self.verdicts),
            "direct": self.direct,
            "direct_stderr": self.direct_stderr,
        }


def _terms_for(kind: str, Q: GalerkinMatrix, r: float, J: int):
    if kind == "trace":
        return trace_terms(Q, r, J), np.diag(Q.entries)[:J]
    if kind == "hs_diagonal":
        return hs_terms(Q, r, r, J), hs_terms(Q, 0.0, 0.0, J)
    raise InvalidArgumentError(f"kind must be 'trace' or 'hs_diagonal', got {kind!r}")


def check_monotone(grid: Sequence[float], verdicts: Sequence[str]) -> bool:
    """True when no converged exponent lies above a diverged one."""
    conv = [r for r, v in zip(grid, verdicts) if v == "converged"]
    div = [r for r, v in zip(grid, verdicts) if v == "diverged"]
    return not conv or not div or max(conv) < min(div)


def growth_exponent(eigenvalues: np.ndarray) -> float:
    """Fitted beta in lambda_j ~ j^beta over the upper half of the spectrum."""
    j = np.arange(1, eigenvalues.size + 1)
    sel = j >= max(1, eigenvalues.size // 2)
    if sel.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(j[sel]), np.log(eigenvalues[sel]), 1)[0])


def critical_exponent(
    Q: GalerkinMatrix,
    basis: Optional[EigenBasis] = None,
    kind: str = "trace",
    r_grid: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0),
    truncations: Optional[Sequence[int]] = None,
    width: float = 0.02,
) -> CriticalExponent:
    """Locate the exponent where the series switches from converging to diverging.

    Grid verdicts give the initial bracket; bisection on the sign of
    ``gamma(r) - 1`` then narrows it below ``width``. The uncertainty adds
    the fitted slope's standard error propagated through ``d gamma / d r``.
    """
    Q = _with_basis(Q, basis)
    grid = tuple(float(r) for r in r_grid)
    if len(grid) < 5 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidArgumentError("r_grid must be sorted with at least 5 points")
    J = _truncations(truncations, Q.N)[-1]

    def fit(r):
        terms, scale = _terms_for(kind, Q, r, J)
        return fit_tail(terms, scale=scale, binned=_binned(Q))

    fits = [fit(r) for r in grid]
    verdicts = tuple(f.verdict for f in fits)
    if not check_monotone(grid, verdicts):
        raise DataError(f"verdicts are not monotone in r: {dict(zip(grid, verdicts))}")
    conv = [r for r, v in zip(grid, verdicts) if v == "converged"]
    div = [r for r, v in zip(grid, verdicts) if v == "diverged"]
    if not div:
        raise BracketNotFoundError(f"all tested r converge; r* > {max(conv or grid)}", max(conv or grid), "above")
    if not conv:
        raise BracketNotFoundError(f"all tested r diverge; r* < {min(div)}", min(div), "below")
    lo, hi = max(conv), min(div)
    f_lo, f_hi = fits[grid.index(lo)], fits[grid.index(hi)]
    dgamma = (f_hi.gamma - f_lo.gamma) / (hi - lo)
    if not (math.isfinite(dgamma) and dgamma < 0):
        dgamma = float("nan")
    a, b, fa, fb = lo, hi, f_lo, f_hi
    while b - a > width:
        mid = 0.5 * (a + b)
        fm = fit(mid)
        if fm.gamma > 1.0:
            a, fa = mid, fm
        else:
            b, fb = mid, fm
    rstar = 0.5 * (a + b)
    if math.isfinite(fa.gamma) and math.isfinite(fb.gamma) and fa.gamma > 1.0 >= fb.gamma:
        # linear root of gamma(r) - 1 inside the final bracket
        rstar = a + (fa.gamma - 1.0) / (fa.gamma - fb.gamma) * (b - a)
    final = fit(rstar)
    se_r = final.stderr / abs(dgamma) if math.isfinite(dgamma) else (hi - lo)
    uncertainty = (b - a) + se_r

    direct = direct_se = None
    if kind == "trace":
        diag = np.diag(Q.entries)[:J]
        dfit = fit_tail(diag, scale=diag, binned=_binned(Q))
        beta = growth_exponent(Q.eigenvalues[:J])
        if math.isfinite(dfit.gamma) and dfit.stderr < 0.05 and math.isfinite(beta) and beta > 0:
            direct = (dfit.gamma - 1.0) / beta
            direct_se = dfit.stderr / beta
    return CriticalExponent(kind, rstar, uncertainty, (lo, hi), grid, verdicts, direct, direct_se)


# ---------------------------------------------------------------------------
# Predicted thresholds


@dataclass(frozen=True)
class PredictedCase:
    """Admissible exponents guaranteed by one regularity statement.

    Trace cases admit ``r`` in ``[0, upper)`` (``]`` when ``upper_inclusive``);
    Hilbert-Schmidt cases admit ``r, s`` in ``[0, box)`` (or ``[0, box]``)
    with ``r + s < upper`` (or ``<=``). ``punctures`` are excluded exponents.
    """

    theorem: str
    case: str
    norm: str
    upper: float
    upper_inclusive: bool = False
    box: Optional[float] = None
    box_inclusive: bool = False
    punctures: tuple[float, ...] = ()
    hypotheses: tuple[str, ...] = ()
    satisfied: bool = True

    def admits(self, r: float, s: Optional[float] = None, margin: float = 0.0) -> bool:
        vals = [r] if s is None else [r, s]
        if any(v < 0 for v in vals):
            return False
        if any(abs(v - p) <= margin for v in vals for p in self.punctures):
            return False
        if self.norm == "trace":
            return r < self.upper - margin or (self.upper_inclusive and margin == 0 and r <= self.upper)
        if s is None:
            raise InvalidArgumentError("Hilbert-Schmidt cases need both r and s")
        for v in vals:
            if not (v < self.box - margin or (self.box_inclusive and margin == 0 and v <= self.box)):
                return False
        total = r + s
        return total < self.upper - margin or (self.upper_inclusive and margin == 0 and total <= self.upper)

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "case": self.case,
            "norm": self.norm,
            "upper": self.upper if math.isfinite(self.upper) else None,
            "upper_inclusive": self.upper_inclusive,
            "box": self.box,
            "box_inclusive": self.box_inclusive,
            "punctures": list(self.punctures),
            "hypotheses": list(self.hypotheses),
            "satisfied": self.satisfied,
        }

    def describe(self) -> str:
        if self.norm == "trace":
            rng = f"r in [0, {self.upper:g}{']' if self.upper_inclusive else ')'}"
        else:
            rng = (
                f"r,s in [0, {self.box:g}{']' if self.box_inclusive else ')'}, "
                f"r+s {'<=' if self.upper_inclusive else '<'} {self.upper:g}"
            )
        if self.punctures:
            rng += " minus {" + ", ".join(f"{p:g}" for p in self.punctures) + "}"
        return rng


@dataclass(frozen=True)
class Prediction:
    cases: tuple[PredictedCase, ...]
    notes: tuple[str, ...] = ()

    def satisfied(self, norm: Optional[str] = None) -> list[PredictedCase]:
        return [c for c in self.cases if c.satisfied and (norm is None or c.norm == norm)]

    def trace_bound(self) -> float:
        """Largest r guaranteed by any satisfied trace case (0 when none)."""
        return max((c.upper for c in self.satisfied("trace")), default=0.0)


# Hölder-route statements: (case, level of differentiability needed,
# boundary condition needed, admissible range builder)
def _hoelder_cases(bc_kind: str, norm: str):
    half, three_half = 0.5, 1.5
    if norm == "trace" and bc_kind == "dirichlet":
        return [
            ("i", 0, False, lambda s: dict(upper=s / 2)),
            ("ii", 1, True, lambda s: dict(upper=(1 + s) / 2, punctures=(half,))),
            ("iii", 2, True, lambda s: dict(upper=(2 + s) / 2, punctures=(half,))),
            ("iv", 3, True, lambda s: dict(upper=(3 + s) / 2, punctures=(half, three_half))),
        ]
    if norm == "trace":
        return [
            ("i", 0, False, lambda s: dict(upper=s / 2)),
            ("ii", 1, False, lambda s: dict(upper=(1 + s) / 2)),
            ("iii", 2, False, lambda s: dict(upper=(2 + s) / 2)),
            ("iv", 3, True, lambda s: dict(upper=(3 + s) / 2, punctures=(three_half,))),
        ]
    if bc_kind == "dirichlet":
        return [
            ("i", 0, False, lambda s: dict(upper=s, box=half)),
            ("ii", 0, True, lambda s: dict(upper=s, box=1.0, box_inclusive=True, punctures=(half,), upper_inclusive=s == 1.0)),
            ("iii", 1, True, lambda s: dict(upper=1 + s, box=2.0, box_inclusive=True, punctures=(half, three_half), upper_inclusive=s == 1.0)),
        ]
    return [
        ("i", 0, False, lambda s: dict(upper=s, box=1.0, box_inclusive=True, upper_inclusive=s == 1.0)),
        ("ii", 1, False, lambda s: dict(upper=1 + s, box=three_half, upper_inclusive=s == 1.0)),
        ("iii", 1, True, lambda s: dict(upper=1 + s, box=2.0, box_inclusive=True, punctures=(three_half,), upper_inclusive=s == 1.0)),
    ]


_HOELDER_IDS = {
    ("trace", "dirichlet"): "hoelder-trace-dirichlet",
    ("trace", "neumann"): "hoelder-trace-neumann",
    ("hs", "dirichlet"): "hoelder-hs-dirichlet",
    ("hs", "neumann"): "hoelder-hs-neumann",
}


def predicted_thresholds(kernel: KernelSpec, bc, d: int) -> Prediction:
    """Every regularity statement applicable to ``kernel`` under ``bc`` in dimension ``d``.

    Hölder-route cases use ``hoelder_order_k``/``hoelder_sigma``: a case that
    needs k derivatives uses the declared sigma when the kernel has exactly k,
    and sigma = 1 when it has more. Cases that need the kernel to satisfy the
    boundary conditions are gated on the compliance flags. Fourier-route
    cases need a homogeneous kernel with ``fourier_decay_sigma > d/2``.
    """
    bc_kind = bc if isinstance(bc, str) else bc.kind
    meta = kernel.smoothness
    compliant = kernel.dirichlet_compliant if bc_kind == "dirichlet" else kernel.neumann_compliant
    cases: list[PredictedCase] = []
    notes: list[str] = []

    if meta.hoelder_sigma is not None:
        k = meta.hoelder_order_k
        for norm in ("trace", "hs"):
            for case, level, needs_bc, build in _hoelder_cases(bc_kind, norm):
                sigma = meta.hoelder_sigma if k == level else 1.0
                hyp = [f"q(z,.) in C^{{{level},sigma}} with sigma = {sigma:g} (declared k = {'inf' if k >= SMOOTH_ORDER else k})"]
                ok = k >= level
                if needs_bc:
                    hyp.append(f"kernel satisfies the {bc_kind} boundary conditions")
                    ok = ok and compliant
                if level > 0 and k < level:
                    sigma = 1.0
                cases.append(
                    PredictedCase(_HOELDER_IDS[norm, bc_kind], case, norm, hypotheses=tuple(hyp), satisfied=ok, **build(sigma))
                )
    else:
        notes.append("no Hölder metadata: Hölder-route predictions skipped")

    sig = meta.fourier_decay_sigma
    if kernel.is_homogeneous and sig is not None:
        if sig > d / 2:
            cap_trace, box = (0.5, 0.5) if bc_kind == "dirichlet" else (1.5, 1.5)
            case = "i" if bc_kind == "dirichlet" else "ii"
            hyp = (f"spectral density decays with sigma = {sig:g} > d/2 = {d / 2:g}",)
            cases.append(PredictedCase("fourier-trace", case, "trace", upper=min(sig - d / 2, cap_trace), hypotheses=hyp))
            cases.append(
                PredictedCase("fourier-hs", case, "hs", upper=sig, upper_inclusive=math.isfinite(sig), box=box, hypotheses=hyp)
            )
        else:
            notes.append(f"fourier_decay_sigma = {sig:g} <= d/2: Fourier-route predictions do not apply")
    elif not kernel.is_homogeneous:
        notes.append("kernel is not homogeneous: Fourier-route predictions skipped")
    else:
        notes.append("no spectral decay metadata: Fourier-route predictions skipped")
    return Prediction(tuple(cases), tuple(notes))


@dataclass(frozen=True)
class ThresholdReport:
    kernel: str
    bc: str
    d: int
    observed: Optional[CriticalExponent]
    one_sided: Optional[tuple[str, float]]
    prediction: Prediction
    consistent: bool
    violations: tuple[str, ...] = ()
    sharp_rstar: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel,
            "bc": self.bc,
            "d": self.d,
            "observed_rstar": None if self.observed is None else self.observed.to_dict(),
            "one_sided_bound": None if self.one_sided is None else {"side": self.one_sided[0], "bound": self.one_sided[1]},
            "predicted": [c.to_dict() for c in self.prediction.cases],
            "notes": list(self.prediction.notes),
            "sharp_rstar": self.sharp_rstar,
            "consistent": self.consistent,
            "violations": list(self.violations),
        }


def assess_thresholds(
    kernel: KernelSpec,
    bc,
    d: int,
    trace_curves: Sequence[DiagnosticCurve] = (),
    hs_curves: Sequence[DiagnosticCurve] = (),
    observed: Optional[CriticalExponent] = None,
    one_sided: Optional[tuple[str, float]] = None,
    sharp_rstar: Optional[float] = None,
    margin: float = 0.05,
) -> ThresholdReport:
    """Compare computed verdicts with the predicted admissible ranges.

    Every exponent strictly inside a satisfied range (by ``margin``) must be
    judged converged; with a known sharp value the observed r* must match it
    within its uncertainty.
    """
    prediction = predicted_thresholds(kernel, bc, d)
    bc_kind = bc if isinstance(bc, str) else bc.kind
    violations = []
    for c in trace_curves:
        for case in prediction.satisfied("trace"):
            if case.admits(c.r, margin=margin) and c.verdict != "converged":
                violations.append(f"trace r={c.r:g}: {c.verdict}, but {case.theorem}({case.case}) admits it")
    for c in hs_curves:
        for case in prediction.satisfied("hs"):
            if case.admits(c.r, c.s, margin=margin) and c.verdict != "converged":
                violations.append(f"hs r={c.r:g}, s={c.s:g}: {c.verdict}, but {case.theorem}({case.case}) admits it")
    if sharp_rstar is not None:
        if observed is None:
            violations.append(f"sharp r* = {sharp_rstar:g} expected but no bracket was found")
        elif abs(observed.rstar - sharp_rstar) > observed.uncertainty:
            violations.append(f"observed r* = {observed.rstar:.4f} +- {observed.uncertainty:.4f} misses sharp value {sharp_rstar:g}")
    return ThresholdReport(
        kernel=kernel.name,
        bc=bc_kind,
        d=d,
        observed=observed,
        one_sided=one_sided,
        prediction=prediction,
        consistent=not violations,
        violations=tuple(violations),
        sharp_rstar=sharp_rstar,
    )


# ---------------------------------------------------------------------------
# Embedding and symmetry diagnostics


def sobolev_embedding_curve(
    d: int, gap: float, J: int, norm: str = "hs", truncations: Optional[Sequence[int]] = None
) -> DiagnosticCurve:
    """Schatten norm of the embedding H^r -> H^s through the model lambda_j = j^(2/d).

    Singular values are ``lambda_j^(-gap/2)``; the Hilbert-Schmidt sum has
    terms ``j^(-2 gap/d)`` and the trace sum ``j^(-gap/d)``.
    """
    if d not in (1, 2) or not gap > 0:
        raise InvalidArgumentError("need d in {1, 2} and gap > 0")
    j = np.arange(1, J + 1, dtype=float)
    power = 2.0 * gap / d if norm == "hs" else gap / d
    terms = j**-power
    t = _truncations(truncations, J)
    return _curve("hs" if norm == "hs" else "trace", gap, 0.0 if norm == "hs" else None, terms, None, t)


@dataclass(frozen=True)
class SymmetryReport:
    left: float  # ||L^(r/2) Q||_2
    right: float  # ||Q L^(r/2)||_2
    interpolated: float  # ||L^(theta r/2) Q L^((1-theta) r/2)||_2
    equal: bool
    interpolation_bounded: bool


def symmetry_equivalence_check(Q: GalerkinMatrix, basis: Optional[EigenBasis], r: float, theta: float) -> SymmetryReport:
    Q = _with_basis(Q, basis)
    return _symmetry(Q.entries, Q.eigenvalues, r, theta)


def _symmetry(A: np.ndarray, lam: np.ndarray, r: float, theta: float) -> SymmetryReport:
    if not 0.0 <= theta <= 1.0:
        raise InvalidArgumentError("theta must lie in [0, 1]")
    d = lam ** (0.5 * r)
    left = schatten_norm(d[:, None] * A, 2)
    right = schatten_norm(A * d[None, :], 2)
    mid = schatten_norm((lam ** (0.5 * theta * r))[:, None] * A * (lam ** (0.5 * (1 - theta) * r))[None, :], 2)
    top = max(left, right)
    return SymmetryReport(
        left=left,
        right=right,
        interpolated=mid,
        equal=abs(left - right) <= 1e-10 * max(top, np.finfo(float).tiny),
        interpolation_bounded=mid <= top * (1 + 1e-10),
    )


def symmetry_check_matrix(A, eigenvalues, r: float, theta: float) -> SymmetryReport:
    """Same as ``symmetry_equivalence_check`` for a bare symmetric matrix."""
    return _symmetry(np.asarray(A, dtype=float), np.asarray(eigenvalues, dtype=float), r, theta)
