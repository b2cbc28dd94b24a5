"""Finite span elements of a reproducing kernel Hilbert space and Fourier membership norms."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError
from .kernels import KernelSpec, as_points


class DuplicatePointsWarning(UserWarning):
    pass


def gram(kernel: KernelSpec, points) -> np.ndarray:
    """Kernel matrix ``K[i, j] = q(x_i, x_j)``; warns when points repeat."""
    X = as_points(points, kernel.dim)
    if X.ndim == 1:
        X = X[None, :]
    X = X.reshape(-1, X.shape[-1])
    if np.unique(X, axis=0).shape[0] < X.shape[0]:
        warnings.warn("duplicate points: the Gram matrix is singular", DuplicatePointsWarning, stacklevel=2)
    return kernel.gram(X)


def _same_kernel(a: KernelSpec, b: KernelSpec) -> bool:
    return a is b or (a.name == b.name and a.describe() == b.describe())


@dataclass(frozen=True)
class RkhsElement:
    """``f = sum_i coeffs[i] q(points[i], .)``."""

    kernel: KernelSpec
    points: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.points, dtype=float)
        dim = self.kernel.dim or (P.shape[-1] if P.ndim > 1 else 1)
        P = P.reshape(-1, dim)
        c = np.asarray(self.coeffs, dtype=float).ravel()
        if c.shape[0] != P.shape[0]:
            raise InvalidArgumentError(f"{P.shape[0]} points but {c.shape[0]} coefficients")
        object.__setattr__(self, "points", P)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def representer(cls, kernel: KernelSpec, x) -> "RkhsElement":
        return cls(kernel, np.atleast_1d(np.asarray(x, dtype=float)), [1.0])

    @classmethod
    def zero(cls, kernel: KernelSpec, dim: int = 1) -> "RkhsElement":
        return cls(kernel, np.zeros((0, dim)), np.zeros(0))

    def __call__(self, y) -> np.ndarray:
        Y = as_points(y, self.points.shape[1]).reshape(-1, self.points.shape[1])
        if self.coeffs.size == 0:
            return np.zeros(Y.shape[0])
        return self.kernel.gram(Y, self.points) @ self.coeffs

    def _combine(self, other: "RkhsElement", sign: float) -> "RkhsElement":
        if not _same_kernel(self.kernel, other.kernel):
            raise InvalidArgumentError(f"kernel mismatch: {self.kernel.name!r} vs {other.kernel.name!r}")
        return RkhsElement(
            self.kernel,
            np.vstack([self.points, other.points]),
            np.concatenate([self.coeffs, sign * other.coeffs]),
        )

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __mul__(self, a: float):
        return RkhsElement(self.kernel, self.points, a * self.coeffs)

    __rmul__ = __mul__

    def norm(self) -> float:
        return math.sqrt(max(rkhs_inner(self, self), 0.0))


def rkhs_inner(f: RkhsElement, g: RkhsElement) -> float:
    """``alpha^T K_fg beta`` with ``K_fg[i, j] = q(x_i, y_j)``."""
    if not _same_kernel(f.kernel, g.kernel):
        raise InvalidArgumentError(f"kernel mismatch: {f.kernel.name!r} vs {g.kernel.name!r}")
    if f.coeffs.size == 0 or g.coeffs.size == 0:
        return 0.0
    K = f.kernel.gram(f.points, g.points)
    return float(f.coeffs @ K @ g.coeffs)


def pointwise_bound_check(f: RkhsElement, probes) -> float:
    """``max_x |f(x)| - ||f|| q(x, x)^(1/2)``; never positive up to round-off."""
    P = as_points(probes, f.points.shape[1]).reshape(-1, f.points.shape[1])
    vals = np.abs(f(P))
    bound = f.norm() * np.sqrt(np.clip(f.kernel.diagonal(P), 0.0, None))
    return float(np.max(vals - bound))


# ---------------------------------------------------------------------------
# Fourier-side norm for homogeneous kernels


@dataclass(frozen=True)
class HqNormResult:
    value: float  # math.inf when flagged non-convergent
    converged: bool
    tail_slope: float  # decay exponent of the shell density of |f_hat|^2 / h_hat
    band: float  # largest frequency used
    shells: np.ndarray  # shell centres
    partial_integrals: np.ndarray  # squared norm accumulated up to each shell


def _shell_sums(radius: np.ndarray, g: np.ndarray, cell: float, band: float, bins: int):
    """Sum ``g * cell`` on geometric shells in ``(band/2^6, band]``, per unit radius."""
    edges = np.geomspace(band / 64.0, band, bins + 1)
    edges = np.concatenate([[0.0], edges])
    idx = np.searchsorted(edges, radius, side="right") - 1
    inside = (radius <= band) & (idx >= 0)
    sums = np.bincount(idx[inside], weights=g[inside] * cell, minlength=len(edges) - 1)[: len(edges) - 1]
    mids = np.concatenate([[0.5 * edges[1]], np.sqrt(edges[1:-1] * edges[2:])])
    widths = np.diff(edges)
    return mids, sums, widths


def hq_fourier_norm(values, grid, kernel: KernelSpec, bins: int = 48) -> HqNormResult:
    """``||f||_{H_q(R^d)}^2 = (2 pi)^(-d/2) int |f_hat|^2 / h_hat`` from uniform samples.

    ``values`` are samples of a compactly supported f on the uniform grid
    ``grid`` (a 1D coordinate array, or a pair of them in 2D) and f is taken
    as zero outside. The samples are zero-padded to a power of two at least
    four times their length, transformed with the linear-interpolation
    attenuation factor, and the integrand is summed up to the Nyquist
    frequency. The result is flagged non-convergent (value ``inf``) when the
    radial density of the integrand in the upper part of the band decays no
    faster than ``rho^-1``, or when the quotient overflows.
    """
    if kernel.spectral_density is None or not kernel.is_homogeneous:
        raise InvalidArgumentError(f"kernel {kernel.name!r} has no spectral density")
    f = np.asarray(values, dtype=float)
    axes = [np.asarray(grid, dtype=float)] if f.ndim == 1 else [np.asarray(a, dtype=float) for a in grid]
    d = f.ndim
    if d not in (1, 2) or len(axes) != d or any(a.size != n for a, n in zip(axes, f.shape)):
        raise InvalidArgumentError("values must be tabulated on the given 1D or 2D grid")
    hs = [float(a[1] - a[0]) for a in axes]
    for a, h in zip(axes, hs):
        if not np.allclose(np.diff(a), h, rtol=1e-9, atol=0):
            raise InvalidArgumentError("grid must be uniform")
    lengths = [1 << int(math.ceil(math.log2(4 * n))) for n in f.shape]
    F = np.abs(np.fft.fftn(f, s=lengths, axes=tuple(range(d))))
    freqs = [2.0 * np.pi * np.fft.fftfreq(L, d=h) for L, h in zip(lengths, hs)]
    atten = [np.sinc(xi * h / (2.0 * np.pi)) ** 2 for xi, h in zip(freqs, hs)]
    scale = np.prod(hs) / (2.0 * np.pi) ** (d / 2)
    if d == 1:
        fhat = scale * F * atten[0]
        radius = np.abs(freqs[0])
    else:
        fhat = scale * F * np.outer(atten[0], atten[1])
        radius = np.hypot(freqs[0][:, None], freqs[1][None, :])
    radius = radius.ravel()
    power = (fhat**2).ravel()
    band = float(min(np.pi / h for h in hs))
    cell = float(np.prod([2.0 * np.pi / (L * h) for L, h in zip(lengths, hs)]))
    if power.max() == 0:
        return HqNormResult(0.0, True, math.inf, band, np.zeros(0), np.zeros(0))
    # |f_hat| below 1e-13 of its peak is round-off
    resolved = power > 1e-26 * power.max()
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        xi = radius if d == 1 else np.column_stack([radius, np.zeros_like(radius)])
        dens = np.asarray(kernel.spectral_density(xi), dtype=float)
        g = np.where(resolved, power / dens, 0.0)
    in_band = radius <= band
    mids, sums, widths = _shell_sums(radius, g, cell, band, bins)
    _, raw, _ = _shell_sums(radius, np.where(resolved, power, 0.0), cell, band, bins)
    partial = np.cumsum(sums) / (2.0 * np.pi) ** (d / 2)
    if not np.all(np.isfinite(g[in_band])) or not np.all(np.isfinite(partial)):
        return HqNormResult(math.inf, False, -math.inf, band, mids, partial)
    gamma, converged = _radial_decay(mids, sums / widths, raw > 0)
    value = math.sqrt(max(partial[-1], 0.0)) if converged else math.inf
    return HqNormResult(value, converged, gamma, band, mids, partial)


def _radial_decay(mids: np.ndarray, density: np.ndarray, resolved: np.ndarray, margin: float = 0.05):
    """Fitted decay exponent of the radial density over the upper half of the shells."""
    good = resolved & (density > 0)
    good[0] = False
    if not good.any():
        return math.inf, True
    last = int(np.nonzero(good)[0][-1])
    half = len(mids) // 2
    if last < half:
        # the spectrum drops below resolution early: all mass is captured
        return math.inf, True
    sel = good.copy()
    sel[:half] = False
    if sel.sum() < 4:
        return math.nan, False
    slope = np.polyfit(np.log(mids[sel]), np.log(density[sel]), 1)[0]
    gamma = -float(slope)
    return gamma, gamma > 1.0 + margin
