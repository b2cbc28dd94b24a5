"""Covariance kernels with smoothness and spectral metadata.

All evaluators are vectorized: points are arrays whose last axis is the
spatial dimension (a bare scalar is read as a 1D point), and
``kernel(x, y)`` broadcasts over the leading axes.

Fourier transforms use the unitary convention
``h_hat(xi) = (2 pi)^(-d/2) * int h(z) exp(-i xi.z) dz``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy import special
from scipy.interpolate import RegularGridInterpolator

from .errors import InvalidArgumentError, KernelEvaluationError
from .geometry import Domain, boundary_grid, outward_normals

# stand-in for "infinitely differentiable" in SmoothnessMeta.hoelder_order_k
SMOOTH_ORDER = 2**31 - 1


@dataclass(frozen=True)
class SmoothnessMeta:
    """Declared regularity: q(z, .) in C^{k, sigma}; Fourier decay exponent.

    ``fourier_decay_sigma`` is the sigma in ``h_hat(xi) <= C (1+|xi|^2)^(-sigma)``;
    ``math.inf`` means every finite sigma is admissible. Nothing here is
    trusted by the numerics; see ``hoelder_estimate`` for an empirical check.
    """

    hoelder_order_k: int = 0
    hoelder_sigma: Optional[float] = None
    fourier_decay_sigma: Optional[float] = None

    def __post_init__(self):
        if self.hoelder_order_k < 0:
            raise InvalidArgumentError("hoelder_order_k must be >= 0")
        if self.hoelder_sigma is not None and not (0.0 < self.hoelder_sigma <= 1.0):
            raise InvalidArgumentError("hoelder_sigma must lie in (0, 1]")
        if self.fourier_decay_sigma is not None and not self.fourier_decay_sigma > 0:
            raise InvalidArgumentError("fourier_decay_sigma must be positive")


def as_points(x, dim: Optional[int] = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None]
    if dim is not None and x.shape[-1] != dim:
        if dim == 1:
            x = x[..., None]
        else:
            raise InvalidArgumentError(f"expected points with trailing dimension {dim}, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class KernelSpec:
    name: str
    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray]
    smoothness: SmoothnessMeta = field(default_factory=SmoothnessMeta)
    is_homogeneous: bool = False
    profile: Optional[Callable[[np.ndarray], np.ndarray]] = None
    spectral_density: Optional[Callable[[np.ndarray], np.ndarray]] = None
    dirichlet_compliant: bool = False
    neumann_compliant: bool = False
    dim: Optional[int] = None
    params: dict = field(default_factory=dict)

    def __call__(self, x, y) -> np.ndarray:
        return self.evaluate(as_points(x, self.dim), as_points(y, self.dim))

    def gram(self, X, Y=None) -> np.ndarray:
        """Matrix ``K[i, j] = q(X[i], Y[j])``; 1D inputs may be flat arrays."""
        X = _point_list(X, self.dim)
        Y = X if Y is None else _point_list(Y, X.shape[1])
        return self.evaluate(X[:, None, :], Y[None, :, :])

    def diagonal(self, X) -> np.ndarray:
        X = _point_list(X, self.dim)
        return self.evaluate(X, X)

    def describe(self) -> dict:
        meta = self.smoothness
        return {
            "name": self.name,
            "params": {k: v for k, v in self.params.items() if _jsonable(v)},
            "is_homogeneous": self.is_homogeneous,
            "dirichlet_compliant": self.dirichlet_compliant,
            "neumann_compliant": self.neumann_compliant,
            "hoelder_order_k": None if meta.hoelder_order_k >= SMOOTH_ORDER else meta.hoelder_order_k,
            "hoelder_sigma": meta.hoelder_sigma,
            "fourier_decay_sigma": None if meta.fourier_decay_sigma in (None, math.inf) else meta.fourier_decay_sigma,
            "fourier_decay_unbounded": meta.fourier_decay_sigma == math.inf,
        }


def _jsonable(v) -> bool:
    return isinstance(v, (int, float, str, bool)) or v is None


def _point_list(X, dim: Optional[int]) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim <= 1:
        return X.reshape(-1, 1)
    if dim is not None and X.shape[1] != dim:
        raise InvalidArgumentError(f"kernel is {dim}-dimensional, points have shape {X.shape}")
    return X


def _norm(z: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(z * z, axis=-1))


# ---------------------------------------------------------------------------
# Matérn family


def matern_profile(nu: float, length: float, r) -> np.ndarray:
    """Matérn correlation at distance ``r``, normalized to 1 at r = 0."""
    r = np.abs(np.asarray(r, dtype=float))
    if nu == 0.5:
        return np.exp(-r / length)
    if nu == 1.5:
        s = math.sqrt(3.0) * r / length
        return (1.0 + s) * np.exp(-s)
    if nu == 2.5:
        s = math.sqrt(5.0) * r / length
        return (1.0 + s + s * s / 3.0) * np.exp(-s)
    s = math.sqrt(2.0 * nu) * r / length
    out = np.ones_like(s)
    pos = s > 0
    sp = s[pos]
    # x^nu K_nu(x) via the exponentially scaled Bessel function
    log_pref = (1.0 - nu) * math.log(2.0) - special.gammaln(nu)
    with np.errstate(under="ignore"):
        out[pos] = np.exp(log_pref + nu * np.log(sp) - sp) * special.kve(nu, sp)
    return out


def matern_spectral_density(nu: float, length: float, d: int, xi) -> np.ndarray:
    """Unitary Fourier transform of the Matérn profile in ``d`` dimensions.

    ``xi`` is either a vector of frequencies (last axis ``d``) or, for d = 1,
    any array of scalar frequencies.
    """
    if nu <= 0 or length <= 0:
        raise InvalidArgumentError("Matérn parameters require nu > 0 and length > 0")
    xi = np.asarray(xi, dtype=float)
    xi2 = xi * xi if d == 1 and (xi.ndim == 0 or xi.shape[-1] != 1) else np.sum(xi * xi, axis=-1)
    kappa2 = 2.0 * nu / length**2
    alpha = nu + 0.5 * d
    log_c = (
        0.5 * d * math.log(2.0)
        + special.gammaln(alpha)
        - special.gammaln(nu)
        + nu * math.log(kappa2)
    )
    return np.exp(log_c - alpha * np.log(kappa2 + xi2))


def gaussian_spectral_density(length: float, d: int, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    xi2 = xi * xi if d == 1 and (xi.ndim == 0 or xi.shape[-1] != 1) else np.sum(xi * xi, axis=-1)
    return (length / math.sqrt(2.0)) ** d * np.exp(-0.25 * length**2 * xi2)


def _matern_smoothness(nu: float, d: int) -> SmoothnessMeta:
    # profile ~ |r|^(2 nu) at the origin: q(z, .) in C^{k, 2nu - k}
    k = max(math.ceil(2.0 * nu) - 1, 0)
    sigma = 2.0 * nu - k
    if float(nu).is_integer():
        # r^(2nu) log r: every Hölder exponent below 1, not Lipschitz
        sigma = 1.0 - 1e-9
    return SmoothnessMeta(k, min(sigma, 1.0), nu + 0.5 * d)


def _homogeneous(name, profile, density, smoothness, dim, params) -> KernelSpec:
    def evaluate(x, y):
        return profile(x - y)

    return KernelSpec(
        name=name,
        evaluate=evaluate,
        smoothness=smoothness,
        is_homogeneous=True,
        profile=profile,
        spectral_density=density,
        dim=dim,
        params=params,
    )


def builtin_kernel(name: str, dim: int = 1, **params) -> KernelSpec:
    """Construct one of the named kernels.

    ``exponential(length)``, ``gaussian(length)``, ``matern(nu, length)``,
    ``brownian_bridge(lower, upper)``, ``brownian_motion(lower)``,
    ``rank_one(phi, ...)`` and ``tabulated(grid, values)`` or
    ``tabulated(path)``. Brownian kernels in 2D are tensor products over axes.
    """
    if dim not in (1, 2):
        raise InvalidArgumentError(f"dim must be 1 or 2, got {dim}")
    length = float(params.get("length", 1.0))
    if name in ("exponential", "gaussian", "matern") and not length > 0:
        raise InvalidArgumentError(f"{name}: length must be positive, got {length}")

    if name == "exponential":
        return _homogeneous(
            "exponential",
            lambda z: np.exp(-_norm(z) / length),
            lambda xi: matern_spectral_density(0.5, length, dim, xi),
            SmoothnessMeta(0, 1.0, 0.5 * (dim + 1)),
            dim,
            {"length": length, "dim": dim},
        )
    if name == "gaussian":
        return _homogeneous(
            "gaussian",
            lambda z: np.exp(-np.sum(z * z, axis=-1) / length**2),
            lambda xi: gaussian_spectral_density(length, dim, xi),
            SmoothnessMeta(SMOOTH_ORDER, 1.0, math.inf),
            dim,
            {"length": length, "dim": dim},
        )
    if name == "matern":
        nu = float(params.get("nu", float("nan")))
        if not nu > 0:
            raise InvalidArgumentError(f"matern: nu must be positive, got {params.get('nu')}")
        return _homogeneous(
            "matern",
            lambda z: matern_profile(nu, length, _norm(z)),
            lambda xi: matern_spectral_density(nu, length, dim, xi),
            _matern_smoothness(nu, dim),
            dim,
            {"nu": nu, "length": length, "dim": dim},
        )
    if name in ("brownian_bridge", "brownian_motion"):
        lower = np.broadcast_to(np.asarray(params.get("lower", 0.0), dtype=float), (dim,)).copy()
        upper = np.broadcast_to(np.asarray(params.get("upper", 1.0), dtype=float), (dim,)).copy()
        if np.any(upper <= lower):
            raise InvalidArgumentError(f"{name}: need lower < upper")
        bridge = name == "brownian_bridge"

        def evaluate(x, y):
            lo = np.minimum(x, y) - lower
            if bridge:
                hi = upper - np.maximum(x, y)
                return np.prod(lo * hi / (upper - lower), axis=-1)
            return np.prod(lo, axis=-1)

        return KernelSpec(
            name=name,
            evaluate=evaluate,
            smoothness=SmoothnessMeta(0, 1.0, None),
            dirichlet_compliant=bridge,
            dim=dim,
            params={"lower": float(lower[0]), "upper": float(upper[0]), "dim": dim},
        )
    if name == "rank_one":
        phi = params.get("phi")
        if not callable(phi):
            raise InvalidArgumentError("rank_one requires a callable phi(points)")

        def evaluate(x, y):
            return phi(x) * phi(y)

        return KernelSpec(
            name="rank_one",
            evaluate=evaluate,
            smoothness=params.get("smoothness", SmoothnessMeta(SMOOTH_ORDER, 1.0, None)),
            dirichlet_compliant=bool(params.get("dirichlet_compliant", False)),
            neumann_compliant=bool(params.get("neumann_compliant", False)),
            dim=dim,
            params={"label": params.get("label", "phi"), "dim": dim},
        )
    if name == "tabulated":
        if "path" in params:
            return load_tabulated_kernel(params["path"])
        return tabulated_kernel(params["grid"], params["values"])
    raise InvalidArgumentError(f"unknown kernel {name!r}")


# ---------------------------------------------------------------------------
# Tabulated kernels


def tabulated_kernel(grid, values, name: str = "tabulated") -> KernelSpec:
    """Multilinear interpolation of kernel values on a tensor grid.

    ``grid`` lists the sorted coordinate axes in the order (x, y) for 1D or
    (x1, x2, y1, y2) for 2D; ``values`` has the matching tensor shape.
    Evaluation outside the grid returns NaN.
    """
    axes = [np.asarray(a, dtype=float) for a in grid]
    if len(axes) not in (2, 4):
        raise InvalidArgumentError("tabulated grid needs 2 (1D) or 4 (2D) axes")
    for a in axes:
        if a.ndim != 1 or a.size < 2 or np.any(np.diff(a) <= 0):
            raise InvalidArgumentError("tabulated grid axes must be strictly increasing with >= 2 nodes")
    values = np.asarray(values, dtype=float)
    if values.shape != tuple(a.size for a in axes):
        raise InvalidArgumentError(f"values shape {values.shape} does not match grid")
    dim = len(axes) // 2
    interp = RegularGridInterpolator(axes, values, method="linear", bounds_error=False, fill_value=np.nan)

    def evaluate(x, y):
        x, y = np.broadcast_arrays(x, y)
        pts = np.concatenate([x, y], axis=-1)
        return interp(pts.reshape(-1, 2 * dim)).reshape(pts.shape[:-1])

    return KernelSpec(
        name=name,
        evaluate=evaluate,
        smoothness=SmoothnessMeta(0, 1.0, None),
        dim=dim,
        params={"dim": dim},
    )


def load_tabulated_kernel(path) -> KernelSpec:
    """Read ``x,y,q`` (1D) or ``x1,x2,y1,y2,q`` (2D) rows from a CSV file."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        rows = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
    if header == ["x", "y", "q"]:
        ncoord = 2
    elif header == ["x1", "x2", "y1", "y2", "q"]:
        ncoord = 4
    else:
        raise InvalidArgumentError(f"{path}: unexpected header {header}")
    axes = [np.unique(rows[:, i]) for i in range(ncoord)]
    shape = tuple(a.size for a in axes)
    if rows.shape[0] != int(np.prod(shape)):
        raise InvalidArgumentError(f"{path}: rows do not form a full tensor grid")
    values = np.full(shape, np.nan)
    index = tuple(np.searchsorted(axes[i], rows[:, i]) for i in range(ncoord))
    values[index] = rows[:, -1]
    if np.isnan(values).any():
        raise InvalidArgumentError(f"{path}: duplicate or missing grid nodes")
    kernel = tabulated_kernel(axes, values, name="tabulated")
    return replace(kernel, params={"dim": kernel.dim, "path": str(path)})


def save_tabulated_kernel(path, kernel: KernelSpec, axis_nodes) -> None:
    """Write kernel samples on the tensor grid built from ``axis_nodes``."""
    axes = [np.asarray(a, dtype=float) for a in axis_nodes]
    dim = len(axes)
    full = axes + axes
    mesh = np.meshgrid(*full, indexing="ij")
    flat = np.column_stack([m.ravel() for m in mesh])
    q = kernel(flat[:, :dim], flat[:, dim:])
    header = ["x", "y", "q"] if dim == 1 else ["x1", "x2", "y1", "y2", "q"]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row, val in zip(flat, q):
            w.writerow([repr(float(v)) for v in row] + [repr(float(val))])


# ---------------------------------------------------------------------------
# Diagnostics


def profile_fourier_transform(profile, d: int = 1, half_width: float = 40.0, n: int = 2**16):
    """FFT approximation of the unitary transform of a decaying profile.

    Samples the profile on ``[-half_width, half_width)^d`` and applies the
    attenuation factor of piecewise-(multi)linear interpolation, so profiles
    with a kink at the origin converge at second order. Returns
    ``(xi, h_hat)``; in 2D ``xi`` is the 1D frequency axis of a square grid.
    """
    h = 2.0 * half_width / n
    z = -half_width + h * np.arange(n)
    xi = 2.0 * np.pi * np.fft.fftfreq(n, d=h)
    atten = np.sinc(xi * h / (2.0 * np.pi)) ** 2
    if d == 1:
        vals = profile(z[:, None])
        F = np.fft.fft(np.fft.ifftshift(vals))
        out = h * F.real * atten / np.sqrt(2.0 * np.pi)
        order = np.argsort(xi)
        return xi[order], out[order]
    Z1, Z2 = np.meshgrid(z, z, indexing="ij")
    vals = profile(np.stack([Z1, Z2], axis=-1))
    F = np.fft.fft2(np.fft.ifftshift(vals))
    out = h * h * F.real * np.outer(atten, atten) / (2.0 * np.pi)
    order = np.argsort(xi)
    return xi[order], out[np.ix_(order, order)]


@dataclass(frozen=True)
class ComplianceReport:
    bc: str
    max_residual: float
    scale: float
    compliant: bool
    worst_point: tuple
    checked: bool = True


def boundary_compliance(
    kernel: KernelSpec, domain: Domain, bc: str, grid_n: int = 33, h_fd: float = 1e-5
) -> ComplianceReport:
    """Largest boundary-condition residual of ``q(x*, y)`` over probe points.

    Dirichlet: ``|q(x*, y)|``; Neumann: ``|d/dn q(x*, y)|`` by central
    differences with step ``h_fd`` (identity diffusion only). Compliant means
    ``max_residual < 1e-6 * max|q|`` over all sampled values.
    """
    if bc not in ("dirichlet", "neumann"):
        raise InvalidArgumentError(f"bc must be 'dirichlet' or 'neumann', got {bc!r}")
    xb = boundary_grid(domain, grid_n)
    t = (np.arange(grid_n) + 0.5) / grid_n
    if domain.dim == 1:
        yi = (domain.lower[0] + domain.lengths[0] * t)[:, None]
    else:
        g1 = domain.lower[0] + domain.lengths[0] * t
        g2 = domain.lower[1] + domain.lengths[1] * t
        G1, G2 = np.meshgrid(g1, g2, indexing="ij")
        yi = np.column_stack([G1.ravel(), G2.ravel()])

    def q(a, b):
        vals = kernel(a[:, None, :], b[None, :, :])
        bad = ~np.isfinite(vals)
        if bad.any():
            i, _ = np.argwhere(bad)[0]
            raise KernelEvaluationError(f"{kernel.name}: non-finite value near boundary point {a[i]}", point=a[i])
        return vals

    on_bnd = q(xb, yi)
    scale = float(max(np.abs(on_bnd).max(), np.abs(q(yi, yi)).max()))
    if bc == "dirichlet":
        resid = np.abs(on_bnd)
    else:
        n = outward_normals(domain, xb)
        fwd, bwd = xb + h_fd * n, xb - h_fd * n
        try:
            resid = np.abs(q(fwd, yi) - q(bwd, yi)) / (2.0 * h_fd)
        except KernelEvaluationError:
            # kernel undefined outside the domain: second-order one-sided stencil
            b2 = xb - 2.0 * h_fd * n
            resid = np.abs(3.0 * on_bnd - 4.0 * q(bwd, yi) + q(b2, yi)) / (2.0 * h_fd)
    i, j = np.unravel_index(np.argmax(resid), resid.shape)
    max_res = float(resid[i, j])
    return ComplianceReport(
        bc=bc,
        max_residual=max_res,
        scale=scale,
        compliant=bool(max_res < 1e-6 * scale),
        worst_point=(tuple(map(float, xb[i])), tuple(map(float, yi[j]))),
    )


@dataclass(frozen=True)
class HoelderFit:
    sigma: float
    constant: float
    separations: np.ndarray
    sup_differences: np.ndarray


def hoelder_estimate(kernel: KernelSpec, domain: Domain, probes: int = 200, seed: int = 0) -> HoelderFit:
    """Fit ``sup_z |q(z,x) - q(z,y)| ~ C |x-y|^sigma`` at dyadic separations."""
    if probes < 100:
        raise InvalidArgumentError("hoelder_estimate needs probes >= 100")
    rng = np.random.default_rng(seed)
    lo, hi = np.asarray(domain.lower), np.asarray(domain.upper)
    span = float(domain.lengths.min())
    seps = span * 2.0 ** -np.arange(3, 15)
    sups = np.empty(seps.size)
    z_rand = lo + (hi - lo) * rng.random((probes, domain.dim))
    for i, delta in enumerate(seps):
        direction = rng.normal(size=(probes, domain.dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        x = lo + delta + (hi - lo - 2 * delta) * rng.random((probes, domain.dim))
        y = x + delta * direction
        z = np.vstack([z_rand, x, y])
        diff = np.abs(kernel(z[:, None, :], x[None, :, :]) - kernel(z[:, None, :], y[None, :, :]))
        sups[i] = diff.max()
    pos = sups > 1e-14 * max(1.0, float(np.abs(kernel.diagonal(z_rand)).max()))
    if pos.sum() < 2:
        return HoelderFit(1.0, 0.0, seps, sups)
    slope, intercept = np.polyfit(np.log(seps[pos]), np.log(sups[pos]), 1)
    return HoelderFit(float(np.clip(slope, 1e-6, 1.0)), float(np.exp(intercept)), seps, sups)
