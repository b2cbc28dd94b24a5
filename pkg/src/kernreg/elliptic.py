"""Eigenbases and fractional powers of second-order elliptic operators.

The operator is ``-div(a grad u) + c u`` on a box with homogeneous Dirichlet
or Neumann (conormal) conditions. Constant-coefficient Laplacian bases are
analytic in 1D and 2D; variable coefficients are supported in 1D through a
piecewise-linear Galerkin discretization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .errors import InvalidArgumentError, NumericalError
from .geometry import Domain, QuadratureRule, gauss_legendre_panels


@dataclass(frozen=True)
class BoundaryCondition:
    kind: str
    c0: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("dirichlet", "neumann"):
            raise InvalidArgumentError(f"boundary condition kind must be dirichlet or neumann, got {self.kind!r}")
        if self.kind == "neumann" and not (self.c0 is not None and self.c0 > 0):
            raise InvalidArgumentError("neumann boundary condition requires c0 > 0")

    @classmethod
    def dirichlet(cls) -> "BoundaryCondition":
        return cls("dirichlet")

    @classmethod
    def neumann(cls, c0: float = 1.0) -> "BoundaryCondition":
        return cls("neumann", c0)


@dataclass(frozen=True)
class EllipticCoefficients:
    """Diffusion ``a`` (scalar or d x d matrix valued), reaction ``c`` and ellipticity bound."""

    a: Callable
    c: Callable
    lambda0: float

    def check(self, domain: Domain, bc: BoundaryCondition, samples: int = 257, seed: int = 0) -> None:
        rng = np.random.default_rng(seed)
        lo, hi = np.asarray(domain.lower), np.asarray(domain.upper)
        x = lo + (hi - lo) * rng.random((samples, domain.dim))
        if domain.dim == 1:
            x = np.concatenate([x[:, 0], [lo[0], hi[0]]])
        a = np.asarray(self.a(x), dtype=float)
        c = np.broadcast_to(np.asarray(self.c(x), dtype=float), (len(x),))
        if a.ndim <= 1:
            if np.any(np.broadcast_to(a, (len(x),)) < self.lambda0):
                raise InvalidArgumentError("diffusion coefficient violates a(x) >= lambda0")
        else:
            if not np.allclose(a, np.swapaxes(a, -1, -2)):
                raise InvalidArgumentError("diffusion matrix a(x) is not symmetric")
            if np.any(np.linalg.eigvalsh(a).min(axis=-1) < self.lambda0):
                raise InvalidArgumentError("diffusion matrix violates y'a(x)y >= lambda0 |y|^2")
        if np.any(c < 0):
            raise InvalidArgumentError("reaction coefficient c must be nonnegative")
        if bc.kind == "neumann" and np.any(c < bc.c0):
            raise InvalidArgumentError(f"neumann conditions require c(x) >= c0 = {bc.c0}")

    @classmethod
    def constant(cls, a: float = 1.0, c: float = 0.0) -> "EllipticCoefficients":
        return cls(lambda x: np.full(np.shape(x)[:1], float(a)), lambda x: np.full(np.shape(x)[:1], float(c)), float(a))


@dataclass(frozen=True)
class EigenBasis:
    """First ``J`` L2-orthonormal eigenpairs, eigenvalues ascending.

    ``values(points)`` returns the ``(n, J)`` matrix of eigenfunction values;
    ``eval(j, points)`` a single column.
    """

    eigenvalues: np.ndarray
    bc: BoundaryCondition
    domain: Domain
    source: str
    _evaluator: Callable = field(repr=False)
    indices: Optional[np.ndarray] = field(default=None, repr=False)
    max_frequency: Optional[np.ndarray] = field(default=None, repr=False)
    matrices: Optional[tuple] = field(default=None, repr=False)

    @property
    def J(self) -> int:
        return self.eigenvalues.shape[0]

    def values(self, points, count: Optional[int] = None) -> np.ndarray:
        count = self.J if count is None else int(count)
        if count > self.J:
            raise InvalidArgumentError(f"basis holds {self.J} functions, {count} requested")
        pts = np.asarray(points, dtype=float)
        if pts.ndim <= 1:
            pts = pts.reshape(-1, 1)
        return self._evaluator(pts, count)

    def eval(self, j: int, points) -> np.ndarray:
        return self.values(points, j + 1)[:, j]

    def truncate(self, count: int) -> "EigenBasis":
        if count > self.J:
            raise InvalidArgumentError(f"cannot truncate {self.J} functions to {count}")
        return EigenBasis(
            self.eigenvalues[:count],
            self.bc,
            self.domain,
            self.source,
            self._evaluator,
            None if self.indices is None else self.indices[:count],
            None if self.max_frequency is None else self.max_frequency,
            self.matrices,
        )

    def oscillations(self, count: Optional[int] = None) -> np.ndarray:
        """Half-periods of the ``count``-th function along each axis."""
        count = self.J if count is None else count
        if self.indices is not None:
            return self.indices[:count].max(axis=0).astype(float)
        return np.full(self.domain.dim, float(count))

    def reference_rule(self, count: Optional[int] = None, order: int = 10) -> QuadratureRule:
        """Composite Gauss rule resolving the first ``count`` functions."""
        if self.source == "sturm_liouville":
            mesh = self.matrices[2]
            # quadratic products of piecewise-linear functions: 2 points per mesh cell suffice
            return gauss_legendre_panels(self.domain, len(mesh) - 1, 2)
        osc = self.oscillations(count)
        panels = np.maximum(1, np.ceil(osc + 1)).astype(int)
        return gauss_legendre_panels(self.domain, panels, order)


def _axis_modes(kind: str, a: float, L: float, count: int):
    """1D Laplacian eigenfunctions on (a, a+L) without the reaction shift."""
    start = 1 if kind == "dirichlet" else 0
    idx = np.arange(start, start + count)
    return idx, (idx * math.pi / L) ** 2


def _axis_values(kind: str, a: float, L: float, idx: np.ndarray, x: np.ndarray) -> np.ndarray:
    arg = np.outer(x - a, idx * (math.pi / L))
    if kind == "dirichlet":
        return math.sqrt(2.0 / L) * np.sin(arg)
    vals = math.sqrt(2.0 / L) * np.cos(arg)
    vals[:, idx == 0] = 1.0 / math.sqrt(L)
    return vals


def laplacian_basis(domain: Domain, bc: BoundaryCondition, J: int) -> EigenBasis:
    """Analytic eigenpairs of ``-Laplace`` (Dirichlet) or ``-Laplace + c0`` (Neumann).

    Ties between equal eigenvalues in 2D are ordered lexicographically by the
    index pair, so the ordering is reproducible.
    """
    if J < 1:
        raise InvalidArgumentError(f"J must be >= 1, got {J}")
    shift = 0.0 if bc.kind == "dirichlet" else float(bc.c0)
    start = 1 if bc.kind == "dirichlet" else 0
    lows, Ls = domain.lower, domain.lengths

    if domain.dim == 1:
        idx, lam = _axis_modes(bc.kind, lows[0], Ls[0], J)
        pairs = idx[:, None]
        eigenvalues = lam + shift
    else:
        m = np.arange(start, start + J)
        I, K = np.meshgrid(m, m, indexing="ij")
        I, K = I.ravel(), K.ravel()
        # integer-exact key on square domains keeps genuine ties exact
        key = I**2 / Ls[0] ** 2 + K**2 / Ls[1] ** 2
        order = np.lexsort((K, I, key))[:J]
        pairs = np.column_stack([I[order], K[order]])
        eigenvalues = math.pi**2 * key[order] + shift

    kind = bc.kind

    def evaluator(points: np.ndarray, count: int) -> np.ndarray:
        p = pairs[:count]
        out = _axis_values(kind, lows[0], Ls[0], p[:, 0], points[:, 0])
        for axis in range(1, domain.dim):
            out = out * _axis_values(kind, lows[axis], Ls[axis], p[:, axis], points[:, axis])
        return out

    return EigenBasis(
        eigenvalues=np.asarray(eigenvalues, dtype=float),
        bc=bc,
        domain=domain,
        source="analytic",
        _evaluator=evaluator,
        indices=pairs,
    )


def _p1_matrices(x: np.ndarray, a_nodes: np.ndarray, c_nodes: np.ndarray):
    """Stiffness and consistent-mass matrices of linear elements.

    Element coefficients are arithmetic averages of nodal values, which makes
    the stiffness part the classical three-point flux-form difference stencil.
    """
    h = np.diff(x)
    a_half = 0.5 * (a_nodes[:-1] + a_nodes[1:])
    c_half = 0.5 * (c_nodes[:-1] + c_nodes[1:])
    n = x.size
    K = np.zeros((n, n))
    M = np.zeros((n, n))
    i = np.arange(n - 1)
    k_el = a_half / h
    m_el = h / 6.0
    for (p, q), (ks, ms) in {
        (0, 0): (1.0, 2.0),
        (1, 1): (1.0, 2.0),
        (0, 1): (-1.0, 1.0),
        (1, 0): (-1.0, 1.0),
    }.items():
        np.add.at(K, (i + p, i + q), ks * k_el + ms * c_half * m_el)
        np.add.at(M, (i + p, i + q), ms * m_el)
    return K, M


def sturm_liouville_basis(
    domain: Domain, coeffs: EllipticCoefficients, bc: BoundaryCondition, mesh_M: int, J: int
) -> EigenBasis:
    """Eigenpairs of ``-(a u')' + c u`` on an interval via linear finite elements.

    Eigenfunctions are the piecewise-linear interpolants of the discrete
    eigenvectors; the consistent mass matrix makes them exactly L2-orthonormal.
    The Neumann condition is the conormal one, ``a u' = 0`` at both ends.
    """
    if domain.dim != 1:
        raise InvalidArgumentError("sturm_liouville_basis supports 1D domains only")
    if J < 1 or J > mesh_M / 4:
        raise InvalidArgumentError(f"need 1 <= J <= mesh_M/4, got J={J}, mesh_M={mesh_M}")
    coeffs.check(domain, bc)
    x = np.linspace(domain.lower[0], domain.upper[0], mesh_M + 1)
    a_nodes = np.broadcast_to(np.asarray(coeffs.a(x), dtype=float), x.shape)
    c_nodes = np.broadcast_to(np.asarray(coeffs.c(x), dtype=float), x.shape)
    K, M = _p1_matrices(x, a_nodes, c_nodes)
    free = slice(1, mesh_M) if bc.kind == "dirichlet" else slice(0, mesh_M + 1)
    Kf, Mf = K[free, free], M[free, free]
    try:
        lam, vec = scipy.linalg.eigh(Kf, Mf, subset_by_index=[0, J - 1])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"generalized eigenproblem failed: {exc}") from exc
    if not np.all(np.isfinite(lam)) or lam[0] <= 0:
        raise NumericalError("discrete operator is not positive definite")
    nodal = np.zeros((mesh_M + 1, J))
    nodal[free] = vec
    # sign convention: positive just inside the left endpoint
    lead = nodal[1] if bc.kind == "dirichlet" else nodal[0]
    nodal *= np.where(lead < 0, -1.0, 1.0)

    def evaluator(points: np.ndarray, count: int) -> np.ndarray:
        t = points[:, 0]
        cell = np.clip(np.searchsorted(x, t, side="right") - 1, 0, mesh_M - 1)
        w = ((t - x[cell]) / (x[cell + 1] - x[cell]))[:, None]
        return (1.0 - w) * nodal[cell, :count] + w * nodal[cell + 1, :count]

    return EigenBasis(
        eigenvalues=lam,
        bc=bc,
        domain=domain,
        source="sturm_liouville",
        _evaluator=evaluator,
        matrices=(Kf, Mf, x, vec),
    )


def eigen_residuals(basis: EigenBasis) -> np.ndarray:
    """``||A v_j - lambda_j M v_j|| / lambda_j`` for a discretized basis."""
    if basis.matrices is None:
        raise InvalidArgumentError("eigen_residuals needs a discretized (sturm_liouville) basis")
    K, M, _, vec = basis.matrices
    R = K @ vec - (M @ vec) * basis.eigenvalues
    return np.linalg.norm(R, axis=0) / basis.eigenvalues


def fractional_scale(basis: EigenBasis, r: float, coeffs) -> np.ndarray:
    """Apply the spectral power ``Lambda^(r/2)`` to eigenbasis coefficients."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[0] != basis.J:
        raise InvalidArgumentError(f"expected {basis.J} coefficients, got {coeffs.shape[0]}")
    scale = basis.eigenvalues ** (0.5 * r)
    return scale.reshape((-1,) + (1,) * (coeffs.ndim - 1)) * coeffs


def orthonormality_residual(basis: EigenBasis, rule: Optional[QuadratureRule] = None) -> float:
    rule = basis.reference_rule() if rule is None else rule
    E = basis.values(rule.nodes)
    G = E.T @ (rule.weights[:, None] * E)
    return float(np.abs(G - np.eye(basis.J)).max())
