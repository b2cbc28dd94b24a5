"""Box domains in one and two dimensions and composite Gauss-Legendre rules."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box ``[lower, upper]`` in ``dim`` dimensions."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi) or len(lo) not in (1, 2):
            raise ValueError(f"domain bounds must both have length 1 or 2, got {lo} and {hi}")
        for a, b in zip(lo, hi):
            if not (np.isfinite(a) and np.isfinite(b) and a < b):
                raise ValueError(f"domain requires lower < upper per axis, got {lo} and {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def interval(cls, a: float = 0.0, b: float = 1.0) -> "Domain":
        return cls((a,), (b,))

    @classmethod
    def rectangle(cls, lower=(0.0, 0.0), upper=(1.0, 1.0)) -> "Domain":
        return cls(tuple(lower), tuple(upper))

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lengths(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)

    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        lo = np.asarray(self.lower) - tol
        hi = np.asarray(self.upper) + tol
        return np.all((pts >= lo) & (pts <= hi), axis=1)

    def distance_to_boundary(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        return np.minimum(pts - np.asarray(self.lower), np.asarray(self.upper) - pts).min(axis=1)


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes (shape ``(n, dim)``) and positive weights.

    ``edges`` holds the panel breakpoints per axis and ``order`` the number of
    Gauss points per panel, so that integrators can re-use the panel layout
    (e.g. to split diagonal blocks of tensor integrals).
    """

    nodes: np.ndarray
    weights: np.ndarray
    domain: Domain
    order: int
    edges: tuple[np.ndarray, ...] = field(default=())

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def exactness_degree(self) -> int:
        return 2 * self.order - 1

    @property
    def panels(self) -> tuple[int, ...]:
        return tuple(len(e) - 1 for e in self.edges)

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, np.asarray(f(self.nodes), dtype=float)))

    def panel_index(self) -> np.ndarray:
        """Panel number of every node (1D rules only)."""
        if self.dim != 1:
            raise ValueError("panel_index is defined for 1D rules only")
        return np.repeat(np.arange(self.panels[0]), self.order)


def _gauss_legendre_1d(a: float, b: float, panels: int, order: int):
    xi, wi = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * xi[None, :]).ravel()
    weights = (half[:, None] * wi[None, :]).ravel()
    return nodes, weights, edges


def gauss_legendre_panels(domain: Domain, panels: int | Sequence[int], order: int) -> QuadratureRule:
    """Composite Gauss-Legendre rule with ``panels`` equal panels per axis.

    In 2D the rule is the tensor product of the per-axis 1D rules (x-major
    ordering). Each panel integrates polynomials of degree ``2*order-1``
    exactly.
    """
    panels_per_axis = np.broadcast_to(np.atleast_1d(np.asarray(panels)), (domain.dim,))
    if int(order) < 1 or np.any(panels_per_axis < 1) or int(order) != order:
        raise ValueError(f"panels and order must be positive integers, got panels={panels}, order={order}")
    order = int(order)
    rules = [
        _gauss_legendre_1d(a, b, int(p), order)
        for a, b, p in zip(domain.lower, domain.upper, panels_per_axis)
    ]
    if domain.dim == 1:
        nodes, weights, edges = rules[0]
        return QuadratureRule(nodes[:, None], weights, domain, order, (edges,))
    (x, wx, ex), (y, wy, ey) = rules
    X, Y = np.meshgrid(x, y, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    weights = np.outer(wx, wy).ravel()
    return QuadratureRule(nodes, weights, domain, order, (ex, ey))


def boundary_grid(domain: Domain, n: int) -> np.ndarray:
    """Uniformly spaced boundary points, shape ``(m, dim)``.

    For an interval the boundary is its two endpoints, so ``n`` samples
    collapse to those two points. For a rectangle each side contributes
    ``n`` points (corners counted once per side they start), 4n in total.
    """
    if n < 2:
        raise ValueError(f"boundary_grid needs n >= 2, got {n}")
    if domain.dim == 1:
        return np.array([[domain.lower[0]], [domain.upper[0]]])
    (x0, y0), (x1, y1) = domain.lower, domain.upper
    t = np.arange(n) / n
    sides = [
        np.column_stack([x0 + (x1 - x0) * t, np.full(n, y0)]),
        np.column_stack([np.full(n, x1), y0 + (y1 - y0) * t]),
        np.column_stack([x1 - (x1 - x0) * t, np.full(n, y1)]),
        np.column_stack([np.full(n, x0), y1 - (y1 - y0) * t]),
    ]
    return np.vstack(sides)


def outward_normals(domain: Domain, points) -> np.ndarray:
    """Outward unit normal at boundary points; corners get the first matching side."""
    pts = np.asarray(points, dtype=float).reshape(-1, domain.dim)
    normals = np.zeros_like(pts)
    lo, hi = np.asarray(domain.lower), np.asarray(domain.upper)
    scale = domain.lengths * 1e-12
    done = np.zeros(len(pts), dtype=bool)
    for axis in range(domain.dim):
        on_lo = ~done & (np.abs(pts[:, axis] - lo[axis]) <= scale[axis])
        normals[on_lo, axis] = -1.0
        done |= on_lo
        on_hi = ~done & (np.abs(pts[:, axis] - hi[axis]) <= scale[axis])
        normals[on_hi, axis] = 1.0
        done |= on_hi
    if not done.all():
        raise ValueError("outward_normals called with points off the boundary")
    return normals
