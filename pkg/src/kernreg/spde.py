"""Q-Wiener noise and the linear stochastic heat equation in an eigenbasis.

The solution of ``dX + L X dt = dW`` with X(0) = 0 is represented by its
coefficients in the eigenbasis of L. Its covariance at time T is available
in closed form, which gives exact references for truncation tails and for
Monte Carlo runs of the exponential integrator.

Random numbers come from Philox keyed by ``(seed, stream)`` where the stream
encodes the mode and step index; the sample index is the position inside
the stream. Changing the number of modes, samples or steps therefore never
changes the numbers drawn for the ones that remain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtri

from .analysis import GalerkinMatrix, MercerSpectrum
from .elliptic import EigenBasis
from .errors import DataError, InvalidArgumentError, NumericalError, SaturationError

_WIENER_TAG = 1
_INCREMENT_TAG = 2


def standard_normals(seed: int, stream: int, count: int, offset: int = 0) -> np.ndarray:
    """Normals ``offset .. offset+count-1`` of the Philox stream ``(seed, stream)``.

    One 64-bit draw per normal (inverse-CDF transform), so any window of a
    stream is reproducible on its own.
    """
    if seed < 0:
        raise InvalidArgumentError(f"seed must be nonnegative, got {seed}")
    # Philox4x64 emits four words per counter value
    gen = np.random.Philox(key=[seed % 2**64, stream % 2**64], counter=[offset // 4, 0, 0, 0])
    bits = gen.random_raw(count + offset % 4)[offset % 4 :]
    u = ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


def _stream(tag: int, mode: int, step: int = 0) -> int:
    return (tag << 60) | (step << 28) | mode


# ---------------------------------------------------------------------------
# Noise


@dataclass(frozen=True)
class NoiseModel:
    """Covariance of a Q-Wiener process, by Mercer pairs or by a Galerkin matrix.

    ``mu`` are the covariance eigenvalues (descending) and ``modes`` the
    eigenfunctions, either as node values (Mercer route) or as coefficient
    vectors in the elliptic eigenbasis (matrix route).
    """

    mu: np.ndarray
    modes: np.ndarray
    trace: float
    route: str
    spectrum: Optional[MercerSpectrum] = None
    matrix: Optional[GalerkinMatrix] = None

    @classmethod
    def from_spectrum(cls, spectrum: MercerSpectrum) -> "NoiseModel":
        mu = np.asarray(spectrum.mu, dtype=float)
        return cls(mu, spectrum.eigvecs, float(mu.sum()), "mercer", spectrum=spectrum)

    @classmethod
    def from_matrix(cls, Q: GalerkinMatrix) -> "NoiseModel":
        w, V = np.linalg.eigh(Q.entries)
        w, V = w[::-1], V[:, ::-1]
        mu = np.clip(w, 0.0, None)
        trace = float(np.trace(Q.entries))
        if abs(mu.sum() - trace) > 1e-8 * max(abs(trace), 1e-300) + float(-w[w < 0].sum()):
            raise DataError("Galerkin matrix eigenvalues do not reproduce its trace")
        return cls(mu, V, trace, "matrix", matrix=Q)

    @property
    def size(self) -> int:
        return self.mu.shape[0]


@dataclass(frozen=True)
class WienerSample:
    coeffs: np.ndarray  # (samples, J) Karhunen-Loeve coefficients sqrt(t mu_j) xi_j
    values: np.ndarray  # (samples, n): field at nodes (Mercer) or eigenbasis coefficients (matrix)


def sample_q_wiener(noise: NoiseModel, t: float, J: int, seed: int, samples: int = 1) -> WienerSample:
    """Truncated expansion ``W^J(t) = sum_{j<J} sqrt(t mu_j) xi_j q_j``."""
    if t <= 0:
        raise InvalidArgumentError(f"t must be positive, got {t}")
    if not 0 <= J <= noise.size:
        raise InvalidArgumentError(f"J must lie in [0, {noise.size}], got {J}")
    xi = np.empty((samples, J))
    for j in range(J):
        xi[:, j] = standard_normals(seed, _stream(_WIENER_TAG, j), samples)
    coeffs = xi * np.sqrt(t * noise.mu[:J])[None, :]
    values = coeffs @ noise.modes[:, :J].T
    return WienerSample(coeffs, values)


# ---------------------------------------------------------------------------
# Heat equation covariance


def _relaxation(s: np.ndarray, T: float) -> np.ndarray:
    """``(1 - exp(-s T)) / s`` with its series for small ``s T``."""
    x = s * T
    with np.errstate(divide="ignore", invalid="ignore"):
        exact = -np.expm1(-x) / x
    return T * np.where(x < 1e-4, 1.0 - x / 2.0 + x * x / 6.0, exact)


@dataclass(frozen=True)
class HeatCovariance:
    T: float
    C: np.ndarray
    eigenvalues: np.ndarray
    q_diagonal: np.ndarray

    @property
    def N(self) -> int:
        return self.C.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.C))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.C)[0])

    def diagonal_bound_excess(self) -> float:
        """``max_j C_jj - Q_jj / (2 lambda_j)``; nonpositive up to round-off."""
        return float(np.max(np.diag(self.C) - self.q_diagonal / (2.0 * self.eigenvalues)))


def heat_covariance(Q: GalerkinMatrix, basis: Optional[EigenBasis], T: float) -> HeatCovariance:
    """``C_jk = Q_jk (1 - exp(-(lambda_j + lambda_k) T)) / (lambda_j + lambda_k)``."""
    if not T > 0:
        raise InvalidArgumentError(f"T must be positive, got {T}")
    lam = (Q.eigenvalues if basis is None else basis.eigenvalues[: Q.N]).astype(float)
    C = Q.entries * _relaxation(lam[:, None] + lam[None, :], T)
    return HeatCovariance(float(T), 0.5 * (C + C.T), lam, np.diag(Q.entries).copy())


@dataclass(frozen=True)
class TruncationRate:
    J: tuple[int, ...]
    tail: tuple[float, ...]  # sum_{j>J} C_jj
    tail_frobenius: tuple[float, ...]  # Frobenius norm of the trailing block of C
    slope: float
    intercept: float


def tail_traces(C: HeatCovariance, J_list: Sequence[int]) -> np.ndarray:
    d = np.diag(C.C)
    return np.array([d[J:].sum() for J in J_list])


def truncation_rate(C: HeatCovariance, J_list: Sequence[int]) -> TruncationRate:
    """Least-squares slope of ``log tail(J)`` against ``log J``."""
    J_list = tuple(int(J) for J in J_list)
    if len(J_list) < 2 or any(b <= a for a, b in zip(J_list, J_list[1:])) or J_list[0] < 1:
        raise InvalidArgumentError("J_list must hold at least two increasing positive integers")
    if J_list[-1] >= C.N:
        raise InvalidArgumentError(f"largest J must be below N = {C.N}")
    tails = tail_traces(C, J_list)
    total = C.trace()
    if np.any(tails <= 1e-14 * total):
        raise SaturationError(
            f"tail trace below 1e-14 of the total at J = {J_list[int(np.argmax(tails <= 1e-14 * total))]}: increase N",
            tails=tails,
        )
    frob = tuple(float(np.linalg.norm(C.C[J:, J:])) for J in J_list)
    slope, intercept = np.polyfit(np.log(J_list), np.log(tails), 1)
    return TruncationRate(J_list, tuple(float(t) for t in tails), frob, float(slope), float(intercept))


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    stderr: float
    samples: int
    clipped_mass: float  # negative eigenvalue mass dropped from the increment covariance


def increment_factor(Q: GalerkinMatrix, lam: np.ndarray, dt: float, J: int):
    """Symmetric square root of the one-step noise covariance and the clipped mass."""
    S = Q.entries[:J, :J] * _relaxation(lam[:J, None] + lam[None, :J], dt)
    S = 0.5 * (S + S.T)
    try:
        w, V = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"increment covariance factorization failed: {exc}") from exc
    clipped = float(np.clip(-w, 0.0, None).sum())
    root = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
    return root, clipped


def mc_heat_solution(
    Q: GalerkinMatrix,
    basis: Optional[EigenBasis],
    T: float,
    steps: int,
    J: int,
    M: int,
    seed: int,
    batch: int = 4096,
) -> MonteCarloEstimate:
    """Sample mean of ``||X^J(T)||^2`` from the exact exponential integrator.

    Each step maps ``y -> exp(-lambda dt) y + eta`` with eta Gaussian of
    covariance ``int_0^dt exp(-s L) Q exp(-s L) ds``; the scheme is exact in
    law for any step count.
    """
    if not T > 0 or steps < 1 or M < 2:
        raise InvalidArgumentError("need T > 0, steps >= 1 and M >= 2")
    if not 1 <= J <= Q.N:
        raise InvalidArgumentError(f"J must lie in [1, {Q.N}], got {J}")
    lam = (Q.eigenvalues if basis is None else basis.eigenvalues[: Q.N]).astype(float)
    dt = T / steps
    root, clipped = increment_factor(Q, lam, dt, J)
    decay = np.exp(-lam[:J] * dt)
    sq = np.empty(M)
    for start in range(0, M, batch):
        m = min(batch, M - start)
        y = np.zeros((m, J))
        for k in range(steps):
            xi = np.empty((m, J))
            for j in range(J):
                xi[:, j] = standard_normals(seed, _stream(_INCREMENT_TAG, j, k), m, offset=start)
            y = y * decay[None, :] + xi @ root
        sq[start : start + m] = np.einsum("ij,ij->i", y, y)
    mean = float(sq.mean())
    return MonteCarloEstimate(mean, float(sq.std(ddof=1) / math.sqrt(M)), M, clipped)
