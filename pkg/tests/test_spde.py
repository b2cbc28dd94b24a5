import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from kernreg.analysis import GalerkinMatrix, galerkin_project, nystrom_mercer
from kernreg.elliptic import BoundaryCondition, laplacian_basis
from kernreg.errors import InvalidArgumentError, SaturationError
from kernreg.geometry import Domain, gauss_legendre_panels
from kernreg.kernels import builtin_kernel
from kernreg.spde import (
    NoiseModel,
    heat_covariance,
    mc_heat_solution,
    sample_q_wiener,
    standard_normals,
    tail_traces,
    truncation_rate,
)


@pytest.fixture(scope="module")
def bridge_Q(dirichlet_basis):
    return galerkin_project(builtin_kernel("brownian_bridge"), dirichlet_basis, N=200)


@pytest.fixture(scope="module")
def small_exponential():
    basis = laplacian_basis(Domain.interval(0, 1), BoundaryCondition.dirichlet(), 30)
    return galerkin_project(builtin_kernel("exponential"), basis, N=30), basis


def _bridge_heat_diagonal(j, T):
    lam = (j * math.pi) ** 2
    return -np.expm1(-2 * lam * T) / (2 * lam) / lam


@given(seed=st.integers(0, 2**32), stream=st.integers(0, 2**40), offset=st.integers(0, 50), count=st.integers(1, 30))
def test_normal_windows_are_consistent(seed, stream, offset, count):
    whole = standard_normals(seed, stream, offset + count)
    window = standard_normals(seed, stream, count, offset=offset)
    assert np.array_equal(whole[offset:], window)


def test_normals_distribution():
    z = standard_normals(7, 3, 200_000)
    assert stats.kstest(z, "norm").pvalue > 1e-3
    assert abs(z.mean()) < 5 / math.sqrt(z.size)
    assert not np.array_equal(z[:100], standard_normals(7, 4, 100))
    with pytest.raises(InvalidArgumentError):
        standard_normals(-1, 0, 3)


def test_karhunen_loeve_isometry():
    rule = gauss_legendre_panels(Domain.interval(0, 1), 10, 10)
    noise = NoiseModel.from_spectrum(nystrom_mercer(builtin_kernel("exponential", length=0.5), rule))
    t, J = 0.7, 12
    sample = sample_q_wiener(noise, t, J, seed=5, samples=20_000)
    sq = sample.values**2 @ rule.weights
    expected = t * noise.mu[:J].sum()
    assert abs(sq.mean() - expected) < 4 * sq.std() / math.sqrt(sq.size)
    assert np.allclose(sq, np.sum(sample.coeffs**2, axis=1), rtol=1e-9)


def test_zero_truncation_gives_zero_field():
    rule = gauss_legendre_panels(Domain.interval(0, 1), 4, 6)
    noise = NoiseModel.from_spectrum(nystrom_mercer(builtin_kernel("brownian_bridge"), rule))
    s = sample_q_wiener(noise, 1.0, 0, seed=1, samples=3)
    assert s.values.shape == (3, rule.size) and np.all(s.values == 0.0)


def test_prefix_property(small_exponential):
    Q, _ = small_exponential
    noise = NoiseModel.from_matrix(Q)
    big = sample_q_wiener(noise, 1.0, 20, seed=9, samples=8)
    small = sample_q_wiener(noise, 1.0, 5, seed=9, samples=3)
    assert np.array_equal(small.coeffs, big.coeffs[:3, :5])
    assert noise.trace == pytest.approx(np.trace(Q.entries), rel=1e-14)
    with pytest.raises(InvalidArgumentError):
        sample_q_wiener(noise, 0.0, 3, seed=1)
    with pytest.raises(InvalidArgumentError):
        sample_q_wiener(noise, 1.0, 31, seed=1)


def test_heat_covariance_bridge_closed_form(bridge_Q, dirichlet_basis):
    j = np.arange(1, 201)
    for T in (0.01, 1.0):
        C = heat_covariance(bridge_Q, dirichlet_basis, T)
        # the projected diagonal itself carries ~1e-12 absolute quadrature error
        assert np.allclose(np.diag(C.C), _bridge_heat_diagonal(j, T), rtol=1e-6, atol=0)
    long = heat_covariance(bridge_Q, dirichlet_basis, 1e3)
    assert np.allclose(np.diag(long.C), 1 / (2 * (j * math.pi) ** 4), rtol=1e-6)


def test_heat_covariance_short_time(small_exponential):
    Q, basis = small_exponential
    T = 1e-9
    C = heat_covariance(Q, basis, T)
    assert np.allclose(C.C, T * Q.entries, rtol=1e-5, atol=0)
    with pytest.raises(InvalidArgumentError):
        heat_covariance(Q, basis, 0.0)


def test_heat_covariance_psd_and_bounded(small_exponential):
    Q, basis = small_exponential
    C = heat_covariance(Q, basis, 0.3)
    assert C.min_eigenvalue() >= -1e-14 * C.trace()
    assert C.diagonal_bound_excess() <= 1e-15 * np.abs(C.C).max()
    assert np.array_equal(C.C, C.C.T)


def test_truncation_rate_bridge(bridge_Q, dirichlet_basis):
    C = heat_covariance(bridge_Q, dirichlet_basis, 1.0)
    J_list = [10, 20, 40, 80]
    rate = truncation_rate(C, J_list)
    exact = [_bridge_heat_diagonal(np.arange(J + 1, 201), 1.0).sum() for J in J_list]
    assert np.allclose(rate.tail, exact, rtol=1e-6)
    assert rate.slope == pytest.approx(-3.0, abs=0.3)
    assert all(f <= t * (1 + 1e-12) for f, t in zip(rate.tail_frobenius, rate.tail))
    with pytest.raises(InvalidArgumentError):
        truncation_rate(C, [10])
    with pytest.raises(InvalidArgumentError):
        truncation_rate(C, [10, 200])


def test_rank_one_noise_saturates(dirichlet_basis):
    phi = lambda p: math.sqrt(2) * np.sin(np.pi * p[..., 0])
    Q = galerkin_project(builtin_kernel("rank_one", phi=phi), dirichlet_basis, rule=dirichlet_basis.reference_rule(50), N=50)
    C = heat_covariance(Q, dirichlet_basis, 1.0)
    assert np.all(np.abs(tail_traces(C, [1, 5, 20])) < 1e-18)
    with pytest.raises(SaturationError) as info:
        truncation_rate(C, [1, 5, 20])
    assert np.all(np.abs(info.value.tails) < 1e-18)


def test_zero_noise(dirichlet_basis):
    basis = dirichlet_basis.truncate(10)
    Q = GalerkinMatrix(np.zeros((10, 10)), basis, None)
    C = heat_covariance(Q, basis, 1.0)
    assert np.all(C.C == 0.0)
    with pytest.raises(SaturationError):
        truncation_rate(C, [2, 4])
    mc = mc_heat_solution(Q, basis, 1.0, 3, 10, 50, seed=0)
    assert mc.mean == 0.0 and mc.stderr == 0.0


@pytest.mark.parametrize("steps", [1, 100])
def test_monte_carlo_matches_exact_trace(small_exponential, steps):
    Q, basis = small_exponential
    T, J = 0.2, 12
    exact = np.trace(heat_covariance(Q, basis, T).C[:J, :J])
    mc = mc_heat_solution(Q, basis, T, steps, J, 4000, seed=31)
    assert abs(mc.mean - exact) < 4 * mc.stderr
    assert mc.clipped_mass < 1e-12


def test_monte_carlo_deterministic_and_batch_free(small_exponential):
    Q, basis = small_exponential
    a = mc_heat_solution(Q, basis, 0.5, 3, 8, 300, seed=4)
    b = mc_heat_solution(Q, basis, 0.5, 3, 8, 300, seed=4, batch=7)
    c = mc_heat_solution(Q, basis, 0.5, 3, 8, 300, seed=5)
    assert a == b
    assert a.mean != c.mean
    with pytest.raises(InvalidArgumentError):
        mc_heat_solution(Q, basis, 0.5, 0, 8, 300, seed=4)
    with pytest.raises(InvalidArgumentError):
        mc_heat_solution(Q, basis, 0.5, 1, 40, 300, seed=4)
