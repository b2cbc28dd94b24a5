import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import optimize, special

from kernreg.elliptic import (
    BoundaryCondition,
    EllipticCoefficients,
    eigen_residuals,
    fractional_scale,
    laplacian_basis,
    orthonormality_residual,
    sturm_liouville_basis,
)
from kernreg.errors import InvalidArgumentError
from kernreg.geometry import Domain


def _variable_diffusion_first_eigenvalue():
    # -((1+x) u')' = lam u, u(0) = u(1) = 0 has solutions in J0, Y0 of 2 sqrt(lam (1+x))
    def det(lam):
        a, b = 2 * math.sqrt(lam), 2 * math.sqrt(2 * lam)
        return special.j0(a) * special.y0(b) - special.j0(b) * special.y0(a)

    return optimize.brentq(det, 10.0, 19.0, xtol=1e-14)


def test_dirichlet_interval_eigenvalues(dirichlet_basis):
    j = np.arange(1, 201)
    assert np.allclose(dirichlet_basis.eigenvalues, (j * math.pi) ** 2, rtol=1e-15)
    x = np.array([0.3])
    assert dirichlet_basis.eval(2, x)[0] == pytest.approx(math.sqrt(2) * math.sin(3 * math.pi * 0.3), rel=1e-14)


def test_neumann_interval_eigenvalues(neumann_basis):
    j = np.arange(0, 200)
    assert np.allclose(neumann_basis.eigenvalues, (j * math.pi) ** 2 + 1.0, rtol=1e-15)
    assert np.allclose(neumann_basis.eval(0, np.linspace(0, 1, 5)), 1.0)


def test_square_dirichlet_eigenvalues():
    sq = Domain.rectangle((0, 0), (1, 1))
    basis = laplacian_basis(sq, BoundaryCondition.dirichlet(), 6)
    assert np.allclose(basis.eigenvalues / math.pi**2, [2, 5, 5, 8, 10, 10], rtol=1e-14)
    assert [tuple(p) for p in basis.indices[1:3]] == [(1, 2), (2, 1)]


def test_rectangle_scaling():
    rect = Domain.rectangle((0, 0), (2, 1))
    basis = laplacian_basis(rect, BoundaryCondition.dirichlet(), 3)
    assert np.allclose(basis.eigenvalues / math.pi**2, [1.25, 2.0, 3.25], rtol=1e-14)


@pytest.mark.parametrize("bc", [BoundaryCondition.dirichlet(), BoundaryCondition.neumann(0.5)])
@pytest.mark.parametrize("domain", [Domain.interval(-1, 2), Domain.rectangle((0, 0), (1.5, 1))])
def test_orthonormality(domain, bc):
    basis = laplacian_basis(domain, bc, 40)
    assert orthonormality_residual(basis) < 1e-12


def test_weyl_growth_in_two_dimensions():
    basis = laplacian_basis(Domain.rectangle((0, 0), (1, 1)), BoundaryCondition.dirichlet(), 600)
    j = np.arange(1, 601)
    slope = np.polyfit(np.log(j[100:]), np.log(basis.eigenvalues[100:]), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.05)
    # Weyl constant 4 pi / |D| for d = 2
    assert basis.eigenvalues[-1] / j[-1] == pytest.approx(4 * math.pi, rel=0.1)


def test_sturm_liouville_reproduces_laplacian(unit):
    basis = sturm_liouville_basis(unit, EllipticCoefficients.constant(1.0, 0.0), BoundaryCondition.dirichlet(), 800, 20)
    j = np.arange(1, 21)
    assert np.abs(basis.eigenvalues / (j * math.pi) ** 2 - 1).max() < 6e-4
    # closed-form eigenvalues of linear elements with consistent mass on a uniform mesh
    theta = j * math.pi / 800
    discrete = 6 * 800**2 * (1 - np.cos(theta)) / (2 + np.cos(theta))
    assert np.allclose(basis.eigenvalues, discrete, rtol=1e-10)
    assert orthonormality_residual(basis) < 1e-6
    assert eigen_residuals(basis).max() < 1e-10
    assert basis.eval(0, np.array([0.5]))[0] == pytest.approx(math.sqrt(2), rel=1e-4)


def test_sturm_liouville_neumann_ground_state(unit):
    coeffs = EllipticCoefficients(lambda x: 1.0 + x, lambda x: np.ones_like(x), 1.0)
    basis = sturm_liouville_basis(unit, coeffs, BoundaryCondition.neumann(1.0), 400, 10)
    assert basis.eigenvalues[0] == pytest.approx(1.0, rel=1e-10)
    assert orthonormality_residual(basis) < 1e-6


def test_sturm_liouville_variable_diffusion(unit):
    coeffs = EllipticCoefficients(lambda x: 1.0 + x, lambda x: np.zeros_like(x), 1.0)
    basis = sturm_liouville_basis(unit, coeffs, BoundaryCondition.dirichlet(), 1000, 5)
    lam1 = basis.eigenvalues[0]
    assert math.pi**2 <= lam1 <= 2 * math.pi**2
    assert lam1 == pytest.approx(_variable_diffusion_first_eigenvalue(), rel=1e-5)


def test_reaction_shift_and_monotonicity(unit):
    bc = BoundaryCondition.dirichlet()
    a = lambda x: 1.0 + 0.5 * np.sin(3 * x)
    base = sturm_liouville_basis(unit, EllipticCoefficients(a, lambda x: np.zeros_like(x), 0.5), bc, 400, 10)
    shifted = sturm_liouville_basis(unit, EllipticCoefficients(a, lambda x: np.full_like(x, 2.0), 0.5), bc, 400, 10)
    assert np.allclose(shifted.eigenvalues - base.eigenvalues, 2.0, rtol=0, atol=1e-9)
    bumped = sturm_liouville_basis(unit, EllipticCoefficients(a, lambda x: 2.0 + x**2, 0.5), bc, 400, 10)
    assert np.all(bumped.eigenvalues >= shifted.eigenvalues)


def test_sturm_liouville_validation(unit):
    good = EllipticCoefficients.constant(1.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        sturm_liouville_basis(unit, good, BoundaryCondition.dirichlet(), 40, 11)
    with pytest.raises(InvalidArgumentError):
        sturm_liouville_basis(unit, EllipticCoefficients.constant(1.0, 0.5), BoundaryCondition.neumann(1.0), 40, 5)
    with pytest.raises(InvalidArgumentError):
        sturm_liouville_basis(unit, EllipticCoefficients(lambda x: x, lambda x: 0 * x, 0.5), BoundaryCondition.dirichlet(), 40, 5)
    with pytest.raises(InvalidArgumentError):
        BoundaryCondition.neumann(0.0)
    with pytest.raises(InvalidArgumentError):
        BoundaryCondition("robin")


@given(r=st.floats(-2, 2), coeffs=st.lists(st.floats(-5, 5), min_size=4, max_size=4))
def test_fractional_scale_is_spectral_power(r, coeffs):
    basis = laplacian_basis(Domain.interval(0, 1), BoundaryCondition.dirichlet(), 4)
    out = fractional_scale(basis, r, coeffs)
    expected = np.array(coeffs) * (np.arange(1, 5) * math.pi) ** r
    assert np.allclose(out, expected, rtol=1e-12, atol=0)
    back = fractional_scale(basis, -r, out)
    assert np.allclose(back, coeffs, rtol=1e-12, atol=1e-300)


def test_truncate_and_bounds(dirichlet_basis):
    small = dirichlet_basis.truncate(10)
    assert small.J == 10
    with pytest.raises(InvalidArgumentError):
        small.values(np.array([0.1]), 11)
    with pytest.raises(InvalidArgumentError):
        fractional_scale(small, 1.0, np.ones(3))
    with pytest.raises(InvalidArgumentError):
        eigen_residuals(small)
