import numpy as np
import pytest
from hypothesis import given, strategies as st

from kernreg.geometry import Domain, boundary_grid, gauss_legendre_panels, outward_normals


def test_domain_validation():
    with pytest.raises(ValueError):
        Domain.interval(1.0, 0.0)
    with pytest.raises(ValueError):
        Domain((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
    d = Domain.rectangle((0, -1), (2, 1))
    assert d.dim == 2 and d.volume() == pytest.approx(4.0)


def test_interval_polynomial_exactness(unit):
    rule = gauss_legendre_panels(unit, 3, 5)
    assert rule.size == 15 and rule.exactness_degree == 9
    assert rule.integrate(lambda x: x[:, 0] ** 9) == pytest.approx(0.1, abs=1e-14)
    assert rule.integrate(lambda x: x[:, 0] ** 4) == pytest.approx(0.2, abs=1e-15)


def test_rectangle_tensor_rule():
    d = Domain.rectangle((0, 0), (2, 1))
    rule = gauss_legendre_panels(d, (2, 3), 4)
    assert rule.nodes.shape == (2 * 4 * 3 * 4, 2)
    assert rule.integrate(lambda p: p[:, 0] ** 3 * p[:, 1] ** 2) == pytest.approx(4.0 / 3.0, rel=1e-13)
    assert rule.panels == (2, 3)


def test_rule_rejects_bad_parameters(unit):
    with pytest.raises(ValueError):
        gauss_legendre_panels(unit, 0, 4)
    with pytest.raises(ValueError):
        gauss_legendre_panels(unit, 2, 0)


@given(st.integers(1, 12), st.integers(1, 12))
def test_panel_rule_exact_for_degree(panels, order):
    rule = gauss_legendre_panels(Domain.interval(-1.0, 2.0), panels, order)
    deg = 2 * order - 1
    exact = (2.0 ** (deg + 1) - (-1.0) ** (deg + 1)) / (deg + 1)
    assert rule.integrate(lambda x: x[:, 0] ** deg) == pytest.approx(exact, rel=1e-10, abs=1e-10)
    assert np.all(rule.weights > 0)
    assert np.array_equal(rule.panel_index(), np.repeat(np.arange(panels), order))


def test_boundary_grid_and_normals():
    d = Domain.rectangle()
    pts = boundary_grid(d, 8)
    assert pts.shape == (32, 2)
    assert np.all(d.distance_to_boundary(pts) == 0)
    n = outward_normals(d, pts)
    assert np.allclose(np.linalg.norm(n, axis=1), 1.0)
    assert np.allclose(boundary_grid(Domain.interval(0, 1), 5), [[0.0], [1.0]])
    with pytest.raises(ValueError):
        boundary_grid(d, 1)
    with pytest.raises(ValueError):
        outward_normals(d, [[0.5, 0.5]])
