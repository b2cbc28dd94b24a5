import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from kernreg.errors import InvalidArgumentError
from kernreg.kernels import builtin_kernel
from kernreg.rkhs import DuplicatePointsWarning, RkhsElement, gram, hq_fourier_norm, pointwise_bound_check, rkhs_inner

KERNELS = [
    builtin_kernel("exponential", length=0.4),
    builtin_kernel("gaussian", length=0.3),
    builtin_kernel("matern", nu=2.5, length=0.5),
    builtin_kernel("brownian_motion"),
]


def _sobolev_half_sum(f, df, a, b):
    # exponential kernel of unit length: ||f||^2 = (||f||_2^2 + ||f'||_2^2) / 2
    l2 = integrate.quad(lambda x: f(x) ** 2, a, b, limit=200)[0]
    d2 = integrate.quad(lambda x: df(x) ** 2, a, b, limit=200)[0]
    return math.sqrt(0.5 * (l2 + d2))


def test_gram_examples():
    K = gram(builtin_kernel("brownian_motion"), [0.2, 0.5])
    assert np.allclose(K, [[0.2, 0.2], [0.2, 0.5]])
    with pytest.warns(DuplicatePointsWarning):
        K = gram(builtin_kernel("gaussian"), [0.1, 0.3, 0.1])
    assert abs(np.linalg.det(K)) < 1e-12


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.name)
@given(
    pts=st.lists(st.floats(0.01, 1.0), min_size=1, max_size=8, unique=True),
    coeffs=st.lists(st.floats(-3, 3), min_size=8, max_size=8),
    y=st.floats(0.01, 1.0),
)
def test_reproducing_property(kernel, pts, coeffs, y):
    f = RkhsElement(kernel, np.array(pts), coeffs[: len(pts)])
    rep = RkhsElement.representer(kernel, y)
    value = float(f(y)[0])
    scale = max(1.0, f.norm())
    assert rkhs_inner(f, rep) == pytest.approx(value, abs=1e-12 * scale)
    assert rkhs_inner(f, rep) == rkhs_inner(rep, f) or abs(rkhs_inner(f, rep) - rkhs_inner(rep, f)) < 1e-13 * scale


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.name)
@given(x=st.floats(0.0, 1.0), y=st.floats(0.0, 1.0))
def test_difference_of_representers(kernel, x, y):
    d = RkhsElement.representer(kernel, x) - RkhsElement.representer(kernel, y)
    expected = float(kernel(x, x) - 2 * kernel(x, y) + kernel(y, y))
    assert rkhs_inner(d, d) == pytest.approx(expected, abs=1e-13)


def test_linear_combinations():
    k = builtin_kernel("matern", nu=1.5, length=0.3)
    f = RkhsElement(k, [0.1, 0.6], [1.0, -2.0])
    g = RkhsElement(k, [0.4], [0.5])
    h = 2.0 * f + g
    probes = np.linspace(0, 1, 7)
    assert np.allclose(h(probes), 2 * f(probes) + g(probes), rtol=1e-14, atol=1e-15)
    assert rkhs_inner(h, h) == pytest.approx(
        4 * rkhs_inner(f, f) + 4 * rkhs_inner(f, g) + rkhs_inner(g, g), rel=1e-12
    )
    zero = RkhsElement.zero(k)
    assert zero.norm() == 0.0 and np.all(zero(probes) == 0.0)
    assert (f - f).norm() < 1e-7


def test_kernel_mismatch_raises():
    f = RkhsElement.representer(builtin_kernel("gaussian", length=0.3), 0.5)
    g = RkhsElement.representer(builtin_kernel("gaussian", length=0.4), 0.5)
    with pytest.raises(InvalidArgumentError):
        rkhs_inner(f, g)
    with pytest.raises(InvalidArgumentError):
        f + g
    with pytest.raises(InvalidArgumentError):
        RkhsElement(builtin_kernel("gaussian"), [0.1, 0.2], [1.0])


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.name)
@given(seed=st.integers(0, 2**31 - 1))
def test_pointwise_bound(kernel, seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 10))
    f = RkhsElement(kernel, rng.uniform(0.01, 1, n), rng.normal(size=n))
    assert pointwise_bound_check(f, rng.uniform(0, 1, 25)) <= 1e-12 * max(1.0, f.norm())


def test_fourier_norm_cosine_bump():
    x = np.linspace(-2, 2, 2049)
    f = lambda t: np.cos(np.pi * t / 4) ** 2
    df = lambda t: -np.pi / 4 * np.sin(np.pi * t / 2)
    res = hq_fourier_norm(f(x), x, builtin_kernel("exponential"))
    assert res.converged
    assert res.value == pytest.approx(_sobolev_half_sum(f, df, -2, 2), rel=0.01)
    assert res.partial_integrals[-1] == pytest.approx(res.value**2, rel=1e-12)


def test_fourier_norm_hat():
    x = np.linspace(-1, 1, 2049)
    res = hq_fourier_norm(1 - np.abs(x), x, builtin_kernel("exponential"))
    assert res.converged
    assert res.value == pytest.approx(math.sqrt(4.0 / 3.0), rel=0.01)
    # the hat is not in the Sobolev space of order 2
    assert not hq_fourier_norm(1 - np.abs(x), x, builtin_kernel("matern", nu=1.5)).converged


def test_fourier_norm_gaussian_representer():
    # f = q(0, .) has squared norm q(0, 0) = 1
    x = np.linspace(-6, 6, 1025)
    k1 = builtin_kernel("gaussian", length=1.0)
    assert hq_fourier_norm(np.exp(-x**2), x, k1).value == pytest.approx(1.0, rel=0.01)
    k2 = builtin_kernel("gaussian", dim=2, length=1.0)
    g = np.linspace(-6, 6, 257)
    X, Y = np.meshgrid(g, g, indexing="ij")
    res = hq_fourier_norm(np.exp(-(X**2 + Y**2)), (g, g), k2)
    assert res.converged and res.value == pytest.approx(1.0, rel=0.01)


def test_fourier_norm_flags_rough_functions():
    x = np.linspace(-1, 1, 2049)
    step = np.where(np.abs(x) < 0.5, 1.0, 0.0)
    res = hq_fourier_norm(step, x, builtin_kernel("gaussian", length=0.5))
    assert not res.converged and res.value == math.inf
    assert not hq_fourier_norm(step, x, builtin_kernel("exponential")).converged
    assert hq_fourier_norm(np.zeros_like(x), x, builtin_kernel("exponential")).value == 0.0


def test_fourier_norm_argument_checks():
    x = np.linspace(0, 1, 33)
    with pytest.raises(InvalidArgumentError):
        hq_fourier_norm(x, x, builtin_kernel("brownian_bridge"))
    with pytest.raises(InvalidArgumentError):
        hq_fourier_norm(x, x**2, builtin_kernel("exponential"))
    with pytest.raises(InvalidArgumentError):
        hq_fourier_norm(x, x[:-1], builtin_kernel("exponential"))
