import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from kdfmise.errors import DomainError
from kdfmise.kernels import (
    G2r,
    G_inf,
    KernelSpec,
    effective_halfwidth,
    g2r,
    g_inf,
    kernel_moment_2r,
    psi1,
    rescaled_G,
    rescaled_g,
)
from kdfmise.specfun import norm_cdf, norm_pdf

X = np.linspace(-7, 7, 57)


def p_poly(r, x):
    """P_r in G_2r = Phi + P_r phi, built from Hermite polynomials; P_3 = (7x - x^3) / 8."""
    out = np.zeros_like(x)
    for s in range(1, r):
        he = np.polynomial.hermite_e.hermeval(x, [0] * (2 * s - 1) + [1])
        out = out + (-1) ** (s + 1) * he / (2**s * math.factorial(s))
    return out


def test_g2r_examples():
    assert np.allclose(g2r(1, X), norm_pdf(X), atol=1e-16)
    assert g2r(2, 0.0) == pytest.approx(0.5984134206, abs=1e-10)


def test_G2r_examples():
    assert G2r(2, 1.0) == pytest.approx(0.9623301084, abs=1e-10)
    assert G2r(3, 1.0) == pytest.approx(norm_cdf(1.0) + 0.75 * norm_pdf(1.0), abs=1e-14)
    for r in range(1, 16):
        assert G2r(r, 0.0) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("r", range(1, 16))
def test_G2r_matches_polynomial_form(r):
    x = np.linspace(-6, 6, 49)
    direct = norm_cdf(x) + p_poly(r, x) * norm_pdf(x)
    assert np.max(np.abs(G2r(r, x) - direct)) < 1e-12


@pytest.mark.parametrize("r", [1, 2, 5, 9, 15])
def test_kernel_symmetry_and_derivative(r):
    assert np.allclose(g2r(r, X), g2r(r, -X), atol=1e-15)
    assert np.allclose(G2r(r, X) + G2r(r, -X), 1.0, atol=1e-13)
    step = 1e-5
    fd = (G2r(r, X + step) - G2r(r, X - step)) / (2 * step)
    assert np.max(np.abs(fd - g2r(r, X))) < 1e-7


@pytest.mark.parametrize("r", range(1, 9))
def test_kernel_moments(r):
    lim = 12 + 2 * math.sqrt(2 * r)
    mass = integrate.quad(lambda t: g2r(r, t), -lim, lim, limit=400)[0]
    assert mass == pytest.approx(1.0, abs=1e-10)
    for j in range(1, r):
        mom = integrate.quad(lambda t: t ** (2 * j) * g2r(r, t), -lim, lim, limit=400)[0]
        assert abs(mom) < 1e-7 * math.factorial(2 * j)
    mom = integrate.quad(lambda t: t ** (2 * r) * g2r(r, t), -lim, lim, limit=400)[0]
    assert mom == pytest.approx(kernel_moment_2r(r), rel=1e-8)


def test_kernel_moment_examples():
    assert [kernel_moment_2r(r) for r in (1, 2, 3)] == [1.0, -3.0, 15.0]


@pytest.mark.parametrize("r", [1, 2, 3, 6])
def test_psi1_matches_quadrature(r):
    lim = 12 + 2 * math.sqrt(2 * r)
    quad = 2 * integrate.quad(lambda t: t * G2r(r, t) * g2r(r, t), -lim, lim, limit=400)[0]
    assert quad == pytest.approx(psi1(r), rel=1e-9)


def test_psi1_examples():
    assert psi1(1) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-15)
    assert psi1(2) == pytest.approx(7 / 16 / math.sqrt(math.pi), rel=1e-12)


def test_sinc_kernel():
    assert G_inf(0.0) == pytest.approx(0.5, abs=1e-15)
    assert G_inf(1e8) == pytest.approx(1.0, abs=1e-7)
    assert G_inf(math.pi) == pytest.approx(1.0894898722, abs=1e-9)
    assert g_inf(0.0) == pytest.approx(1 / math.pi, rel=1e-15)
    step = 1e-5
    fd = (G_inf(X + step) - G_inf(X - step)) / (2 * step)
    assert np.max(np.abs(fd - g_inf(X))) < 1e-8


def test_rescaled_kernels():
    assert np.allclose(rescaled_G(2, X), G2r(2, X / math.sqrt(2)), atol=1e-15)
    assert rescaled_G(10, 0.0) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(DomainError):
        rescaled_G(1, 0.0)
    # the rescaled sequence approaches the sinc kernel
    x = np.linspace(-3, 3, 25)
    gaps = [np.max(np.abs(rescaled_G(r, x) - G_inf(x))) for r in (3, 8, 15)]
    assert gaps[0] > gaps[1] > gaps[2]
    step = 1e-5
    fd = (rescaled_G(6, x + step) - rescaled_G(6, x - step)) / (2 * step)
    assert np.max(np.abs(fd - rescaled_g(6, x))) < 1e-8


def test_kernel_spec():
    assert KernelSpec.parse("inf").is_infinite
    assert KernelSpec.parse("3").order == 6
    assert KernelSpec.parse(KernelSpec(2)).r == 2
    assert KernelSpec.infinite().order == math.inf
    with pytest.raises(DomainError):
        KernelSpec(0)
    with pytest.raises(DomainError):
        KernelSpec(16)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 15), st.floats(0.0, 60.0))
def test_kernel_tail_reaches_limits(r, extra):
    u = effective_halfwidth(KernelSpec(r)) + extra
    assert abs(G2r(r, u) - 1.0) < 1e-12
    assert abs(G2r(r, -u)) < 1e-12
