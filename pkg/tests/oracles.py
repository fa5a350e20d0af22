"""Independent reference computations used only by the tests.

Nothing here calls the closed-form MISE code: bias and variance come from
brute-force quadrature of the estimator's pointwise moments, and the sinc
case goes through the Fourier side with scipy's adaptive quadrature.
"""

import math

import numpy as np
from scipy import integrate

from kdfmise.kernels import KernelSpec
from kdfmise.mixture import abs_cf_squared, mixture_cdf, mixture_pdf


def pointwise_moments(nm, kernel, h, x, ny=8001):
    """E K((x - Y)/h) and E K((x - Y)/h)^2 by trapezoid over the density."""
    k = KernelSpec.parse(kernel)
    lo, hi = nm.support()
    y = np.linspace(lo, hi, ny)
    fy = mixture_pdf(nm, y) * (y[1] - y[0])
    fy[[0, -1]] *= 0.5
    G = k.cdf((x[:, None] - y[None, :]) / h)
    return G @ fy, (G * G) @ fy


def bias_variance_xspace(nm, kernel, h, n, nx=3001):
    """(ISB, IV) by trapezoid in x of the pointwise squared bias and variance."""
    k = KernelSpec.parse(kernel)
    lo, hi = nm.support()
    pad = 12.0 * h + 2.0 * math.sqrt(2.0 * (k.r or 1)) * h
    x = np.linspace(lo - pad, hi + pad, nx)
    m1, m2 = pointwise_moments(nm, k, h, x)
    bias2 = (m1 - mixture_cdf(nm, x)) ** 2
    var = m2 - m1 * m1
    return float(np.trapezoid(bias2, x)), float(np.trapezoid(var, x) / n)


def sinc_isb_fourier(nm, h):
    """pi^{-1} int_{1/h}^inf |cf|^2 t^{-2} dt with scipy quad."""
    val = integrate.quad(lambda t: abs_cf_squared(nm, t) / t**2, 1.0 / h, np.inf,
                         epsabs=1e-14, epsrel=1e-12, limit=500)[0]
    return val / math.pi


def mise_star_quad(nm, n):
    def f(t):
        c2 = abs_cf_squared(nm, t)
        return c2 * (1 - c2) / (t * t * (1 + (n - 1) * c2))

    pts = [1.0 / nm.sd, 3.0 / nm.sd]
    top = 40.0 / float(nm.sds.min())
    a = integrate.quad(f, 1e-4, top, points=[p for p in pts if p < top],
                       epsabs=1e-16, epsrel=1e-11, limit=1000)[0]
    # below 1e-4 the integrand equals Var/n to O(t^2)
    return (a + 1e-4 * nm.sd**2 / n) / math.pi
