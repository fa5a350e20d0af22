"""Gaussian-based kernels of order 2r and their sinc (infinite order) limit."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .specfun import (
    INV_SQRT_2PI,
    SQRT_PI,
    gamma_ratio,
    kummer_m_recurrence,
    norm_cdf,
    odd_factorial,
    phi_deriv,
    sine_integral,
)

R_CAP = 15


def _check_r(r):
    if int(r) != r or r < 1:
        raise DomainError(f"kernel order index r must be a positive integer, got {r!r}")
    if r > R_CAP:
        raise DomainError(f"r={r} exceeds the supported cap r <= {R_CAP}")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel order selector: finite ``r`` (order 2r) or ``r=None`` for sinc."""

    r: int | None = 1

    def __post_init__(self):
        if self.r is not None:
            _check_r(self.r)

    @classmethod
    def infinite(cls):
        return cls(None)

    @classmethod
    def parse(cls, text) -> "KernelSpec":
        if isinstance(text, KernelSpec):
            return text
        if text is None:
            return cls(None)
        s = str(text).strip().lower()
        if s in ("inf", "infinite", "sinc", "oo"):
            return cls(None)
        return cls(int(s))

    @property
    def is_infinite(self) -> bool:
        return self.r is None

    @property
    def order(self):
        return math.inf if self.r is None else 2 * self.r

    @property
    def label(self) -> str:
        return "inf" if self.r is None else str(self.r)

    def cdf(self, x):
        return G_inf(x) if self.r is None else G2r(self.r, x)

    def pdf(self, x):
        return g_inf(x) if self.r is None else g2r(self.r, x)


def g2r(r: int, x):
    """Density kernel of order 2r: sum of (-1)^s / (2^s s!) phi^(2s)."""
    _check_r(r)
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for s in range(r):
        out = out + (-1.0) ** s / (2.0**s * math.factorial(s)) * phi_deriv(2 * s, x)
    return out if out.ndim else float(out)


def _kummer_terms(r: int, x):
    # x/sqrt(2 pi) * sum_{s=1}^{r-1} Gamma(s+1/2)/(sqrt(pi) Gamma(s+1)) M(s+1/2, 3/2; -x^2/2)
    shape = x.shape
    flat = x.ravel()
    M = kummer_m_recurrence(1.5, 1.5, -0.5 * flat * flat, r - 2)
    s = np.arange(1, r)
    coef = gamma_ratio(s + 0.5, s + 1.0) / SQRT_PI
    return (INV_SQRT_2PI * flat * np.dot(coef, M)).reshape(shape)


def G2r(r: int, x):
    """Distribution kernel of order 2r, Phi(x) + P_r(x) phi(x), via Kummer's function."""
    _check_r(r)
    x = np.asarray(x, dtype=float)
    out = norm_cdf(x)
    if r > 1:
        out = out + _kummer_terms(r, x)
    return out if out.ndim else float(out)


def g_inf(x):
    """sinc(x) / pi."""
    return np.sinc(np.asarray(x, dtype=float) / np.pi) / np.pi


def G_inf(x):
    """Si(x)/pi + 1/2; not monotone and overshoots 1 near x = pi."""
    return sine_integral(x) / np.pi + 0.5


def rescaled_G(r: int, x):
    """G_{2r}(x / sqrt(2r - 2)), the form whose r -> infinity limit is G_inf."""
    if r < 2:
        raise DomainError("rescaled kernels are defined for r >= 2")
    return G2r(r, np.asarray(x, dtype=float) / math.sqrt(2 * r - 2))


def rescaled_g(r: int, x):
    if r < 2:
        raise DomainError("rescaled kernels are defined for r >= 2")
    c = math.sqrt(2 * r - 2)
    return g2r(r, np.asarray(x, dtype=float) / c) / c


def kernel_moment_2r(r: int) -> float:
    """2r-th moment of g_2r (the first non-vanishing even moment beyond zero)."""
    _check_r(r)
    return (-1.0) ** (r - 1) * odd_factorial(2 * r)


def psi1(r: int) -> float:
    """2 * integral of x G_2r(x) g_2r(x) dx."""
    from .mise import c_of_r

    return c_of_r(r).c / SQRT_PI


def effective_halfwidth(kernel: KernelSpec) -> float:
    """|u| beyond which G(u) equals 0 or 1 to about 1e-15 (finite order only)."""
    if kernel.is_infinite:
        return math.inf
    return 8.5 + 2.0 * math.sqrt(2.0 * kernel.r)
