"""Exact and asymptotic MISE of kernel distribution function estimators.

Finite-order kernels have two evaluation routes. ``exact_mise`` uses the
diagonal-summed Kummer form (A1, A2 below); ``exact_isb``/``exact_iv`` keep
the original double sums over (s, t) built from Hermite-based derivatives of
phi. They are independent enough to check one another.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import DomainError, PrecisionError
from .kernels import KernelSpec, R_CAP, kernel_moment_2r
from .mixture import (
    NormalMixture,
    _pair_arrays,
    abs_cf_squared,
    one_minus_abs_cf_squared,
    roughness_F2r,
    v0,
    v_func,
)
from .specfun import (
    SQRT_2PI,
    SQRT_PI,
    gamma_ratio,
    gauss_kronrod,
    kummer_m_recurrence,
    odd_factorial,
    norm_cdf,
    norm_pdf,
    reg_inc_beta_half,
)

# e^{-t^2} < 1e-300 beyond this
_EXP_CUTOFF = math.sqrt(300.0 * math.log(10.0))
_ISB_CLAMP = 1e-12


@dataclass(frozen=True)
class MiseBreakdown:
    isb: float
    iv: float
    mise: float


@dataclass(frozen=True)
class CrValue:
    r: int
    c: float


def c_of_r_double_sum(r: int) -> float:
    """-sum_{s,t<r} OF(2s+2t-2) / (2^{2s+2t} s! t!)."""
    total = 0.0
    for s in range(r):
        for t in range(r):
            total -= odd_factorial(2 * s + 2 * t - 2) / (
                4.0 ** (s + t) * math.factorial(s) * math.factorial(t)
            )
    return total


def c_of_r_beta(r: int) -> float:
    """Same constant written with the regularized incomplete beta at 1/2."""
    val = gamma_ratio(2 * r - 1.5, 2 * r - 1.0) / SQRT_PI
    for s in range(r - 1):
        val += gamma_ratio(r + s - 0.5, r + s + 1.0) / SQRT_PI * reg_inc_beta_half(r, s + 1)
    return val


@lru_cache(maxsize=None)
def c_of_r(r: int) -> CrValue:
    """sqrt(pi) * psi_1(G_2r); both closed forms must agree to 1e-10."""
    if r < 1 or r > R_CAP:
        raise DomainError(f"r must lie in 1..{R_CAP}")
    a = c_of_r_double_sum(r)
    b = c_of_r_beta(r)
    if abs(a - b) > 1e-10 * abs(b):
        raise PrecisionError(f"C({r}) forms disagree: {a!r} vs {b!r}")
    return CrValue(r, b)


def c_large_r(r: float) -> float:
    """Two-term expansion of C(r) for large r."""
    return 1.0 / math.sqrt(math.pi * (2 * r - 2)) + math.sqrt(2.0) / (math.pi * (4 * r - 3))


# ---------------------------------------------------------------------------
# Theorem-style double sums


def _coef(s: int) -> float:
    return (-1.0) ** s / (2.0**s * math.factorial(s))


def exact_isb(nm: NormalMixture, r: int, h: float) -> float:
    if h < 0:
        raise DomainError("bandwidth must be nonnegative")
    if h == 0.0:
        return 0.0
    v2 = [v_func(nm, h, p, 2) for p in range(2 * r - 1)]
    quad = sum(_coef(s) * _coef(t) * v2[s + t] for s in range(r) for t in range(r))
    lin = sum(_coef(s) * v_func(nm, h, s, 1) for s in range(r))
    return _clamp_isb(-quad + 2.0 * lin - v_func(nm, h, 0, 0), nm)


def exact_iv(nm: NormalMixture, r: int, h: float, n: int) -> float:
    if n < 1:
        raise DomainError("n must be at least 1")
    if h < 0:
        raise DomainError("bandwidth must be nonnegative")
    if h == 0.0:
        return v0(nm) / n
    v2 = [v_func(nm, h, p, 2) for p in range(2 * r - 1)]
    quad = sum(_coef(s) * _coef(t) * v2[s + t] for s in range(r) for t in range(r))
    return (quad - h * c_of_r(r).c / SQRT_PI) / n


def exact_mise_theorem(nm: NormalMixture, r: int, h: float, n: int) -> MiseBreakdown:
    isb = exact_isb(nm, r, h)
    iv = exact_iv(nm, r, h, n)
    return MiseBreakdown(isb, iv, isb + iv)


def _clamp_isb(isb: float, nm: NormalMixture) -> float:
    if isb >= 0.0:
        return isb
    if isb > -_ISB_CLAMP * max(1.0, v0(nm)):
        return 0.0
    raise PrecisionError(f"integrated squared bias came out negative ({isb:.3e})")


# ---------------------------------------------------------------------------
# Kummer / incomplete-beta route


@lru_cache(maxsize=None)
def _r_coeffs(count: int) -> np.ndarray:
    # R_s = Gamma(s - 1/2) / (sqrt(pi) Gamma(s + 1)), s = 1..count
    s = np.arange(1, count + 1, dtype=float)
    return gamma_ratio(s - 0.5, s + 1.0) / SQRT_PI


@lru_cache(maxsize=None)
def _omega(r: int) -> np.ndarray:
    # omega_{r,s} = 1 - 1{s >= r} 2 I_{1/2}(r, s - r + 1), s = 1..2r-2
    return np.array([
        1.0 - (2.0 * reg_inc_beta_half(r, s - r + 1) if s >= r else 0.0)
        for s in range(1, 2 * r - 1)
    ])


def _upper_pairs(nm: NormalMixture):
    # symmetric pair sums over i <= j, off-diagonal weights doubled
    ww, delta, s2 = _pair_arrays(nm)
    iu = np.triu_indices(nm.m)
    w = ww[iu] * np.where(iu[0] == iu[1], 1.0, 2.0)
    return w, delta[iu], s2[iu]


def _norm_term(w, d, sig):
    z = d / sig
    return np.sum(w * (sig * norm_pdf(z) + d * (norm_cdf(z) - 0.5)), axis=-1)


class MiseCurve:
    """Exact MISE of an order-2r kernel as a function of h (vectorised).

    Pair quantities, V0 and the coefficient chains are computed once, so
    repeated evaluation inside an optimizer is cheap.
    """

    def __init__(self, nm: NormalMixture, r: int, n: int):
        if n < 1:
            raise DomainError("n must be at least 1")
        KernelSpec(r)
        self.nm, self.r, self.n = nm, r, n
        self.w, self.d, self.s2 = _upper_pairs(nm)
        self.v0 = v0(nm)
        self.c = c_of_r(r).c
        rc = _r_coeffs(max(2 * r - 2, 1))
        self._c1 = rc[: r - 1]
        self._c2 = rc[: 2 * r - 2] * _omega(r)

    def _pair_sum(self, sig2, ratio, coefs):
        steps = coefs.size
        if steps == 0:
            return 0.0
        z = -0.5 * self.d * self.d / sig2
        M = kummer_m_recurrence(0.5, 0.5, z.ravel(), steps - 1).reshape((steps,) + z.shape)
        inner = np.zeros(z.shape)
        power = np.ones(z.shape)
        for k in range(steps):
            power = power * ratio
            inner += coefs[k] * power * M[k]
        return np.sum(self.w * np.sqrt(sig2) * inner, axis=-1)

    def kummer_terms(self, h):
        """A1 and A2 at each h (arrays)."""
        h2 = np.asarray(h, dtype=float)[..., None] ** 2
        sig1 = self.s2 + h2
        sig2 = self.s2 + 2.0 * h2
        # the d*Phi part of U is antisymmetric in (i, j); only d*(Phi - 1/2) survives
        a1 = -2.0 * SQRT_2PI * _norm_term(self.w, self.d, np.sqrt(sig1))
        a1 = a1 + self._pair_sum(sig1, h2 / sig1, self._c1)
        a2 = -2.0 * SQRT_2PI * _norm_term(self.w, self.d, np.sqrt(sig2))
        a2 = a2 + self._pair_sum(sig2, 2.0 * h2 / sig2, self._c2)
        return a1, a2

    def components(self, h):
        """(isb, iv) arrays; h = 0 gives the EDF values."""
        h = np.asarray(h, dtype=float)
        if np.any(h < 0) or not np.all(np.isfinite(h)):
            raise DomainError("bandwidth must be finite and nonnegative")
        a1, a2 = self.kummer_terms(h)
        isb = a2 / (2.0 * SQRT_2PI) - a1 / SQRT_2PI - self.v0
        iv = (-a2 / (2.0 * SQRT_2PI) - h * self.c / SQRT_PI) / self.n
        isb = np.where(h == 0.0, 0.0, isb)
        iv = np.where(h == 0.0, self.v0 / self.n, iv)
        tol = _ISB_CLAMP * max(1.0, self.v0)
        if np.any(isb < -tol):
            raise PrecisionError(f"integrated squared bias came out negative ({isb.min():.3e})")
        return np.maximum(isb, 0.0), iv

    def __call__(self, h):
        isb, iv = self.components(h)
        out = isb + iv
        return out if out.ndim else float(out)

    def breakdown(self, h: float) -> MiseBreakdown:
        isb, iv = self.components(float(h))
        return MiseBreakdown(float(isb), float(iv), float(isb + iv))


def kummer_terms(nm: NormalMixture, r: int, h: float):
    """The A1 and A2 sums."""
    a1, a2 = MiseCurve(nm, r, 1).kummer_terms(h)
    return float(a1), float(a2)


def _finite_mise(nm, r, h, n) -> MiseBreakdown:
    return MiseCurve(nm, r, n).breakdown(h)


# ---------------------------------------------------------------------------
# sinc kernel


def j_equal_means(h: float, sigma: float) -> float:
    """sigma * integral_{sigma/h}^inf t^{-2} e^{-t^2} dt."""
    a = sigma / h
    return math.exp(-a * a) * (h - sigma * SQRT_PI * special.erfcx(a))


def j_integral(h: float, mu: float, sigma: float) -> float:
    """sigma * integral_{sigma/h}^inf cos(mu t / sigma) t^{-2} e^{-t^2} dt."""
    if mu == 0.0:
        return j_equal_means(h, sigma)
    lo = sigma / h
    if lo >= _EXP_CUTOFF:
        return 0.0
    res = gauss_kronrod(
        lambda t: np.cos(mu * t / sigma) * np.exp(-t * t) / (t * t),
        lo, _EXP_CUTOFF, rel_tol=1e-10, abs_tol=1e-300,
    )
    return sigma * res.value


def sinc_tail_sum(nm: NormalMixture, h: float) -> float:
    """sum_ij w_i w_j J(h; mu_i - mu_j, sigma_bar_ij) = integral_{1/h}^inf |cf|^2 / t^2 dt."""
    ww, delta, s2 = _pair_arrays(nm)
    sbar = np.sqrt(0.5 * s2)
    same = delta == 0.0
    total = 0.0
    for i, j in zip(*np.nonzero(same)):
        total += ww[i, j] * j_equal_means(h, sbar[i, j])
    if np.all(same):
        return total
    # the unequal-mean pairs share one integral in the unscaled frequency variable
    w_d, d_d, s_d = ww[~same], delta[~same], sbar[~same]
    lo = 1.0 / h
    hi = _EXP_CUTOFF / float(s_d.min())
    if lo < hi:

        def integrand(t):
            tt = np.asarray(t)[..., None]
            val = w_d * np.cos(d_d * tt) * np.exp(-(s_d * tt) ** 2)
            return val.sum(axis=-1) / (tt[..., 0] ** 2)

        total += gauss_kronrod(integrand, lo, hi, rel_tol=1e-11, abs_tol=1e-300).value
    return total


def _sinc_mise(nm, h, n) -> MiseBreakdown:
    base = v0(nm)
    if h == 0.0:
        return MiseBreakdown(0.0, base / n, base / n)
    tail = float(sinc_tail_sum(nm, h)) / math.pi
    isb = max(tail, 0.0)
    iv = base / n - h / (n * math.pi) + tail / n
    return MiseBreakdown(isb, iv, isb + iv)


def exact_mise(nm: NormalMixture, kernel, h: float, n: int) -> MiseBreakdown:
    """Exact MISE of the kernel cdf estimator for a normal mixture truth."""
    kernel = KernelSpec.parse(kernel) if not isinstance(kernel, KernelSpec) else kernel
    if n < 1:
        raise DomainError("n must be at least 1")
    if not h >= 0.0:
        raise DomainError("bandwidth must be nonnegative")
    if kernel.is_infinite:
        return _sinc_mise(nm, float(h), n)
    return _finite_mise(nm, kernel.r, float(h), n)


# ---------------------------------------------------------------------------
# asymptotics and the infeasible bound


def asymptotic_mise(nm: NormalMixture, r: int, h: float, n: int) -> float:
    bias_coef = (kernel_moment_2r(r) / math.factorial(2 * r)) ** 2
    return (
        v0(nm) / n
        - h / n * c_of_r(r).c / SQRT_PI
        + bias_coef * roughness_F2r(nm, r) * h ** (4 * r)
    )


def asymptotic_opt_bandwidth(nm: NormalMixture, r: int, n: int) -> float:
    num = c_of_r(r).c * 4.0**r * math.factorial(r) ** 2
    den = 4.0 * r * SQRT_PI * roughness_F2r(nm, r)
    return (num / den / n) ** (1.0 / (4 * r - 1))


def _variance(nm: NormalMixture) -> float:
    return nm.sd**2


def mise_star(nm: NormalMixture, n: int, rel_tol: float = 1e-10) -> float:
    """Infeasible minimum MISE over all kernels (characteristic-function integral)."""
    if n < 1:
        raise DomainError("n must be at least 1")
    limit0 = _variance(nm) / n
    ww, delta, s2 = _pair_arrays(nm)
    hi = _EXP_CUTOFF * math.sqrt(2.0 / float(s2.min()))

    def integrand(t):
        t = np.asarray(t, dtype=float)
        safe = np.maximum(t, 1e-6)
        c2 = abs_cf_squared(nm, safe)
        one_minus = one_minus_abs_cf_squared(nm, safe)
        val = c2 * one_minus / (safe * safe * (1.0 + (n - 1) * c2))
        return np.where(t < 1e-6, limit0, val)

    # split at the scale where (n-1)|cf|^2 ~ 1 so the adaptive rule sees the knee
    pieces = np.unique(np.clip([0.0, 1.0 / nm.sd, 3.0 / nm.sd, hi], 0.0, hi))
    total = 0.0
    for a, b in zip(pieces[:-1], pieces[1:]):
        if b > a:
            total += gauss_kronrod(integrand, a, b, rel_tol=rel_tol, abs_tol=1e-300).value
    return total / math.pi


def relative_mise(value: float, nm: NormalMixture, n: int) -> float:
    """Percentage change relative to the MISE of the EDF."""
    return 100.0 * (value / (v0(nm) / n) - 1.0)
