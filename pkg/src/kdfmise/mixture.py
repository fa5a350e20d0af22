"""Finite univariate normal mixtures and the reference distributions.

The structural functionals here (``v0``, ``u_func``, ``v_func``,
``roughness_F2r``, ``abs_cf_squared``) are double sums over ordered pairs of
components and are evaluated on m x m arrays.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import optimize, special

from .errors import DomainError, PrecisionError
from .specfun import (
    norm_cdf,
    norm_pdf,
    phi_deriv,
    norm_sf,
    reg_inc_gamma,
    reg_inc_gamma_upper,
    student_t_cdf,
    student_t_sf,
)

R_CAP = 15
TAIL_SDS = 12.0


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class NormalMixture:
    """m-component normal mixture with weights, means and standard deviations."""

    weights: np.ndarray
    means: np.ndarray
    sds: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        mu = np.array(self.means, dtype=float).ravel()
        sd = np.array(self.sds, dtype=float).ravel()
        if not (w.size == mu.size == sd.size) or w.size == 0:
            raise DomainError("weights, means and sds must be nonempty and of equal length")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"weights must be positive and sum to 1 (sum={w.sum()!r})")
        if np.any(sd <= 0) or not np.all(np.isfinite(mu)):
            raise DomainError("sds must be positive and means finite")
        for arr in (w, mu, sd):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "sds", sd)

    @classmethod
    def normal(cls, mean=0.0, sd=1.0):
        return cls([1.0], [mean], [sd])

    @classmethod
    def from_dict(cls, d, name=""):
        return cls(d["weights"], d["means"], d["sds"], name=name)

    def to_dict(self):
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "sds": self.sds.tolist(),
        }

    @property
    def m(self) -> int:
        return self.weights.size

    @property
    def mean(self) -> float:
        return float(np.dot(self.weights, self.means))

    @property
    def sd(self) -> float:
        second = np.dot(self.weights, self.sds**2 + self.means**2)
        return math.sqrt(max(second - self.mean**2, 0.0))

    def pdf(self, x):
        return mixture_pdf(self, x)

    def cdf(self, x):
        return mixture_cdf(self, x)

    def ppf(self, p: float) -> float:
        lo, hi = self.support()
        return optimize.brentq(lambda x: self.cdf(x) - p, lo, hi, xtol=1e-14, rtol=1e-14)

    def iqr(self) -> float:
        return self.ppf(0.75) - self.ppf(0.25)

    def support(self):
        """Interval outside which every component has tail mass below 1e-30."""
        return (
            float(np.min(self.means - TAIL_SDS * self.sds)),
            float(np.max(self.means + TAIL_SDS * self.sds)),
        )

    def sample(self, n: int, seed=None) -> np.ndarray:
        return sample(self, n, seed)

    def affine(self, a: float, b: float) -> "NormalMixture":
        """Distribution of a*X + b."""
        return NormalMixture(self.weights, a * self.means + b, abs(a) * self.sds)


def mixture_pdf(nm: NormalMixture, x):
    x = np.asarray(x, dtype=float)
    z = (x[..., None] - nm.means) / nm.sds
    out = np.sum(nm.weights * norm_pdf(z) / nm.sds, axis=-1)
    return out if out.ndim else float(out)


def mixture_cdf(nm: NormalMixture, x):
    x = np.asarray(x, dtype=float)
    z = (x[..., None] - nm.means) / nm.sds
    out = np.sum(nm.weights * norm_cdf(z), axis=-1)
    return out if out.ndim else float(out)


def sample(nm: NormalMixture, n: int, seed=None) -> np.ndarray:
    """Draw n points: component by inverse cdf on a uniform, then a normal deviate."""
    rng = as_generator(seed)
    if n <= 0:
        return np.empty(0)
    u = rng.random(n)
    comp = np.searchsorted(np.cumsum(nm.weights), u, side="right")
    comp = np.minimum(comp, nm.m - 1)
    z = rng.standard_normal(n)
    return nm.means[comp] + nm.sds[comp] * z


def _pair_arrays(nm: NormalMixture):
    ww = np.outer(nm.weights, nm.weights)
    delta = nm.means[None, :] - nm.means[:, None]
    s2 = nm.sds[:, None] ** 2 + nm.sds[None, :] ** 2
    return ww, delta, s2


def u_func(nm: NormalMixture, h: float, q: int) -> float:
    """Double sum of sigma*phi(d/sigma) + d*Phi(d/sigma) with sigma^2 = s_i^2 + s_j^2 + q h^2."""
    ww, delta, s2 = _pair_arrays(nm)
    sig = np.sqrt(s2 + q * h * h)
    z = delta / sig
    return float(np.sum(ww * (sig * norm_pdf(z) + delta * norm_cdf(z))))


def v0(nm: NormalMixture) -> float:
    """Integral of F(1 - F); n times the MISE of the EDF."""
    return u_func(nm, 0.0, 0)


def v_func(nm: NormalMixture, h: float, p: int, q: int) -> float:
    """h^{2p} sum_ij w_i w_j sigma^{1-2p} phi^{(2p-2)}(d/sigma), sigma^2 = s_i^2 + s_j^2 + q h^2."""
    if p < 0:
        raise DomainError("p must be nonnegative")
    if p == 0:
        # sigma * phi^(-2)(d/sigma) = sigma phi(z) + d Phi(z)
        return u_func(nm, h, q)
    if h == 0.0:
        return 0.0
    ww, delta, s2 = _pair_arrays(nm)
    sig = np.sqrt(s2 + q * h * h)
    terms = ww * sig ** (1 - 2 * p) * phi_deriv(2 * p - 2, delta / sig)
    return float(h ** (2 * p) * np.sum(terms))


def abs_cf_squared(nm: NormalMixture, t):
    """|characteristic function|^2 of the mixture at t."""
    t = np.asarray(t, dtype=float)
    ww, delta, s2 = _pair_arrays(nm)
    tt = t[..., None, None]
    out = np.sum(ww * np.cos(delta * tt) * np.exp(-0.5 * s2 * tt * tt), axis=(-2, -1))
    return out if out.ndim else float(out)


def one_minus_abs_cf_squared(nm: NormalMixture, t):
    """1 - |cf|^2 without cancellation for small t."""
    t = np.asarray(t, dtype=float)
    ww, delta, s2 = _pair_arrays(nm)
    tt = t[..., None, None]
    b = 0.5 * s2 * tt * tt
    half = np.sin(0.5 * delta * tt)
    out = np.sum(ww * (-np.expm1(-b) + np.exp(-b) * 2.0 * half * half), axis=(-2, -1))
    return out if out.ndim else float(out)


def roughness_F2r(nm: NormalMixture, r: int) -> float:
    """Integral of the squared 2r-th derivative of F."""
    if r < 1:
        raise DomainError("r must be a positive integer")
    if r > R_CAP:
        raise PrecisionError(f"r={r} exceeds the double-precision cap {R_CAP}")
    ww, delta, s2 = _pair_arrays(nm)
    sig = np.sqrt(s2)
    val = -np.sum(ww * sig ** (1 - 4 * r) * phi_deriv(4 * r - 2, delta / sig))
    if not np.isfinite(val) or val <= 0:
        raise PrecisionError(f"roughness for r={r} lost all precision")
    return float(val)


# ---------------------------------------------------------------------------
# Marron & Wand (1992, Ann. Statist. 20, Table 1) test mixtures.


def _mw(parts, name):
    w, mu, sd = zip(*[(float(Fraction(a)), float(b), float(c)) for a, b, c in parts])
    w = np.asarray(w)
    return NormalMixture(w / w.sum(), mu, sd, name=name)


def _mw_table():
    F = Fraction
    t = {}
    t[1] = ("Gaussian", [(1, 0.0, 1.0)])
    t[2] = ("Skewed unimodal", [(F(1, 5), 0.0, 1.0), (F(1, 5), 0.5, 2 / 3), (F(3, 5), 13 / 12, 5 / 9)])
    t[3] = ("Strongly skewed", [(F(1, 8), 3 * ((2 / 3) ** l - 1), (2 / 3) ** l) for l in range(8)])
    t[4] = ("Kurtotic unimodal", [(F(2, 3), 0.0, 1.0), (F(1, 3), 0.0, 0.1)])
    t[5] = ("Outlier", [(F(1, 10), 0.0, 1.0), (F(9, 10), 0.0, 0.1)])
    t[6] = ("Bimodal", [(F(1, 2), -1.0, 2 / 3), (F(1, 2), 1.0, 2 / 3)])
    t[7] = ("Separated bimodal", [(F(1, 2), -1.5, 0.5), (F(1, 2), 1.5, 0.5)])
    t[8] = ("Skewed bimodal", [(F(3, 4), 0.0, 1.0), (F(1, 4), 1.5, 1 / 3)])
    t[9] = ("Trimodal", [(F(9, 20), -1.2, 0.6), (F(9, 20), 1.2, 0.6), (F(1, 10), 0.0, 0.25)])
    t[10] = ("Claw", [(F(1, 2), 0.0, 1.0)] + [(F(1, 10), l / 2 - 1, 0.1) for l in range(5)])
    t[11] = (
        "Double claw",
        [(F(49, 100), -1.0, 2 / 3), (F(49, 100), 1.0, 2 / 3)]
        + [(F(1, 350), (l - 3) / 2, 0.01) for l in range(7)],
    )
    t[12] = (
        "Asymmetric claw",
        [(F(1, 2), 0.0, 1.0)]
        + [(F(2, 31) * F(1, 2) ** l, l + 0.5, 2.0 ** (-l) / 10) for l in range(-2, 3)],
    )
    t[13] = (
        "Asymmetric double claw",
        [(F(46, 100), 2 * l - 1.0, 2 / 3) for l in range(2)]
        + [(F(1, 300), -l / 2, 0.01) for l in range(1, 4)]
        + [(F(7, 300), l / 2, 0.07) for l in range(1, 4)],
    )
    t[14] = (
        "Smooth comb",
        [(F(2 ** (5 - l), 63), (65 - 96 * 0.5**l) / 21, (32 / 63) / 2**l) for l in range(6)],
    )
    t[15] = (
        "Discrete comb",
        [(F(2, 7), (12 * l - 15) / 7, 2 / 7) for l in range(3)]
        + [(F(1, 21), 2 * l / 7, 1 / 21) for l in range(8, 11)],
    )
    return t


MW_TABLE = _mw_table()


@dataclass(frozen=True)
class ReferenceDistribution:
    """A catalogued truth: a normal mixture, Gamma(shape, scale) or Student t."""

    kind: str
    mixture: NormalMixture | None = None
    shape: float = 0.0
    scale: float = 1.0
    dof: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("normal_mixture", "gamma", "student_t"):
            raise DomainError(f"unknown distribution kind {self.kind!r}")
        if self.kind == "normal_mixture" and self.mixture is None:
            raise DomainError("normal_mixture kind needs a mixture")
        if self.kind == "gamma" and (self.shape <= 0 or self.scale <= 0):
            raise DomainError("gamma shape and scale must be positive")
        if self.kind == "student_t" and self.dof <= 0:
            raise DomainError("degrees of freedom must be positive")

    @property
    def true_m(self):
        return self.mixture.m if self.kind == "normal_mixture" else None

    def cdf(self, x):
        return reference_cdf(self, x)

    def sample(self, n: int, seed=None) -> np.ndarray:
        rng = as_generator(seed)
        if self.kind == "normal_mixture":
            return sample(self.mixture, n, rng)
        if self.kind == "gamma":
            return rng.gamma(self.shape, self.scale, size=n)
        return rng.standard_t(self.dof, size=n)

    def bounds(self):
        """Finite interval carrying all but a negligible part of the ISE integrand."""
        if self.kind == "normal_mixture":
            return self.mixture.support()
        if self.kind == "gamma":
            # upper tail of Gamma(k, s) below 1e-16 well before this point
            return 0.0, self.scale * (self.shape + 40.0 + 10.0 * math.sqrt(self.shape))
        # F(x) ~ c |x|^{-dof}; squared tail beyond this is below 1e-12
        return -1e3, 1e3


def reference_cdf(d: ReferenceDistribution, x):
    x = np.asarray(x, dtype=float)
    if d.kind == "normal_mixture":
        return mixture_cdf(d.mixture, x)
    if d.kind == "gamma":
        out = np.where(x > 0, reg_inc_gamma(d.shape, np.maximum(x, 0.0) / d.scale), 0.0)
        return out if out.ndim else float(out)
    return student_t_cdf(x, d.dof)


def reference_sf(d: ReferenceDistribution, x):
    """1 - F(x), computed without cancellation in the upper tail."""
    x = np.asarray(x, dtype=float)
    if d.kind == "normal_mixture":
        nm = d.mixture
        z = (x[..., None] - nm.means) / nm.sds
        out = np.sum(nm.weights * norm_sf(z), axis=-1)
    elif d.kind == "gamma":
        out = np.where(x > 0, reg_inc_gamma_upper(d.shape, np.maximum(x, 0.0) / d.scale), 1.0)
    else:
        out = student_t_sf(x, d.dof)
    return out if np.ndim(out) else float(out)


def reference_cf(d: ReferenceDistribution, t):
    """Characteristic function E exp(itX) (complex)."""
    t = np.asarray(t, dtype=float)
    if d.kind == "normal_mixture":
        nm = d.mixture
        tt = t[..., None]
        return np.sum(nm.weights * np.exp(1j * nm.means * tt - 0.5 * (nm.sds * tt) ** 2), axis=-1)
    if d.kind == "gamma":
        return (1.0 - 1j * d.scale * t) ** (-d.shape)
    # Student t: K_{v/2}(sqrt(v)|t|) (sqrt(v)|t|)^{v/2} / (Gamma(v/2) 2^{v/2-1})
    nu = d.dof
    s = np.sqrt(nu) * np.abs(t)
    with np.errstate(invalid="ignore", over="ignore"):
        val = special.kv(0.5 * nu, s) * s ** (0.5 * nu) / (special.gamma(0.5 * nu) * 2.0 ** (0.5 * nu - 1.0))
    return np.where(s == 0.0, 1.0, np.nan_to_num(val, nan=0.0)).astype(complex)


def catalog_ids():
    return [f"mw{k}" for k in range(1, 16)] + ["gamma21", "t3", "t4"]


def catalog(ident: str) -> ReferenceDistribution:
    key = str(ident).strip().lower()
    if key.startswith("mw") and key[2:].isdigit() and 1 <= int(key[2:]) <= 15:
        k = int(key[2:])
        name, parts = MW_TABLE[k]
        return ReferenceDistribution("normal_mixture", mixture=_mw(parts, name), name=key)
    if key == "gamma21":
        return ReferenceDistribution("gamma", shape=2.0, scale=1.0, name=key)
    if key in ("t3", "t4"):
        return ReferenceDistribution("student_t", dof=float(key[1]), name=key)
    raise DomainError(f"unknown catalog id {ident!r}")


def mw(k: int) -> NormalMixture:
    """Shortcut for the k-th Marron-Wand mixture."""
    return catalog(f"mw{k}").mixture


def load_distribution(spec) -> ReferenceDistribution:
    """Catalog id, or path to a JSON file with weights/means/sds."""
    try:
        return catalog(spec)
    except DomainError:
        pass
    path = Path(spec)
    if not path.exists():
        raise DomainError(f"{spec!r} is neither a catalog id nor a mixture file")
    nm = NormalMixture.from_dict(json.loads(path.read_text()), name=path.stem)
    return ReferenceDistribution("normal_mixture", mixture=nm, name=path.stem)
