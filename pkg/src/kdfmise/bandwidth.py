"""Bandwidth and kernel-order selectors."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize

from .errors import DomainError
from .kernels import R_CAP, KernelSpec
from .mise import MiseCurve, _EXP_CUTOFF, exact_mise, asymptotic_opt_bandwidth
from .mixture import NormalMixture, _pair_arrays, abs_cf_squared, v0
from .specfun import norm_cdf, norm_pdf, norm_ppf

METHODS = ("exact_oracle", "plugin_aic", "plugin_bic", "plugin_true_m", "cv", "nrr", "asymptotic")
START_FACTORS = (0.1, 0.5, 1.0, 2.0)
H_REL_TOL = 1e-8
TIE_REL = 1e-12
# below this multiple of the scale the optimum is taken to be the EDF
_H_FLOOR = 1e-6
_H_CEIL = 1e3


@dataclass(frozen=True)
class BandwidthChoice:
    h: float
    kernel: KernelSpec
    predicted_mise: float | None
    method: str
    m_hat: int | None = None

    def __post_init__(self):
        if not self.h >= 0.0:
            raise DomainError("bandwidth must be nonnegative")
        if self.method not in METHODS:
            raise DomainError(f"unknown method {self.method!r}")

    @property
    def r(self):
        return self.kernel.r

    def to_dict(self):
        return {
            "h": self.h,
            "r": self.kernel.label,
            "predicted_mise": self.predicted_mise,
            "method": self.method,
            "m_hat": self.m_hat,
        }


def default_r_max(n: int) -> int:
    """8, 9, 10, 13 at n = 50, 100, 200, 400; log-linear in n elsewhere, clamped to [8, 15]."""
    knots = np.log([50.0, 100.0, 200.0, 400.0])
    vals = [8.0, 9.0, 10.0, 13.0]
    ln = math.log(max(n, 1))
    if ln <= knots[-1]:
        r = np.interp(ln, knots, vals)
    else:
        slope = (vals[-1] - vals[-2]) / (knots[-1] - knots[-2])
        r = vals[-1] + slope * (ln - knots[-1])
    return int(min(max(round(float(r)), 8), R_CAP))


# ---------------------------------------------------------------------------
# one-dimensional search in log h


def _local_min(f, u0: float, step: float = 0.5, lo: float = -np.inf):
    """Bracket a minimum of f(u) downhill from u0, then refine; returns (u, f(u)).

    u = -inf (the EDF) is returned when f keeps decreasing below ``lo``.
    """
    fu0 = f(u0)
    a, fa = u0 - step, f(u0 - step)
    b, fb = u0 + step, f(u0 + step)
    if fa >= fu0 and fb >= fu0:
        left, mid, right = a, u0, b
    else:
        direction = -1.0 if fa < fb else 1.0
        prev, fprev = u0, fu0
        cur, fcur = (a, fa) if direction < 0 else (b, fb)
        while True:
            nxt = cur + direction * step
            if direction < 0 and nxt < lo:
                return -np.inf, fcur
            fnxt = f(nxt)
            if fnxt >= fcur:
                left, right = min(prev, nxt), max(prev, nxt)
                mid = cur
                break
            prev, fprev, cur, fcur = cur, fcur, nxt, fnxt
            step *= 1.6
    res = optimize.minimize_scalar(
        f, bounds=(left, right), method="bounded",
        options={"xatol": H_REL_TOL * 0.1, "maxiter": 500},
    )
    if res.fun <= f(mid):
        return float(res.x), float(res.fun)
    return mid, f(mid)


def _finite_search(curve: MiseCurve, scale: float, starts):
    lo = math.log(_H_FLOOR * scale)

    def f(u):
        if u > math.log(_H_CEIL * scale):
            return math.inf
        return curve(math.exp(u))

    best_h, best_val = 0.0, curve.v0 / curve.n
    for h0 in starts:
        u, val = _local_min(f, math.log(h0), lo=lo)
        if val < best_val * (1.0 - TIE_REL) and np.isfinite(u):
            best_h, best_val = math.exp(u), val
    return best_h, best_val


def sinc_stationary_points(nm: NormalMixture, n: int) -> np.ndarray:
    """Bandwidths where |cf(1/h)|^2 = 1/(n+1), i.e. zeros of the sinc-MISE derivative."""
    target = 1.0 / (n + 1.0)
    ww, _, s2 = _pair_arrays(nm)
    # beyond t_env the envelope of |cf|^2 is already below the target
    t_env = math.sqrt(2.0 * math.log(np.abs(ww).sum() * (n + 1.0)) / float(s2.min()))
    t_env = min(t_env, _EXP_CUTOFF * math.sqrt(2.0 / float(s2.min())))
    grid = np.linspace(0.0, t_env * 1.01, 4001)[1:]
    g = abs_cf_squared(nm, grid) - target
    roots = []
    for k in np.nonzero(np.sign(g[:-1]) != np.sign(g[1:]))[0]:
        t = optimize.brentq(
            lambda t: abs_cf_squared(nm, t) - target, grid[k], grid[k + 1],
            xtol=1e-300, rtol=4.0 * np.finfo(float).eps, maxiter=200,
        )
        roots.append(1.0 / t)
    return np.array(sorted(roots))


def _sinc_search(nm: NormalMixture, n: int):
    best_h, best_val = 0.0, v0(nm) / n
    for h in sinc_stationary_points(nm, n):
        val = exact_mise(nm, KernelSpec.infinite(), float(h), n).mise
        if val < best_val * (1.0 - TIE_REL):
            best_h, best_val = float(h), val
    return best_h, best_val


def minimize_h(nm: NormalMixture, kernel, n: int, starts=None) -> BandwidthChoice:
    """Global minimizer over h >= 0 of the exact MISE for a fixed kernel."""
    kernel = KernelSpec.parse(kernel)
    if n < 1:
        raise DomainError("n must be at least 1")
    if kernel.is_infinite:
        h, val = _sinc_search(nm, n)
    else:
        scale = nm.sd
        starts = [c * scale for c in START_FACTORS] if starts is None else starts
        h, val = _finite_search(MiseCurve(nm, kernel.r, n), scale, starts)
    return BandwidthChoice(h, kernel, val, "exact_oracle")


def profile_over_r(nm: NormalMixture, n: int, r_max: int, include_inf: bool = True,
                   strategy: str = "both") -> dict:
    """Per-kernel optima; r > 1 warm-starts from the previous r's optimum.

    strategy: "warm" (warm start only), "fresh" (multistart only) or "both".
    """
    if not 1 <= r_max <= R_CAP:
        raise DomainError(f"r_max must lie in 1..{R_CAP}")
    if strategy not in ("warm", "fresh", "both"):
        raise DomainError(f"unknown strategy {strategy!r}")
    scale = nm.sd
    fresh = [c * scale for c in START_FACTORS]
    out = {}
    prev_h = None
    for r in range(1, r_max + 1):
        curve = MiseCurve(nm, r, n)
        if r == 1 or strategy == "fresh":
            starts = fresh
        elif strategy == "warm":
            starts = [prev_h] if prev_h else fresh
        else:
            starts = ([prev_h] if prev_h else []) + fresh
        h, val = _finite_search(curve, scale, starts)
        out[r] = BandwidthChoice(h, KernelSpec(r), val, "exact_oracle")
        prev_h = h
    if include_inf:
        h, val = _sinc_search(nm, n)
        out[None] = BandwidthChoice(h, KernelSpec.infinite(), val, "exact_oracle")
    return out


def best_of(profile: dict) -> BandwidthChoice:
    """Smallest MISE; near-ties go to the smallest r, sinc last."""
    keys = sorted(profile, key=lambda r: math.inf if r is None else r)
    best = profile[keys[0]]
    for r in keys[1:]:
        cand = profile[r]
        if cand.predicted_mise < best.predicted_mise * (1.0 - TIE_REL):
            best = cand
    return best


def minimize_h_r(nm: NormalMixture, n: int, r_max: int | None = None,
                 include_inf: bool = True, strategy: str = "both") -> BandwidthChoice:
    """Joint minimizer over h >= 0 and r in 1..r_max (and the sinc kernel if flagged)."""
    if n < 1:
        raise DomainError("n must be at least 1")
    r_max = default_r_max(n) if r_max is None else r_max
    return best_of(profile_over_r(nm, n, r_max, include_inf, strategy))


def asymptotic_bandwidth(nm: NormalMixture, r: int, n: int) -> BandwidthChoice:
    return BandwidthChoice(asymptotic_opt_bandwidth(nm, r, n), KernelSpec(r), None, "asymptotic")


# ---------------------------------------------------------------------------
# normal reference rule


@lru_cache(maxsize=None)
def standard_normal_h(r, n: int) -> float:
    """h1*(r, n): exact-MISE optimal bandwidth for N(0, 1)."""
    return minimize_h(NormalMixture.normal(), KernelSpec(r), n).h


def nrr_bandwidth(sigma_f: float, iqr_f: float, n: int, kernel=1) -> BandwidthChoice:
    """min(sigma, IQR / (2 Phi^{-1}(3/4))) times the standard-normal optimum."""
    kernel = KernelSpec.parse(kernel)
    if not (sigma_f > 0 and iqr_f > 0):
        raise DomainError("scale inputs must be positive")
    zeta = iqr_f / (2.0 * norm_ppf(0.75))
    s = min(sigma_f, zeta)
    if kernel.is_infinite:
        h = s / math.sqrt(math.log(n + 1.0))
    else:
        h = s * standard_normal_h(kernel.r, n)
    return BandwidthChoice(h, kernel, None, "nrr")


def nrr_from_sample(sample, kernel=1) -> BandwidthChoice:
    x = np.asarray(sample, dtype=float)
    q75, q25 = np.percentile(x, [75, 25])
    return nrr_bandwidth(float(np.std(x, ddof=1)), float(q75 - q25), x.size, kernel)


# ---------------------------------------------------------------------------
# cross-validation (second-order kernel)

CV_GRID_POINTS = 40
CV_GRID_RANGE = (0.05, 3.0)
CV_SIMPSON_INTERVALS = 2048
CV_PAD = 4.0


def _int_cdf(z):
    # antiderivative of Phi
    return z * norm_cdf(z) + norm_pdf(z)


def cv_criterion(sample, h: float) -> float:
    """Leave-one-out estimate of the MISE at sample size n-1, up to a constant.

    n^{-1} sum_i int (1{X_i <= x} - F_{-i}(x))^2 dx over [min X - 4h, max X + 4h].
    """
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n < 2:
        raise DomainError("cross-validation needs at least two observations")
    if not h > 0:
        raise DomainError("cross-validation bandwidth must be positive")
    # the criterion is translation invariant; anchoring at the minimum keeps it so numerically
    x = x - x[0]
    lo, hi = x[0] - CV_PAD * h, x[-1] + CV_PAD * h
    grid = np.linspace(lo, hi, CV_SIMPSON_INTERVALS + 1)
    G = norm_cdf((grid[:, None] - x[None, :]) / h)
    S = G.sum(axis=1)
    smooth = ((n - 2) * S * S + (G * G).sum(axis=1)) / (n - 1) ** 2
    wts = np.ones(grid.size)
    wts[1:-1:2] = 4.0
    wts[2:-1:2] = 2.0
    quad = float(np.dot(wts, smooth)) * (grid[1] - grid[0]) / 3.0
    # int_{X_i}^{hi} F_{-i}: exact through the antiderivative of Phi
    upper = _int_cdf((hi - x) / h)
    pair = upper[None, :] - _int_cdf((x[:, None] - x[None, :]) / h)
    np.fill_diagonal(pair, 0.0)
    cross = h * pair.sum() / (n - 1)
    indicator = float(np.sum(hi - x))
    return (quad - 2.0 * cross + indicator) / n


def cv_bandwidth(sample, kernel=1, grid=None) -> BandwidthChoice:
    kernel = KernelSpec.parse(kernel)
    if kernel.r != 1:
        raise DomainError("cross-validation is implemented for the second-order kernel only")
    x = np.sort(np.asarray(sample, dtype=float))
    if x.size < 2:
        raise DomainError("cross-validation needs at least two observations")
    x = x - x[0]
    sd = float(np.std(x, ddof=1))
    if not sd > 0:
        raise DomainError("sample has zero spread")
    if grid is None:
        grid = sd * np.geomspace(*CV_GRID_RANGE, CV_GRID_POINTS)
    grid = np.asarray(grid, dtype=float)
    vals = np.array([cv_criterion(x, h) for h in grid])
    k = int(np.argmin(vals))
    left, right = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    h, val = grid[k], vals[k]
    if right > left:
        res = optimize.minimize_scalar(
            lambda u: cv_criterion(x, math.exp(u)),
            bounds=(math.log(left), math.log(right)), method="bounded",
            options={"xatol": 1e-7},
        )
        if res.fun < val:
            h = math.exp(res.x)
    return BandwidthChoice(float(h), kernel, None, "cv")


# ---------------------------------------------------------------------------
# normal-mixture plug-in


def plugin_select(sample, m_rule="bic", r_max: int | None = None, include_inf: bool = True,
                  restarts: int = 10, seed=None, m_max: int = 10) -> BandwidthChoice:
    """Fit a normal mixture and minimize its exact MISE over (h, r).

    m_rule is "aic", "bic" or a fixed component count.
    """
    from .emfit import em_fit, select_m

    x = np.asarray(sample, dtype=float)
    if x.size < 2:
        raise DomainError("plug-in selection needs at least two observations")
    if isinstance(m_rule, str):
        rule = m_rule.lower()
        if rule not in ("aic", "bic"):
            raise DomainError(f"unknown m rule {m_rule!r}")
        fit = select_m(x, m_max, rule, restarts, seed)
        method = "plugin_" + rule
    else:
        fit = em_fit(x, int(m_rule), restarts, seed)
        method = "plugin_true_m"
    n = x.size
    r_max = default_r_max(n) if r_max is None else r_max
    best = minimize_h_r(fit.mixture, n, r_max, include_inf)
    return BandwidthChoice(best.h, best.kernel, best.predicted_mise, method, fit.m)
