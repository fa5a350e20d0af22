"""EM fitting of univariate normal mixtures with restarts and AIC/BIC selection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DomainError, FitError
from .mixture import NormalMixture, as_generator

MAX_ITER = 1000
REL_TOL = 1e-8
FLOOR_FACTOR = 1e-3
DEFAULT_RESTARTS = 10

# status codes from the inner loop
_OK, _FLOOR, _DEAD, _NONFINITE = 0, 1, 2, 3
_STATUS = {_OK: "ok", _FLOOR: "variance floor", _DEAD: "empty component", _NONFINITE: "non-finite likelihood"}


@dataclass(frozen=True)
class MixtureFit:
    mixture: NormalMixture
    loglik: float
    aic: float
    bic: float
    m: int
    converged: bool
    restarts_used: int

    def to_dict(self):
        return {
            "mixture": self.mixture.to_dict(),
            "loglik": self.loglik,
            "aic": self.aic,
            "bic": self.bic,
            "m": self.m,
            "converged": self.converged,
            "restarts_used": self.restarts_used,
        }


def n_params(m: int) -> int:
    return 3 * m - 1


def information_criteria(loglik: float, m: int, n: int):
    k = n_params(m)
    return -2.0 * loglik + 2.0 * k, -2.0 * loglik + math.log(n) * k


@njit(cache=True)
def _em_loop(x, w, mu, var, floor, rel_tol, max_iter, trace):
    n = x.size
    m = w.size
    logp = np.empty((n, m))
    prev = -np.inf
    ll = -np.inf
    floor_hit = False
    for it in range(max_iter):
        # E-step
        ll = 0.0
        for j in range(m):
            c = math.log(w[j]) - 0.5 * math.log(2.0 * math.pi * var[j])
            for i in range(n):
                d = x[i] - mu[j]
                logp[i, j] = c - 0.5 * d * d / var[j]
        for i in range(n):
            top = logp[i, 0]
            for j in range(1, m):
                if logp[i, j] > top:
                    top = logp[i, j]
            s = 0.0
            for j in range(m):
                logp[i, j] = math.exp(logp[i, j] - top)
                s += logp[i, j]
            for j in range(m):
                logp[i, j] /= s
            ll += top + math.log(s)
        if not math.isfinite(ll):
            return ll, it, _NONFINITE
        trace[it] = ll
        if it > 0 and abs(ll - prev) < rel_tol * abs(prev):
            if floor_hit:
                return ll, it, _FLOOR
            return ll, it, _OK
        prev = ll
        # M-step
        floor_hit = False
        for j in range(m):
            nj = 0.0
            sx = 0.0
            for i in range(n):
                nj += logp[i, j]
                sx += logp[i, j] * x[i]
            if nj < 1e-10:
                return ll, it, _DEAD
            mj = sx / nj
            sv = 0.0
            for i in range(n):
                d = x[i] - mj
                sv += logp[i, j] * d * d
            w[j] = nj / n
            mu[j] = mj
            var[j] = sv / nj
            if var[j] < floor:
                var[j] = floor
                floor_hit = True
    return ll, max_iter, -1


@dataclass(frozen=True)
class _Run:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    loglik: float
    iterations: int
    status: int
    trace: np.ndarray

    @property
    def failed(self):
        return self.status > 0

    @property
    def converged(self):
        return self.status == _OK


def em_run(x, weights, means, sds, floor: float, rel_tol=REL_TOL, max_iter=MAX_ITER) -> _Run:
    """One EM run from the given starting values; the trace holds the log-likelihood per iteration."""
    x = np.ascontiguousarray(x, dtype=float)
    w = np.array(weights, dtype=float)
    mu = np.array(means, dtype=float)
    var = np.array(sds, dtype=float) ** 2
    trace = np.full(max_iter + 1, np.nan)
    ll, it, status = _em_loop(x, w, mu, var, floor, rel_tol, max_iter, trace)
    return _Run(w, mu, var, float(ll), int(it), int(status), trace[: min(it + 1, max_iter)])


def _check_sample(sample):
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    if x.size < 2:
        raise DomainError("EM needs at least two observations")
    if not np.all(np.isfinite(x)):
        raise DomainError("sample contains non-finite values")
    return x


def em_fit(sample, m: int, restarts: int = DEFAULT_RESTARTS, rng_stream=None,
           rel_tol: float = REL_TOL, max_iter: int = MAX_ITER) -> MixtureFit:
    """Best-of-restarts EM fit with m components.

    Each restart starts from m distinct sample points as means, the sample sd
    for every component and equal weights. A restart fails when a variance is
    pinned at the floor at convergence, a component empties, or the likelihood
    stops being finite. Raises FitError when every restart fails.
    """
    if m < 1:
        raise DomainError("m must be at least 1")
    x = _check_sample(sample)
    n = x.size
    sd = float(np.std(x))
    distinct = np.unique(x)
    if not sd > 0 or distinct.size < m:
        raise FitError(f"cannot fit {m} components to a sample with {distinct.size} distinct values")
    floor = (FLOOR_FACTOR * sd) ** 2
    rng = as_generator(rng_stream)
    best = None
    ok = 0
    for _ in range(restarts):
        means = rng.choice(distinct, size=m, replace=False)
        run = em_run(x, np.full(m, 1.0 / m), means, np.full(m, sd), floor, rel_tol, max_iter)
        if run.failed:
            continue
        ok += 1
        if best is None or run.loglik > best.loglik:
            best = run
    if best is None:
        raise FitError(f"all {restarts} EM restarts failed for m={m}")
    order = np.argsort(best.means, kind="stable")
    w = best.weights[order]
    mixture = NormalMixture(w / w.sum(), best.means[order], np.sqrt(best.variances[order]))
    aic, bic = information_criteria(best.loglik, m, n)
    return MixtureFit(mixture, best.loglik, aic, bic, m, best.converged, ok)


def _child_seed(seed, m: int):
    if isinstance(seed, np.random.Generator):
        return np.random.SeedSequence(int(seed.integers(2**63)), spawn_key=(m,))
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (m,))


def fit_path(sample, m_max: int, restarts: int = DEFAULT_RESTARTS, rng_stream=None) -> list:
    """Fits for m = 1, 2, ... stopping at the first m where EM fails."""
    if m_max < 1:
        raise DomainError("m_max must be at least 1")
    if isinstance(rng_stream, np.random.Generator):
        rng_stream = np.random.SeedSequence(int(rng_stream.integers(2**63)))
    elif not isinstance(rng_stream, np.random.SeedSequence):
        rng_stream = np.random.SeedSequence(rng_stream)
    fits = []
    for m in range(1, m_max + 1):
        try:
            fits.append(em_fit(sample, m, restarts, _child_seed(rng_stream, m)))
        except FitError:
            if m == 1:
                raise
            break
    return fits


def select_m(sample, m_max: int, criterion: str = "bic", restarts: int = DEFAULT_RESTARTS,
             rng_stream=None) -> MixtureFit:
    """Criterion-minimizing fit over the (possibly truncated) path m = 1..m_max."""
    criterion = criterion.lower()
    if criterion not in ("aic", "bic"):
        raise DomainError(f"unknown criterion {criterion!r}")
    fits = fit_path(sample, m_max, restarts, rng_stream)
    return min(fits, key=lambda f: (getattr(f, criterion), f.m))


def em_failure_reason(status: int) -> str:
    return _STATUS.get(status, "max iterations")
