import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from kdfmise.emfit import (
    FLOOR_FACTOR,
    em_failure_reason,
    em_fit,
    em_run,
    fit_path,
    information_criteria,
    n_params,
    select_m,
)
from kdfmise.errors import DomainError, FitError
from kdfmise.mixture import NormalMixture, mw


def loglik(nm, x):
    dens = sum(w * stats.norm(mu, sd).pdf(x) for w, mu, sd in zip(nm.weights, nm.means, nm.sds))
    return float(np.sum(np.log(dens)))


def test_single_component_is_the_mle():
    x = mw(2).sample(300, seed=4)
    fit = em_fit(x, 1, restarts=3, rng_stream=0)
    assert fit.mixture.means[0] == pytest.approx(x.mean(), abs=1e-10)
    assert fit.mixture.sds[0] == pytest.approx(np.std(x), abs=1e-10)
    assert fit.loglik == pytest.approx(np.sum(stats.norm(x.mean(), np.std(x)).logpdf(x)), rel=1e-12)


def test_criteria_definitions():
    x = mw(6).sample(200, seed=9)
    fit = em_fit(x, 2, restarts=5, rng_stream=1)
    assert n_params(2) == 5
    assert fit.aic == pytest.approx(-2 * fit.loglik + 10, rel=1e-15)
    assert fit.bic == pytest.approx(-2 * fit.loglik + math.log(200) * 5, rel=1e-15)
    assert information_criteria(fit.loglik, 2, 200) == (fit.aic, fit.bic)
    assert fit.loglik == pytest.approx(loglik(fit.mixture, x), rel=1e-10)


def test_bimodal_means_recovered():
    x = mw(6).sample(2000, seed=12)
    fit = em_fit(x, 2, restarts=10, rng_stream=3)
    assert np.all(np.abs(fit.mixture.means - np.array([-1.0, 1.0])) < 0.15)


@pytest.mark.parametrize("seed", range(6))
def test_em_trace_is_monotone(seed):
    rng = np.random.default_rng(seed)
    x = mw(1 + seed % 15).sample(250, seed=rng)
    sd = np.std(x)
    for m in (2, 3, 4):
        means = rng.choice(x, size=m, replace=False)
        run = em_run(x, np.full(m, 1 / m), means, np.full(m, sd), (FLOOR_FACTOR * sd) ** 2)
        steps = np.diff(run.trace)
        assert np.all(steps >= -1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 4))
def test_fit_invariants(seed, m):
    x = mw(1 + seed % 15).sample(150, seed=seed)
    try:
        fit = em_fit(x, m, restarts=3, rng_stream=seed)
    except FitError:
        return
    nm = fit.mixture
    assert abs(nm.weights.sum() - 1.0) < 1e-12
    assert np.all(nm.sds > FLOOR_FACTOR * np.std(x))
    assert np.all(np.diff(nm.means) >= 0)
    # relabelling the components leaves the likelihood unchanged
    perm = np.arange(nm.m)[::-1]
    flipped = NormalMixture(nm.weights[perm], nm.means[perm], nm.sds[perm])
    assert loglik(flipped, x) == pytest.approx(loglik(nm, x), rel=1e-12)


def test_nested_likelihoods():
    for seed in range(5):
        x = mw(8).sample(120, seed=seed)
        one = em_fit(x, 1, 5, seed)
        two = em_fit(x, 2, 5, seed)
        assert two.loglik >= one.loglik - 1e-9


def test_reproducible():
    x = mw(9).sample(200, seed=1)
    a = em_fit(x, 3, 6, rng_stream=77)
    b = em_fit(x, 3, 6, rng_stream=77)
    assert a.to_dict() == b.to_dict()
    assert select_m(x, 4, "aic", 3, 5).to_dict() == select_m(x, 4, "aic", 3, 5).to_dict()


def test_select_m_single():
    x = mw(2).sample(100, seed=2)
    assert select_m(x, 1, "bic", 3, 8).to_dict() == fit_path(x, 1, 3, 8)[0].to_dict()
    with pytest.raises(DomainError):
        select_m(x, 2, "hqic")


def test_degenerate_samples():
    with pytest.raises(FitError):
        em_fit(np.full(20, 1.5), 1)
    with pytest.raises(FitError):
        select_m(np.full(20, 1.5), 3)
    with pytest.raises(FitError):
        em_fit(np.array([0.0, 0.0, 1.0]), 3)
    with pytest.raises(DomainError):
        em_fit(np.array([1.0]), 1)


def test_path_truncates_at_first_failure():
    # two distinct values support at most two components
    x = np.array([0.0] * 10 + [1.0] * 10)
    fits = fit_path(x, 5, restarts=3, rng_stream=0)
    assert [f.m for f in fits] == list(range(1, len(fits) + 1))
    assert len(fits) <= 2


def test_failure_reasons():
    assert em_failure_reason(1) == "variance floor"
    assert em_failure_reason(-1) == "max iterations"


@pytest.mark.slow
def test_bic_consistency_and_aic_ordering():
    m_bic, m_aic = [], []
    for seed in range(30):
        x = NormalMixture.normal().sample(400, seed=1000 + seed)
        m_bic.append(select_m(x, 4, "bic", 3, seed).m)
        m_aic.append(select_m(x, 4, "aic", 3, seed).m)
    assert np.mean(np.array(m_bic) == 1) > 0.9
    assert np.mean(m_aic) >= np.mean(m_bic)
